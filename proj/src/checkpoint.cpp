#include "masorch/checkpoint.hpp"

#include <chrono>
#include <fstream>
#include <regex>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "masorch/digest.hpp"
#include "masorch/error.hpp"
#include "masorch/text.hpp"

namespace masorch::run {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(RecordStatus s) { return s == RecordStatus::evaluated ? "evaluated" : "inferred"; }

std::string config_hash(const topology::TopologyConfig& topology, std::string_view endpoint_name,
                        eval::Protocol protocol) {
    // nlohmann::json (unordered variant) sorts object keys, so the dump is canonical.
    json canonical;
    canonical["topology"] = json::parse(topology::to_json(topology).dump());
    canonical["endpoint"] = std::string(endpoint_name);
    canonical["protocol"] = std::string(eval::to_string(protocol));
    return sha256_hex(canonical.dump());
}

ordered_json to_json(const CheckpointRecord& r) {
    ordered_json j;
    j["schema_version"] = r.schema_version;
    j["run_id"] = r.run_id;
    j["sample_id"] = r.sample_id;
    j["config_hash"] = r.config_hash;
    j["endpoint"] = r.endpoint;
    j["protocol"] = std::string(eval::to_string(r.protocol));
    j["status"] = std::string(to_string(r.status));
    j["topology"] = topology::to_json(r.topology);
    j["result"] = topology::to_json(r.result);
    j["verdict"] = r.verdict ? eval::to_json(*r.verdict) : ordered_json(nullptr);
    j["ts"] = r.ts;
    return j;
}

CheckpointRecord record_from_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("record is not a JSON object");
    CheckpointRecord r;
    try {
        r.schema_version = j.at("schema_version").get<int>();
        r.run_id = j.at("run_id").get<std::string>();
        r.sample_id = j.at("sample_id").get<std::string>();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.endpoint = j.at("endpoint").get<std::string>();
        r.protocol = eval::protocol_from_string(j.at("protocol").get<std::string>());
        const auto status = j.at("status").get<std::string>();
        if (status == "inferred") r.status = RecordStatus::inferred;
        else if (status == "evaluated") r.status = RecordStatus::evaluated;
        else throw InvalidInput("unknown record status '" + status + "'");
        r.topology = topology::config_from_json(j.at("topology"));
        r.result = topology::result_from_json(j.at("result"));
        if (const auto& v = j.at("verdict"); !v.is_null()) r.verdict = eval::verdict_from_json(v);
        r.ts = j.at("ts").get<std::string>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("checkpoint record: ") + e.what());
    }
    if (r.sample_id.empty()) throw InvalidInput("checkpoint record: empty sample_id");
    return r;
}

std::string serialize_record(const CheckpointRecord& r) {
    return to_json(r).dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)), ms);
}

namespace {

struct LineCheck {
    std::optional<CheckpointRecord> record;
    std::string_view reason;
};

LineCheck check_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error&) {
        return {std::nullopt, reason::kBadJson};
    }
    if (!j.is_object()) return {std::nullopt, reason::kBadJson};
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
        j["schema_version"].get<int>() != kCheckpointVersion)
        return {std::nullopt, reason::kVersionMismatch};
    CheckpointRecord r;
    try {
        r = record_from_json(j);
    } catch (const Error&) {
        return {std::nullopt, reason::kSchemaInvalid};
    }
    if (r.status == RecordStatus::evaluated && !r.verdict) return {std::nullopt, reason::kMissingVerdict};
    if (!r.result.conserves_usage()) return {std::nullopt, reason::kUsageMismatch};
    return {std::move(r), {}};
}

std::optional<RecordKey> recover_key(const std::string& line) {
    static const std::regex sample_re(R"re("sample_id"\s*:\s*"((?:[^"\\]|\\.)*)")re");
    static const std::regex hash_re(R"re("config_hash"\s*:\s*"([0-9a-f]{64})")re");
    std::smatch s;
    std::smatch h;
    if (!std::regex_search(line, s, sample_re) || !std::regex_search(line, h, hash_re)) return std::nullopt;
    std::string sample_id;
    try {
        sample_id = json::parse("\"" + s.str(1) + "\"").get<std::string>();
    } catch (const json::exception&) {
        return std::nullopt;
    }
    return RecordKey{sample_id, h.str(1)};
}

std::vector<std::string> read_lines(const std::filesystem::path& path, bool& exists) {
    std::ifstream in(path, std::ios::binary);
    exists = static_cast<bool>(in);
    std::vector<std::string> lines;
    if (!in) return lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (in.bad()) throw IOFailure("read error on " + path.string());
    return lines;
}

}  // namespace

std::map<RecordKey, CheckpointRecord> scan_checkpoint(const std::filesystem::path& path) {
    bool exists = false;
    std::map<RecordKey, CheckpointRecord> last;
    for (const auto& line : read_lines(path, exists)) {
        if (text::trim(line).empty()) continue;
        auto checked = check_line(line);
        if (!checked.record) continue;
        auto key = checked.record->key();
        last.insert_or_assign(std::move(key), std::move(*checked.record));
    }
    return last;
}

std::set<RecordKey> resume_scan(const std::filesystem::path& path) {
    std::set<RecordKey> done;
    for (const auto& [key, rec] : scan_checkpoint(path)) {
        if (rec.status == RecordStatus::evaluated) done.insert(key);
    }
    return done;
}

std::vector<RecordKey> CleanseReport::requeue_keys() const {
    std::vector<RecordKey> keys;
    for (const auto& q : quarantined) {
        if (q.key) keys.push_back(*q.key);
    }
    return keys;
}

std::filesystem::path quarantine_path(const std::filesystem::path& checkpoint) {
    return checkpoint.string() + ".quarantine";
}

CleanseReport auto_cleanse(const std::filesystem::path& path) {
    bool exists = false;
    const auto lines = read_lines(path, exists);
    CleanseReport report;
    if (!exists) return report;

    std::vector<const std::string*> keep;
    std::vector<std::pair<const std::string*, QuarantinedLine>> bad;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) continue;
        auto checked = check_line(lines[i]);
        if (checked.record) {
            keep.push_back(&lines[i]);
        } else {
            bad.push_back({&lines[i], {i + 1, std::string(checked.reason), recover_key(lines[i])}});
        }
    }
    report.kept = keep.size();
    if (bad.empty()) return report;

    {
        std::ofstream q(quarantine_path(path), std::ios::app | std::ios::binary);
        if (!q) throw IOFailure("cannot open " + quarantine_path(path).string());
        for (const auto& [raw, info] : bad) {
            ordered_json entry;
            entry["reason"] = info.reason;
            entry["line_no"] = info.line;
            entry["key"] = info.key ? ordered_json{{"sample_id", info.key->sample_id},
                                                   {"config_hash", info.key->config_hash}}
                                    : ordered_json(nullptr);
            entry["line"] = *raw;
            q << entry.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
        }
        q.flush();
        if (!q) throw IOFailure("write to " + quarantine_path(path).string() + " failed");
    }

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw IOFailure("cannot create " + tmp.string());
        for (const auto* l : keep) out << *l << '\n';
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IOFailure("write to " + tmp.string() + " failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IOFailure("cannot replace " + path.string() + ": " + ec.message());
    }
    report.quarantined.reserve(bad.size());
    for (auto& b : bad) report.quarantined.push_back(std::move(b.second));
    return report;
}

CheckpointWriter::CheckpointWriter(const std::filesystem::path& path) : path_(path) {
    bool needs_newline = false;
    {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        if (in && in.tellg() > 0) {
            in.seekg(-1, std::ios::end);
            needs_newline = in.get() != '\n';
        }
    }
    file_ = std::fopen(path.c_str(), "ab");
    if (file_ == nullptr) throw IOFailure("cannot open checkpoint " + path.string());
    if (needs_newline) {
        std::fputc('\n', file_);
        std::fflush(file_);
    }
}

CheckpointWriter::~CheckpointWriter() {
    if (file_ != nullptr) std::fclose(file_);
}

void CheckpointWriter::append(const CheckpointRecord& record) {
    const std::string line = serialize_record(record) + "\n";
    std::lock_guard lock(mu_);
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0)
        throw IOFailure("append to checkpoint " + path_.string() + " failed");
    ++appended_;
}

std::size_t CheckpointWriter::appended() const {
    std::lock_guard lock(mu_);
    return appended_;
}

}  // namespace masorch::run
