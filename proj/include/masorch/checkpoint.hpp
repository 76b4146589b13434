#pragma once

// Append-only JSONL campaign state: two records per (sample, config) pair,
// restart deduplication, and quarantine of damaged lines.

#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "masorch/evaluation.hpp"
#include "masorch/topology.hpp"

namespace masorch::run {

inline constexpr int kCheckpointVersion = 1;

enum class RecordStatus { inferred, evaluated };

std::string_view to_string(RecordStatus s);

/// Digest of the canonical (topology, endpoint name, protocol) triple.
std::string config_hash(const topology::TopologyConfig& topology, std::string_view endpoint_name,
                        eval::Protocol protocol);

struct RecordKey {
    std::string sample_id;
    std::string config_hash;

    auto operator<=>(const RecordKey&) const = default;
};

struct CheckpointRecord {
    int schema_version = kCheckpointVersion;
    std::string run_id;
    std::string sample_id;
    std::string config_hash;
    std::string endpoint;
    eval::Protocol protocol = eval::Protocol::RULE_MR;
    topology::TopologyConfig topology;  // the configuration as requested
    RecordStatus status = RecordStatus::inferred;
    topology::InferenceResult result;
    std::optional<eval::Verdict> verdict;
    std::string ts;

    [[nodiscard]] RecordKey key() const { return {sample_id, config_hash}; }
};

nlohmann::ordered_json to_json(const CheckpointRecord& r);
/// Throws InvalidInput on any schema problem (see auto_cleanse reasons).
CheckpointRecord record_from_json(const nlohmann::json& j);
/// One line without the trailing newline.
std::string serialize_record(const CheckpointRecord& r);

/// Current UTC time, ISO 8601 with milliseconds.
std::string utc_timestamp();

/// Every parseable, schema-valid record per key; later lines override earlier ones.
std::map<RecordKey, CheckpointRecord> scan_checkpoint(const std::filesystem::path& path);

/// Keys whose last valid record is evaluated. A missing file is empty.
std::set<RecordKey> resume_scan(const std::filesystem::path& path);

// Quarantine reasons.
namespace reason {
inline constexpr std::string_view kBadJson = "BadJson";
inline constexpr std::string_view kVersionMismatch = "VersionMismatch";
inline constexpr std::string_view kSchemaInvalid = "SchemaInvalid";
inline constexpr std::string_view kMissingVerdict = "MissingVerdict";
inline constexpr std::string_view kUsageMismatch = "UsageMismatch";
}  // namespace reason

struct QuarantinedLine {
    std::size_t line = 0;
    std::string reason;
    std::optional<RecordKey> key;  // recovered from the raw text when possible
};

struct CleanseReport {
    std::size_t kept = 0;
    std::vector<QuarantinedLine> quarantined;

    /// Recoverable keys of quarantined lines, for re-queueing.
    [[nodiscard]] std::vector<RecordKey> requeue_keys() const;
};

/// Moves every line that fails parsing or validation to "<path>.quarantine"
/// and rewrites `path` atomically with the remaining lines. Untouched when
/// every line is valid. Throws IOFailure without modifying the file.
CleanseReport auto_cleanse(const std::filesystem::path& path);

std::filesystem::path quarantine_path(const std::filesystem::path& checkpoint);

/// Single serialized appender; every record is flushed before append returns.
class CheckpointWriter {
public:
    explicit CheckpointWriter(const std::filesystem::path& path);
    ~CheckpointWriter();
    CheckpointWriter(const CheckpointWriter&) = delete;
    CheckpointWriter& operator=(const CheckpointWriter&) = delete;

    void append(const CheckpointRecord& record);
    [[nodiscard]] std::size_t appended() const;

private:
    mutable std::mutex mu_;
    std::FILE* file_ = nullptr;
    std::filesystem::path path_;
    std::size_t appended_ = 0;
};

}  // namespace masorch::run
