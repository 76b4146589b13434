#include "masorch/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "masorch/error.hpp"
#include "masorch/text.hpp"

namespace masorch::dataset {

using nlohmann::json;
using nlohmann::ordered_json;

const Option* NormalizedSample::find_option(char label) const {
    auto it = std::find_if(options.begin(), options.end(), [label](const Option& o) { return o.label == label; });
    return it == options.end() ? nullptr : &*it;
}

std::string_view to_string(MediaKind kind) {
    switch (kind) {
        case MediaKind::none: return "none";
        case MediaKind::image: return "image";
        case MediaKind::video: return "video";
    }
    return "none";
}

std::string_view to_string(AnswerType type) {
    switch (type) {
        case AnswerType::MCQ: return "MCQ";
        case AnswerType::MRQ: return "MRQ";
        case AnswerType::OpenEnded: return "OpenEnded";
    }
    return "MCQ";
}

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::T: return "T";
        case Modality::I: return "I";
        case Modality::V: return "V";
    }
    return "T";
}

MediaKind media_kind_from_string(std::string_view s) {
    if (s == "none") return MediaKind::none;
    if (s == "image") return MediaKind::image;
    if (s == "video") return MediaKind::video;
    throw InvalidInput("unknown media kind '" + std::string(s) + "'");
}

AnswerType answer_type_from_string(std::string_view s) {
    const std::string lower = text::to_lower(s);
    if (lower == "mcq") return AnswerType::MCQ;
    if (lower == "mrq") return AnswerType::MRQ;
    if (lower == "openended" || lower == "open-ended" || lower == "open_ended" || lower == "open")
        return AnswerType::OpenEnded;
    throw InvalidInput("unknown answer type '" + std::string(s) + "'");
}

std::string modality_string(const std::set<Modality>& modality) {
    std::string out;
    for (Modality m : modality) {
        if (!out.empty()) out += ",";
        out += to_string(m);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Invariants

std::vector<std::string> check_sample(const NormalizedSample& s) {
    std::vector<std::string> reasons;
    auto add = [&reasons](std::string_view r) {
        if (std::find(reasons.begin(), reasons.end(), r) == reasons.end()) reasons.emplace_back(r);
    };

    if (s.id.empty()) add(reason::kEmptyId);

    std::set<char> seen;
    bool labels_sane = true;
    for (const auto& o : s.options) {
        if (o.label < 'A' || o.label > 'E') {
            add(reason::kLabelOutOfRange);
            labels_sane = false;
        }
        if (!seen.insert(o.label).second) {
            add(reason::kDuplicateLabel);
            labels_sane = false;
        }
    }
    if (labels_sane) {
        for (std::size_t i = 0; i < s.options.size(); ++i) {
            if (s.options[i].label != static_cast<char>('A' + i)) {
                add(reason::kLabelOrder);
                break;
            }
        }
    }

    const bool gold_known = s.gold_label.has_value() && seen.count(*s.gold_label) > 0;
    switch (s.answer_type) {
        case AnswerType::MCQ:
            if (s.options.empty()) add(reason::kMissingOptions);
            if (!s.gold_label) add(reason::kMissingGold);
            else if (!gold_known) add(reason::kGoldOutOfRange);
            break;
        case AnswerType::MRQ:
            if (s.options.empty()) add(reason::kMissingOptions);
            if (s.gold_label && !gold_known) add(reason::kGoldOutOfRange);
            break;
        case AnswerType::OpenEnded:
            if (!s.options.empty()) add(reason::kUnexpectedOptions);
            if (s.gold_label) add(reason::kUnexpectedGold);
            break;
    }

    for (const auto& m : s.media) {
        const bool ok = [&m] {
            switch (m.kind) {
                case MediaKind::none: return m.uri.empty() && !m.frame_count;
                case MediaKind::image: return !m.uri.empty() && !m.frame_count;
                case MediaKind::video: return !m.uri.empty() && m.frame_count && *m.frame_count >= 1;
            }
            return false;
        }();
        if (!ok) add(reason::kMediaInvalid);
    }
    return reasons;
}

// ---------------------------------------------------------------------------
// Native JSON

ordered_json to_json(const NormalizedSample& s) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["id"] = s.id;
    j["dataset"] = s.dataset_name;
    j["question"] = s.question_text;
    j["options"] = ordered_json::array();
    for (const auto& o : s.options) {
        ordered_json oj;
        oj["label"] = std::string(1, o.label);
        oj["text"] = o.text;
        j["options"].push_back(std::move(oj));
    }
    j["gold_label"] = s.gold_label ? ordered_json(std::string(1, *s.gold_label)) : ordered_json(nullptr);
    j["gold_text"] = s.gold_text;
    j["answer_type"] = std::string(to_string(s.answer_type));
    j["media"] = ordered_json::array();
    for (const auto& m : s.media) {
        ordered_json mj;
        mj["kind"] = std::string(to_string(m.kind));
        mj["uri"] = m.uri;
        mj["frame_count"] = m.frame_count ? ordered_json(*m.frame_count) : ordered_json(nullptr);
        j["media"].push_back(std::move(mj));
    }
    j["eval_flags"] = ordered_json::array();
    for (const auto& f : s.eval_flags) j["eval_flags"].push_back(f);
    return j;
}

std::string serialize_sample(const NormalizedSample& sample) {
    return to_json(sample).dump(-1, ' ', false, json::error_handler_t::replace);
}

namespace {

[[noreturn]] void violation(std::size_t line, std::string_view reason, const std::string& detail) {
    throw SchemaViolation(line, std::string(reason), detail);
}

const json& require(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) violation(line, reason::kMissingField, key);
    return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
    const json& v = require(obj, key, line);
    if (!v.is_string()) violation(line, reason::kBadType, std::string(key) + " must be a string");
    return v.get<std::string>();
}

char single_label(const json& v, std::size_t line, const char* what) {
    if (!v.is_string() || v.get_ref<const std::string&>().size() != 1)
        violation(line, reason::kBadType, std::string(what) + " must be a one-character string");
    return v.get_ref<const std::string&>()[0];
}

}  // namespace

NormalizedSample sample_from_json(const json& record, std::size_t line) {
    if (!record.is_object()) violation(line, reason::kBadType, "record must be an object");

    if (auto it = record.find("schema_version"); it != record.end()) {
        if (!it->is_number_integer() || it->get<int>() != kSchemaVersion)
            violation(line, reason::kVersionMismatch, it->dump());
    }

    NormalizedSample s;
    s.id = require_string(record, "id", line);
    s.question_text = require_string(record, "question", line);
    if (auto it = record.find("dataset"); it != record.end() && !it->is_null()) {
        if (!it->is_string()) violation(line, reason::kBadType, "dataset must be a string");
        s.dataset_name = it->get<std::string>();
    }

    const json& options = require(record, "options", line);
    if (!options.is_array()) violation(line, reason::kBadType, "options must be an array");
    for (const auto& o : options) {
        if (!o.is_object()) violation(line, reason::kBadType, "option must be an object");
        Option opt;
        opt.label = single_label(require(o, "label", line), line, "option label");
        opt.text = require_string(o, "text", line);
        s.options.push_back(std::move(opt));
    }

    if (auto it = record.find("gold_label"); it != record.end() && !it->is_null()) {
        s.gold_label = single_label(*it, line, "gold_label");
    }
    if (auto it = record.find("gold_text"); it != record.end() && !it->is_null()) {
        if (!it->is_string()) violation(line, reason::kBadType, "gold_text must be a string");
        s.gold_text = it->get<std::string>();
    }

    try {
        s.answer_type = answer_type_from_string(require_string(record, "answer_type", line));
    } catch (const InvalidInput& e) {
        violation(line, reason::kBadType, e.what());
    }

    if (auto it = record.find("media"); it != record.end() && !it->is_null()) {
        if (!it->is_array()) violation(line, reason::kBadType, "media must be an array");
        for (const auto& m : *it) {
            if (!m.is_object()) violation(line, reason::kBadType, "media entry must be an object");
            MediaRef ref;
            try {
                ref.kind = media_kind_from_string(require_string(m, "kind", line));
            } catch (const InvalidInput& e) {
                violation(line, reason::kMediaInvalid, e.what());
            }
            if (auto u = m.find("uri"); u != m.end() && !u->is_null()) {
                if (!u->is_string()) violation(line, reason::kBadType, "media uri must be a string");
                ref.uri = u->get<std::string>();
            }
            if (auto fc = m.find("frame_count"); fc != m.end() && !fc->is_null()) {
                if (!fc->is_number_integer()) violation(line, reason::kBadType, "frame_count must be an integer");
                ref.frame_count = fc->get<int>();
            }
            s.media.push_back(std::move(ref));
        }
    }

    if (auto it = record.find("eval_flags"); it != record.end() && !it->is_null()) {
        if (!it->is_array()) violation(line, reason::kBadType, "eval_flags must be an array");
        for (const auto& f : *it) {
            if (!f.is_string()) violation(line, reason::kBadType, "eval flag must be a string");
            s.eval_flags.insert(f.get<std::string>());
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Normalization of heterogeneous records

std::vector<Option> parse_inline_options(std::string_view text) {
    static const std::regex kMarker(R"((^|[,;\n])\s*([A-E])\s*[:.)]\s*)");
    const std::string s(text);
    std::vector<std::pair<std::size_t, std::size_t>> spans;  // (marker begin, text begin)
    std::vector<char> labels;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), kMarker); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        spans.emplace_back(static_cast<std::size_t>(m.position(0)),
                           static_cast<std::size_t>(m.position(0) + m.length(0)));
        labels.push_back(m.str(2)[0]);
    }
    std::vector<Option> out;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        const std::size_t begin = spans[i].second;
        const std::size_t end = i + 1 < spans.size() ? spans[i + 1].first : s.size();
        out.push_back({labels[i], text::trim(s.substr(begin, end - begin))});
    }
    return out;
}

namespace {

const json* field(const json& raw, const std::string& key) {
    if (key.empty()) return nullptr;
    auto it = raw.find(key);
    if (it == raw.end() || it->is_null()) return nullptr;
    return &*it;
}

std::vector<Option> options_from_value(const json& v) {
    std::vector<Option> out;
    if (v.is_string()) return parse_inline_options(v.get<std::string>());
    if (v.is_object()) {
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (it.key().size() != 1 || !it.value().is_string())
                throw SchemaViolation(0, std::string(reason::kBadType), "option map entries must be letter -> text");
            out.push_back({it.key()[0], it.value().get<std::string>()});
        }
        return out;
    }
    if (!v.is_array()) throw SchemaViolation(0, std::string(reason::kBadType), "unsupported options shape");
    char next = 'A';
    for (const auto& o : v) {
        if (o.is_object()) {
            const auto& label = o.at("label");
            if (!label.is_string() || label.get_ref<const std::string&>().size() != 1)
                throw SchemaViolation(0, std::string(reason::kBadType), "option label must be one character");
            out.push_back({label.get<std::string>()[0], o.at("text").get<std::string>()});
        } else if (o.is_string()) {
            std::string t = o.get<std::string>();
            static const std::regex kPrefix(R"(^\s*([A-E])\s*[:.)]\s*)");
            std::smatch m;
            if (std::regex_search(t, m, kPrefix) && m.str(1)[0] == next) t = t.substr(static_cast<std::size_t>(m.length(0)));
            out.push_back({next, text::trim(t)});
        } else {
            throw SchemaViolation(0, std::string(reason::kBadType), "option must be an object or string");
        }
        ++next;
    }
    return out;
}

std::string id_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    return v.dump();
}

MediaKind infer_kind(const std::string& uri) {
    const std::string lower = text::to_lower(uri);
    for (const char* ext : {".mp4", ".avi", ".mov", ".mkv", ".webm"}) {
        if (lower.size() >= std::string_view(ext).size() &&
            lower.compare(lower.size() - std::string_view(ext).size(), std::string::npos, ext) == 0)
            return MediaKind::video;
    }
    return MediaKind::image;
}

std::string join_root(const std::string& root, const std::string& uri) {
    if (root.empty() || uri.empty() || uri.front() == '/' || uri.find("://") != std::string::npos) return uri;
    return (std::filesystem::path(root) / uri).generic_string();
}

}  // namespace

ordered_json normalize_record(const json& raw, const FieldMap& map) {
    if (!raw.is_object()) throw SchemaViolation(0, std::string(reason::kBadType), "record must be an object");

    ordered_json out;
    if (auto it = raw.find("schema_version"); it != raw.end()) out["schema_version"] = *it;
    else out["schema_version"] = kSchemaVersion;

    const json* id = field(raw, map.id);
    if (!id) throw SchemaViolation(0, std::string(reason::kMissingField), map.id);
    out["id"] = id_string(*id);

    const json* ds = field(raw, map.dataset);
    out["dataset"] = ds && ds->is_string() ? ds->get<std::string>() : map.default_dataset;

    const json* q = field(raw, map.question);
    if (!q || !q->is_string()) throw SchemaViolation(0, std::string(reason::kMissingField), map.question);
    out["question"] = q->get<std::string>();

    std::vector<Option> options;
    if (const json* ov = field(raw, map.options)) options = options_from_value(*ov);
    out["options"] = ordered_json::array();
    for (const auto& o : options) {
        ordered_json oj;
        oj["label"] = std::string(1, o.label);
        oj["text"] = o.text;
        out["options"].push_back(std::move(oj));
    }

    std::optional<char> gold_label;
    std::string gold_text;
    if (const json* g = field(raw, map.gold_label)) {
        if (!g->is_string()) throw SchemaViolation(0, std::string(reason::kBadType), "gold must be a string");
        const std::string gv = text::trim(g->get<std::string>());
        if (gv.size() == 1 && std::isupper(static_cast<unsigned char>(gv[0]))) {
            gold_label = gv[0];
        } else {
            const std::string needle = text::to_lower(gv);
            for (const auto& o : options) {
                if (text::to_lower(text::trim(o.text)) == needle) {
                    gold_label = o.label;
                    break;
                }
            }
            gold_text = gv;
        }
    }
    if (const json* gt = field(raw, map.gold_text); gt && gt->is_string() && !gt->get<std::string>().empty()) {
        gold_text = gt->get<std::string>();
    }
    if (gold_text.empty() && gold_label) {
        for (const auto& o : options) {
            if (o.label == *gold_label) gold_text = o.text;
        }
    }
    out["gold_label"] = gold_label ? ordered_json(std::string(1, *gold_label)) : ordered_json(nullptr);
    out["gold_text"] = gold_text;

    AnswerType type = options.empty() ? AnswerType::OpenEnded : AnswerType::MCQ;
    if (const json* at = field(raw, map.answer_type); at && at->is_string()) {
        try {
            type = answer_type_from_string(at->get<std::string>());
        } catch (const InvalidInput& e) {
            throw SchemaViolation(0, std::string(reason::kBadType), e.what());
        }
    } else if (map.default_answer_type) {
        type = *map.default_answer_type;
    }
    out["answer_type"] = std::string(to_string(type));

    out["media"] = ordered_json::array();
    auto push_media = [&](MediaKind kind, const std::string& uri, std::optional<int> frames) {
        ordered_json mj;
        mj["kind"] = std::string(to_string(kind));
        mj["uri"] = uri;
        mj["frame_count"] = frames ? ordered_json(*frames) : ordered_json(nullptr);
        out["media"].push_back(std::move(mj));
    };
    std::optional<int> record_frames;
    if (const json* fc = field(raw, map.frame_count); fc && fc->is_number_integer()) record_frames = fc->get<int>();
    auto from_uri = [&](const std::string& uri) {
        const MediaKind kind = map.default_media_kind != MediaKind::none ? map.default_media_kind : infer_kind(uri);
        push_media(kind, join_root(map.media_root, uri), kind == MediaKind::video ? record_frames : std::nullopt);
    };
    if (const json* mv = field(raw, map.media)) {
        if (mv->is_string()) {
            if (!mv->get<std::string>().empty()) from_uri(mv->get<std::string>());
        } else if (mv->is_array()) {
            for (const auto& m : *mv) {
                if (m.is_string()) {
                    from_uri(m.get<std::string>());
                } else if (m.is_object()) {
                    const std::string uri = m.value("uri", std::string{});
                    MediaKind kind = m.contains("kind") ? media_kind_from_string(m.at("kind").get<std::string>())
                                                        : infer_kind(uri);
                    std::optional<int> frames;
                    if (auto f = m.find("frame_count"); f != m.end() && f->is_number_integer()) frames = f->get<int>();
                    push_media(kind, join_root(map.media_root, uri), frames);
                } else {
                    throw SchemaViolation(0, std::string(reason::kBadType), "unsupported media entry");
                }
            }
        } else {
            throw SchemaViolation(0, std::string(reason::kBadType), "unsupported media shape");
        }
    }

    std::set<std::string> flags(map.default_eval_flags.begin(), map.default_eval_flags.end());
    if (const json* fv = field(raw, map.eval_flags); fv && fv->is_array()) {
        for (const auto& f : *fv) {
            if (f.is_string()) flags.insert(f.get<std::string>());
        }
    }
    out["eval_flags"] = ordered_json::array();
    for (const auto& f : flags) out["eval_flags"].push_back(f);
    return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOFailure("cannot open " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    if (in.bad()) throw IOFailure("read error on " + path.string());
    return lines;
}

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

struct RawRecord {
    std::size_t line;
    json value;
    std::string parse_error;
};

std::vector<RawRecord> read_jsonl(const std::filesystem::path& path) {
    std::vector<RawRecord> out;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        RawRecord r{i + 1, {}, {}};
        try {
            r.value = json::parse(lines[i]);
        } catch (const json::parse_error& e) {
            r.parse_error = e.what();
        }
        out.push_back(std::move(r));
    }
    return out;
}

FieldMap field_map_from_spec(const json& spec) {
    FieldMap map;
    if (auto f = spec.find("fields"); f != spec.end()) {
        auto take = [&f](const char* key, std::string& dst) {
            if (auto it = f->find(key); it != f->end() && it->is_string()) dst = it->get<std::string>();
        };
        take("id", map.id);
        take("dataset", map.dataset);
        take("question", map.question);
        take("options", map.options);
        take("gold_label", map.gold_label);
        take("gold_text", map.gold_text);
        take("answer_type", map.answer_type);
        take("media", map.media);
        take("frame_count", map.frame_count);
        take("eval_flags", map.eval_flags);
    }
    if (auto d = spec.find("defaults"); d != spec.end()) {
        map.default_dataset = d->value("dataset", std::string{});
        if (d->contains("answer_type")) map.default_answer_type = answer_type_from_string(d->at("answer_type").get<std::string>());
        if (d->contains("media_kind")) map.default_media_kind = media_kind_from_string(d->at("media_kind").get<std::string>());
        map.media_root = d->value("media_root", std::string{});
        if (d->contains("eval_flags")) map.default_eval_flags = d->at("eval_flags").get<std::vector<std::string>>();
    }
    if (map.default_dataset.empty()) map.default_dataset = spec.value("name", std::string{});
    return map;
}

}  // namespace

DatasetManifest make_manifest(std::string name, const std::vector<NormalizedSample>& samples) {
    DatasetManifest m;
    m.name = std::move(name);
    m.sample_count = samples.size();
    for (const auto& s : samples) {
        m.modality.insert(Modality::T);
        for (const auto& media : s.media) {
            if (media.kind == MediaKind::image) m.modality.insert(Modality::I);
            if (media.kind == MediaKind::video) m.modality.insert(Modality::V);
        }
    }
    return m;
}

LoadResult load_dataset(const std::filesystem::path& path, Format format, LoadOptions options) {
    LoadResult result;
    std::vector<RawRecord> records;
    std::optional<FieldMap> map;
    std::string name;

    if (format == Format::native_jsonl) {
        records = read_jsonl(path);
        name = path.stem().string();
    } else {
        std::ifstream in(path);
        if (!in) throw IOFailure("cannot open " + path.string());
        json spec;
        try {
            spec = json::parse(in);
        } catch (const json::parse_error& e) {
            throw SchemaViolation(0, std::string(reason::kBadJson), std::string("mapping spec: ") + e.what());
        }
        map = field_map_from_spec(spec);
        name = spec.value("name", path.stem().string());
        const std::filesystem::path source = path.parent_path() / spec.at("source").get<std::string>();
        if (source.extension() == ".json") {
            std::ifstream src(source);
            if (!src) throw IOFailure("cannot open " + source.string());
            json array;
            try {
                array = json::parse(src);
            } catch (const json::parse_error& e) {
                throw SchemaViolation(0, std::string(reason::kBadJson), e.what());
            }
            if (!array.is_array()) throw SchemaViolation(0, std::string(reason::kBadType), "source must be an array");
            for (std::size_t i = 0; i < array.size(); ++i) records.push_back({i + 1, array[i], {}});
        } else {
            records = read_jsonl(source);
        }
    }

    std::unordered_set<std::string> ids;
    for (const auto& r : records) {
        try {
            if (!r.parse_error.empty()) throw SchemaViolation(r.line, std::string(reason::kBadJson), r.parse_error);
            NormalizedSample s;
            if (map) {
                try {
                    s = sample_from_json(json(normalize_record(r.value, *map)), r.line);
                } catch (const SchemaViolation& e) {
                    if (e.line() == r.line) throw;
                    throw SchemaViolation(r.line, e.reason(), e.what());
                } catch (const json::exception& e) {
                    throw SchemaViolation(r.line, std::string(reason::kBadType), e.what());
                }
            } else {
                s = sample_from_json(r.value, r.line);
            }
            const auto reasons = check_sample(s);
            if (!reasons.empty()) throw SchemaViolation(r.line, reasons.front(), s.id);
            if (!ids.insert(s.id).second) throw SchemaViolation(r.line, std::string(reason::kDuplicateId), s.id);
            result.samples.push_back(std::move(s));
        } catch (const SchemaViolation& e) {
            if (!options.lenient) throw;
            result.skipped.push_back({e.line(), e.reason(), e.what()});
        }
    }

    if (format == Format::native_jsonl && !result.samples.empty() && !result.samples.front().dataset_name.empty())
        name = result.samples.front().dataset_name;
    result.manifest = make_manifest(std::move(name), result.samples);
    return result;
}

void save_dataset(const std::filesystem::path& path, const std::vector<NormalizedSample>& samples) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IOFailure("cannot write " + path.string());
    for (const auto& s : samples) out << serialize_sample(s) << '\n';
    out.flush();
    if (!out) throw IOFailure("write error on " + path.string());
}

std::size_t ValidationReport::pass_count() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.ok; }));
}

std::size_t ValidationReport::fail_count() const { return records.size() - pass_count(); }

ValidationReport validate_dataset(const std::filesystem::path& path) {
    ValidationReport report;
    std::unordered_set<std::string> ids;
    for (const auto& r : read_jsonl(path)) {
        RecordReport rec;
        rec.line = r.line;
        if (!r.parse_error.empty()) {
            rec.reasons.emplace_back(reason::kBadJson);
        } else {
            try {
                const NormalizedSample s = sample_from_json(r.value, r.line);
                rec.id = s.id;
                rec.reasons = check_sample(s);
                if (!ids.insert(s.id).second) rec.reasons.emplace_back(reason::kDuplicateId);
            } catch (const SchemaViolation& e) {
                rec.reasons.push_back(e.reason());
                if (r.value.is_object() && r.value.contains("id") && r.value["id"].is_string())
                    rec.id = r.value["id"].get<std::string>();
            }
        }
        rec.ok = rec.reasons.empty();
        report.records.push_back(std::move(rec));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Frames

std::vector<int> sample_frames(int frame_count, int budget_min, int budget_max) {
    if (frame_count < 1) throw InvalidInput("frame_count must be positive");
    if (budget_min < 1 || budget_max < budget_min) throw InvalidInput("frame budget must satisfy 1 <= min <= max");
    const int k = std::min(budget_max, frame_count);
    if (k == 1) return {0};
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(k));
    const long long span = frame_count - 1;
    for (long long i = 0; i < k; ++i) idx.push_back(static_cast<int>(i * span / (k - 1)));
    return idx;
}

}  // namespace masorch::dataset
