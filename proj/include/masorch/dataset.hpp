#pragma once

// Dataset registry: one uniform sample representation for every benchmark,
// plus the video frame budgeter.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace masorch::dataset {

inline constexpr int kSchemaVersion = 1;

enum class MediaKind { none, image, video };

struct MediaRef {
    MediaKind kind = MediaKind::none;
    std::string uri;
    std::optional<int> frame_count;  // videos only

    bool operator==(const MediaRef&) const = default;
};

enum class AnswerType { MCQ, MRQ, OpenEnded };

struct Option {
    char label = 'A';
    std::string text;

    bool operator==(const Option&) const = default;
};

struct NormalizedSample {
    std::string id;
    std::string dataset_name;
    std::string question_text;
    std::vector<Option> options;
    std::optional<char> gold_label;
    std::string gold_text;
    AnswerType answer_type = AnswerType::MCQ;
    std::vector<MediaRef> media;
    std::set<std::string> eval_flags;

    bool operator==(const NormalizedSample&) const = default;

    [[nodiscard]] const Option* find_option(char label) const;
};

/// Modality legend: T text, I image, V video.
enum class Modality { T, I, V };

struct DatasetManifest {
    std::string name;
    std::set<Modality> modality;
    int schema_version = kSchemaVersion;
    std::size_t sample_count = 0;
};

enum class Format { native_jsonl, mapping_spec };

struct FrameBudget {
    int min_frames = 4;
    int max_frames = 8;
};

// Reason codes reported by validation and carried by SchemaViolation.
namespace reason {
inline constexpr std::string_view kBadJson = "BadJson";
inline constexpr std::string_view kMissingField = "MissingField";
inline constexpr std::string_view kBadType = "BadType";
inline constexpr std::string_view kVersionMismatch = "VersionMismatch";
inline constexpr std::string_view kDuplicateLabel = "DuplicateLabel";
inline constexpr std::string_view kLabelOutOfRange = "LabelOutOfRange";
inline constexpr std::string_view kLabelOrder = "LabelOrder";
inline constexpr std::string_view kGoldOutOfRange = "GoldOutOfRange";
inline constexpr std::string_view kMissingOptions = "MissingOptions";
inline constexpr std::string_view kMissingGold = "MissingGold";
inline constexpr std::string_view kUnexpectedOptions = "UnexpectedOptions";
inline constexpr std::string_view kUnexpectedGold = "UnexpectedGold";
inline constexpr std::string_view kMediaInvalid = "MediaInvalid";
inline constexpr std::string_view kDuplicateId = "DuplicateId";
inline constexpr std::string_view kEmptyId = "EmptyId";
}  // namespace reason

/// Invariant violations of an already-typed sample; empty when valid.
std::vector<std::string> check_sample(const NormalizedSample& sample);

/// Canonical JSON form (fixed key order, explicit nulls).
nlohmann::ordered_json to_json(const NormalizedSample& sample);

/// Parses a native record. Structural problems throw SchemaViolation; the
/// invariants are not checked here (see check_sample).
NormalizedSample sample_from_json(const nlohmann::json& record, std::size_t line = 0);

/// One canonical line, no trailing newline.
std::string serialize_sample(const NormalizedSample& sample);

/// Source-field names used to normalize a heterogeneous record. The default
/// value maps every native field onto itself.
struct FieldMap {
    std::string id = "id";
    std::string dataset = "dataset";
    std::string question = "question";
    std::string options = "options";
    std::string gold_label = "gold_label";
    std::string gold_text = "gold_text";
    std::string answer_type = "answer_type";
    std::string media = "media";
    std::string frame_count = "frame_count";
    std::string eval_flags = "eval_flags";

    // Defaults applied when the record lacks the field.
    std::string default_dataset;
    std::optional<AnswerType> default_answer_type;
    MediaKind default_media_kind = MediaKind::none;  // none = infer from extension
    std::string media_root;
    std::vector<std::string> default_eval_flags;
};

/// Maps a raw record onto the native field layout. Options may arrive as an
/// array of {label,text}, an array of strings, a label->text object, or a
/// single "A: x, B: y" string; gold may be a letter or the option text.
/// normalize_record(normalize_record(r, m)) == normalize_record(r, m) for the
/// identity map.
nlohmann::ordered_json normalize_record(const nlohmann::json& raw, const FieldMap& map = {});

/// Splits "A: Cholangitis, B: Indigestion" into labeled options.
std::vector<Option> parse_inline_options(std::string_view text);

struct LoadOptions {
    bool lenient = false;
};

struct SkippedRecord {
    std::size_t line = 0;
    std::string reason;
    std::string detail;
};

struct LoadResult {
    DatasetManifest manifest;
    std::vector<NormalizedSample> samples;
    std::vector<SkippedRecord> skipped;  // lenient mode only
};

/// Strict by default: the first violation throws SchemaViolation.
LoadResult load_dataset(const std::filesystem::path& path, Format format, LoadOptions options = {});

/// Writes one canonical line per sample, in order.
void save_dataset(const std::filesystem::path& path, const std::vector<NormalizedSample>& samples);

DatasetManifest make_manifest(std::string name, const std::vector<NormalizedSample>& samples);

struct RecordReport {
    std::size_t line = 0;
    std::string id;
    bool ok = true;
    std::vector<std::string> reasons;
};

struct ValidationReport {
    std::vector<RecordReport> records;

    [[nodiscard]] std::size_t pass_count() const;
    [[nodiscard]] std::size_t fail_count() const;
};

/// Native-jsonl validation; every non-blank line is reported exactly once.
ValidationReport validate_dataset(const std::filesystem::path& path);

/// Evenly spaced frame indices within the budget. Throws InvalidInput for a
/// non-positive frame_count or an inverted/non-positive budget.
std::vector<int> sample_frames(int frame_count, int budget_min, int budget_max);

inline std::vector<int> sample_frames(int frame_count, FrameBudget budget) {
    return sample_frames(frame_count, budget.min_frames, budget.max_frames);
}

/// Relative weights for synthetic fixtures. Zero weights disable a category.
struct FixtureMix {
    double image = 0.3;
    double video = 0.2;
    double open_ended = 0.2;

    static FixtureMix mcq_text_only() { return {0.0, 0.0, 0.0}; }
};

/// Deterministic synthetic benchmark samples. For n >= 5 with non-zero video
/// and open-ended weights, at least one of each is present.
std::vector<NormalizedSample> make_fixture(std::uint64_t seed, int n, const FixtureMix& mix = {});

// Enum <-> string helpers shared with other modules.
std::string_view to_string(MediaKind kind);
std::string_view to_string(AnswerType type);
std::string_view to_string(Modality m);
MediaKind media_kind_from_string(std::string_view s);
AnswerType answer_type_from_string(std::string_view s);
std::string modality_string(const std::set<Modality>& modality);

}  // namespace masorch::dataset
