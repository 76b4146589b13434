#pragma once

// Grading of model responses under the five evaluation protocols.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "masorch/dataset.hpp"
#include "masorch/gateway.hpp"

namespace masorch::eval {

enum class Protocol { VLM_SJ, VLM_EC, RULE_MR, RULE_FL, RULE_EM };

std::string_view to_string(Protocol p);
/// Accepts the canonical names and their lowercase/dashed spellings ("rule-mr").
Protocol protocol_from_string(std::string_view s);
[[nodiscard]] inline bool is_judge_backed(Protocol p) { return p == Protocol::VLM_SJ || p == Protocol::VLM_EC; }

enum class Status { Correct, Wrong, FormatError, Ambiguous, ApiError };

std::string_view to_string(Status s);
Status status_from_string(std::string_view s);

inline constexpr std::string_view kCascadeVersion = "cascade_v1";

// ---------------------------------------------------------------------------
// Rule-based extraction

struct Extraction {
    std::optional<char> label;
    int tier = 0;  // 1..4 for the matching cascade tier, 0 when nothing matched
};

/// Four-tier cascade: answer prefix, bracketed letter, standalone letter line,
/// option-text containment (longest option first). Only letters present among
/// `options` are accepted; with no options every A-E letter is.
Extraction rule_mr_match(std::string_view text, const std::vector<dataset::Option>& options);

inline std::optional<char> rule_mr_extract(std::string_view text, const std::vector<dataset::Option>& options) {
    return rule_mr_match(text, options).label;
}

/// First uppercase A-E character anywhere in the text.
std::optional<char> rule_fl_extract(std::string_view text);

/// Trim, then exact comparison with the gold letter.
Status rule_em_match(std::string_view text, char gold_label);

/// The trimmed reply when it is exactly one A-E letter.
std::optional<char> parse_ec_reply(std::string_view reply);

// ---------------------------------------------------------------------------
// Verdicts and judges

struct Verdict {
    Status status = Status::Ambiguous;
    std::optional<char> extracted_label;
    std::optional<std::string> judge_raw;
    Protocol protocol = Protocol::RULE_MR;
    std::string extractor;  // cascade / judge template version
    std::string detail;

    bool operator==(const Verdict&) const = default;
};

nlohmann::ordered_json to_json(const Verdict& v);
Verdict verdict_from_json(const nlohmann::json& j);

struct VerdictTokens {
    std::string correct = "CORRECT";
    std::string wrong = "WRONG";
    std::string ambiguous = "AMBIGUOUS";
};

/// First verdict token (case-sensitive, word-bounded) wins; Ambiguous when
/// none occurs.
Status parse_sj_reply(std::string_view reply, const VerdictTokens& tokens = {});

struct JudgeConfig {
    gateway::EndpointConfig endpoint;
    bool attach_media = true;
    VerdictTokens verdict_tokens;
};

nlohmann::ordered_json to_json(const JudgeConfig& j);
JudgeConfig judge_from_json(const nlohmann::json& j);

/// Semantic-judge prompt: question, options, gold label and text, the full
/// response, and (with attach_media) the sample's media parts.
std::vector<gateway::ChatMessage> build_sj_messages(const dataset::NormalizedSample& sample, std::string_view response,
                                                    const JudgeConfig& judge, dataset::FrameBudget budget = {});

/// Extraction-only prompt for VLM-EC.
std::vector<gateway::ChatMessage> build_ec_messages(const dataset::NormalizedSample& sample, std::string_view response,
                                                    const JudgeConfig& judge, dataset::FrameBudget budget = {});

/// True when rule protocols may grade the sample (MCQ with a gold label).
bool rule_gradable(const dataset::NormalizedSample& sample);

class Evaluator {
public:
    explicit Evaluator(gateway::Gateway& gateway, dataset::FrameBudget budget = {});

    /// Throws InvalidInput when a rule protocol meets a non-MCQ sample or a
    /// judge-backed protocol has no judge. Never throws on model text.
    Verdict evaluate(Protocol protocol, const dataset::NormalizedSample& sample, std::string_view response,
                     const JudgeConfig* judge = nullptr, gateway::UsageLedger* ledger = nullptr);

    Verdict extract_compare(const dataset::NormalizedSample& sample, std::string_view response,
                            const JudgeConfig& judge, gateway::UsageLedger* ledger = nullptr);
    Verdict semantic_judge(const dataset::NormalizedSample& sample, std::string_view response,
                           const JudgeConfig& judge, gateway::UsageLedger* ledger = nullptr);

private:
    gateway::Gateway& gateway_;
    dataset::FrameBudget budget_;
};

/// Pure grading under a rule protocol.
Verdict evaluate_rule(Protocol protocol, const dataset::NormalizedSample& sample, std::string_view response);

}  // namespace masorch::eval
