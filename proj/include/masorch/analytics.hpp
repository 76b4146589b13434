#pragma once

// Per-method summaries, outcome and failure taxonomies, Pareto frontiers and
// report exports built from evaluated checkpoint records.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "masorch/checkpoint.hpp"
#include "masorch/evaluation.hpp"
#include "masorch/topology.hpp"

namespace masorch::analytics {

struct ProfileRecord {
    std::string sample_id;
    std::string method;  // config label, e.g. "Debate-A3-R2"
    eval::Status status = eval::Status::Ambiguous;
    std::int64_t latency_ms = 0;
    std::int64_t calls = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    topology::Termination termination = topology::Termination::completed;
    std::string config_label;
    std::string response;

    [[nodiscard]] std::int64_t tokens() const { return prompt_tokens + completion_tokens; }
};

/// Throws InvalidInput unless the record is evaluated.
ProfileRecord to_profile(const run::CheckpointRecord& record);

enum class OutcomeClass { RightAnswer, WrongAnswer, FormatError, Others };
std::string_view to_string(OutcomeClass c);
OutcomeClass classify_outcome(eval::Status status);
inline OutcomeClass classify_outcome(const eval::Verdict& v) { return classify_outcome(v.status); }

enum class FailureClass { ModelIncorrect, RoundLimit, NoAnswerClaim, ParseFailure };
std::string_view to_string(FailureClass c);

/// RoundLimit > ParseFailure > NoAnswerClaim > ModelIncorrect.
FailureClass classify_failure(const ProfileRecord& record, std::string_view response_text);

struct SummaryRow {
    std::string method;
    std::size_t n = 0;
    double accuracy = 0.0;
    double avg_tokens = 0.0;
    double avg_latency_ms = 0.0;
    double avg_calls = 0.0;
    std::size_t right = 0;
    std::size_t wrong = 0;
    std::size_t format_error = 0;
    std::size_t others = 0;
    std::int64_t total_prompt_tokens = 0;
    std::int64_t total_completion_tokens = 0;

    /// Share of one outcome class over all n records.
    [[nodiscard]] double proportion(OutcomeClass c) const;
};

/// accuracy = right / (right + wrong + format_error), 0 when that is empty.
/// Rows are ordered by method family, then agents, then rounds, independent
/// of the input order.
std::vector<SummaryRow> summarize(const std::vector<ProfileRecord>& records);

struct ParetoPoint {
    std::string label;
    double accuracy = 0.0;
    double avg_tokens = 0.0;

    bool operator==(const ParetoPoint&) const = default;
};

/// `a` dominates `b` when it is at least as accurate and at most as costly,
/// strictly better in one of the two.
bool dominates(const ParetoPoint& a, const ParetoPoint& b);

/// Points no other point dominates, in input order.
std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points);

std::vector<ParetoPoint> pareto_points(const std::vector<SummaryRow>& rows);

enum class ReportFormat { csv, json };

inline constexpr std::string_view kCsvHeader =
    "method,accuracy,avg_tokens,avg_latency_ms,avg_calls,right,wrong,format_error,others";

std::string render_csv(const std::vector<SummaryRow>& rows);
std::string render_json(const std::vector<SummaryRow>& rows);
/// [{x: avg_tokens, y: accuracy, label}]
std::string render_plot_data(const std::vector<SummaryRow>& rows);

/// Writes the rendered report. Throws IOFailure.
void export_report(const std::vector<SummaryRow>& rows, ReportFormat format, const std::filesystem::path& path);

}  // namespace masorch::analytics
