#include "masorch/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

#include <fmt/format.h>

#include "masorch/error.hpp"
#include "masorch/labels.hpp"
#include "masorch/text.hpp"

namespace masorch::analytics {

using nlohmann::ordered_json;

ProfileRecord to_profile(const run::CheckpointRecord& record) {
    if (record.status != run::RecordStatus::evaluated || !record.verdict)
        throw InvalidInput("profile records come from evaluated checkpoint records only");
    ProfileRecord p;
    p.sample_id = record.sample_id;
    p.method = record.topology.label();
    p.status = record.verdict->status;
    p.latency_ms = record.result.usage.wall_ms;
    p.calls = record.result.usage.calls;
    p.prompt_tokens = record.result.usage.prompt_tokens;
    p.completion_tokens = record.result.usage.completion_tokens;
    p.termination = record.result.termination;
    p.config_label = record.result.topology.label();
    p.response = record.result.answer;
    return p;
}

std::string_view to_string(OutcomeClass c) {
    switch (c) {
        case OutcomeClass::RightAnswer: return "RightAnswer";
        case OutcomeClass::WrongAnswer: return "WrongAnswer";
        case OutcomeClass::FormatError: return "FormatError";
        case OutcomeClass::Others: return "Others";
    }
    return "Others";
}

OutcomeClass classify_outcome(eval::Status status) {
    switch (status) {
        case eval::Status::Correct: return OutcomeClass::RightAnswer;
        case eval::Status::Wrong: return OutcomeClass::WrongAnswer;
        case eval::Status::FormatError: return OutcomeClass::FormatError;
        case eval::Status::Ambiguous:
        case eval::Status::ApiError: return OutcomeClass::Others;
    }
    return OutcomeClass::Others;
}

std::string_view to_string(FailureClass c) {
    switch (c) {
        case FailureClass::ModelIncorrect: return "ModelIncorrect";
        case FailureClass::RoundLimit: return "RoundLimit";
        case FailureClass::NoAnswerClaim: return "NoAnswerClaim";
        case FailureClass::ParseFailure: return "ParseFailure";
    }
    return "ModelIncorrect";
}

FailureClass classify_failure(const ProfileRecord& record, std::string_view response_text) {
    if (record.termination == topology::Termination::round_limit) return FailureClass::RoundLimit;
    if (text::trim(response_text).empty() || record.status == eval::Status::FormatError)
        return FailureClass::ParseFailure;
    const std::string lower = text::to_lower(response_text);
    for (std::string_view phrase : {"none of the above", "no answer", "cannot be determined"}) {
        if (lower.find(phrase) != std::string::npos) return FailureClass::NoAnswerClaim;
    }
    return FailureClass::ModelIncorrect;
}

double SummaryRow::proportion(OutcomeClass c) const {
    if (n == 0) return 0.0;
    std::size_t count = 0;
    switch (c) {
        case OutcomeClass::RightAnswer: count = right; break;
        case OutcomeClass::WrongAnswer: count = wrong; break;
        case OutcomeClass::FormatError: count = format_error; break;
        case OutcomeClass::Others: count = others; break;
    }
    return static_cast<double>(count) / static_cast<double>(n);
}

namespace {

// Six decimals, so CSV text and JSON numbers carry identical values.
double round6(double v) { return std::round(v * 1e6) / 1e6; }

auto sort_key(const std::string& label) {
    try {
        const auto p = topology::parse_label(label);
        const auto idx = std::find(topology::kAllMethods.begin(), topology::kAllMethods.end(), p.method) -
                         topology::kAllMethods.begin();
        return std::make_tuple(static_cast<int>(idx), p.agents, p.rounds, label);
    } catch (const ParseError&) {
        return std::make_tuple(static_cast<int>(topology::kAllMethods.size()), 0, 0, label);
    }
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<ProfileRecord>& records) {
    struct Acc {
        SummaryRow row;
        std::int64_t latency = 0;
        std::int64_t calls = 0;
    };
    std::map<std::string, Acc> by_method;
    for (const auto& r : records) {
        auto& acc = by_method[r.method];
        acc.row.method = r.method;
        acc.row.n += 1;
        acc.row.total_prompt_tokens += r.prompt_tokens;
        acc.row.total_completion_tokens += r.completion_tokens;
        acc.latency += r.latency_ms;
        acc.calls += r.calls;
        switch (classify_outcome(r.status)) {
            case OutcomeClass::RightAnswer: ++acc.row.right; break;
            case OutcomeClass::WrongAnswer: ++acc.row.wrong; break;
            case OutcomeClass::FormatError: ++acc.row.format_error; break;
            case OutcomeClass::Others: ++acc.row.others; break;
        }
    }
    std::vector<SummaryRow> rows;
    for (auto& [method, acc] : by_method) {
        auto& row = acc.row;
        const auto n = static_cast<double>(row.n);
        const std::size_t graded = row.right + row.wrong + row.format_error;
        row.accuracy = graded == 0 ? 0.0 : round6(static_cast<double>(row.right) / static_cast<double>(graded));
        row.avg_tokens = round6(static_cast<double>(row.total_prompt_tokens + row.total_completion_tokens) / n);
        row.avg_latency_ms = round6(static_cast<double>(acc.latency) / n);
        row.avg_calls = round6(static_cast<double>(acc.calls) / n);
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(),
              [](const SummaryRow& a, const SummaryRow& b) { return sort_key(a.method) < sort_key(b.method); });
    return rows;
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
    return a.accuracy >= b.accuracy && a.avg_tokens <= b.avg_tokens &&
           (a.accuracy > b.accuracy || a.avg_tokens < b.avg_tokens);
}

std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points) {
    std::vector<ParetoPoint> out;
    for (const auto& p : points) {
        const bool dominated =
            std::any_of(points.begin(), points.end(), [&p](const ParetoPoint& q) { return dominates(q, p); });
        if (!dominated) out.push_back(p);
    }
    return out;
}

std::vector<ParetoPoint> pareto_points(const std::vector<SummaryRow>& rows) {
    std::vector<ParetoPoint> points;
    for (const auto& r : rows) points.push_back({r.method, r.accuracy, r.avg_tokens});
    return points;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

}  // namespace

std::string render_csv(const std::vector<SummaryRow>& rows) {
    std::string out(kCsvHeader);
    out.push_back('\n');
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_field(r.method), r.accuracy, r.avg_tokens,
                           r.avg_latency_ms, r.avg_calls, r.right, r.wrong, r.format_error, r.others);
    }
    return out;
}

std::string render_json(const std::vector<SummaryRow>& rows) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json j;
        j["method"] = r.method;
        j["accuracy"] = r.accuracy;
        j["avg_tokens"] = r.avg_tokens;
        j["avg_latency_ms"] = r.avg_latency_ms;
        j["avg_calls"] = r.avg_calls;
        j["right"] = r.right;
        j["wrong"] = r.wrong;
        j["format_error"] = r.format_error;
        j["others"] = r.others;
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::string render_plot_data(const std::vector<SummaryRow>& rows) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) arr.push_back(ordered_json{{"x", r.avg_tokens}, {"y", r.accuracy}, {"label", r.method}});
    return arr.dump(2) + "\n";
}

void export_report(const std::vector<SummaryRow>& rows, ReportFormat format, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IOFailure("cannot write report " + path.string());
    out << (format == ReportFormat::csv ? render_csv(rows) : render_json(rows));
    out.flush();
    if (!out) throw IOFailure("write to " + path.string() + " failed");
}

}  // namespace masorch::analytics
