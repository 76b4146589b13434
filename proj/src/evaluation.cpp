#include "masorch/evaluation.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "masorch/assets.hpp"
#include "masorch/error.hpp"
#include "masorch/text.hpp"

namespace masorch::eval {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Protocol p) {
    switch (p) {
        case Protocol::VLM_SJ: return "VLM_SJ";
        case Protocol::VLM_EC: return "VLM_EC";
        case Protocol::RULE_MR: return "RULE_MR";
        case Protocol::RULE_FL: return "RULE_FL";
        case Protocol::RULE_EM: return "RULE_EM";
    }
    return "RULE_MR";
}

Protocol protocol_from_string(std::string_view s) {
    std::string key = text::to_upper(s);
    std::replace(key.begin(), key.end(), '-', '_');
    for (Protocol p : {Protocol::VLM_SJ, Protocol::VLM_EC, Protocol::RULE_MR, Protocol::RULE_FL, Protocol::RULE_EM}) {
        if (to_string(p) == key) return p;
    }
    throw InvalidInput("unknown protocol '" + std::string(s) + "'");
}

std::string_view to_string(Status s) {
    switch (s) {
        case Status::Correct: return "Correct";
        case Status::Wrong: return "Wrong";
        case Status::FormatError: return "FormatError";
        case Status::Ambiguous: return "Ambiguous";
        case Status::ApiError: return "ApiError";
    }
    return "Ambiguous";
}

Status status_from_string(std::string_view s) {
    for (Status st : {Status::Correct, Status::Wrong, Status::FormatError, Status::Ambiguous, Status::ApiError}) {
        if (to_string(st) == s) return st;
    }
    throw InvalidInput("unknown verdict status '" + std::string(s) + "'");
}

ordered_json to_json(const Verdict& v) {
    ordered_json j;
    j["status"] = std::string(to_string(v.status));
    j["extracted_label"] = v.extracted_label ? ordered_json(std::string(1, *v.extracted_label)) : ordered_json(nullptr);
    j["judge_raw"] = v.judge_raw ? ordered_json(*v.judge_raw) : ordered_json(nullptr);
    j["protocol"] = std::string(to_string(v.protocol));
    j["extractor"] = v.extractor;
    j["detail"] = v.detail;
    return j;
}

Verdict verdict_from_json(const json& j) {
    Verdict v;
    v.status = status_from_string(j.at("status").get<std::string>());
    if (const auto& l = j.at("extracted_label"); !l.is_null()) {
        const auto s = l.get<std::string>();
        if (s.size() != 1) throw InvalidInput("extracted_label must be one letter");
        v.extracted_label = s[0];
    }
    if (const auto& r = j.at("judge_raw"); !r.is_null()) v.judge_raw = r.get<std::string>();
    v.protocol = protocol_from_string(j.at("protocol").get<std::string>());
    v.extractor = j.value("extractor", std::string{});
    v.detail = j.value("detail", std::string{});
    return v;
}

ordered_json to_json(const JudgeConfig& c) {
    ordered_json j;
    j["endpoint"] = gateway::to_json(c.endpoint);
    j["attach_media"] = c.attach_media;
    j["verdict_tokens"] = ordered_json{{"correct", c.verdict_tokens.correct},
                                       {"wrong", c.verdict_tokens.wrong},
                                       {"ambiguous", c.verdict_tokens.ambiguous}};
    return j;
}

JudgeConfig judge_from_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("judge config must be a JSON object");
    JudgeConfig c;
    // A bare endpoint object is accepted as a judge with default settings.
    c.endpoint = gateway::endpoint_from_json(j.contains("endpoint") ? j.at("endpoint") : j);
    c.attach_media = j.value("attach_media", true);
    if (auto t = j.find("verdict_tokens"); t != j.end()) {
        c.verdict_tokens.correct = t->value("correct", c.verdict_tokens.correct);
        c.verdict_tokens.wrong = t->value("wrong", c.verdict_tokens.wrong);
        c.verdict_tokens.ambiguous = t->value("ambiguous", c.verdict_tokens.ambiguous);
    }
    return c;
}

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

std::string options_block(const dataset::NormalizedSample& sample) {
    if (sample.options.empty()) return "(open-ended, no options)";
    std::string out;
    for (const auto& o : sample.options) {
        if (!out.empty()) out.push_back('\n');
        out += fmt::format("{}: {}", o.label, o.text);
    }
    return out;
}

std::string gold_block(const dataset::NormalizedSample& sample) {
    if (sample.gold_label && !sample.gold_text.empty()) return fmt::format("{}: {}", *sample.gold_label, sample.gold_text);
    if (sample.gold_label) return std::string(1, *sample.gold_label);
    return sample.gold_text;
}

std::vector<gateway::ChatMessage> judge_messages(std::string prompt, const dataset::NormalizedSample& sample,
                                                 const JudgeConfig& judge, dataset::FrameBudget budget) {
    gateway::ChatMessage user;
    user.role = gateway::Role::user;
    if (judge.attach_media) user.parts = gateway::media_parts(sample.media, budget);
    user.parts.emplace_back(gateway::TextPart{std::move(prompt)});
    return {gateway::ChatMessage::system("You are a strict, impartial grader."), std::move(user)};
}

std::string fill(std::string_view tmpl, const dataset::NormalizedSample& sample, std::string_view response) {
    std::string labels;
    for (const auto& o : sample.options) {
        if (!labels.empty()) labels += ", ";
        labels.push_back(o.label);
    }
    std::string out(tmpl);
    // The response goes last so that placeholders inside it are left alone.
    replace_all(out, "{{question}}", sample.question_text);
    replace_all(out, "{{options}}", options_block(sample));
    replace_all(out, "{{gold}}", gold_block(sample));
    replace_all(out, "{{labels}}", labels.empty() ? "A, B, C, D, E" : labels);
    replace_all(out, "{{response}}", response);
    return out;
}

}  // namespace

std::vector<gateway::ChatMessage> build_sj_messages(const dataset::NormalizedSample& sample, std::string_view response,
                                                    const JudgeConfig& judge, dataset::FrameBudget budget) {
    std::string prompt = fill(assets::judge_sj_v1, sample, response);
    if (judge.verdict_tokens.correct != "CORRECT" || judge.verdict_tokens.wrong != "WRONG" ||
        judge.verdict_tokens.ambiguous != "AMBIGUOUS") {
        replace_all(prompt, "CORRECT, WRONG, or AMBIGUOUS",
                    fmt::format("{}, {}, or {}", judge.verdict_tokens.correct, judge.verdict_tokens.wrong,
                                judge.verdict_tokens.ambiguous));
    }
    return judge_messages(std::move(prompt), sample, judge, budget);
}

std::vector<gateway::ChatMessage> build_ec_messages(const dataset::NormalizedSample& sample, std::string_view response,
                                                    const JudgeConfig& judge, dataset::FrameBudget budget) {
    return judge_messages(fill(assets::judge_ec_v1, sample, response), sample, judge, budget);
}

bool rule_gradable(const dataset::NormalizedSample& sample) {
    return sample.answer_type == dataset::AnswerType::MCQ && sample.gold_label.has_value();
}

Verdict evaluate_rule(Protocol protocol, const dataset::NormalizedSample& sample, std::string_view response) {
    if (is_judge_backed(protocol)) throw InvalidInput("evaluate_rule called with a judge-backed protocol");
    if (!rule_gradable(sample))
        throw InvalidInput("rule protocols grade MCQ samples only (sample '" + sample.id + "')");
    const char gold = *sample.gold_label;
    Verdict v;
    v.protocol = protocol;
    switch (protocol) {
        case Protocol::RULE_MR: {
            const auto ex = rule_mr_match(response, sample.options);
            v.extractor = std::string(kCascadeVersion);
            v.extracted_label = ex.label;
            if (!ex.label) v.status = Status::FormatError;
            else v.status = *ex.label == gold ? Status::Correct : Status::Wrong;
            if (ex.tier > 0) v.detail = fmt::format("tier {}", ex.tier);
            break;
        }
        case Protocol::RULE_FL: {
            v.extractor = "first_letter";
            v.extracted_label = rule_fl_extract(response);
            if (!v.extracted_label) v.status = Status::FormatError;
            else v.status = *v.extracted_label == gold ? Status::Correct : Status::Wrong;
            break;
        }
        case Protocol::RULE_EM: {
            v.extractor = "exact_match";
            v.status = rule_em_match(response, gold);
            if (v.status != Status::FormatError) v.extracted_label = text::trim(response)[0];
            break;
        }
        default: break;
    }
    return v;
}

Evaluator::Evaluator(gateway::Gateway& gateway, dataset::FrameBudget budget) : gateway_(gateway), budget_(budget) {}

Verdict Evaluator::evaluate(Protocol protocol, const dataset::NormalizedSample& sample, std::string_view response,
                            const JudgeConfig* judge, gateway::UsageLedger* ledger) {
    if (!is_judge_backed(protocol)) return evaluate_rule(protocol, sample, response);
    if (judge == nullptr) throw InvalidInput(std::string(to_string(protocol)) + " requires a judge endpoint");
    if (protocol == Protocol::VLM_EC) {
        if (!rule_gradable(sample)) throw InvalidInput("VLM_EC grades MCQ samples only (sample '" + sample.id + "')");
        return extract_compare(sample, response, *judge, ledger);
    }
    return semantic_judge(sample, response, *judge, ledger);
}

Verdict Evaluator::extract_compare(const dataset::NormalizedSample& sample, std::string_view response,
                                   const JudgeConfig& judge, gateway::UsageLedger* ledger) {
    Verdict v;
    v.protocol = Protocol::VLM_EC;
    v.extractor = "judge_ec_v1";
    try {
        const auto reply = gateway_.complete(judge.endpoint, build_ec_messages(sample, response, judge, budget_), ledger);
        v.judge_raw = reply.text;
        v.extracted_label = parse_ec_reply(reply.text);
        if (!v.extracted_label) v.status = Status::FormatError;
        else v.status = v.extracted_label == sample.gold_label ? Status::Correct : Status::Wrong;
    } catch (const ApiError& e) {
        v.status = Status::ApiError;
        v.detail = e.what();
    } catch (const ProtocolError& e) {
        v.status = Status::ApiError;
        v.detail = e.what();
    }
    return v;
}

Verdict Evaluator::semantic_judge(const dataset::NormalizedSample& sample, std::string_view response,
                                  const JudgeConfig& judge, gateway::UsageLedger* ledger) {
    Verdict v;
    v.protocol = Protocol::VLM_SJ;
    v.extractor = "judge_sj_v1";
    try {
        const auto reply = gateway_.complete(judge.endpoint, build_sj_messages(sample, response, judge, budget_), ledger);
        v.judge_raw = reply.text;
        v.status = parse_sj_reply(reply.text, judge.verdict_tokens);
    } catch (const ApiError& e) {
        v.status = Status::ApiError;
        v.detail = e.what();
    } catch (const ProtocolError& e) {
        v.status = Status::ApiError;
        v.detail = e.what();
    }
    return v;
}

}  // namespace masorch::eval
