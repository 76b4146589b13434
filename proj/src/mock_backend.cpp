#include "masorch/mock_backend.hpp"

#include <fstream>

#include <fmt/format.h>

#include "masorch/assets.hpp"
#include "masorch/digest.hpp"
#include "masorch/error.hpp"
#include "masorch/text.hpp"

namespace masorch::gateway {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::regex compile_matcher(const std::string& matcher) {
    auto flags = std::regex::ECMAScript;
    std::string pattern = matcher;
    if (pattern.rfind("(?i)", 0) == 0) {
        pattern.erase(0, 4);
        flags |= std::regex::icase;
    }
    try {
        return std::regex(pattern, flags);
    } catch (const std::regex_error& e) {
        throw InvalidInput("mock rule matcher '" + matcher + "': " + e.what());
    }
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

std::string text_of(const json& content) {
    if (content.is_string()) return content.get<std::string>();
    std::string out;
    if (content.is_array()) {
        for (const auto& p : content) {
            if (p.value("type", std::string{}) == "text") {
                if (!out.empty()) out.push_back('\n');
                out += p.value("text", std::string{});
            }
        }
    }
    return out;
}

std::string last_text_part(const json& content) {
    if (content.is_string()) return content.get<std::string>();
    std::string last;
    if (content.is_array()) {
        for (const auto& p : content) {
            if (p.value("type", std::string{}) == "text") last = p.value("text", std::string{});
        }
    }
    return last;
}

std::string option_labels(const std::string& prompt) {
    static const std::regex kOptionLine(R"(^\s*([A-E])\s*[:.)]\s+\S)");
    std::string labels;
    for (const auto& line : text::split_lines(prompt)) {
        std::smatch m;
        if (std::regex_search(line, m, kOptionLine) && labels.find(m.str(1)[0]) == std::string::npos)
            labels.push_back(m.str(1)[0]);
    }
    return labels.empty() ? std::string("ABCD") : labels;
}

std::string format_confidence(double c) { return fmt::format("{:.2f}", c); }

}  // namespace

MockScript MockScript::from_json(const json& j) {
    MockScript s;
    try {
        s.fallback_seed = j.value("fallback_seed", std::int64_t{0});
        s.report_usage = j.value("report_usage", true);
        for (const auto& r : j.value("rules", json::array())) {
            MockRule rule;
            rule.matcher = r.at("match").get<std::string>();
            rule.reply_template = r.value("reply", std::string{});
            rule.confidence = r.value("confidence", -1.0);
            rule.status = r.value("status", 200);
            if (rule.confidence > 1.0) throw InvalidInput("mock rule confidence must be in [0,1]");
            s.rules.push_back(std::move(rule));
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("mock script: ") + e.what());
    }
    return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IOFailure("cannot open mock script " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw InvalidInput("mock script " + path.string() + ": " + e.what());
    }
}

MockScript MockScript::builtin() { return from_json(json::parse(assets::mock_default_script)); }

ordered_json MockScript::to_json() const {
    ordered_json j;
    j["fallback_seed"] = fallback_seed;
    j["report_usage"] = report_usage;
    j["rules"] = ordered_json::array();
    for (const auto& r : rules) {
        ordered_json rj;
        rj["match"] = r.matcher;
        rj["reply"] = r.reply_template;
        if (r.confidence >= 0.0) rj["confidence"] = r.confidence;
        if (r.status != 200) rj["status"] = r.status;
        j["rules"].push_back(std::move(rj));
    }
    return j;
}

MockTransport::MockTransport(MockScript script) : script_(std::move(script)) {
    for (const auto& r : script_.rules) compiled_.push_back({compile_matcher(r.matcher), r});
}

std::string MockTransport::fallback_reply(const std::string& prompt_text, std::uint64_t h) const {
    const std::string labels = option_labels(prompt_text);
    const char letter = labels[h % labels.size()];
    const double confidence = 0.5 + static_cast<double>((h >> 8) % 50) / 100.0;
    return fmt::format("ANSWER: {0} | CONFIDENCE: {1}\nThe findings are most consistent with option {0}. The answer is ({0}).",
                       letter, format_confidence(confidence));
}

WireReply MockTransport::post(const WireRequest& request) {
    {
        std::lock_guard lock(mu_);
        bodies_.push_back(request.body);
    }
    WireReply reply;
    json body;
    try {
        body = json::parse(request.body);
    } catch (const json::parse_error&) {
        reply.status = 400;
        reply.body = R"({"error":{"message":"invalid JSON body"}})";
        return reply;
    }
    const json messages = body.value("messages", json::array());
    std::string prompt_text;
    std::string last_user;
    std::string all;
    for (const auto& m : messages) {
        const json content = m.value("content", json(""));
        const std::string t = text_of(content);
        if (!all.empty()) all.push_back('\n');
        all += t;
        if (m.value("role", std::string{}) == "user") last_user = last_text_part(content);
    }
    prompt_text = last_user;

    const std::uint64_t h =
        digest_u64(messages.dump(-1, ' ', false, json::error_handler_t::replace) + "#" + std::to_string(script_.fallback_seed));

    std::string text;
    bool matched = false;
    for (const auto& c : compiled_) {
        if (!std::regex_search(prompt_text, c.re)) continue;
        if (c.rule.status != 200) {
            reply.status = c.rule.status;
            reply.body = R"({"error":{"message":"scripted failure"}})";
            reply.elapsed_ms = 1;
            return reply;
        }
        text = c.rule.reply_template;
        const std::string labels = option_labels(prompt_text);
        replace_all(text, "{{letter}}", std::string(1, labels[h % labels.size()]));
        const double conf = c.rule.confidence >= 0.0 ? c.rule.confidence
                                                     : 0.5 + static_cast<double>((h >> 8) % 50) / 100.0;
        replace_all(text, "{{confidence}}", format_confidence(conf));
        matched = true;
        break;
    }
    if (!matched) text = fallback_reply(prompt_text, h);

    const int max_tokens = body.value("max_tokens", 1024);
    std::string finish = "stop";
    if (estimate_tokens(text) > max_tokens) {
        text = text.substr(0, static_cast<std::size_t>(max_tokens) * 4);
        finish = "length";
    }
    const std::int64_t prompt_tokens = estimate_tokens(all);
    const std::int64_t completion_tokens = estimate_tokens(text);

    ordered_json out;
    out["id"] = "mock-" + fmt::format("{:016x}", h);
    out["object"] = "chat.completion";
    out["model"] = body.value("model", std::string("mock-vlm"));
    ordered_json choice;
    choice["index"] = 0;
    choice["message"] = ordered_json{{"role", "assistant"}, {"content", text}};
    choice["finish_reason"] = finish;
    out["choices"] = ordered_json::array({choice});
    if (script_.report_usage) {
        out["usage"] = ordered_json{{"prompt_tokens", prompt_tokens},
                                    {"completion_tokens", completion_tokens},
                                    {"total_tokens", prompt_tokens + completion_tokens}};
    }

    calls_ += 1;
    prompt_tokens_ += prompt_tokens;
    completion_tokens_ += completion_tokens;

    reply.status = 200;
    reply.body = out.dump(-1, ' ', false, json::error_handler_t::replace);
    reply.elapsed_ms = 15 + prompt_tokens / 64 + 2 * completion_tokens;
    return reply;
}

MockTransport::Counters MockTransport::counters() const {
    return {calls_.load(), prompt_tokens_.load(), completion_tokens_.load()};
}

std::vector<std::string> MockTransport::recorded_bodies() const {
    std::lock_guard lock(mu_);
    return bodies_;
}

}  // namespace masorch::gateway
