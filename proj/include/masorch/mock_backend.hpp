#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "masorch/gateway.hpp"

namespace masorch::gateway {

/// Scripted replies for the in-process backend. Matchers run against the last
/// text part of the last user message; the first matching rule wins. Matchers
/// prefixed with "(?i)" are case-insensitive.
///
/// Reply templates may use {{letter}} and {{confidence}}; both derive from the
/// prompt digest (confidence falls back to the rule's own value when set).
struct MockRule {
    std::string matcher;
    std::string reply_template;
    double confidence = -1.0;  // negative: derive from digest
    int status = 200;          // non-200 simulates a faulty endpoint
};

struct MockScript {
    std::vector<MockRule> rules;
    std::int64_t fallback_seed = 0;
    bool report_usage = true;

    static MockScript from_json(const nlohmann::json& j);
    static MockScript load(const std::filesystem::path& path);
    /// Built-in script answering every engine control prompt.
    static MockScript builtin();
    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// Serves chat-completions requests from a MockScript. The reply (including
/// usage and the synthetic latency) is a pure function of the script and the
/// request's messages.
class MockTransport : public Transport {
public:
    explicit MockTransport(MockScript script);

    WireReply post(const WireRequest& request) override;

    struct Counters {
        std::int64_t calls = 0;
        std::int64_t prompt_tokens = 0;
        std::int64_t completion_tokens = 0;
    };
    /// Totals over successful replies emitted so far.
    [[nodiscard]] Counters counters() const;
    /// Every request body received, in arrival order.
    [[nodiscard]] std::vector<std::string> recorded_bodies() const;

private:
    struct CompiledRule {
        std::regex re;
        MockRule rule;
    };

    std::string fallback_reply(const std::string& prompt_text, std::uint64_t h) const;

    MockScript script_;
    std::vector<CompiledRule> compiled_;
    std::atomic<std::int64_t> calls_{0};
    std::atomic<std::int64_t> prompt_tokens_{0};
    std::atomic<std::int64_t> completion_tokens_{0};
    mutable std::mutex mu_;
    std::vector<std::string> bodies_;
};

}  // namespace masorch::gateway
