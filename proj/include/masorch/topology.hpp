#pragma once

// Topology configuration (the algorithmic parameters of a collaboration
// method) and the standard inference tuple every method returns.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace masorch::topology {

enum class Method {
    single,
    cot,
    self_consistency,
    debate,
    discussion,
    reconcile,
    dylan,
    conversational,
    meta_prompting,
    medagents,
    mdagents,
    mdteamgpt,
    colacare,
};

inline constexpr std::array<Method, 13> kAllMethods{
    Method::single,         Method::cot,       Method::self_consistency, Method::debate,   Method::discussion,
    Method::reconcile,      Method::dylan,     Method::conversational,   Method::meta_prompting,
    Method::medagents,      Method::mdagents,  Method::mdteamgpt,        Method::colacare,
};

/// Identifier used in configs and on the command line, e.g. "self_consistency".
std::string_view method_id(Method m);
/// Throws InvalidInput for unknown identifiers.
Method method_from_id(std::string_view id);
/// Display name used in labels and reports, e.g. "Debate".
std::string_view method_name(Method m);
std::optional<Method> method_from_name(std::string_view name);

enum class RoleMode { none, fixed, dynamic };
std::string_view to_string(RoleMode mode);
RoleMode role_mode_from_string(std::string_view s);

inline constexpr std::string_view kGeneralAssistant = "General Assistant";

struct TopologyConfig {
    Method method = Method::single;
    int num_agents = 3;
    int num_rounds = 2;
    int max_turns = 3;
    RoleMode role_mode = RoleMode::none;
    std::vector<std::string> role_roster;
    std::map<std::string, std::string> extra;

    // External tools are never available to any method.
    static constexpr bool tools_allowed = false;

    bool operator==(const TopologyConfig&) const = default;

    /// Throws InvalidInput when the method's parameter preconditions fail.
    void validate() const;

    /// Agents/rounds as the method actually uses them (single-agent methods
    /// report A1-R1, conversational reports its two roles and max_turns).
    [[nodiscard]] int effective_agents() const;
    [[nodiscard]] int effective_rounds() const;

    /// "<Name>-A<agents>-R<rounds>", from the effective values.
    [[nodiscard]] std::string label() const;
};

/// Canonical JSON: fixed key order, sorted extra map.
nlohmann::ordered_json to_json(const TopologyConfig& cfg);
TopologyConfig config_from_json(const nlohmann::json& j);

struct AgentSpec {
    int agent_id = 0;
    std::string role_name;
    std::string system_preamble;
};

struct Usage {
    std::int64_t calls = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t wall_ms = 0;

    [[nodiscard]] std::int64_t total_tokens() const { return prompt_tokens + completion_tokens; }
    bool operator==(const Usage&) const = default;
};

struct TranscriptEvent {
    int round = 0;
    int agent_id = 0;
    std::string role_name;
    std::string prompt_digest;
    std::string reply_text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t latency_ms = 0;
    std::string note;  // e.g. "format_failure", "api_error: ..."

    bool operator==(const TranscriptEvent&) const = default;
};

enum class Termination { completed, round_limit, protocol_error };
std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view s);

/// The standard tuple: answer, usage, topology snapshot, plus the transcript
/// and the reason the run stopped.
struct InferenceResult {
    std::string answer;
    Usage usage;
    TopologyConfig topology;
    std::vector<TranscriptEvent> transcript;
    Termination termination = Termination::completed;

    /// Γ.calls == |transcript| and token totals equal the transcript sums.
    [[nodiscard]] bool conserves_usage() const;
};

nlohmann::ordered_json to_json(const InferenceResult& r);
InferenceResult result_from_json(const nlohmann::json& j);

}  // namespace masorch::topology
