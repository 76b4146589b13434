#include <array>

#include "masorch/error.hpp"
#include "masorch/labels.hpp"
#include "masorch/topology.hpp"

namespace masorch::topology {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct MethodNames {
    Method method;
    std::string_view id;
    std::string_view name;
};

constexpr std::array<MethodNames, 13> kNames{{
    {Method::single, "single", "VLM"},
    {Method::cot, "cot", "CoT"},
    {Method::self_consistency, "self_consistency", "SelfConsistency"},
    {Method::debate, "debate", "Debate"},
    {Method::discussion, "discussion", "Discussion"},
    {Method::reconcile, "reconcile", "ReConcile"},
    {Method::dylan, "dylan", "DyLAN"},
    {Method::conversational, "conversational", "AutoGen"},
    {Method::meta_prompting, "meta_prompting", "MetaPrompting"},
    {Method::medagents, "medagents", "MedAgents"},
    {Method::mdagents, "mdagents", "MDAgents"},
    {Method::mdteamgpt, "mdteamgpt", "MDTeamGPT"},
    {Method::colacare, "colacare", "ColaCare"},
}};

const MethodNames& names_of(Method m) {
    for (const auto& n : kNames) {
        if (n.method == m) return n;
    }
    throw InvalidInput("unknown method");
}

}  // namespace

std::string_view method_id(Method m) { return names_of(m).id; }
std::string_view method_name(Method m) { return names_of(m).name; }

Method method_from_id(std::string_view id) {
    for (const auto& n : kNames) {
        if (n.id == id) return n.method;
    }
    throw InvalidInput("unknown method '" + std::string(id) + "'");
}

std::optional<Method> method_from_name(std::string_view name) {
    for (const auto& n : kNames) {
        if (n.name == name) return n.method;
    }
    return std::nullopt;
}

std::string_view to_string(RoleMode mode) {
    switch (mode) {
        case RoleMode::none: return "none";
        case RoleMode::fixed: return "fixed";
        case RoleMode::dynamic: return "dynamic";
    }
    return "none";
}

RoleMode role_mode_from_string(std::string_view s) {
    if (s == "none") return RoleMode::none;
    if (s == "fixed") return RoleMode::fixed;
    if (s == "dynamic") return RoleMode::dynamic;
    throw InvalidInput("unknown role mode '" + std::string(s) + "'");
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::completed: return "completed";
        case Termination::round_limit: return "round_limit";
        case Termination::protocol_error: return "protocol_error";
    }
    return "completed";
}

Termination termination_from_string(std::string_view s) {
    if (s == "completed") return Termination::completed;
    if (s == "round_limit") return Termination::round_limit;
    if (s == "protocol_error") return Termination::protocol_error;
    throw InvalidInput("unknown termination reason '" + std::string(s) + "'");
}

void TopologyConfig::validate() const {
    if (num_agents < 1) throw InvalidInput("num_agents must be >= 1");
    if (num_rounds < 1) throw InvalidInput("num_rounds must be >= 1");
    if (max_turns < 1) throw InvalidInput("max_turns must be >= 1");
    if (role_mode == RoleMode::fixed && role_roster.empty())
        throw InvalidInput("role_mode=fixed requires a non-empty role roster");
    switch (method) {
        case Method::debate:
        case Method::discussion:
        case Method::reconcile:
        case Method::dylan:
        case Method::medagents:
        case Method::mdagents:
        case Method::mdteamgpt:
        case Method::colacare:
            if (num_agents < 2)
                throw InvalidInput(std::string(method_name(method)) + " needs at least 2 agents");
            break;
        default:
            break;
    }
}

int TopologyConfig::effective_agents() const {
    switch (method) {
        case Method::single:
        case Method::cot: return 1;
        case Method::conversational: return 2;
        default: return num_agents;
    }
}

int TopologyConfig::effective_rounds() const {
    switch (method) {
        case Method::single:
        case Method::cot:
        case Method::self_consistency:
        case Method::meta_prompting:
        case Method::colacare: return 1;
        case Method::conversational: return max_turns;
        default: return num_rounds;
    }
}

std::string TopologyConfig::label() const { return config_label(method, effective_agents(), effective_rounds()); }

ordered_json to_json(const TopologyConfig& c) {
    ordered_json j;
    j["method_id"] = std::string(method_id(c.method));
    j["num_agents"] = c.num_agents;
    j["num_rounds"] = c.num_rounds;
    j["max_turns"] = c.max_turns;
    j["role_mode"] = std::string(to_string(c.role_mode));
    j["role_roster"] = c.role_roster;
    ordered_json extra = ordered_json::object();
    for (const auto& [k, v] : c.extra) extra[k] = v;  // std::map iterates sorted
    j["extra"] = std::move(extra);
    j["tools_allowed"] = false;
    return j;
}

TopologyConfig config_from_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("topology config must be a JSON object");
    TopologyConfig c;
    try {
        const std::string id = j.contains("method_id") ? j.at("method_id").get<std::string>()
                                                       : j.at("method").get<std::string>();
        c.method = method_from_id(id);
        c.num_agents = j.value("num_agents", c.num_agents);
        c.num_rounds = j.value("num_rounds", c.num_rounds);
        c.max_turns = j.value("max_turns", c.max_turns);
        c.role_mode = role_mode_from_string(j.value("role_mode", std::string("none")));
        c.role_roster = j.value("role_roster", std::vector<std::string>{});
        if (auto e = j.find("extra"); e != j.end() && e->is_object()) {
            for (auto it = e->begin(); it != e->end(); ++it)
                c.extra[it.key()] = it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
        }
        if (j.value("tools_allowed", false)) throw InvalidInput("tools_allowed must be false");
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("topology config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// InferenceResult

bool InferenceResult::conserves_usage() const {
    Usage sum;
    for (const auto& e : transcript) {
        sum.prompt_tokens += e.prompt_tokens;
        sum.completion_tokens += e.completion_tokens;
        sum.wall_ms += e.latency_ms;
    }
    return usage.calls == static_cast<std::int64_t>(transcript.size()) && usage.prompt_tokens == sum.prompt_tokens &&
           usage.completion_tokens == sum.completion_tokens;
}

ordered_json to_json(const InferenceResult& r) {
    ordered_json j;
    j["answer"] = r.answer;
    j["usage"] = ordered_json{{"calls", r.usage.calls},
                              {"prompt_tokens", r.usage.prompt_tokens},
                              {"completion_tokens", r.usage.completion_tokens},
                              {"wall_ms", r.usage.wall_ms}};
    j["topology"] = to_json(r.topology);
    j["label"] = r.topology.label();
    j["termination_reason"] = std::string(to_string(r.termination));
    j["transcript"] = ordered_json::array();
    for (const auto& e : r.transcript) {
        ordered_json ej;
        ej["round"] = e.round;
        ej["agent_id"] = e.agent_id;
        ej["role_name"] = e.role_name;
        ej["prompt_digest"] = e.prompt_digest;
        ej["reply_text"] = e.reply_text;
        ej["prompt_tokens"] = e.prompt_tokens;
        ej["completion_tokens"] = e.completion_tokens;
        ej["latency_ms"] = e.latency_ms;
        ej["note"] = e.note;
        j["transcript"].push_back(std::move(ej));
    }
    return j;
}

InferenceResult result_from_json(const json& j) {
    InferenceResult r;
    r.answer = j.at("answer").get<std::string>();
    const json& u = j.at("usage");
    r.usage.calls = u.at("calls").get<std::int64_t>();
    r.usage.prompt_tokens = u.at("prompt_tokens").get<std::int64_t>();
    r.usage.completion_tokens = u.at("completion_tokens").get<std::int64_t>();
    r.usage.wall_ms = u.at("wall_ms").get<std::int64_t>();
    r.topology = config_from_json(j.at("topology"));
    r.termination = termination_from_string(j.at("termination_reason").get<std::string>());
    for (const auto& ej : j.at("transcript")) {
        TranscriptEvent e;
        e.round = ej.at("round").get<int>();
        e.agent_id = ej.at("agent_id").get<int>();
        e.role_name = ej.at("role_name").get<std::string>();
        e.prompt_digest = ej.at("prompt_digest").get<std::string>();
        e.reply_text = ej.at("reply_text").get<std::string>();
        e.prompt_tokens = ej.at("prompt_tokens").get<std::int64_t>();
        e.completion_tokens = ej.at("completion_tokens").get<std::int64_t>();
        e.latency_ms = ej.at("latency_ms").get<std::int64_t>();
        e.note = ej.value("note", std::string{});
        r.transcript.push_back(std::move(e));
    }
    return r;
}

}  // namespace masorch::topology
