#include "masorch/engine.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

#include "masorch/error.hpp"
#include "masorch/text.hpp"
#include "run_context.hpp"

namespace masorch::topology {

namespace detail {

namespace {

std::string make_question_block(const dataset::NormalizedSample& s) {
    std::string out = "Question: " + s.question_text;
    if (!s.options.empty()) {
        out += "\nOptions:";
        for (const auto& o : s.options) out += fmt::format("\n{}: {}", o.label, o.text);
    }
    return out;
}

}  // namespace

RunContext::RunContext(gateway::Gateway& gateway, const gateway::EndpointConfig& endpoint,
                       const dataset::NormalizedSample& sample, gateway::UsageLedger* ledger, InferenceResult& result,
                       const EngineOptions& options)
    : gateway_(gateway),
      endpoint_(endpoint),
      sample_(sample),
      ledger_(ledger),
      result_(result),
      options_(options),
      media_(gateway::media_parts(sample.media, options.frame_budget)),
      question_block_(make_question_block(sample)) {}

std::string RunContext::ask(int round, const AgentSpec& agent, std::string_view instruction, std::string note) {
    if (result_.usage.calls >= options_.call_ceiling) throw CeilingReached{};

    gateway::ChatMessage user;
    user.role = gateway::Role::user;
    user.parts = media_;
    user.parts.emplace_back(gateway::TextPart{question_block_ + "\n\n" + std::string(instruction)});
    const std::vector<gateway::ChatMessage> messages{
        gateway::ChatMessage::system(agent.system_preamble.empty() ? role_preamble(agent.role_name)
                                                                   : agent.system_preamble),
        std::move(user)};

    TranscriptEvent ev;
    ev.round = round;
    ev.agent_id = agent.agent_id;
    ev.role_name = agent.role_name;
    ev.prompt_digest = gateway::messages_digest(messages);
    ev.note = std::move(note);

    auto record = [this](TranscriptEvent e) {
        result_.usage.calls += 1;
        result_.usage.prompt_tokens += e.prompt_tokens;
        result_.usage.completion_tokens += e.completion_tokens;
        result_.usage.wall_ms += e.latency_ms;
        result_.transcript.push_back(std::move(e));
    };

    try {
        const auto reply = gateway_.complete(endpoint_, messages, ledger_);
        ev.reply_text = reply.text;
        ev.prompt_tokens = reply.prompt_tokens;
        ev.completion_tokens = reply.completion_tokens;
        ev.latency_ms = reply.latency_ms;
        record(ev);
        return reply.text;
    } catch (const Error& e) {
        if (dynamic_cast<const ApiError*>(&e) == nullptr && dynamic_cast<const ProtocolError*>(&e) == nullptr) throw;
        ev.note = std::string("api_error: ") + e.what();
        record(std::move(ev));
        throw;
    }
}

void RunContext::annotate_last(std::string note) {
    if (result_.transcript.empty()) return;
    auto& n = result_.transcript.back().note;
    n = n.empty() ? std::move(note) : n + "; " + note;
}

std::vector<AgentSpec> assign_roles(RunContext& ctx, const TopologyConfig& config, int k) {
    if (config.role_mode != RoleMode::dynamic) return assign_static_roles(config.role_mode, config.role_roster, k);

    const AgentSpec coordinator{k, "Role Coordinator", {}};
    const std::string reply = ctx.ask(
        0, coordinator,
        fmt::format("Which {} medical specialists should examine this case? List the roles one role per line, "
                    "with no other text.",
                    k),
        "role_assignment");
    auto roles = parse_role_lines(reply);
    if (roles.empty()) {
        ctx.annotate_last("format_failure");
        return assign_static_roles(RoleMode::fixed, config.role_roster, k);
    }
    std::vector<AgentSpec> agents;
    for (int i = 0; i < k; ++i) {
        const std::string& role = roles[static_cast<std::size_t>(i) % roles.size()];
        agents.push_back({i, role, role_preamble(role)});
    }
    return agents;
}

}  // namespace detail

std::vector<AgentSpec> assign_static_roles(RoleMode mode, const std::vector<std::string>& roster, int k) {
    if (k < 1) throw InvalidInput("assign_roles: k must be >= 1");
    std::vector<AgentSpec> agents;
    if (mode == RoleMode::none) {
        for (int i = 0; i < k; ++i) agents.push_back({i, std::string(kGeneralAssistant), role_preamble(kGeneralAssistant)});
        return agents;
    }
    const auto& names = roster.empty() ? default_palette() : roster;
    for (int i = 0; i < k; ++i) {
        const std::string& role = names[static_cast<std::size_t>(i) % names.size()];
        agents.push_back({i, role, role_preamble(role)});
    }
    return agents;
}

std::vector<std::string> parse_role_lines(std::string_view reply) {
    std::vector<std::string> roles;
    for (const auto& raw : text::split_lines(reply)) {
        std::string line = text::trim(raw);
        // list markers: "-", "*", "1.", "2)"
        std::size_t start = 0;
        while (start < line.size() && (line[start] == '-' || line[start] == '*' || line[start] == ' ')) ++start;
        std::size_t digits = start;
        while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
        if (digits > start && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) start = digits + 1;
        line = text::trim(std::string_view(line).substr(start));
        while (!line.empty() && (line.back() == '.' || line.back() == ',' || line.back() == ';' || line.back() == ':'))
            line.pop_back();
        if (line.empty() || line.size() > 60) continue;
        if (!std::isalpha(static_cast<unsigned char>(line[0]))) continue;
        const bool clean = std::all_of(line.begin(), line.end(), [](char c) {
            return std::isalpha(static_cast<unsigned char>(c)) || c == ' ' || c == '-' || c == '\'' || c == '&' ||
                   c == '/' || c == '(' || c == ')';
        });
        if (!clean) continue;
        if (std::count(line.begin(), line.end(), ' ') >= 5) continue;
        roles.push_back(line);
    }
    return roles;
}

std::string role_preamble(std::string_view role_name) {
    return fmt::format(
        "You are a {}. Work only from the question, the options and any attached images or video frames. "
        "No external tools are available.",
        role_name);
}

Engine::Engine(gateway::Gateway& gateway, EngineOptions options) : gateway_(gateway), options_(options) {
    if (options_.call_ceiling < 1) throw InvalidInput("call ceiling must be >= 1");
}

std::vector<AgentSpec> Engine::assign_roles(const TopologyConfig& config, const dataset::NormalizedSample& sample,
                                            const gateway::EndpointConfig& endpoint, int k, InferenceResult& result,
                                            gateway::UsageLedger* ledger) {
    detail::RunContext ctx(gateway_, endpoint, sample, ledger, result, options_);
    return detail::assign_roles(ctx, config, k);
}

InferenceResult Engine::run(const TopologyConfig& config, const dataset::NormalizedSample& sample,
                            const gateway::EndpointConfig& endpoint, gateway::UsageLedger* ledger) {
    config.validate();
    if (text::trim(sample.question_text).empty()) throw InvalidInput("sample '" + sample.id + "' has an empty question");
    if (const auto problems = dataset::check_sample(sample); !problems.empty())
        throw InvalidInput("sample '" + sample.id + "' is invalid: " + problems.front());

    InferenceResult result;
    result.topology = config;
    detail::RunContext ctx(gateway_, endpoint, sample, ledger, result, options_);
    try {
        const auto agents = detail::assign_roles(ctx, config, config.effective_agents());
        auto outcome = detail::run_recipe(ctx, config, agents);
        result.answer = std::move(outcome.answer);
        result.termination = outcome.termination;
    } catch (const detail::CeilingReached&) {
        result.termination = Termination::round_limit;
        for (auto it = result.transcript.rbegin(); it != result.transcript.rend(); ++it) {
            if (!it->reply_text.empty()) {
                result.answer = it->reply_text;
                break;
            }
        }
    } catch (const ApiError&) {
        result.termination = Termination::protocol_error;
        result.answer.clear();
    } catch (const ProtocolError&) {
        result.termination = Termination::protocol_error;
        result.answer.clear();
    }
    return result;
}

}  // namespace masorch::topology
