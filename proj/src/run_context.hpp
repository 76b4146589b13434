#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "masorch/engine.hpp"

namespace masorch::topology::detail {

// Thrown by RunContext::ask once the per-sample call ceiling is spent.
struct CeilingReached {};

struct Outcome {
    std::string answer;
    Termination termination = Termination::completed;
};

class RunContext {
public:
    RunContext(gateway::Gateway& gateway, const gateway::EndpointConfig& endpoint,
               const dataset::NormalizedSample& sample, gateway::UsageLedger* ledger, InferenceResult& result,
               const EngineOptions& options);

    /// One model call: the agent's preamble as system message, then the media
    /// parts, the question block and `instruction` as the user message.
    /// Records one transcript event whether the call succeeds or not.
    std::string ask(int round, const AgentSpec& agent, std::string_view instruction, std::string note = {});

    /// Marks the most recent event (format failures and the like).
    void annotate_last(std::string note);

    [[nodiscard]] const dataset::NormalizedSample& sample() const { return sample_; }
    [[nodiscard]] const EngineOptions& options() const { return options_; }
    [[nodiscard]] InferenceResult& result() { return result_; }

private:
    gateway::Gateway& gateway_;
    const gateway::EndpointConfig& endpoint_;
    const dataset::NormalizedSample& sample_;
    gateway::UsageLedger* ledger_;
    InferenceResult& result_;
    const EngineOptions& options_;
    std::vector<gateway::Part> media_;
    std::string question_block_;
};

std::vector<AgentSpec> assign_roles(RunContext& ctx, const TopologyConfig& config, int k);

Outcome run_recipe(RunContext& ctx, const TopologyConfig& config, const std::vector<AgentSpec>& agents);

}  // namespace masorch::topology::detail
