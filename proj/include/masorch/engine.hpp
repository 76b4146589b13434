#pragma once

// Runs a collaboration method on one sample and returns the standard tuple.

#include <string>
#include <string_view>
#include <vector>

#include "masorch/dataset.hpp"
#include "masorch/experience_store.hpp"
#include "masorch/gateway.hpp"
#include "masorch/topology.hpp"

namespace masorch::topology {

inline constexpr int kDefaultCallCeiling = 64;

/// Role palette used when no roster is configured.
inline const std::vector<std::string>& default_palette() {
    static const std::vector<std::string> palette{"Surgeon", "Radiologist", "Pathologist", "Meta-Doctor"};
    return palette;
}

struct EngineOptions {
    int call_ceiling = kDefaultCallCeiling;
    /// Reflection memory for MDTeamGPT. Null gives every run its own empty store.
    ExperienceStore* store = nullptr;
    dataset::FrameBudget frame_budget;
};

/// Roles without a model call: none -> k General Assistants, fixed -> roster
/// cycled to length k (the default palette when the roster is empty).
std::vector<AgentSpec> assign_static_roles(RoleMode mode, const std::vector<std::string>& roster, int k);

/// Role names from a reply with one role per line. Bullets, numbering and
/// trailing punctuation are stripped; lines that do not look like a role name
/// are skipped. Empty on parse failure.
std::vector<std::string> parse_role_lines(std::string_view reply);

/// System preamble for an agent playing `role_name`.
std::string role_preamble(std::string_view role_name);

class Engine {
public:
    explicit Engine(gateway::Gateway& gateway, EngineOptions options = {});

    /// Validates `config` and the sample, then runs the method. Gateway
    /// failures end the run with Termination::protocol_error and keep the
    /// partial transcript.
    InferenceResult run(const TopologyConfig& config, const dataset::NormalizedSample& sample,
                        const gateway::EndpointConfig& endpoint, gateway::UsageLedger* ledger = nullptr);

    /// Roles for k agents. role_mode=dynamic spends exactly one model call,
    /// recorded in `result`.
    std::vector<AgentSpec> assign_roles(const TopologyConfig& config, const dataset::NormalizedSample& sample,
                                        const gateway::EndpointConfig& endpoint, int k, InferenceResult& result,
                                        gateway::UsageLedger* ledger = nullptr);

    [[nodiscard]] const EngineOptions& options() const { return options_; }

private:
    gateway::Gateway& gateway_;
    EngineOptions options_;
};

}  // namespace masorch::topology
