#pragma once

// Method x dataset campaigns with a worker pool, continuous checkpointing and
// restart deduplication.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "masorch/analytics.hpp"
#include "masorch/checkpoint.hpp"
#include "masorch/dataset.hpp"
#include "masorch/engine.hpp"
#include "masorch/evaluation.hpp"
#include "masorch/gateway.hpp"
#include "masorch/topology.hpp"

namespace masorch::run {

struct CampaignConfig {
    std::string run_id;
    std::filesystem::path dataset_path;
    dataset::Format dataset_format = dataset::Format::native_jsonl;
    bool lenient = false;
    std::vector<topology::TopologyConfig> method_configs;
    gateway::EndpointConfig endpoint;
    std::optional<eval::JudgeConfig> judge;
    eval::Protocol protocol = eval::Protocol::RULE_MR;
    int workers = 1;
    std::optional<int> max_samples;
    std::uint64_t seed = 0;
    std::filesystem::path checkpoint_path;
    bool skip_connectivity = false;
    int call_ceiling = topology::kDefaultCallCeiling;
    std::optional<std::filesystem::path> experience_store;
    dataset::FrameBudget frame_budget;

    /// Throws InvalidInput when a field is out of range.
    void validate() const;
};

nlohmann::ordered_json to_json(const CampaignConfig& c);
/// Relative dataset and checkpoint paths resolve against `base_dir` when given.
CampaignConfig campaign_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct CampaignSummary {
    std::vector<analytics::SummaryRow> rows;
    std::size_t records = 0;  // evaluated records behind the rows
    std::size_t ambiguous_count = 0;
    std::size_t api_error_count = 0;
    std::size_t quarantined_count = 0;
    std::size_t new_inferences = 0;
    std::size_t new_evaluations = 0;
    std::size_t skipped = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t wall_ms = 0;
    bool cancelled = false;
};

nlohmann::ordered_json to_json(const CampaignSummary& s);

struct CampaignHooks {
    std::function<void(std::size_t done, std::size_t total)> progress;
    const std::atomic<bool>* cancel = nullptr;
};

/// Cleanses and scans the checkpoint, then infers and evaluates every
/// (sample, method) pair not yet evaluated. Setup failures throw before the
/// checkpoint is touched; per-sample model failures are recorded.
CampaignSummary run_campaign(const CampaignConfig& config, gateway::Gateway& gateway, const CampaignHooks& hooks = {});

struct ReevalOptions {
    std::filesystem::path checkpoint_path;
    std::filesystem::path dataset_path;
    dataset::Format dataset_format = dataset::Format::native_jsonl;
    eval::Protocol protocol = eval::Protocol::RULE_MR;
    std::optional<eval::JudgeConfig> judge;
    std::optional<std::string> run_id;  // restrict to one run
};

struct ReevalReport {
    std::size_t evaluated = 0;
    std::size_t already_done = 0;
    std::size_t missing_samples = 0;
};

/// Grades stored inference results under another protocol, appending one
/// evaluated record per (sample, config) without re-running inference.
ReevalReport reevaluate(const ReevalOptions& options, gateway::Gateway& gateway);

/// Evaluated records of the checkpoint (last record per key), optionally
/// restricted to one run and one protocol.
std::vector<CheckpointRecord> evaluated_records(const std::filesystem::path& checkpoint,
                                                const std::optional<std::string>& run_id = std::nullopt,
                                                const std::optional<eval::Protocol>& protocol = std::nullopt);

/// Grades a result, mapping samples a protocol cannot grade to Ambiguous.
eval::Verdict grade(eval::Evaluator& evaluator, eval::Protocol protocol, const dataset::NormalizedSample& sample,
                    const topology::InferenceResult& result, const eval::JudgeConfig* judge);

}  // namespace masorch::run
