#include "masorch/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "masorch/digest.hpp"
#include "masorch/error.hpp"

namespace masorch::run {

using nlohmann::json;
using nlohmann::ordered_json;

void CampaignConfig::validate() const {
    if (run_id.empty()) throw InvalidInput("run_id must not be empty");
    if (workers < 1) throw InvalidInput("workers must be >= 1");
    if (max_samples && *max_samples < 1) throw InvalidInput("max_samples must be >= 1");
    if (method_configs.empty()) throw InvalidInput("at least one method config is required");
    if (checkpoint_path.empty()) throw InvalidInput("checkpoint_path must not be empty");
    if (call_ceiling < 1) throw InvalidInput("call_ceiling must be >= 1");
    if (eval::is_judge_backed(protocol) && !judge)
        throw InvalidInput(std::string(eval::to_string(protocol)) + " requires a judge endpoint");
    for (const auto& m : method_configs) m.validate();
    endpoint.validate();
    if (judge) judge->endpoint.validate();
}

ordered_json to_json(const CampaignConfig& c) {
    ordered_json j;
    j["run_id"] = c.run_id;
    j["dataset_path"] = c.dataset_path.string();
    j["dataset_format"] = c.dataset_format == dataset::Format::mapping_spec ? "mapping-spec" : "native-jsonl";
    j["lenient"] = c.lenient;
    j["method_configs"] = ordered_json::array();
    for (const auto& m : c.method_configs) j["method_configs"].push_back(topology::to_json(m));
    j["endpoint"] = gateway::to_json(c.endpoint);
    j["judge"] = c.judge ? eval::to_json(*c.judge) : ordered_json(nullptr);
    j["protocol"] = std::string(eval::to_string(c.protocol));
    j["workers"] = c.workers;
    j["max_samples"] = c.max_samples ? ordered_json(*c.max_samples) : ordered_json(nullptr);
    j["seed"] = c.seed;
    j["checkpoint_path"] = c.checkpoint_path.string();
    j["skip_connectivity"] = c.skip_connectivity;
    j["call_ceiling"] = c.call_ceiling;
    j["experience_store"] = c.experience_store ? ordered_json(c.experience_store->string()) : ordered_json(nullptr);
    j["frame_budget"] = ordered_json{{"min", c.frame_budget.min_frames}, {"max", c.frame_budget.max_frames}};
    return j;
}

CampaignConfig campaign_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw InvalidInput("campaign config must be a JSON object");
    auto resolve = [&base_dir](const std::string& p) -> std::filesystem::path {
        std::filesystem::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    CampaignConfig c;
    try {
        c.run_id = j.at("run_id").get<std::string>();
        c.dataset_path = resolve(j.at("dataset_path").get<std::string>());
        const auto fmt_name = j.value("dataset_format", std::string("native-jsonl"));
        if (fmt_name == "mapping-spec") c.dataset_format = dataset::Format::mapping_spec;
        else if (fmt_name != "native-jsonl") throw InvalidInput("unknown dataset_format '" + fmt_name + "'");
        c.lenient = j.value("lenient", false);
        for (const auto& m : j.at("method_configs")) c.method_configs.push_back(topology::config_from_json(m));
        c.endpoint = gateway::endpoint_from_json(j.at("endpoint"));
        if (auto it = j.find("judge"); it != j.end() && !it->is_null()) c.judge = eval::judge_from_json(*it);
        c.protocol = eval::protocol_from_string(j.value("protocol", std::string("RULE_MR")));
        c.workers = j.value("workers", 1);
        if (auto it = j.find("max_samples"); it != j.end() && !it->is_null()) c.max_samples = it->get<int>();
        c.seed = j.value("seed", std::uint64_t{0});
        c.checkpoint_path =
            resolve(j.value("checkpoint_path", std::string("runs/") + c.run_id + ".checkpoint.jsonl"));
        c.skip_connectivity = j.value("skip_connectivity", false);
        c.call_ceiling = j.value("call_ceiling", topology::kDefaultCallCeiling);
        if (auto it = j.find("experience_store"); it != j.end() && !it->is_null())
            c.experience_store = resolve(it->get<std::string>());
        if (auto it = j.find("frame_budget"); it != j.end() && it->is_object()) {
            c.frame_budget.min_frames = it->value("min", c.frame_budget.min_frames);
            c.frame_budget.max_frames = it->value("max", c.frame_budget.max_frames);
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("campaign config: ") + e.what());
    }
    c.validate();
    return c;
}

ordered_json to_json(const CampaignSummary& s) {
    ordered_json j;
    j["rows"] = ordered_json::array();
    for (const auto& r : s.rows) {
        j["rows"].push_back(ordered_json{{"method", r.method},
                                         {"n", r.n},
                                         {"accuracy", r.accuracy},
                                         {"avg_tokens", r.avg_tokens},
                                         {"avg_latency_ms", r.avg_latency_ms},
                                         {"avg_calls", r.avg_calls},
                                         {"right", r.right},
                                         {"wrong", r.wrong},
                                         {"format_error", r.format_error},
                                         {"others", r.others}});
    }
    j["records"] = s.records;
    j["ambiguous_count"] = s.ambiguous_count;
    j["api_error_count"] = s.api_error_count;
    j["quarantined_count"] = s.quarantined_count;
    j["new_inferences"] = s.new_inferences;
    j["new_evaluations"] = s.new_evaluations;
    j["skipped"] = s.skipped;
    j["prompt_tokens"] = s.prompt_tokens;
    j["completion_tokens"] = s.completion_tokens;
    j["wall_ms"] = s.wall_ms;
    j["cancelled"] = s.cancelled;
    return j;
}

eval::Verdict grade(eval::Evaluator& evaluator, eval::Protocol protocol, const dataset::NormalizedSample& sample,
                    const topology::InferenceResult& result, const eval::JudgeConfig* judge) {
    const bool needs_mcq = protocol != eval::Protocol::VLM_SJ;
    if (needs_mcq && !eval::rule_gradable(sample)) {
        eval::Verdict v;
        v.protocol = protocol;
        v.status = eval::Status::Ambiguous;
        v.detail = fmt::format("not gradable under {}: {} sample", eval::to_string(protocol),
                               dataset::to_string(sample.answer_type));
        return v;
    }
    return evaluator.evaluate(protocol, sample, result.answer, judge);
}

std::vector<CheckpointRecord> evaluated_records(const std::filesystem::path& checkpoint,
                                                const std::optional<std::string>& run_id,
                                                const std::optional<eval::Protocol>& protocol) {
    std::vector<CheckpointRecord> out;
    for (auto& [key, rec] : scan_checkpoint(checkpoint)) {
        if (rec.status != RecordStatus::evaluated) continue;
        if (run_id && rec.run_id != *run_id) continue;
        if (protocol && rec.protocol != *protocol) continue;
        out.push_back(std::move(rec));
    }
    return out;
}

namespace {

struct WorkItem {
    const dataset::NormalizedSample* sample;
    const topology::TopologyConfig* config;
    std::string hash;
    std::uint64_t order;
};

}  // namespace

CampaignSummary run_campaign(const CampaignConfig& config, gateway::Gateway& gateway, const CampaignHooks& hooks) {
    const auto started = std::chrono::steady_clock::now();
    config.validate();

    auto loaded = dataset::load_dataset(config.dataset_path, config.dataset_format, {config.lenient});
    auto& samples = loaded.samples;
    if (config.max_samples && samples.size() > static_cast<std::size_t>(*config.max_samples))
        samples.resize(static_cast<std::size_t>(*config.max_samples));

    // The scripted backend is in-process; probing it would only add a call.
    if (!config.skip_connectivity) {
        auto probe = [&gateway](const gateway::EndpointConfig& ep, std::string_view what) {
            if (ep.is_mock()) return;
            const auto d = gateway.check_connectivity(ep);
            if (!d.reachable) throw ApiError(fmt::format("{} endpoint '{}' unreachable: {}", what, ep.name, d.detail));
        };
        probe(config.endpoint, "model");
        if (config.judge) probe(config.judge->endpoint, "judge");
    }

    std::optional<topology::ExperienceStore> store;
    if (config.experience_store) store.emplace(*config.experience_store);

    if (config.checkpoint_path.has_parent_path()) std::filesystem::create_directories(config.checkpoint_path.parent_path());
    CampaignSummary summary;
    summary.quarantined_count = auto_cleanse(config.checkpoint_path).quarantined.size();
    auto state = scan_checkpoint(config.checkpoint_path);

    std::vector<WorkItem> items;
    for (const auto& s : samples) {
        for (const auto& m : config.method_configs) {
            std::string hash = config_hash(m, config.endpoint.name, config.protocol);
            const auto order = digest_u64(fmt::format("{}|{}|{}", config.seed, s.id, hash));
            items.push_back({&s, &m, std::move(hash), order});
        }
    }
    std::stable_sort(items.begin(), items.end(), [](const WorkItem& a, const WorkItem& b) { return a.order < b.order; });

    topology::EngineOptions engine_options;
    engine_options.call_ceiling = config.call_ceiling;
    engine_options.store = store ? &*store : nullptr;
    engine_options.frame_budget = config.frame_budget;
    topology::Engine engine(gateway, engine_options);
    eval::Evaluator evaluator(gateway, config.frame_budget);
    const eval::JudgeConfig* judge = config.judge ? &*config.judge : nullptr;

    CheckpointWriter writer(config.checkpoint_path);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::atomic<std::size_t> inferred{0};
    std::atomic<std::size_t> evaluated{0};
    std::atomic<std::size_t> skipped{0};
    std::mutex progress_mu;
    std::mutex error_mu;
    std::exception_ptr failure;

    auto make_record = [&](const WorkItem& item, RecordStatus status, topology::InferenceResult result,
                           std::optional<eval::Verdict> verdict) {
        CheckpointRecord r;
        r.run_id = config.run_id;
        r.sample_id = item.sample->id;
        r.config_hash = item.hash;
        r.endpoint = config.endpoint.name;
        r.protocol = config.protocol;
        r.topology = *item.config;
        r.status = status;
        r.result = std::move(result);
        r.verdict = std::move(verdict);
        r.ts = utc_timestamp();
        return r;
    };

    auto worker = [&] {
        for (;;) {
            if (hooks.cancel && hooks.cancel->load()) return;
            {
                std::lock_guard lock(error_mu);
                if (failure) return;
            }
            const std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            const auto& item = items[i];
            try {
                const RecordKey key{item.sample->id, item.hash};
                const auto it = state.find(key);
                if (it != state.end() && it->second.status == RecordStatus::evaluated) {
                    ++skipped;
                } else {
                    topology::InferenceResult result;
                    if (it != state.end()) {
                        result = it->second.result;
                    } else {
                        result = engine.run(*item.config, *item.sample, config.endpoint);
                        writer.append(make_record(item, RecordStatus::inferred, result, std::nullopt));
                        ++inferred;
                    }
                    auto verdict = grade(evaluator, config.protocol, *item.sample, result, judge);
                    writer.append(make_record(item, RecordStatus::evaluated, std::move(result), std::move(verdict)));
                    ++evaluated;
                }
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
            const std::size_t d = ++done;
            if (hooks.progress) {
                std::lock_guard lock(progress_mu);
                hooks.progress(d, items.size());
            }
        }
    };

    const int nthreads = std::min<int>(config.workers, static_cast<int>(std::max<std::size_t>(1, items.size())));
    std::vector<std::thread> threads;
    for (int t = 1; t < nthreads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);

    summary.cancelled = done.load() < items.size();
    summary.new_inferences = inferred.load();
    summary.new_evaluations = evaluated.load();
    summary.skipped = skipped.load();

    std::set<RecordKey> in_scope;
    for (const auto& item : items) in_scope.insert({item.sample->id, item.hash});
    std::vector<analytics::ProfileRecord> profiles;
    for (const auto& rec : evaluated_records(config.checkpoint_path)) {
        if (!in_scope.count(rec.key())) continue;
        profiles.push_back(analytics::to_profile(rec));
        summary.prompt_tokens += rec.result.usage.prompt_tokens;
        summary.completion_tokens += rec.result.usage.completion_tokens;
        if (rec.verdict->status == eval::Status::Ambiguous) ++summary.ambiguous_count;
        if (rec.verdict->status == eval::Status::ApiError) ++summary.api_error_count;
    }
    summary.records = profiles.size();
    summary.rows = analytics::summarize(profiles);
    summary.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    return summary;
}

ReevalReport reevaluate(const ReevalOptions& options, gateway::Gateway& gateway) {
    if (!std::filesystem::exists(options.checkpoint_path))
        throw IOFailure("checkpoint " + options.checkpoint_path.string() + " does not exist");
    if (eval::is_judge_backed(options.protocol) && !options.judge)
        throw InvalidInput(std::string(eval::to_string(options.protocol)) + " requires a judge endpoint");

    const auto loaded = dataset::load_dataset(options.dataset_path, options.dataset_format);
    std::map<std::string, const dataset::NormalizedSample*> by_id;
    for (const auto& s : loaded.samples) by_id[s.id] = &s;

    auto_cleanse(options.checkpoint_path);
    const auto state = scan_checkpoint(options.checkpoint_path);

    // One source result per (sample, original config hash), first seen wins.
    std::map<RecordKey, const CheckpointRecord*> sources;
    for (const auto& [key, rec] : state) {
        if (options.run_id && rec.run_id != *options.run_id) continue;
        const RecordKey target{rec.sample_id, config_hash(rec.topology, rec.endpoint, options.protocol)};
        sources.emplace(target, &rec);
    }

    eval::Evaluator evaluator(gateway);
    const eval::JudgeConfig* judge = options.judge ? &*options.judge : nullptr;
    CheckpointWriter writer(options.checkpoint_path);
    ReevalReport report;
    for (const auto& [target, src] : sources) {
        if (auto it = state.find(target); it != state.end() && it->second.status == RecordStatus::evaluated) {
            ++report.already_done;
            continue;
        }
        const auto s = by_id.find(src->sample_id);
        if (s == by_id.end()) {
            ++report.missing_samples;
            continue;
        }
        CheckpointRecord r = *src;
        r.config_hash = target.config_hash;
        r.protocol = options.protocol;
        r.status = RecordStatus::evaluated;
        r.verdict = grade(evaluator, options.protocol, *s->second, r.result, judge);
        r.ts = utc_timestamp();
        writer.append(r);
        ++report.evaluated;
    }
    return report;
}

}  // namespace masorch::run
