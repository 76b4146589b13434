// masorch: run, re-grade and report multi-agent campaigns; validate
// datasets; serve the HTTP API.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "masorch/analytics.hpp"
#include "masorch/campaign.hpp"
#include "masorch/dataset.hpp"
#include "masorch/error.hpp"
#include "masorch/service/api_server.hpp"
#include "masorch/text.hpp"

namespace {

using namespace masorch;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInterrupted = 130;

std::atomic<bool> g_signalled{false};

extern "C" void on_signal(int) { g_signalled.store(true); }

void install_signal_handlers() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
}

// Usage problems surface as exit 2; file problems as exit 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOFailure("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError(path + ": " + e.what());
    }
}

dataset::Format parse_format(const std::string& s) {
    if (s == "native-jsonl") return dataset::Format::native_jsonl;
    if (s == "mapping-spec") return dataset::Format::mapping_spec;
    throw UsageError("unknown dataset format '" + s + "'");
}

struct EndpointFlags {
    std::string backend = "mock";
    std::string endpoint_config;
    std::string judge_config;
    std::string mock_script;

    gateway::EndpointConfig base() const {
        if (!endpoint_config.empty()) {
            auto j = read_json_file(endpoint_config);
            if (j.contains("base")) j = j["base"];
            return gateway::endpoint_from_json(j);
        }
        if (backend == "live") throw UsageError("--backend live requires --endpoint-config");
        return gateway::mock_endpoint("mock", mock_script);
    }

    std::optional<eval::JudgeConfig> judge() const {
        if (!judge_config.empty()) return eval::judge_from_json(read_json_file(judge_config));
        if (!endpoint_config.empty()) {
            const auto j = read_json_file(endpoint_config);
            if (j.contains("judge") && !j["judge"].is_null()) return eval::judge_from_json(j["judge"]);
        }
        return std::nullopt;
    }

    void add_to(CLI::App* cmd, bool with_backend) {
        if (with_backend)
            cmd->add_option("--backend", backend, "Model backend")->check(CLI::IsMember({"live", "mock"}));
        cmd->add_option("--endpoint-config", endpoint_config, "Endpoint JSON (an endpoint, or {base, judge})");
        cmd->add_option("--judge-config", judge_config, "Judge endpoint JSON");
        cmd->add_option("--mock-script", mock_script, "Mock reply script for the mock backend");
    }
};

eval::Protocol parse_protocol(const std::string& s) {
    try {
        return eval::protocol_from_string(s);
    } catch (const InvalidInput& e) {
        throw UsageError(e.what());
    }
}

void print_summary(const std::vector<analytics::SummaryRow>& rows) {
    std::size_t w = 6;
    for (const auto& r : rows) w = std::max(w, r.method.size());
    fmt::print("{:<{}}  {:>8}  {:>10}  {:>10}  {:>6}  {:>5}  {:>5}  {:>6}  {:>6}\n", "method", w, "accuracy",
               "avg_tokens", "latency_ms", "calls", "right", "wrong", "format", "others");
    for (const auto& r : rows) {
        fmt::print("{:<{}}  {:>8.4f}  {:>10.1f}  {:>10.1f}  {:>6.2f}  {:>5}  {:>5}  {:>6}  {:>6}\n", r.method, w,
                   r.accuracy, r.avg_tokens, r.avg_latency_ms, r.avg_calls, r.right, r.wrong, r.format_error,
                   r.others);
    }
}

std::vector<topology::TopologyConfig> method_configs(const std::string& methods, int agents, int rounds, int turns,
                                                     const std::string& role_mode,
                                                     const std::vector<std::string>& roster) {
    std::vector<std::string> ids;
    if (methods == "all") {
        for (auto m : topology::kAllMethods) ids.emplace_back(topology::method_id(m));
    } else {
        std::istringstream in(methods);
        for (std::string id; std::getline(in, id, ',');) ids.push_back(id);
    }
    std::vector<topology::TopologyConfig> out;
    for (const auto& raw : ids) {
        const std::string id(text::trim(raw));
        topology::TopologyConfig cfg;
        try {
            cfg.method = topology::method_from_id(id);
            cfg.role_mode = topology::role_mode_from_string(role_mode);
        } catch (const InvalidInput& e) {
            throw UsageError(e.what());
        }
        cfg.num_agents = agents;
        cfg.num_rounds = rounds;
        cfg.max_turns = turns;
        cfg.role_roster = roster;
        // Single-agent baselines ignore A; keep their configs canonical.
        if (cfg.method == topology::Method::single || cfg.method == topology::Method::cot) cfg.num_agents = 1;
        try {
            cfg.validate();
        } catch (const InvalidInput& e) {
            throw UsageError(e.what());
        }
        out.push_back(std::move(cfg));
    }
    return out;
}

struct RunFlags {
    std::string config_file;
    std::string method = "debate";
    int agents = 3;
    int rounds = 2;
    int max_turns = 3;
    std::string role_mode = "none";
    std::vector<std::string> roster;
    std::string dataset;
    std::string dataset_format = "native-jsonl";
    bool lenient = false;
    std::string protocol = "RULE_MR";
    int workers = 1;
    std::optional<int> max_samples;
    std::uint64_t seed = 0;
    std::string out;
    std::string run_id = "run";
    std::string experience_store;
    EndpointFlags endpoints;
};

int cmd_run(const RunFlags& f) {
    run::CampaignConfig cfg;
    if (!f.config_file.empty()) {
        const std::filesystem::path p(f.config_file);
        try {
            cfg = run::campaign_from_json(read_json_file(f.config_file), p.parent_path());
        } catch (const InvalidInput& e) {
            throw UsageError(e.what());
        }
    } else {
        if (f.dataset.empty()) throw UsageError("--dataset is required");
        if (f.max_samples && *f.max_samples < 1) throw UsageError("--max-samples must be >= 1");
        if (f.workers < 1) throw UsageError("--workers must be >= 1");
        cfg.run_id = f.run_id;
        cfg.dataset_path = f.dataset;
        cfg.dataset_format = parse_format(f.dataset_format);
        cfg.lenient = f.lenient;
        cfg.method_configs = method_configs(f.method, f.agents, f.rounds, f.max_turns, f.role_mode, f.roster);
        cfg.endpoint = f.endpoints.base();
        cfg.judge = f.endpoints.judge();
        cfg.protocol = parse_protocol(f.protocol);
        cfg.workers = f.workers;
        cfg.max_samples = f.max_samples;
        cfg.seed = f.seed;
        const std::filesystem::path out = f.out.empty() ? std::filesystem::path("runs") / f.run_id : std::filesystem::path(f.out);
        cfg.checkpoint_path = out / "checkpoint.jsonl";
        if (!f.experience_store.empty()) cfg.experience_store = f.experience_store;
    }
    try {
        cfg.validate();
    } catch (const InvalidInput& e) {
        throw UsageError(e.what());
    }
    if (!std::filesystem::exists(cfg.dataset_path)) throw IOFailure("dataset " + cfg.dataset_path.string() + " not found");

    gateway::Gateway gw;
    run::CampaignHooks hooks;
    hooks.cancel = &g_signalled;
    hooks.progress = [](std::size_t done, std::size_t total) {
        if (done == total || done % 25 == 0) fmt::print(stderr, "\r{}/{} items", done, total);
        if (done == total) fmt::print(stderr, "\n");
    };
    const auto summary = run::run_campaign(cfg, gw, hooks);

    const auto dir = cfg.checkpoint_path.parent_path();
    analytics::export_report(summary.rows, analytics::ReportFormat::csv, dir / "summary.csv");
    analytics::export_report(summary.rows, analytics::ReportFormat::json, dir / "summary.json");

    print_summary(summary.rows);
    fmt::print("{} evaluated records ({} new inferences, {} skipped, {} quarantined), checkpoint {}\n",
               summary.records, summary.new_inferences, summary.skipped, summary.quarantined_count,
               cfg.checkpoint_path.string());
    if (summary.cancelled) {
        fmt::print(stderr, "interrupted; rerun the same command to resume\n");
        return kExitInterrupted;
    }
    return kExitOk;
}

struct EvalFlags {
    std::string checkpoint;
    std::string dataset;
    std::string dataset_format = "native-jsonl";
    std::string protocol;
    std::string run_id;
    EndpointFlags endpoints;
};

int cmd_eval(const EvalFlags& f) {
    run::ReevalOptions opt;
    opt.checkpoint_path = f.checkpoint;
    opt.dataset_path = f.dataset;
    opt.dataset_format = parse_format(f.dataset_format);
    opt.protocol = parse_protocol(f.protocol);
    if (eval::is_judge_backed(opt.protocol)) {
        opt.judge = f.endpoints.judge();
        if (!opt.judge) throw UsageError(f.protocol + " requires --judge-config");
    }
    if (!f.run_id.empty()) opt.run_id = f.run_id;
    if (!std::filesystem::exists(opt.checkpoint_path)) throw IOFailure("checkpoint " + f.checkpoint + " not found");
    if (!std::filesystem::exists(opt.dataset_path)) throw IOFailure("dataset " + f.dataset + " not found");

    gateway::Gateway gw;
    const auto report = run::reevaluate(opt, gw);
    fmt::print("{} newly evaluated, {} already evaluated, {} missing samples\n", report.evaluated,
               report.already_done, report.missing_samples);
    return kExitOk;
}

struct ReportFlags {
    std::string checkpoint;
    std::string format = "csv";
    std::string out;
    std::string run_id;
    std::string protocol;
};

int cmd_report(const ReportFlags& f) {
    if (!std::filesystem::exists(f.checkpoint)) throw IOFailure("checkpoint " + f.checkpoint + " not found");
    std::optional<std::string> run_id;
    if (!f.run_id.empty()) run_id = f.run_id;
    std::optional<eval::Protocol> protocol;
    if (!f.protocol.empty()) protocol = parse_protocol(f.protocol);
    const auto records = run::evaluated_records(f.checkpoint, run_id, protocol);
    std::set<std::string> protocols;
    for (const auto& r : records) protocols.insert(std::string(eval::to_string(r.protocol)));
    if (protocols.size() > 1)
        throw UsageError(fmt::format("checkpoint holds verdicts under {}; pick one with --protocol", fmt::join(protocols, ", ")));
    std::vector<analytics::ProfileRecord> profiles;
    for (const auto& r : records) profiles.push_back(analytics::to_profile(r));
    const auto rows = analytics::summarize(profiles);

    std::string text;
    if (f.format == "csv") text = analytics::render_csv(rows);
    else if (f.format == "json") text = analytics::render_json(rows);
    else text = analytics::render_plot_data(rows);
    if (f.out.empty()) {
        std::cout << text;
        return kExitOk;
    }
    std::ofstream out(f.out, std::ios::trunc | std::ios::binary);
    if (!out) throw IOFailure("cannot write " + f.out);
    out << text;
    if (!out.flush()) throw IOFailure("write to " + f.out + " failed");
    fmt::print("{} rows written to {}\n", rows.size(), f.out);
    return kExitOk;
}

int cmd_validate(const std::string& path, const std::string& format) {
    if (!std::filesystem::exists(path)) throw IOFailure("dataset " + path + " not found");
    if (parse_format(format) == dataset::Format::mapping_spec) {
        const auto loaded = dataset::load_dataset(path, dataset::Format::mapping_spec, {true});
        for (const auto& s : loaded.skipped) fmt::print("line {}: FAIL {} {}\n", s.line, s.reason, s.detail);
        fmt::print("{} pass, {} fail\n", loaded.samples.size(), loaded.skipped.size());
        return loaded.skipped.empty() ? kExitOk : kExitFailure;
    }
    const auto report = dataset::validate_dataset(path);
    for (const auto& r : report.records) {
        if (!r.ok) fmt::print("line {} ({}): FAIL {}\n", r.line, r.id, fmt::join(r.reasons, ", "));
    }
    fmt::print("{} pass, {} fail\n", report.pass_count(), report.fail_count());
    return report.fail_count() == 0 ? kExitOk : kExitFailure;
}

struct ServeFlags {
    std::string host = "127.0.0.1";
    int port = service::kDefaultPort;
    int max_running_jobs = 1;
    std::string workspace;
    std::string data_dir;
    EndpointFlags endpoints;
};

int cmd_serve(const ServeFlags& f) {
    service::ServerOptions opt;
    opt.host = f.host;
    opt.port = f.port;
    opt.max_running_jobs = f.max_running_jobs;
    opt.base = f.endpoints.base();
    if (auto j = f.endpoints.judge()) opt.judge = j->endpoint;
    opt.workspace = f.workspace;
    opt.data_dir = f.data_dir;

    gateway::Gateway gw;
    service::ApiServer server(gw, opt);
    if (!server.bind()) {
        fmt::print(stderr, "error: cannot bind {}:{} (address in use?)\n", f.host, f.port);
        return kExitFailure;
    }
    fmt::print("listening on http://{}:{}/v1\n", f.host, server.port());
    std::fflush(stdout);
    std::atomic<bool> finished{false};
    std::thread t([&server, &finished] {
        server.serve();
        finished = true;
    });
    while (!g_signalled.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    // stop() is a no-op until the listener loop has started.
    while (!finished.load()) {
        server.stop();
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    t.join();
    fmt::print("shut down\n");
    return kExitOk;
}

int cmd_fixture(std::uint64_t seed, int n, bool text_only, const std::string& out) {
    if (n < 1) throw UsageError("--n must be >= 1");
    const auto samples =
        dataset::make_fixture(seed, n, text_only ? dataset::FixtureMix::mcq_text_only() : dataset::FixtureMix{});
    const std::filesystem::path p(out);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    dataset::save_dataset(p, samples);
    fmt::print("{} samples written to {}\n", samples.size(), out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent orchestration and evaluation engine"};
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "Run a campaign and print the summary");
    run_cmd->add_option("--config", run_flags.config_file, "Campaign config JSON (overrides the other flags)");
    run_cmd->add_option("--method", run_flags.method, "Method id, comma-separated list, or 'all'");
    run_cmd->add_option("--agents", run_flags.agents, "Agents A");
    run_cmd->add_option("--rounds", run_flags.rounds, "Rounds R");
    run_cmd->add_option("--max-turns", run_flags.max_turns, "Turn budget for the conversational method");
    run_cmd->add_option("--role-mode", run_flags.role_mode, "none, fixed or dynamic");
    run_cmd->add_option("--roster", run_flags.roster, "Role names for fixed role mode");
    run_cmd->add_option("--dataset", run_flags.dataset, "Dataset path");
    run_cmd->add_option("--dataset-format", run_flags.dataset_format, "native-jsonl or mapping-spec");
    run_cmd->add_flag("--lenient", run_flags.lenient, "Skip invalid records instead of failing");
    run_cmd->add_option("--protocol", run_flags.protocol, "VLM_SJ, VLM_EC, RULE_MR, RULE_FL or RULE_EM");
    run_cmd->add_option("--workers", run_flags.workers, "Concurrent workers");
    run_cmd->add_option("--max-samples", run_flags.max_samples, "Use only the first N samples");
    run_cmd->add_option("--seed", run_flags.seed, "Work-order seed");
    run_cmd->add_option("--out", run_flags.out, "Output directory (checkpoint and summaries)");
    run_cmd->add_option("--run-id", run_flags.run_id, "Run identifier");
    run_cmd->add_option("--experience-store", run_flags.experience_store, "Persistent reflection store (JSONL)");
    run_flags.endpoints.add_to(run_cmd, true);

    EvalFlags eval_flags;
    auto* eval_cmd = app.add_subcommand("eval", "Re-grade stored results under another protocol");
    eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--dataset", eval_flags.dataset, "Dataset the checkpoint was run on")->required();
    eval_cmd->add_option("--dataset-format", eval_flags.dataset_format, "native-jsonl or mapping-spec");
    eval_cmd->add_option("--protocol", eval_flags.protocol, "Evaluation protocol")->required();
    eval_cmd->add_option("--run-id", eval_flags.run_id, "Only records of this run");
    eval_flags.endpoints.add_to(eval_cmd, false);

    ReportFlags report_flags;
    auto* report_cmd = app.add_subcommand("report", "Export per-method summaries");
    report_cmd->add_option("--checkpoint", report_flags.checkpoint, "Checkpoint file")->required();
    report_cmd->add_option("--format", report_flags.format, "csv, json or plot")
        ->check(CLI::IsMember({"csv", "json", "plot"}));
    report_cmd->add_option("--out", report_flags.out, "Output file (stdout when omitted)");
    report_cmd->add_option("--run-id", report_flags.run_id, "Only records of this run");
    report_cmd->add_option("--protocol", report_flags.protocol, "Only verdicts of this protocol");

    std::string validate_path;
    std::string validate_format = "native-jsonl";
    auto* validate_cmd = app.add_subcommand("validate", "Check a dataset against the sample schema");
    validate_cmd->add_option("dataset", validate_path, "Dataset path")->required();
    validate_cmd->add_option("--format", validate_format, "native-jsonl or mapping-spec");

    ServeFlags serve_flags;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
    serve_cmd->add_option("--host", serve_flags.host, "Bind address");
    serve_cmd->add_option("--port", serve_flags.port, "Port")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--max-running-jobs", serve_flags.max_running_jobs, "Concurrent campaign jobs")
        ->check(CLI::PositiveNumber);
    serve_cmd->add_option("--workspace", serve_flags.workspace, "Directory for uploaded media");
    serve_cmd->add_option("--data-dir", serve_flags.data_dir, "Base directory for relative job paths");
    serve_flags.endpoints.add_to(serve_cmd, true);

    std::uint64_t fixture_seed = 7;
    int fixture_n = 10;
    bool fixture_text_only = false;
    std::string fixture_out;
    auto* fixture_cmd = app.add_subcommand("fixture", "Write a deterministic synthetic dataset");
    fixture_cmd->add_option("--seed", fixture_seed, "Seed");
    fixture_cmd->add_option("--n", fixture_n, "Sample count");
    fixture_cmd->add_flag("--text-only", fixture_text_only, "MCQ text samples only");
    fixture_cmd->add_option("--out", fixture_out, "Output JSONL")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    install_signal_handlers();
    try {
        if (*run_cmd) return cmd_run(run_flags);
        if (*eval_cmd) return cmd_eval(eval_flags);
        if (*report_cmd) return cmd_report(report_flags);
        if (*validate_cmd) return cmd_validate(validate_path, validate_format);
        if (*serve_cmd) return cmd_serve(serve_flags);
        if (*fixture_cmd) return cmd_fixture(fixture_seed, fixture_n, fixture_text_only, fixture_out);
    } catch (const UsageError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const InvalidInput& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitFailure;
    }
    return kExitUsage;
}
