// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// required criterion fails.

#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "masorch/analytics.hpp"
#include "masorch/campaign.hpp"
#include "masorch/dataset.hpp"
#include "masorch/engine.hpp"
#include "masorch/evaluation.hpp"
#include "masorch/labels.hpp"
#include "masorch/mock_backend.hpp"
#include "masorch/service/api_server.hpp"
#include "masorch/voting.hpp"
#include "test_support.hpp"

using namespace masorch;
using topology::Method;

namespace {

const std::filesystem::path kSource(MASORCH_SOURCE_DIR);

struct Check {
    bool pass = true;
    std::string detail;

    void require(bool cond, const std::string& why) {
        if (!cond && pass) {
            pass = false;
            detail = why;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

topology::TopologyConfig config(Method m, int a, int r) {
    topology::TopologyConfig c;
    c.method = m;
    c.num_agents = (m == Method::single || m == Method::cot) ? 1 : a;
    c.num_rounds = r;
    return c;
}

Check corpus_purity() {
    Check c;
    const auto t0 = Clock::now();
    const auto corpus = testsupport::load_corpus(kSource / "tests/data/grading_corpus.jsonl");
    c.require(corpus.size() >= 30, fmt::format("corpus has {} entries", corpus.size()));
    const std::vector<eval::Protocol> protocols{eval::Protocol::RULE_MR, eval::Protocol::RULE_FL,
                                                eval::Protocol::RULE_EM};
    std::vector<eval::Verdict> first;
    for (int run = 0; run < 100 && c.pass; ++run) {
        std::size_t i = 0;
        for (const auto& e : corpus) {
            for (auto p : protocols) {
                const auto v = eval::evaluate_rule(p, e.sample, e.response);
                if (run == 0) {
                    first.push_back(v);
                    const auto it = e.expected.find(std::string(eval::to_string(p)));
                    if (it != e.expected.end()) {
                        c.require(eval::to_string(v.status) == it->second.status,
                                  fmt::format("{} {}: {} != {}", e.id, eval::to_string(p), eval::to_string(v.status),
                                              it->second.status));
                        if (p != eval::Protocol::RULE_EM)
                            c.require(v.extracted_label == it->second.label,
                                      fmt::format("{} {}: extracted label differs", e.id, eval::to_string(p)));
                    }
                } else {
                    c.require(v == first[i], fmt::format("{} {}: run {} differs", e.id, eval::to_string(p), run));
                }
                ++i;
            }
        }
    }

    // The three failure-taxonomy reference examples.
    const std::vector<std::pair<std::string, std::string>> examples{
        {"Max rounds reached. Proceeding with", "RoundLimit"},
        {"None of the above.", "NoAnswerClaim"},
        {"", "ParseFailure"}};
    for (const auto& [prefix, klass] : examples) {
        bool found = false;
        for (const auto& e : corpus) {
            const bool match = prefix.empty() ? e.response.empty() : e.response.rfind(prefix, 0) == 0;
            if (!match || !e.failure) continue;
            analytics::ProfileRecord rec;
            rec.termination = e.termination;
            rec.status = eval::status_from_string(e.judge_status.value_or(e.expected.at("RULE_MR").status));
            found = true;
            c.require(analytics::to_string(analytics::classify_failure(rec, e.response)) == klass,
                      fmt::format("{} does not classify as {}", e.id, klass));
        }
        c.require(found, "missing reference example for " + klass);
    }
    const double secs = seconds_since(t0);
    c.require(secs < 5.0, fmt::format("took {:.2f} s", secs));
    if (c.pass) c.detail = fmt::format("{} responses x 3 protocols x 100 runs identical, {:.2f} s", corpus.size(), secs);
    return c;
}

Check divergence() {
    Check c;
    const auto t0 = Clock::now();
    const auto pairs = testsupport::load_corpus(kSource / "tests/data/divergence_pairs.jsonl");
    gateway::Gateway gw;
    eval::Evaluator ev(gw);
    eval::JudgeConfig judge;
    judge.endpoint = testsupport::scripted_endpoint("judge");
    gw.set_transport(judge.endpoint.name, std::make_shared<testsupport::ScriptedTransport>(testsupport::semantic_judge_reply));
    int sj = 0;
    int em = 0;
    for (const auto& p : pairs) {
        sj += ev.evaluate(eval::Protocol::VLM_SJ, p.sample, p.response, &judge).status == eval::Status::Correct;
        em += ev.evaluate(eval::Protocol::RULE_EM, p.sample, p.response).status == eval::Status::Correct;
    }
    const double n = static_cast<double>(pairs.size());
    const double secs = seconds_since(t0);
    c.require(!pairs.empty(), "no divergence pairs");
    c.require(sj / n >= 0.9, fmt::format("VLM_SJ accuracy {:.3f} < 0.9", sj / n));
    c.require(em / n <= 0.1, fmt::format("RULE_EM accuracy {:.3f} > 0.1", em / n));
    c.require(secs < 10.0, fmt::format("took {:.2f} s", secs));
    if (c.pass)
        c.detail = fmt::format("{} records: VLM_SJ {:.3f}, RULE_EM {:.3f}, {:.2f} s", pairs.size(), sj / n, em / n, secs);
    return c;
}

Check call_counts() {
    Check c;
    const auto t0 = Clock::now();
    const auto sample = testsupport::mcq_sample();
    int configs = 0;
    for (Method m : topology::kAllMethods) {
        for (int a = 2; a <= 6; ++a) {
            for (int r = 1; r <= 3; ++r) {
                for (bool dynamic : {false, true}) {
                    gateway::Gateway gw;
                    auto mock = std::make_shared<gateway::MockTransport>(testsupport::unanimous_mock_script());
                    gw.set_transport("mock", mock);
                    auto cfg = config(m, a, r);
                    if (dynamic) cfg.role_mode = topology::RoleMode::dynamic;
                    topology::Engine engine(gw);
                    const auto res = engine.run(cfg, sample, gateway::mock_endpoint());
                    const auto expected = testsupport::oracle_calls(m, cfg.num_agents, r, cfg.max_turns, dynamic);
                    c.require(res.usage.calls == expected,
                              fmt::format("{}{}: {} calls, expected {}", cfg.label(), dynamic ? " dynamic" : "",
                                          res.usage.calls, expected));
                    c.require(res.usage.calls == mock->counters().calls, cfg.label() + ": mock counter differs");
                    c.require(res.conserves_usage(), cfg.label() + ": usage not conserved");
                    ++configs;
                }
            }
        }
    }
    {
        gateway::Gateway gw;
        topology::Engine engine(gw);
        const auto res = engine.run(config(Method::debate, 3, 2), sample, gateway::mock_endpoint());
        c.require(res.usage.calls == 7, fmt::format("Debate-A3-R2 made {} calls", res.usage.calls));
    }
    const double secs = seconds_since(t0);
    c.require(secs < 60.0, fmt::format("took {:.2f} s", secs));
    if (c.pass) c.detail = fmt::format("{} configurations exact, Debate-A3-R2 = 7, {:.2f} s", configs, secs);
    return c;
}

run::CampaignConfig mini_campaign(const std::filesystem::path& checkpoint) {
    run::CampaignConfig cfg;
    cfg.run_id = "acceptance";
    cfg.dataset_path = kSource / "fixtures/mini.jsonl";
    for (Method m : topology::kAllMethods) cfg.method_configs.push_back(config(m, 3, 2));
    cfg.endpoint = gateway::mock_endpoint();
    cfg.checkpoint_path = checkpoint;
    cfg.workers = 4;
    cfg.seed = 17;
    return cfg;
}

std::multiset<std::string> evaluated_multiset(const std::filesystem::path& p) {
    std::multiset<std::string> out;
    for (auto rec : run::evaluated_records(p)) {
        rec.ts.clear();
        out.insert(run::serialize_record(rec));
    }
    return out;
}

Check ledger_conservation() {
    Check c;
    const auto t0 = Clock::now();
    testsupport::TempDir dir;
    gateway::Gateway gw;
    auto mock = std::make_shared<gateway::MockTransport>(testsupport::unanimous_mock_script());
    gw.set_transport("mock", mock);
    const auto summary = run::run_campaign(mini_campaign(dir / "c.jsonl"), gw);
    std::int64_t prompt = 0;
    std::int64_t completion = 0;
    std::int64_t calls = 0;
    const auto records = run::evaluated_records(dir / "c.jsonl");
    for (const auto& r : records) {
        prompt += r.result.usage.prompt_tokens;
        completion += r.result.usage.completion_tokens;
        calls += r.result.usage.calls;
        c.require(r.result.conserves_usage(), r.sample_id + ": transcript and usage disagree");
    }
    const auto counters = mock->counters();
    c.require(records.size() == 130, fmt::format("{} evaluated records", records.size()));
    c.require(summary.prompt_tokens == prompt && prompt == counters.prompt_tokens,
              fmt::format("prompt tokens {} / {} / {}", summary.prompt_tokens, prompt, counters.prompt_tokens));
    c.require(summary.completion_tokens == completion && completion == counters.completion_tokens,
              fmt::format("completion tokens {} / {} / {}", summary.completion_tokens, completion,
                          counters.completion_tokens));
    c.require(calls == counters.calls, fmt::format("calls {} / {}", calls, counters.calls));
    const double secs = seconds_since(t0);
    c.require(secs < 60.0, fmt::format("took {:.2f} s", secs));
    if (c.pass)
        c.detail = fmt::format("130 records, {} prompt + {} completion tokens, drift 0, {:.2f} s", prompt, completion,
                               secs);
    return c;
}

Check crash_resume() {
    Check c;
    testsupport::TempDir dir;
    const auto reference = dir / "reference.jsonl";
    {
        gateway::Gateway gw;
        run::run_campaign(mini_campaign(reference), gw);
    }
    const auto expected = evaluated_multiset(reference);
    const auto bytes = testsupport::read_file(reference);
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> offset(0, bytes.size() - 1);
    for (int trial = 0; trial < 10; ++trial) {
        const auto cut = offset(rng);
        const auto path = dir / fmt::format("cut{}.jsonl", trial);
        testsupport::write_file(path, bytes.substr(0, cut));
        gateway::Gateway gw;
        run::run_campaign(mini_campaign(path), gw);
        c.require(evaluated_multiset(path) == expected, fmt::format("offset {} of {} diverges", cut, bytes.size()));
    }
    if (c.pass) c.detail = fmt::format("10 offsets, {} evaluated records each identical", expected.size());
    return c;
}

char majority_oracle(const std::vector<char>& v) {
    std::map<char, int> count;
    for (char x : v) ++count[x];
    int best = 0;
    for (const auto& [_, n] : count) best = std::max(best, n);
    for (char x : v)
        if (count[x] == best) return x;
    return 0;
}

char weighted_oracle(const std::vector<topology::Ballot>& v) {
    std::map<char, double> sum;
    for (const auto& b : v) sum[b.label] += b.weight;
    double best = -1.0;
    for (const auto& [_, w] : sum) best = std::max(best, w);
    for (const auto& b : v)
        if (sum[b.label] == best) return b.label;
    return 0;
}

Check voting_oracles() {
    Check c;
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> len(1, 9);
    std::uniform_int_distribution<int> letter(0, 4);
    std::uniform_int_distribution<int> tenth(0, 10);
    for (int i = 0; i < 1000; ++i) {
        std::vector<char> labels(static_cast<std::size_t>(len(rng)));
        for (auto& l : labels) l = static_cast<char>('A' + letter(rng));
        c.require(topology::majority_vote(labels) == majority_oracle(labels), "majority_vote disagrees with recount");
    }
    for (int i = 0; i < 1000; ++i) {
        std::vector<topology::Ballot> ballots(static_cast<std::size_t>(len(rng)));
        for (auto& b : ballots) b = {static_cast<char>('A' + letter(rng)), tenth(rng) / 10.0};
        c.require(topology::confidence_weighted_vote(ballots) == weighted_oracle(ballots),
                  "confidence_weighted_vote disagrees with recount");
    }
    std::uniform_int_distribution<int> acc(0, 20);
    std::uniform_int_distribution<int> cost(1, 40);
    for (int set = 0; set < 100; ++set) {
        std::vector<analytics::ParetoPoint> pts;
        for (int i = 0; i < 50; ++i)
            pts.push_back({fmt::format("p{}", i), acc(rng) / 20.0, static_cast<double>(cost(rng))});
        std::vector<analytics::ParetoPoint> oracle;
        for (const auto& p : pts) {
            bool dominated = false;
            for (const auto& q : pts) {
                dominated = dominated || (q.accuracy >= p.accuracy && q.avg_tokens <= p.avg_tokens &&
                                          (q.accuracy > p.accuracy || q.avg_tokens < p.avg_tokens));
            }
            if (!dominated) oracle.push_back(p);
        }
        c.require(analytics::pareto_frontier(pts) == oracle, fmt::format("pareto set {} disagrees", set));
    }
    if (c.pass) c.detail = "1000 majority, 1000 weighted, 100 x 50-point frontiers exact";
    return c;
}

Check label_round_trip() {
    Check c;
    int n = 0;
    for (Method m : topology::kAllMethods) {
        for (int a = 1; a <= 12; ++a) {
            for (int r = 1; r <= 6; ++r) {
                const auto label = topology::config_label(m, a, r);
                c.require(topology::parse_label(label) == topology::ParsedLabel{m, a, r}, label + " does not round-trip");
                ++n;
            }
        }
    }
    c.require(topology::config_label(Method::debate, 6, 2) == "Debate-A6-R2", "Debate-A6-R2 label differs");
    c.require(topology::parse_label("Debate-A6-R2") == topology::ParsedLabel{Method::debate, 6, 2},
              "Debate-A6-R2 does not parse");
    if (c.pass) c.detail = fmt::format("{} labels round-trip, Debate-A6-R2 included", n);
    return c;
}

Check frame_sampler() {
    Check c;
    for (int n = 1; n <= 500; ++n) {
        const auto idx = dataset::sample_frames(n, 4, 8);
        const int len = static_cast<int>(idx.size());
        c.require(len >= std::min(4, n) && len <= std::min(8, n), fmt::format("n={}: length {}", n, len));
        c.require(std::is_sorted(idx.begin(), idx.end()) && std::adjacent_find(idx.begin(), idx.end()) == idx.end(),
                  fmt::format("n={}: not strictly increasing", n));
        c.require(idx.front() >= 0 && idx.back() < n, fmt::format("n={}: out of bounds", n));
        if (len >= 2) c.require(idx.front() == 0 && idx.back() == n - 1, fmt::format("n={}: endpoints missing", n));
    }
    c.require(dataset::sample_frames(100, 4, 8) == std::vector<int>{0, 14, 28, 42, 56, 70, 84, 99},
              "spot value for 100 frames differs");
    if (c.pass) c.detail = "frame_count 1..500 with budget [4,8], spot value 100 matches";
    return c;
}

Check console_end_to_end() {
    Check c;
    testsupport::TempDir dir;
    gateway::Gateway gw;
    service::ServerOptions opts;
    opts.port = 0;
    opts.workspace = dir / "uploads";
    opts.data_dir = dir.path();
    service::ApiServer server(gw, opts);
    if (!server.bind()) return {false, "cannot bind"};
    std::thread t([&server] { server.serve(); });
    httplib::Client client("127.0.0.1", server.port());
    client.set_read_timeout(60, 0);
    for (int i = 0; i < 200 && !client.Get("/v1/methods"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    using nlohmann::json;
    auto post = [&](const std::string& path, const json& body) -> json {
        auto res = client.Post(path, body.dump(), "application/json");
        return res ? json::parse(res->body) : json();
    };

    const auto qt = post("/v1/quicktest", {{"method", "debate"},
                                           {"params", {{"agents", 3}, {"rounds", 2}}},
                                           {"question", "Which organism?"},
                                           {"options", {"Neisseria gonorrhoeae", "Chlamydia trachomatis"}},
                                           {"gold_label", "A"}});
    c.require(qt.contains("profile") && qt["profile"]["calls"] == 7, "quicktest calls != 7");

    json graph{{"nodes", json::array()}, {"edges", json::array()}};
    for (const char* id : {"a1", "a2", "a3"}) {
        graph["nodes"].push_back({{"node_id", id}, {"kind", "agent"}});
        graph["edges"].push_back({{"from", id}, {"to", "agg"}});
    }
    graph["nodes"].push_back({{"node_id", "agg"}, {"kind", "aggregator"}});
    const auto compiled = post("/v1/topologies/compile", graph);
    c.require(compiled.value("method_id", "") == "debate" && compiled.value("num_agents", 0) == 3,
              "fan-in graph did not compile to debate A=3");

    auto closed = json::parse(gateway::to_json(gateway::mock_endpoint()).dump());
    closed["name"] = "closed";
    closed["base_url"] = fmt::format("http://127.0.0.1:{}/v1", testsupport::closed_port());
    closed["max_retries"] = 0;
    c.require(post("/v1/endpoints/test", closed).value("reachable", true) == false, "closed port reported reachable");

    json methods = json::array();
    for (Method m : topology::kAllMethods)
        methods.push_back(json::parse(topology::to_json(config(m, 3, 2)).dump()));
    const auto job = post("/v1/jobs", {{"run_id", "console"},
                                       {"dataset_path", (kSource / "fixtures/mini.jsonl").string()},
                                       {"method_configs", methods},
                                       {"checkpoint_path", "console.jsonl"}});
    const auto id = job.value("job_id", "");
    json state;
    for (int i = 0; i < 3000 && !id.empty(); ++i) {
        auto res = client.Get("/v1/jobs/" + id);
        if (res) state = json::parse(res->body);
        if (state.value("phase", "") == "done" || state.value("phase", "") == "failed") break;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    c.require(state.value("phase", "") == "done", "batch job did not finish");
    c.require(state.contains("summary") && state["summary"].is_object() && state["summary"]["rows"].size() == 13,
              "batch summary does not have one row per method");
    server.stop();
    t.join();
    if (c.pass) c.detail = "quicktest calls 7, fan-in -> debate A=3, closed port unreachable, 13-row batch done";
    return c;
}

}  // namespace

int main() {
    struct Criterion {
        std::string name;
        std::function<Check()> run;
        bool primary;
    };
    const std::vector<Criterion> criteria{
        {"protocol purity and failure examples", corpus_purity, true},
        {"protocol divergence (VLM_SJ vs RULE_EM)", divergence, true},
        {"call-count contracts", call_counts, true},
        {"ledger conservation", ledger_conservation, true},
        {"crash/resume equivalence", crash_resume, true},
        {"voting and Pareto oracles", voting_oracles, true},
        {"label round-trip", label_round_trip, true},
        {"frame sampler", frame_sampler, true},
        {"console end-to-end", console_end_to_end, false},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Check result;
        try {
            result = cr.run();
        } catch (const std::exception& e) {
            result = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (result.pass ? "PASS " : "FAIL ") << cr.name << (cr.primary ? "" : " (informational)") << ": "
                  << result.detail << std::endl;
        if (!result.pass && cr.primary) ++failed;
    }
    std::cout << (failed == 0 ? "all required criteria pass" : fmt::format("{} required criteria failed", failed))
              << std::endl;
    return failed == 0 ? 0 : 1;
}
