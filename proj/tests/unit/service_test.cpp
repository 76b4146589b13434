#include <gtest/gtest.h>

#include <condition_variable>
#include <thread>

#include "masorch/error.hpp"
#include "masorch/service/canvas.hpp"
#include "masorch/service/jobs.hpp"
#include "masorch/service/method_registry.hpp"
#include "test_support.hpp"

using namespace masorch;
using namespace masorch::service;
using testsupport::TempDir;

namespace {

const std::filesystem::path kMini = std::filesystem::path(MASORCH_SOURCE_DIR) / "fixtures/mini.jsonl";

CanvasGraph graph(std::vector<CanvasNode> nodes, std::vector<std::pair<std::string, std::string>> edges) {
    return {std::move(nodes), std::move(edges)};
}

CanvasNode agent(std::string id, std::string role = {}) { return {std::move(id), NodeKind::agent, std::move(role)}; }

run::CampaignConfig job_config(const std::filesystem::path& checkpoint, const std::string& run_id,
                               gateway::EndpointConfig endpoint = gateway::mock_endpoint()) {
    run::CampaignConfig c;
    c.run_id = run_id;
    c.dataset_path = kMini;
    c.endpoint = std::move(endpoint);
    c.checkpoint_path = checkpoint;
    c.skip_connectivity = true;
    topology::TopologyConfig debate;
    debate.method = topology::Method::debate;
    c.method_configs = {debate};
    return c;
}

// Blocks every request until opened.
struct GateTransport : gateway::Transport {
    std::mutex mu;
    std::condition_variable cv;
    bool open = false;
    std::atomic<int> waiting{0};

    gateway::WireReply post(const gateway::WireRequest&) override {
        ++waiting;
        std::unique_lock lock(mu);
        cv.wait(lock, [this] { return open; });
        return {200, testsupport::chat_reply("Answer: (A)"), 1, {}};
    }
    void release() {
        {
            std::lock_guard lock(mu);
            open = true;
        }
        cv.notify_all();
    }
};

}  // namespace

TEST(Registry, NineteenEntriesThirteenExecutable) {
    const auto& reg = method_registry();
    ASSERT_EQ(reg.size(), 19u);
    std::size_t executable = 0;
    for (std::size_t i = 0; i < reg.size(); ++i) {
        EXPECT_EQ(reg[i].table_row, static_cast<int>(i) + 1);
        if (reg[i].executable) {
            ++executable;
            ASSERT_TRUE(reg[i].method.has_value());
            EXPECT_EQ(topology::method_id(*reg[i].method), reg[i].method_id);
        }
    }
    EXPECT_EQ(executable, 13u);
    EXPECT_EQ(find_method("debate")->display_name, "Debate");
    EXPECT_FALSE(find_method("moma")->executable);
    EXPECT_EQ(find_method("nope"), nullptr);
    const auto j = to_json(*find_method("debate"));
    EXPECT_EQ(j["taxonomy"]["interaction"], "Debate");
}

TEST(Registry, ConfigFromParams) {
    const auto c = config_from_params("debate", {{"agents", 4}, {"rounds", 3}});
    EXPECT_EQ(c.label(), "Debate-A4-R3");
    EXPECT_EQ(config_from_params("debate", nlohmann::json()).label(), "Debate-A3-R2");
    const auto roles = config_from_params("discussion", {{"role_mode", "fixed"}, {"role_roster", {"Surgeon"}}});
    EXPECT_EQ(roles.role_mode, topology::RoleMode::fixed);
    EXPECT_EQ(roles.role_roster, (std::vector<std::string>{"Surgeon"}));
    EXPECT_THROW(config_from_params("debate", {{"agents", 1}}), InvalidInput);
    EXPECT_THROW(config_from_params("debate", {{"agents", "3"}}), InvalidInput);
    EXPECT_THROW(config_from_params("moma", nlohmann::json::object()), InvalidInput);
    EXPECT_THROW(config_from_params("telepathy", nlohmann::json::object()), InvalidInput);
    EXPECT_THROW(config_from_params("debate", nlohmann::json::array()), InvalidInput);
}

TEST(Canvas, FanInCompilesToDebate) {
    const auto r = compile_canvas(graph({agent("a1"), agent("a2"), agent("a3"), {"agg", NodeKind::aggregator, ""}},
                                        {{"a1", "agg"}, {"a2", "agg"}, {"a3", "agg"}}));
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.config->label(), "Debate-A3-R1");
}

TEST(Canvas, LayersGiveRoundsAndAdjudicatorGivesDiscussion) {
    const auto r = compile_canvas(graph({agent("a1", "Surgeon"), agent("a2", "Radiologist"), agent("b1"), agent("b2"),
                                         {"judge", NodeKind::adjudicator, ""}},
                                        {{"a1", "b1"}, {"a2", "b2"}, {"a1", "b2"}, {"b1", "judge"}, {"b2", "judge"}}));
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.config->label(), "Discussion-A2-R2");
    EXPECT_EQ(r.config->role_roster, (std::vector<std::string>{"Surgeon", "Radiologist"}));
}

TEST(Canvas, ChainCompilesToSingleAgent) {
    const auto r = compile_canvas(graph({agent("a"), {"agg", NodeKind::aggregator, ""}}, {{"a", "agg"}}));
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.config->method, topology::Method::single);
}

TEST(Canvas, CycleReported) {
    const auto r = compile_canvas(graph({agent("a"), agent("b"), {"agg", NodeKind::aggregator, ""}},
                                        {{"a", "b"}, {"b", "a"}, {"b", "agg"}}));
    EXPECT_FALSE(r.ok());
    std::set<std::string> nodes;
    for (const auto& e : r.errors) nodes.insert(e.node_id);
    EXPECT_TRUE(nodes.count("a") && nodes.count("b"));
}

TEST(Canvas, StructuralErrors) {
    EXPECT_FALSE(compile_canvas({}).ok());
    EXPECT_FALSE(compile_canvas(graph({agent("a"), agent("b")}, {{"a", "b"}})).ok());
    EXPECT_FALSE(compile_canvas(graph({{"agg", NodeKind::aggregator, ""}}, {})).ok());
    EXPECT_FALSE(compile_canvas(graph({agent("a"), agent("a"), {"agg", NodeKind::aggregator, ""}}, {{"a", "agg"}})).ok());
    const auto dangling = compile_canvas(graph({agent("a"), {"agg", NodeKind::aggregator, ""}}, {{"a", "ghost"}}));
    EXPECT_FALSE(dangling.ok());
    const auto stray = compile_canvas(graph({agent("a"), agent("b"), agent("c"), {"agg", NodeKind::aggregator, ""}},
                                            {{"a", "agg"}, {"b", "agg"}}));
    ASSERT_FALSE(stray.ok());
    EXPECT_EQ(stray.errors.front().node_id, "c");
    const auto mixed_roles = compile_canvas(graph({agent("a", "Surgeon"), agent("b"), {"agg", NodeKind::aggregator, ""}},
                                                  {{"a", "agg"}, {"b", "agg"}}));
    ASSERT_FALSE(mixed_roles.ok());
    EXPECT_EQ(mixed_roles.errors.front().node_id, "b");
}

TEST(Canvas, JsonRoundTripAndMalformed) {
    const auto g = graph({agent("a", "Surgeon"), {"agg", NodeKind::aggregator, ""}}, {{"a", "agg"}});
    const auto back = canvas_from_json(nlohmann::json::parse(to_json(g).dump()));
    EXPECT_EQ(to_json(back).dump(), to_json(g).dump());
    const auto pairs = canvas_from_json(nlohmann::json::parse(
        R"({"nodes":[{"node_id":"a","kind":"agent"},{"node_id":"z","kind":"aggregator"}],"edges":[["a","z"]]})"));
    EXPECT_EQ(pairs.edges.front(), (std::pair<std::string, std::string>{"a", "z"}));
    EXPECT_THROW(canvas_from_json(nlohmann::json::parse(R"({"nodes":[{"node_id":"a","kind":"robot"}]})")),
                 InvalidInput);
    EXPECT_THROW(canvas_from_json(nlohmann::json::parse(R"({"edges":[]})")), InvalidInput);
}

TEST(Jobs, RunsToDoneWithMonotoneProgress) {
    TempDir dir;
    gateway::Gateway gw;
    JobManager jobs(gw);
    const auto id = jobs.submit(job_config(dir / "c.jsonl", "job-run"));
    std::size_t last = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto s = jobs.state(id);
        ASSERT_TRUE(s);
        ASSERT_GE(s->completed, last);
        last = s->completed;
        if (s->phase == JobPhase::done || s->phase == JobPhase::failed) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    ASSERT_TRUE(jobs.wait(id, 10000));
    const auto s = *jobs.state(id);
    EXPECT_EQ(s.phase, JobPhase::done) << s.error;
    EXPECT_EQ(s.completed, 10u);
    EXPECT_EQ(s.total, 10u);
    ASSERT_TRUE(s.summary);
    EXPECT_EQ(s.summary->records, 10u);
    const auto page = jobs.results(id, 0, 4);
    ASSERT_TRUE(page);
    EXPECT_EQ(page->total_records, 10u);
    EXPECT_EQ(page->records.size(), 4u);
    EXPECT_EQ(jobs.results(id, 2, 4)->records.size(), 2u);
    EXPECT_EQ(to_json(s)["phase"], "done");
    EXPECT_FALSE(jobs.state("missing"));
    EXPECT_FALSE(jobs.results("missing", 0, 10));
    EXPECT_FALSE(jobs.cancel("missing"));
}

TEST(Jobs, IdempotencyKeyReturnsSameJob) {
    TempDir dir;
    gateway::Gateway gw;
    JobManager jobs(gw);
    const auto a = jobs.submit(job_config(dir / "c.jsonl", "r"), "key-1");
    const auto b = jobs.submit(job_config(dir / "c.jsonl", "r"), "key-1");
    const auto c = jobs.submit(job_config(dir / "d.jsonl", "r2"), "key-2");
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_TRUE(jobs.wait(a, 10000));
    EXPECT_TRUE(jobs.wait(c, 10000));
}

TEST(Jobs, CancelQueuedAndRunning) {
    TempDir dir;
    gateway::Gateway gw;
    auto gate = std::make_shared<GateTransport>();
    gw.set_transport("gated", gate);
    JobManager jobs(gw, 1);
    const auto running = jobs.submit(job_config(dir / "a.jsonl", "a", testsupport::scripted_endpoint("gated")));
    for (int i = 0; i < 2000 && gate->waiting.load() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    ASSERT_GT(gate->waiting.load(), 0);
    const auto queued = jobs.submit(job_config(dir / "b.jsonl", "b"));
    EXPECT_EQ(jobs.state(queued)->phase, JobPhase::queued);
    EXPECT_EQ(jobs.state(running)->phase, JobPhase::running);

    EXPECT_TRUE(jobs.cancel(queued));
    EXPECT_EQ(jobs.state(queued)->phase, JobPhase::failed);
    EXPECT_FALSE(std::filesystem::exists(dir / "b.jsonl"));

    EXPECT_TRUE(jobs.cancel(running));
    gate->release();
    ASSERT_TRUE(jobs.wait(running, 10000));
    const auto s = *jobs.state(running);
    EXPECT_LT(s.completed, 10u);
    EXPECT_NE(s.phase, JobPhase::running);
}
