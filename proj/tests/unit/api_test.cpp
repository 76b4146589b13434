#include <gtest/gtest.h>

#include <thread>

#include <httplib.h>

#include "masorch/service/api_server.hpp"
#include "test_support.hpp"

using namespace masorch;
using testsupport::json;

namespace {

const std::filesystem::path kSource(MASORCH_SOURCE_DIR);

// Every response body lands in MASORCH_SCHEMA_OUT/<name>.json for the schema check.
void dump(const std::string& name, const std::string& body) {
    const std::filesystem::path dir(MASORCH_SCHEMA_OUT);
    std::filesystem::create_directories(dir);
    testsupport::write_file(dir / (name + ".json"), body);
}

class ApiServer : public ::testing::Test {
protected:
    void SetUp() override {
        service::ServerOptions opts;
        opts.port = 0;
        opts.workspace = dir_ / "uploads";
        opts.data_dir = dir_.path();
        server_ = std::make_unique<service::ApiServer>(gw_, opts);
        ASSERT_TRUE(server_->bind());
        thread_ = std::thread([this] { server_->serve(); });
        client_ = std::make_unique<httplib::Client>("127.0.0.1", server_->port());
        client_->set_read_timeout(30, 0);
        for (int i = 0; i < 200 && !client_->Get("/v1/methods"); ++i)
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    void TearDown() override {
        server_->stop();
        thread_.join();
    }

    json get(const std::string& path, int expect, const std::string& name = {}) {
        auto res = client_->Get(path);
        EXPECT_TRUE(res) << path;
        if (!res) return {};
        EXPECT_EQ(res->status, expect) << path << ": " << res->body;
        if (!name.empty()) dump(name, res->body);
        return json::parse(res->body);
    }
    json post(const std::string& path, const json& body, int expect, const std::string& name = {},
              const httplib::Headers& headers = {}) {
        auto res = client_->Post(path, headers, body.dump(), "application/json");
        EXPECT_TRUE(res) << path;
        if (!res) return {};
        EXPECT_EQ(res->status, expect) << path << ": " << res->body;
        if (!name.empty()) dump(name, res->body);
        return json::parse(res->body);
    }

    json wait_for_job(const std::string& id) {
        json st;
        for (int i = 0; i < 1000; ++i) {
            st = get("/v1/jobs/" + id, 200);
            if (st["phase"] == "done" || st["phase"] == "failed") break;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        return st;
    }

    testsupport::TempDir dir_;
    gateway::Gateway gw_;
    std::unique_ptr<service::ApiServer> server_;
    std::unique_ptr<httplib::Client> client_;
    std::thread thread_;
};

json quicktest_body() {
    return {{"method", "debate"},
            {"params", {{"agents", 3}, {"rounds", 2}}},
            {"question", "Burning urination and gram negative diplococci. Most likely organism?"},
            {"options", {"Neisseria gonorrhoeae", "Chlamydia trachomatis", "Treponema pallidum"}},
            {"gold_label", "A"}};
}

}  // namespace

TEST_F(ApiServer, MethodsCatalogue) {
    const auto methods = get("/v1/methods", 200, "methods");
    ASSERT_EQ(methods.size(), 19u);
    int executable = 0;
    for (const auto& m : methods) executable += m["executable"].get<bool>() ? 1 : 0;
    EXPECT_EQ(executable, 13);
    auto res = client_->Options("/v1/methods");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 204);
    EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST_F(ApiServer, GuideBundle) {
    const auto guide = get("/v1/guide", 200, "guide");
    EXPECT_EQ(guide["methods"].size(), 19u);
    EXPECT_EQ(guide["protocols"].size(), 5u);
}

TEST_F(ApiServer, EndpointsReadUpdateAndTest) {
    const auto current = get("/v1/endpoints", 200, "endpoints");
    EXPECT_EQ(current["base"]["base_url"], "mock://mock");
    EXPECT_TRUE(current["judge"].is_null());

    const auto reachable = post("/v1/endpoints/test", current["base"], 200, "endpoint_test");
    EXPECT_TRUE(reachable["reachable"].get<bool>());

    auto closed = current["base"];
    closed["name"] = "closed";
    closed["base_url"] = "http://127.0.0.1:" + std::to_string(testsupport::closed_port()) + "/v1";
    closed["max_retries"] = 0;
    const auto down = post("/v1/endpoints/test", closed, 200);
    EXPECT_FALSE(down["reachable"].get<bool>());
    EXPECT_TRUE(testsupport::contains(down["detail"].get<std::string>(), "transport error"));

    auto judge = current["base"];
    judge["name"] = "judge";
    auto res = client_->Put("/v1/endpoints", json{{"judge", judge}}.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(get("/v1/endpoints", 200)["judge"]["name"], "judge");
}

TEST_F(ApiServer, QuicktestDebateProfile) {
    const auto a = post("/v1/quicktest", quicktest_body(), 200, "quicktest");
    EXPECT_EQ(a["label"], "Debate-A3-R2");
    EXPECT_EQ(a["profile"]["calls"], 7);
    EXPECT_EQ(a["transcript"].size(), 7u);
    EXPECT_EQ(a["verdict"]["protocol"], "RULE_MR");
    const auto b = post("/v1/quicktest", quicktest_body(), 200);
    EXPECT_EQ(a["answer"], b["answer"]);
    EXPECT_EQ(a["profile"], b["profile"]);
}

TEST_F(ApiServer, QuicktestMultipartImage) {
    httplib::MultipartFormDataItems items{
        {"payload", quicktest_body().dump(), "", "application/json"},
        {"image", std::string("\x89PNG\r\n\x1a\nfake", 12), "scan.png", "image/png"}};
    auto res = client_->Post("/v1/quicktest", items);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200) << res->body;
    EXPECT_FALSE(std::filesystem::is_empty(dir_ / "uploads"));
}

TEST_F(ApiServer, QuicktestRejectsBadInput) {
    auto body = quicktest_body();
    body["method"] = "moma";
    const auto err = post("/v1/quicktest", body, 400, "error");
    EXPECT_TRUE(err.contains("error"));
    auto res = client_->Post("/v1/quicktest", "{not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
}

TEST_F(ApiServer, CompileTopology) {
    const json ok{{"nodes",
                   {{{"node_id", "a1"}, {"kind", "agent"}},
                    {{"node_id", "a2"}, {"kind", "agent"}},
                    {{"node_id", "a3"}, {"kind", "agent"}},
                    {{"node_id", "agg"}, {"kind", "aggregator"}}}},
                  {"edges", json::array({json::array({"a1", "agg"}), json::array({"a2", "agg"}), json::array({"a3", "agg"})})}};
    const auto compiled = post("/v1/topologies/compile", ok, 200, "compile_ok");
    EXPECT_EQ(compiled["method_id"], "debate");
    EXPECT_EQ(compiled["num_agents"], 3);

    json cyclic = ok;
    cyclic["edges"].push_back(json{{"from", "agg"}, {"to", "a1"}});
    const auto errs = post("/v1/topologies/compile", cyclic, 422, "compile_error");
    ASSERT_FALSE(errs["errors"].empty());
    EXPECT_TRUE(errs["errors"][0].contains("node_id"));
}

TEST_F(ApiServer, JobLifecycle) {
    const json body{{"run_id", "api-run"},
                    {"dataset_path", (kSource / "fixtures/mini.jsonl").string()},
                    {"method_configs", {{{"method_id", "debate"}, {"num_agents", 3}, {"num_rounds", 2}}}},
                    {"checkpoint_path", "runs/api.jsonl"}};
    const auto accepted = post("/v1/jobs", body, 202, "job_submit", {{"Idempotency-Key", "k1"}});
    const auto id = accepted["job_id"].get<std::string>();
    EXPECT_EQ(post("/v1/jobs", body, 202, {}, {{"Idempotency-Key", "k1"}})["job_id"], id);

    const auto st = wait_for_job(id);
    EXPECT_EQ(st["phase"], "done") << st.dump();
    dump("job_state", st.dump());
    const auto results = get("/v1/jobs/" + id + "/results", 200, "job_results");
    EXPECT_EQ(results["total_records"], 10);
    EXPECT_EQ(results["records"].size(), 10u);
    EXPECT_EQ(results["summary"]["rows"][0]["method"], "Debate-A3-R2");
    EXPECT_TRUE(std::filesystem::exists(dir_ / "runs/api.jsonl"));

    auto res = client_->Delete("/v1/jobs/" + id);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
}

TEST_F(ApiServer, JobErrors) {
    get("/v1/jobs/nope", 404, "not_found");
    get("/v1/jobs/nope/results", 404);
    auto res = client_->Delete("/v1/jobs/nope");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 404);
    post("/v1/jobs", json{{"run_id", "x"}}, 400);
    post("/v1/jobs",
         json{{"run_id", "x"}, {"dataset_path", "missing.jsonl"}, {"method_configs", {{{"method", "debate"}}}}}, 400);
}
