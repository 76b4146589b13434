#include <gtest/gtest.h>

#include <thread>

#include <httplib.h>

#include "masorch/error.hpp"
#include "masorch/gateway.hpp"
#include "masorch/mock_backend.hpp"
#include "test_support.hpp"

using namespace masorch;
using namespace masorch::gateway;
using testsupport::json;

namespace {

EndpointConfig live(const std::string& name, const std::string& url) {
    EndpointConfig e;
    e.name = name;
    e.base_url = url;
    e.model_id = "m";
    e.timeout_ms = 2000;
    e.backoff_ms = 1;
    return e;
}

class StubServer {
public:
    explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/chat/completions", handler);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    [[nodiscard]] std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST(Gateway, DefaultsMatchRunSettings) {
    EndpointConfig e;
    EXPECT_EQ(e.max_tokens, 1024);
    EXPECT_DOUBLE_EQ(e.temperature, 0.1);
    const auto body = build_request_body(live("x", "http://h"), {ChatMessage::user("hi")});
    EXPECT_EQ(body["max_tokens"], 1024);
    EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.1);
    EXPECT_EQ(body["model"], "m");
    EXPECT_FALSE(body.contains("tools"));
}

TEST(Gateway, EstimateTokens) {
    EXPECT_EQ(estimate_tokens(""), 0);
    EXPECT_EQ(estimate_tokens("abcd"), 1);
    EXPECT_EQ(estimate_tokens("abcdefghi"), 3);
    std::int64_t prev = 0;
    std::string s;
    for (int i = 0; i < 200; ++i) {
        s.push_back('x');
        const auto t = estimate_tokens(s);
        ASSERT_GE(t, prev);
        ASSERT_EQ(t, (i + 1 + 3) / 4);
        prev = t;
    }
}

TEST(Gateway, MockRuleReplyWithEstimatedUsage) {
    MockScript script;
    const std::string reply = "The diagnosis is cholangitis, answer (A).";
    script.rules.push_back({"diagnosis", reply, -1.0, 200});
    Gateway gw;
    const auto ep = mock_endpoint("m1");
    gw.set_transport(ep.name, std::make_shared<MockTransport>(script));
    const auto r = gw.complete(ep, {ChatMessage::user("What is the diagnosis?")});
    EXPECT_EQ(r.text, reply);
    EXPECT_EQ(r.completion_tokens, (static_cast<std::int64_t>(reply.size()) + 3) / 4);
    EXPECT_EQ(r.finish_reason, FinishReason::stop);
}

TEST(Gateway, MockIsPureFunctionOfMessages) {
    Gateway gw1, gw2;
    const auto ep = mock_endpoint();
    const std::vector<ChatMessage> msgs{ChatMessage::system("sys"), ChatMessage::user("Q? A: x B: y")};
    const auto a = gw1.complete(ep, msgs);
    const auto b = gw1.complete(ep, msgs);
    const auto c = gw2.complete(ep, msgs);
    for (const auto* r : {&b, &c}) {
        EXPECT_EQ(a.text, r->text);
        EXPECT_EQ(a.prompt_tokens, r->prompt_tokens);
        EXPECT_EQ(a.completion_tokens, r->completion_tokens);
        EXPECT_EQ(a.latency_ms, r->latency_ms);
    }
}

TEST(Gateway, EmptyMessagesRejected) {
    Gateway gw;
    EXPECT_THROW(gw.complete(mock_endpoint(), {}), InvalidInput);
    EXPECT_THROW(gw.complete(mock_endpoint(), {ChatMessage{Role::user, {}}}), InvalidInput);
}

TEST(Gateway, FramesRequireVideo) {
    Gateway gw;
    ChatMessage m = ChatMessage::user("look");
    m.parts.push_back(FramesPart{{dataset::MediaKind::image, "a.png", std::nullopt}, {0}});
    EXPECT_THROW(gw.complete(mock_endpoint(), {m}), InvalidInput);
}

TEST(Gateway, RetriesExhaustedAfterMaxRetriesPlusOne) {
    Gateway gw;
    std::vector<int> sleeps;
    gw.set_sleeper([&](int ms) { sleeps.push_back(ms); });
    auto dead = std::make_shared<testsupport::DeadTransport>();
    auto ep = live("dead", "http://127.0.0.1:1");
    ep.max_retries = 2;
    gw.set_transport(ep.name, dead);
    UsageLedger ledger;
    EXPECT_THROW(gw.complete(ep, {ChatMessage::user("x")}, &ledger), ApiError);
    EXPECT_EQ(dead->attempts.load(), 3);
    EXPECT_EQ(sleeps.size(), 2u);
    ASSERT_EQ(ledger.size(), 3u);
    for (const auto& e : ledger.entries()) {
        EXPECT_FALSE(e.ok);
        EXPECT_EQ(e.prompt_tokens + e.completion_tokens, 0);
    }
}

TEST(Gateway, TransientStatusRetriedThenSucceeds) {
    struct Flaky : Transport {
        int n = 0;
        WireReply post(const WireRequest&) override {
            WireReply r;
            if (n++ < 2) {
                r.status = n == 1 ? 503 : 429;
                return r;
            }
            r.status = 200;
            r.body = testsupport::chat_reply("B");
            return r;
        }
    };
    Gateway gw;
    gw.set_sleeper([](int) {});
    auto flaky = std::make_shared<Flaky>();
    auto ep = live("flaky", "http://h");
    gw.set_transport(ep.name, flaky);
    UsageLedger ledger;
    const auto r = gw.complete(ep, {ChatMessage::user("x")}, &ledger);
    EXPECT_EQ(r.text, "B");
    EXPECT_EQ(flaky->n, 3);
    ASSERT_EQ(ledger.size(), 3u);
    EXPECT_EQ(ledger.entries().back().completion_tokens, 1);
    EXPECT_EQ(ledger.total_prompt_tokens(), 11);
}

TEST(Gateway, RefusalIsNotRetried) {
    auto scripted = std::make_shared<testsupport::ScriptedTransport>([](const std::string&) {
        return std::string("I cannot help with that.");
    });
    Gateway gw;
    auto ep = live("refuse", "http://h");
    gw.set_transport(ep.name, scripted);
    EXPECT_EQ(gw.complete(ep, {ChatMessage::user("x")}).text, "I cannot help with that.");
    EXPECT_EQ(scripted->calls(), 1u);
}

TEST(Gateway, MalformedPayloadIsProtocolError) {
    struct Garbage : Transport {
        WireReply post(const WireRequest&) override { return {200, R"({"choices": []})", 1, {}}; }
    };
    Gateway gw;
    auto ep = live("garbage", "http://h");
    gw.set_transport(ep.name, std::make_shared<Garbage>());
    EXPECT_THROW(gw.complete(ep, {ChatMessage::user("x")}), ProtocolError);
}

TEST(Gateway, UsageSynthesizedWhenAbsent) {
    auto scripted = std::make_shared<testsupport::ScriptedTransport>(
        [](const std::string&) { return std::string("abcdefgh"); }, false);
    Gateway gw;
    auto ep = live("nousage", "http://h");
    gw.set_transport(ep.name, scripted);
    const auto r = gw.complete(ep, {ChatMessage::user("abcd")});
    EXPECT_EQ(r.completion_tokens, 2);
    EXPECT_EQ(r.prompt_tokens, 1);
}

TEST(Gateway, CompleteDoesNotMutateMessages) {
    Gateway gw;
    std::vector<ChatMessage> msgs{ChatMessage::user("hello")};
    const auto before = messages_digest(msgs);
    gw.complete(mock_endpoint(), msgs);
    EXPECT_EQ(messages_digest(msgs), before);
}

TEST(Connectivity, MockReachable) {
    Gateway gw;
    const auto d = gw.check_connectivity(mock_endpoint());
    EXPECT_TRUE(d.reachable);
}

TEST(Connectivity, ClosedPortUnreachable) {
    Gateway gw;
    const auto ep = live("closed", "http://127.0.0.1:" + std::to_string(testsupport::closed_port()) + "/v1");
    const auto d = gw.check_connectivity(ep);
    EXPECT_FALSE(d.reachable);
    EXPECT_TRUE(testsupport::contains(d.detail, "transport error")) << d.detail;
}

TEST(Connectivity, WrongKeyReportsAuthentication) {
    StubServer stub([](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
        res.set_content(R"({"error":{"message":"bad key"}})", "application/json");
    });
    Gateway gw;
    const auto d = gw.check_connectivity(live("auth", stub.base()));
    EXPECT_FALSE(d.reachable);
    EXPECT_TRUE(testsupport::contains(d.detail, "authentication")) << d.detail;
}

TEST(Connectivity, LiveStubRoundTrip) {
    std::string seen_auth;
    StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        const auto body = json::parse(req.body);
        EXPECT_EQ(body["max_tokens"], 1);
        res.set_content(testsupport::chat_reply("p"), "application/json");
    });
    ::setenv("MASORCH_TEST_KEY", "sekret", 1);
    auto ep = live("ok", stub.base());
    ep.api_key_env = "MASORCH_TEST_KEY";
    Gateway gw;
    const auto d = gw.check_connectivity(ep);
    EXPECT_TRUE(d.reachable) << d.detail;
    EXPECT_EQ(seen_auth, "Bearer sekret");
}

TEST(Gateway, ConcurrencyBoundedPerEndpoint) {
    struct Slow : Transport {
        std::atomic<int> in_flight{0};
        std::atomic<int> peak{0};
        WireReply post(const WireRequest&) override {
            const int now = ++in_flight;
            int p = peak.load();
            while (now > p && !peak.compare_exchange_weak(p, now)) {}
            std::this_thread::sleep_for(std::chrono::milliseconds(15));
            --in_flight;
            return {200, testsupport::chat_reply("A"), 15, {}};
        }
    };
    Gateway gw;
    auto slow = std::make_shared<Slow>();
    auto ep = live("slow", "http://h");
    ep.max_concurrency = 2;
    gw.set_transport(ep.name, slow);
    UsageLedger ledger;
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { gw.complete(ep, {ChatMessage::user("x")}, &ledger); });
    for (auto& t : threads) t.join();
    EXPECT_LE(slow->peak.load(), 2);
    EXPECT_EQ(ledger.size(), 8u);
}

TEST(Gateway, EndpointJsonRoundTrip) {
    auto ep = live("x", "https://api.example/v1");
    ep.api_key_env = "KEY";
    ep.max_retries = 4;
    const auto back = endpoint_from_json(json(to_json(ep)));
    EXPECT_EQ(to_json(back), to_json(ep));
}

TEST(Gateway, MediaPartsUseFrameSampler) {
    const auto parts = media_parts({{dataset::MediaKind::image, "a.png", std::nullopt},
                                    {dataset::MediaKind::video, "v.mp4", 100}});
    ASSERT_EQ(parts.size(), 2u);
    ASSERT_TRUE(std::holds_alternative<ImagePart>(parts[0]));
    const auto& fr = std::get<FramesPart>(parts[1]);
    EXPECT_EQ(fr.frames, (std::vector<int>{0, 14, 28, 42, 56, 70, 84, 99}));
}
