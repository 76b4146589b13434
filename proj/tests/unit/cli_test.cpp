#include <gtest/gtest.h>

#include <csignal>
#include <regex>

#include <httplib.h>
#include <sys/wait.h>
#include <unistd.h>

#include "test_support.hpp"

using testsupport::TempDir;

namespace {

const std::string kCli = MASORCH_CLI_PATH;
const std::filesystem::path kMini = std::filesystem::path(MASORCH_SOURCE_DIR) / "fixtures/mini.jsonl";

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome cli(const TempDir& dir, const std::string& args) {
    const auto log = dir / "cli.log";
    const std::string cmd = "cd '" + dir.path().string() + "' && '" + kCli + "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testsupport::read_file(log)};
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, RunWritesCheckpointAndSummaries) {
    TempDir dir;
    const auto r = cli(dir, "run --method debate --dataset " + q(kMini) + " --out out --run-id t");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(testsupport::contains(r.out, "Debate-A3-R2")) << r.out;
    EXPECT_EQ(testsupport::read_lines(dir / "out/checkpoint.jsonl").size(), 20u);
    EXPECT_TRUE(std::filesystem::exists(dir / "out/summary.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "out/summary.json"));

    const auto again = cli(dir, "run --method debate --dataset " + q(kMini) + " --out out --run-id t");
    EXPECT_EQ(again.code, 0);
    EXPECT_TRUE(testsupport::contains(again.out, "0 new inferences, 10 skipped")) << again.out;
}

TEST(Cli, RunUsageErrors) {
    TempDir dir;
    EXPECT_EQ(cli(dir, "run --method telepathy --dataset " + q(kMini)).code, 2);
    EXPECT_EQ(cli(dir, "run --method debate --max-samples 0 --dataset " + q(kMini)).code, 2);
    EXPECT_EQ(cli(dir, "run --method debate --agents 1 --dataset " + q(kMini)).code, 2);
    EXPECT_EQ(cli(dir, "run --method debate").code, 2);
    EXPECT_EQ(cli(dir, "run --backend live --dataset " + q(kMini)).code, 2);
    EXPECT_EQ(cli(dir, "run --protocol VLM_SJ --dataset " + q(kMini)).code, 2);
    EXPECT_EQ(cli(dir, "run --dataset missing.jsonl").code, 1);
    EXPECT_EQ(cli(dir, "frobnicate").code, 2);
    EXPECT_FALSE(std::filesystem::exists(dir / "runs"));
}

TEST(Cli, EvalAndReport) {
    TempDir dir;
    ASSERT_EQ(cli(dir, "run --method all --max-samples 2 --dataset " + q(kMini) + " --out out").code, 0);
    const std::string ck = "--checkpoint out/checkpoint.jsonl";

    EXPECT_EQ(cli(dir, "eval --checkpoint nope.jsonl --dataset " + q(kMini) + " --protocol RULE_EM").code, 1);
    EXPECT_EQ(cli(dir, "eval " + ck + " --dataset " + q(kMini) + " --protocol VLM_SJ").code, 2);
    EXPECT_EQ(cli(dir, "eval " + ck + " --dataset " + q(kMini) + " --protocol BOGUS").code, 2);

    const auto em = cli(dir, "eval " + ck + " --dataset " + q(kMini) + " --protocol RULE_EM");
    ASSERT_EQ(em.code, 0) << em.out;
    EXPECT_TRUE(testsupport::contains(em.out, "26 newly evaluated")) << em.out;
    const auto mr = cli(dir, "eval " + ck + " --dataset " + q(kMini) + " --protocol RULE_MR");
    EXPECT_EQ(mr.code, 0);
    EXPECT_TRUE(testsupport::contains(mr.out, "0 newly evaluated, 26 already evaluated")) << mr.out;

    EXPECT_EQ(cli(dir, "report " + ck).code, 2);
    const auto csv = cli(dir, "report " + ck + " --protocol RULE_MR --format csv --out r.csv");
    ASSERT_EQ(csv.code, 0) << csv.out;
    const auto lines = testsupport::read_lines(dir / "r.csv");
    ASSERT_EQ(lines.size(), 14u);
    EXPECT_EQ(lines[0], "method,accuracy,avg_tokens,avg_latency_ms,avg_calls,right,wrong,format_error,others");
    const auto json = cli(dir, "report " + ck + " --protocol RULE_EM --format json");
    ASSERT_EQ(json.code, 0);
    EXPECT_EQ(testsupport::json::parse(json.out).size(), 13u);
    EXPECT_EQ(cli(dir, "report --checkpoint nope.jsonl").code, 1);
}

TEST(Cli, ValidateAndFixture) {
    TempDir dir;
    const auto ok = cli(dir, "validate " + q(kMini));
    EXPECT_EQ(ok.code, 0) << ok.out;
    EXPECT_TRUE(testsupport::contains(ok.out, "10 pass, 0 fail"));
    testsupport::write_file(dir / "bad.jsonl", testsupport::read_file(kMini) + "{\"id\": \"x\"}\n");
    EXPECT_EQ(cli(dir, "validate bad.jsonl").code, 1);
    EXPECT_EQ(cli(dir, "validate missing.jsonl").code, 1);
    ASSERT_EQ(cli(dir, "fixture --seed 7 --n 12 --out f.jsonl").code, 0);
    EXPECT_EQ(testsupport::read_lines(dir / "f.jsonl").size(), 12u);
    EXPECT_EQ(cli(dir, "fixture --n 0 --out f.jsonl").code, 2);
}

TEST(Cli, ServeStopsCleanlyOnSigint) {
    int pipe_fd[2];
    ASSERT_EQ(::pipe(pipe_fd), 0);
    const pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
        ::dup2(pipe_fd[1], STDOUT_FILENO);
        ::close(pipe_fd[0]);
        ::execl(kCli.c_str(), kCli.c_str(), "serve", "--port", "0", static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(pipe_fd[1]);
    std::string banner;
    char c;
    while (banner.find('\n') == std::string::npos && ::read(pipe_fd[0], &c, 1) == 1) banner.push_back(c);
    std::smatch m;
    ASSERT_TRUE(std::regex_search(banner, m, std::regex(R"(:(\d+)/v1)"))) << banner;

    httplib::Client client("127.0.0.1", std::stoi(m.str(1)));
    auto res = client.Get("/v1/methods");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);

    ::kill(pid, SIGINT);
    int status = 0;
    ::waitpid(pid, &status, 0);
    ::close(pipe_fd[0]);
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 0);
}
