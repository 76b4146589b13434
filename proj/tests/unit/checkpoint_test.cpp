#include <gtest/gtest.h>

#include <thread>

#include "masorch/checkpoint.hpp"
#include "masorch/error.hpp"
#include "test_support.hpp"

using namespace masorch;
using namespace masorch::run;
using testsupport::TempDir;

namespace {

topology::TopologyConfig debate(int a = 3, int r = 2) {
    topology::TopologyConfig c;
    c.method = topology::Method::debate;
    c.num_agents = a;
    c.num_rounds = r;
    return c;
}

CheckpointRecord record(const std::string& sample, RecordStatus status, const std::string& answer = "Answer: (A)") {
    CheckpointRecord r;
    r.run_id = "r1";
    r.sample_id = sample;
    r.topology = debate();
    r.endpoint = "mock";
    r.config_hash = config_hash(r.topology, r.endpoint, r.protocol);
    r.status = status;
    r.result.answer = answer;
    r.result.topology = r.topology;
    topology::TranscriptEvent e;
    e.round = 1;
    e.role_name = "General Assistant";
    e.prompt_digest = "d";
    e.reply_text = answer;
    e.prompt_tokens = 7;
    e.completion_tokens = 3;
    e.latency_ms = 2;
    r.result.transcript.push_back(e);
    r.result.usage = {1, 7, 3, 2};
    if (status == RecordStatus::evaluated) {
        eval::Verdict v;
        v.status = eval::Status::Correct;
        v.extracted_label = 'A';
        r.verdict = v;
    }
    r.ts = "2026-01-01T00:00:00.000Z";
    return r;
}

void write_records(const std::filesystem::path& p, const std::vector<CheckpointRecord>& recs) {
    CheckpointWriter w(p);
    for (const auto& r : recs) w.append(r);
}

}  // namespace

TEST(ConfigHash, StableAndDiscriminating) {
    const auto a = config_hash(debate(), "mock", eval::Protocol::RULE_MR);
    EXPECT_EQ(a.size(), 64u);
    EXPECT_EQ(a, config_hash(debate(), "mock", eval::Protocol::RULE_MR));
    EXPECT_NE(a, config_hash(debate(4, 2), "mock", eval::Protocol::RULE_MR));
    EXPECT_NE(a, config_hash(debate(), "other", eval::Protocol::RULE_MR));
    EXPECT_NE(a, config_hash(debate(), "mock", eval::Protocol::RULE_EM));
}

TEST(ConfigHash, IndependentOfFieldOrder) {
    auto c = debate();
    c.extra = {{"b", "2"}, {"a", "1"}};
    const auto j = topology::to_json(c);
    nlohmann::json reversed = nlohmann::json::object();
    std::vector<std::pair<std::string, nlohmann::json>> items;
    for (const auto& [k, v] : j.items()) items.emplace_back(k, nlohmann::json::parse(v.dump()));
    std::reverse(items.begin(), items.end());
    for (auto& [k, v] : items) reversed[k] = v;
    EXPECT_EQ(config_hash(topology::config_from_json(reversed), "mock", eval::Protocol::RULE_MR),
              config_hash(c, "mock", eval::Protocol::RULE_MR));
}

TEST(Record, JsonRoundTrip) {
    const auto r = record("s1", RecordStatus::evaluated);
    const auto back = record_from_json(nlohmann::json::parse(serialize_record(r)));
    EXPECT_EQ(serialize_record(back), serialize_record(r));
    EXPECT_EQ(serialize_record(r).find('\n'), std::string::npos);
    EXPECT_THROW(record_from_json(nlohmann::json::array()), InvalidInput);
}

TEST(Record, TimestampFormat) {
    const auto ts = utc_timestamp();
    EXPECT_EQ(ts.size(), 24u);
    EXPECT_EQ(ts.back(), 'Z');
    EXPECT_EQ(ts[10], 'T');
}

TEST(ResumeScan, EmptyAndMissing) {
    TempDir dir;
    EXPECT_TRUE(resume_scan(dir / "absent.jsonl").empty());
    testsupport::write_file(dir / "empty.jsonl", "");
    EXPECT_TRUE(resume_scan(dir / "empty.jsonl").empty());
}

TEST(ResumeScan, OnlyEvaluatedKeysAndLastWins) {
    TempDir dir;
    const auto p = dir / "c.jsonl";
    write_records(p, {record("s1", RecordStatus::inferred), record("s1", RecordStatus::evaluated),
                      record("s2", RecordStatus::inferred), record("s3", RecordStatus::evaluated),
                      record("s3", RecordStatus::evaluated, "Answer: (B)")});
    const auto done = resume_scan(p);
    const auto hash = record("x", RecordStatus::inferred).config_hash;
    EXPECT_EQ(done, (std::set<RecordKey>{{"s1", hash}, {"s3", hash}}));
    EXPECT_EQ(scan_checkpoint(p).at(RecordKey{"s3", hash}).result.answer, "Answer: (B)");
}

TEST(Writer, AppendsAfterTornLine) {
    TempDir dir;
    const auto p = dir / "c.jsonl";
    testsupport::write_file(p, serialize_record(record("s1", RecordStatus::evaluated)).substr(0, 30));
    write_records(p, {record("s2", RecordStatus::evaluated)});
    const auto lines = testsupport::read_lines(p);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[1], serialize_record(record("s2", RecordStatus::evaluated)));
}

TEST(Writer, ConcurrentAppendsStayWholeLines) {
    TempDir dir;
    const auto p = dir / "c.jsonl";
    {
        CheckpointWriter w(p);
        std::vector<std::thread> threads;
        for (int t = 0; t < 4; ++t)
            threads.emplace_back([&, t] {
                for (int i = 0; i < 25; ++i)
                    w.append(record("s" + std::to_string(t * 100 + i), RecordStatus::evaluated));
            });
        for (auto& t : threads) t.join();
        EXPECT_EQ(w.appended(), 100u);
    }
    EXPECT_EQ(resume_scan(p).size(), 100u);
    EXPECT_EQ(auto_cleanse(p).quarantined.size(), 0u);
}

TEST(AutoCleanse, PristineFileUntouched) {
    TempDir dir;
    const auto p = dir / "c.jsonl";
    write_records(p, {record("s1", RecordStatus::inferred), record("s1", RecordStatus::evaluated)});
    const auto before = testsupport::read_file(p);
    const auto report = auto_cleanse(p);
    EXPECT_EQ(report.kept, 2u);
    EXPECT_TRUE(report.quarantined.empty());
    EXPECT_EQ(testsupport::read_file(p), before);
    EXPECT_FALSE(std::filesystem::exists(quarantine_path(p)));
}

TEST(AutoCleanse, TruncatedLastLineQuarantinedAndRequeued) {
    TempDir dir;
    const auto p = dir / "c.jsonl";
    std::vector<CheckpointRecord> recs;
    for (int i = 0; i < 5; ++i) recs.push_back(record("s" + std::to_string(i), RecordStatus::evaluated));
    write_records(p, recs);
    auto content = testsupport::read_file(p);
    content.resize(content.size() - 40);
    testsupport::write_file(p, content);

    const auto report = auto_cleanse(p);
    EXPECT_EQ(report.kept, 4u);
    ASSERT_EQ(report.quarantined.size(), 1u);
    EXPECT_EQ(report.quarantined[0].reason, reason::kBadJson);
    EXPECT_EQ(report.quarantined[0].line, 5u);
    EXPECT_EQ(report.requeue_keys(), (std::vector<RecordKey>{recs[4].key()}));
    EXPECT_EQ(testsupport::read_lines(p).size(), 4u);
    const auto q = testsupport::read_jsonl(quarantine_path(p));
    ASSERT_EQ(q.size(), 1u);
    EXPECT_EQ(q[0]["reason"], "BadJson");
    EXPECT_EQ(auto_cleanse(p).quarantined.size(), 0u);
}

TEST(AutoCleanse, ReasonsForDamagedRecords) {
    TempDir dir;
    const auto p = dir / "c.jsonl";
    auto versioned = to_json(record("v", RecordStatus::evaluated));
    versioned["schema_version"] = 99;
    auto schema = to_json(record("s", RecordStatus::evaluated));
    schema.erase("result");
    auto no_verdict = to_json(record("m", RecordStatus::evaluated));
    no_verdict["verdict"] = nullptr;
    auto usage = record("u", RecordStatus::evaluated);
    usage.result.usage.prompt_tokens += 1;
    testsupport::write_file(p, serialize_record(record("ok", RecordStatus::evaluated)) + "\n" + versioned.dump() +
                                   "\n" + schema.dump() + "\n" + no_verdict.dump() + "\n" +
                                   serialize_record(usage) + "\nnot json\n");
    const auto report = auto_cleanse(p);
    EXPECT_EQ(report.kept, 1u);
    std::vector<std::string> reasons;
    for (const auto& q : report.quarantined) reasons.push_back(q.reason);
    EXPECT_EQ(reasons, (std::vector<std::string>{"VersionMismatch", "SchemaInvalid", "MissingVerdict", "UsageMismatch",
                                                 "BadJson"}));
    EXPECT_EQ(report.requeue_keys().size(), 4u);
    EXPECT_EQ(resume_scan(p).size(), 1u);
}
