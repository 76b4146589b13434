#pragma once

// Asynchronous campaign jobs: FIFO queue, bounded concurrency, idempotency
// keys and cancellation.

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "masorch/campaign.hpp"
#include "masorch/gateway.hpp"

namespace masorch::service {

enum class JobPhase { queued, running, done, failed };
std::string_view to_string(JobPhase p);

struct JobState {
    std::string job_id;
    JobPhase phase = JobPhase::queued;
    std::size_t completed = 0;
    std::size_t total = 0;
    std::optional<run::CampaignSummary> summary;
    std::string error;
    std::string run_id;
};

nlohmann::ordered_json to_json(const JobState& s);

class JobManager {
public:
    explicit JobManager(gateway::Gateway& gateway, int max_running = 1);
    ~JobManager();

    JobManager(const JobManager&) = delete;
    JobManager& operator=(const JobManager&) = delete;

    /// Queues a campaign. A repeated idempotency key returns the job created
    /// for it the first time.
    std::string submit(run::CampaignConfig config, const std::string& idempotency_key = {});

    [[nodiscard]] std::optional<JobState> state(const std::string& job_id) const;

    /// Evaluated records of the job's run, `page_size` per page.
    struct Page {
        std::size_t total_records = 0;
        std::vector<run::CheckpointRecord> records;
    };
    [[nodiscard]] std::optional<Page> results(const std::string& job_id, std::size_t page, std::size_t page_size) const;

    /// Queued jobs fail immediately; running ones stop after the current
    /// items. Returns false for unknown ids.
    bool cancel(const std::string& job_id);

    /// Blocks until the job leaves queued/running. Test helper.
    bool wait(const std::string& job_id, int timeout_ms) const;

private:
    struct Job {
        JobState state;
        run::CampaignConfig config;
        std::atomic<bool> cancel{false};
    };

    void worker_loop();

    gateway::Gateway& gateway_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::map<std::string, std::string> by_key_;
    std::deque<std::shared_ptr<Job>> queue_;
    std::vector<std::thread> workers_;
    std::size_t next_id_ = 1;
    bool stopping_ = false;
};

}  // namespace masorch::service
