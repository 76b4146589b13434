#include "masorch/service/jobs.hpp"

#include <chrono>

#include <fmt/format.h>

namespace masorch::service {

using nlohmann::ordered_json;

std::string_view to_string(JobPhase p) {
    switch (p) {
        case JobPhase::queued: return "queued";
        case JobPhase::running: return "running";
        case JobPhase::done: return "done";
        case JobPhase::failed: return "failed";
    }
    return "failed";
}

ordered_json to_json(const JobState& s) {
    ordered_json j;
    j["job_id"] = s.job_id;
    j["phase"] = std::string(to_string(s.phase));
    j["progress"] = ordered_json{{"completed", s.completed}, {"total", s.total}};
    j["run_id"] = s.run_id;
    j["summary"] = s.summary ? run::to_json(*s.summary) : ordered_json(nullptr);
    j["error"] = s.error.empty() ? ordered_json(nullptr) : ordered_json(s.error);
    return j;
}

JobManager::JobManager(gateway::Gateway& gateway, int max_running) : gateway_(gateway) {
    for (int i = 0; i < std::max(1, max_running); ++i) workers_.emplace_back([this] { worker_loop(); });
}

JobManager::~JobManager() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
        for (auto& [_, job] : jobs_) job->cancel = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
}

std::string JobManager::submit(run::CampaignConfig config, const std::string& idempotency_key) {
    std::lock_guard lock(mu_);
    if (!idempotency_key.empty()) {
        if (auto it = by_key_.find(idempotency_key); it != by_key_.end()) return it->second;
    }
    auto job = std::make_shared<Job>();
    job->state.job_id = fmt::format("job-{:04d}", next_id_++);
    job->state.run_id = config.run_id;
    job->config = std::move(config);
    jobs_[job->state.job_id] = job;
    if (!idempotency_key.empty()) by_key_[idempotency_key] = job->state.job_id;
    queue_.push_back(job);
    cv_.notify_all();
    return job->state.job_id;
}

std::optional<JobState> JobManager::state(const std::string& job_id) const {
    std::lock_guard lock(mu_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second->state;
}

std::optional<JobManager::Page> JobManager::results(const std::string& job_id, std::size_t page,
                                                    std::size_t page_size) const {
    std::filesystem::path checkpoint;
    std::string run_id;
    {
        std::lock_guard lock(mu_);
        const auto it = jobs_.find(job_id);
        if (it == jobs_.end()) return std::nullopt;
        checkpoint = it->second->config.checkpoint_path;
        run_id = it->second->config.run_id;
    }
    Page out;
    if (!std::filesystem::exists(checkpoint)) return out;
    auto records = run::evaluated_records(checkpoint, run_id);
    out.total_records = records.size();
    const std::size_t begin = std::min(records.size(), page * page_size);
    const std::size_t end = std::min(records.size(), begin + page_size);
    out.records.assign(std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(begin)),
                       std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(end)));
    return out;
}

bool JobManager::cancel(const std::string& job_id) {
    std::lock_guard lock(mu_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return false;
    auto& job = *it->second;
    job.cancel = true;
    if (job.state.phase == JobPhase::queued) {
        job.state.phase = JobPhase::failed;
        job.state.error = "cancelled";
        std::erase(queue_, it->second);
        cv_.notify_all();
    }
    return true;
}

bool JobManager::wait(const std::string& job_id, int timeout_ms) const {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms), [&] {
        const auto it = jobs_.find(job_id);
        return it == jobs_.end() ||
               (it->second->state.phase != JobPhase::queued && it->second->state.phase != JobPhase::running);
    });
}

void JobManager::worker_loop() {
    for (;;) {
        std::shared_ptr<Job> job;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            job = queue_.front();
            queue_.pop_front();
            job->state.phase = JobPhase::running;
        }
        cv_.notify_all();

        run::CampaignHooks hooks;
        hooks.cancel = &job->cancel;
        hooks.progress = [this, &job](std::size_t done, std::size_t total) {
            std::lock_guard lock(mu_);
            job->state.total = total;
            job->state.completed = std::max(job->state.completed, done);
        };
        try {
            auto summary = run::run_campaign(job->config, gateway_, hooks);
            std::lock_guard lock(mu_);
            if (summary.cancelled) {
                job->state.phase = JobPhase::failed;
                job->state.error = "cancelled";
            } else {
                job->state.phase = JobPhase::done;
                job->state.completed = std::max(job->state.completed, job->state.total);
            }
            job->state.summary = std::move(summary);
        } catch (const std::exception& e) {
            std::lock_guard lock(mu_);
            job->state.phase = JobPhase::failed;
            job->state.error = e.what();
        }
        cv_.notify_all();
    }
}

}  // namespace masorch::service
