#include "masorch/experience_store.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "masorch/error.hpp"
#include "masorch/text.hpp"

namespace masorch::topology {

ExperienceStore::ExperienceStore(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(*path_);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            entries_.push_back({j.at("question_digest").get<std::string>(), j.at("reflection_text").get<std::string>()});
        } catch (const nlohmann::json::exception&) {
            // a torn trailing line is dropped; the next append starts a fresh line
        }
    }
}

void ExperienceStore::append(Experience entry) {
    std::lock_guard lock(mu_);
    if (path_) {
        std::ofstream out(*path_, std::ios::app);
        if (!out) throw IOFailure("cannot append to experience store " + path_->string());
        nlohmann::ordered_json j;
        j["question_digest"] = entry.question_digest;
        j["reflection_text"] = entry.reflection_text;
        out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
        out.flush();
        if (!out) throw IOFailure("write to experience store " + path_->string() + " failed");
    }
    entries_.push_back(std::move(entry));
}

std::optional<Experience> ExperienceStore::retrieve(std::string_view question) const {
    const auto q = text::words(question);
    const std::set<std::string> query(q.begin(), q.end());
    std::lock_guard lock(mu_);
    std::optional<Experience> best;
    std::size_t best_overlap = 0;
    for (const auto& e : entries_) {
        const auto w = text::words(e.reflection_text);
        const std::set<std::string> words(w.begin(), w.end());
        std::size_t overlap = 0;
        for (const auto& word : words) overlap += query.count(word);
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = e;
        }
    }
    return best;
}

std::size_t ExperienceStore::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::vector<Experience> ExperienceStore::snapshot() const {
    std::lock_guard lock(mu_);
    return entries_;
}

}  // namespace masorch::topology
