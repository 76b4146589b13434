#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace masorch::topology {

struct Experience {
    std::string question_digest;
    std::string reflection_text;

    bool operator==(const Experience&) const = default;
};

/// Append-only reflection memory. File-backed stores persist one JSON object
/// per line; the default store lives in memory only.
class ExperienceStore {
public:
    ExperienceStore() = default;
    /// Loads existing entries; later appends go to the same file.
    explicit ExperienceStore(std::filesystem::path path);

    void append(Experience entry);

    /// Entry whose reflection shares the most words with `question`; ties go to
    /// the oldest entry. None when the store is empty or nothing overlaps.
    [[nodiscard]] std::optional<Experience> retrieve(std::string_view question) const;

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::vector<Experience> snapshot() const;

private:
    mutable std::mutex mu_;
    std::vector<Experience> entries_;
    std::optional<std::filesystem::path> path_;
};

}  // namespace masorch::topology
