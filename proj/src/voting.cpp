#include "masorch/voting.hpp"

#include <algorithm>
#include <vector>

#include "masorch/error.hpp"

namespace masorch::topology {

char majority_vote(std::span<const char> labels) {
    if (labels.empty()) throw InvalidInput("majority_vote: empty label list");
    std::vector<Ballot> ballots;
    ballots.reserve(labels.size());
    for (char l : labels) ballots.push_back({l, 1.0});
    return weighted_vote(ballots);
}

char weighted_vote(std::span<const Ballot> ballots) {
    if (ballots.empty()) throw InvalidInput("weighted_vote: empty ballot list");
    // Tallies kept in first-occurrence order so a strict '>' keeps the earliest on ties.
    std::vector<std::pair<char, double>> tally;
    for (const auto& b : ballots) {
        if (!(b.weight >= 0.0)) throw InvalidInput("weighted_vote: weights must be non-negative");
        auto it = std::find_if(tally.begin(), tally.end(), [&b](const auto& t) { return t.first == b.label; });
        if (it == tally.end()) tally.emplace_back(b.label, b.weight);
        else it->second += b.weight;
    }
    auto best = tally.begin();
    for (auto it = tally.begin() + 1; it != tally.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

char confidence_weighted_vote(std::span<const Ballot> ballots) {
    if (ballots.empty()) throw InvalidInput("confidence_weighted_vote: empty ballot list");
    for (const auto& b : ballots) {
        if (!(b.weight >= 0.0 && b.weight <= 1.0))
            throw InvalidInput("confidence_weighted_vote: confidence outside [0, 1]");
    }
    return weighted_vote(ballots);
}

}  // namespace masorch::topology
