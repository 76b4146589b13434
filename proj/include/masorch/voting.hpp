#pragma once

#include <span>
#include <utility>

namespace masorch::topology {

/// Most frequent label; ties go to the label that occurs first.
/// Throws InvalidInput on an empty list.
char majority_vote(std::span<const char> labels);

struct Ballot {
    char label = 'A';
    double weight = 0.0;
};

/// Label with the largest summed weight; ties go to the earliest first
/// occurrence. Throws InvalidInput on an empty list or negative weight.
char weighted_vote(std::span<const Ballot> ballots);

/// weighted_vote restricted to confidences in [0, 1].
char confidence_weighted_vote(std::span<const Ballot> ballots);

}  // namespace masorch::topology
