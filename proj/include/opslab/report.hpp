#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace opslab {

// Outcome of a selection method over a candidate set. `ranking` is a
// permutation of candidate indices, best first (descending value estimates or
// ascending Bellman-error scores); `chosen` is its top-k prefix.
struct SelectionReport {
    std::string method;
    std::vector<double> scores;  // per candidate, indexed as the candidate set
    std::vector<int> ranking;
    std::vector<int> chosen;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
};

}  // namespace opslab
