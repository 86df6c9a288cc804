#pragma once

#include <cstdint>
#include <vector>

namespace flowbench {

struct EnergyTestResult {
    double statistic = 0.0;  // (nm/(n+m)) * (2*AB - AA - BB) on Euclidean distances
    double p_value = 1.0;    // permutation p-value, (1 + #{perm >= obs}) / (B + 1)
    std::size_t permutations = 0;
};

// Two-sample energy-distance permutation test. Distances are computed once;
// permutations relabel the pooled sample. Deterministic per seed.
EnergyTestResult energy_distance_test(const std::vector<std::vector<double>>& x,
                                      const std::vector<std::vector<double>>& y,
                                      std::size_t permutations = 200, std::uint64_t seed = 0);

// Spearman rank correlation with average ranks for ties. Returns 0 when
// either side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace flowbench
