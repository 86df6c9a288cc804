#pragma once

#include <cstdint>
#include <vector>

namespace flowbench {

struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::uint64_t> counts;  // row-major, rows = true class

    explicit ConfusionMatrix(std::size_t classes = 0) : k(classes), counts(classes * classes, 0) {}
    std::uint64_t& at(std::size_t t, std::size_t p) { return counts[t * k + p]; }
    std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * k + p]; }
    void add(std::size_t t, std::size_t p) { ++at(t, p); }
    std::uint64_t total() const;
    std::uint64_t support(std::size_t cls) const;    // row sum
    std::uint64_t predicted(std::size_t cls) const;  // column sum
};

struct MetricSet {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
};

// Per-class precision/recall/F1 treat an empty denominator as 0. Macro
// averages skip classes with zero support and zero predictions; classes with
// support but no correct hits count as 0. Weighted F1 weights by support.
MetricSet metrics_from_confusion(const ConfusionMatrix& cm);

double per_class_f1(const ConfusionMatrix& cm, std::size_t cls);

}  // namespace flowbench
