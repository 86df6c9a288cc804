#pragma once

#include <cstdint>
#include <vector>

namespace flowbench {

// Exact 1-nearest-neighbor under cosine distance 1 - a.b/(|a||b|). A zero
// vector (query or point) is at distance 1 from everything. Distance ties
// pick the smallest training index.
struct KnnModel {
    std::vector<std::vector<double>> points;
    std::vector<std::size_t> labels;  // class indices, parallel to points
};

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

std::size_t knn_nearest_index(const KnnModel& model, const std::vector<double>& query);
std::size_t knn_predict(const KnnModel& model, const std::vector<double>& query);

}  // namespace flowbench
