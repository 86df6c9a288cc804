#include "flowbench/knn.hpp"

#include <cmath>
#include <stdexcept>

namespace flowbench {

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine distance needs equal-length vectors");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::size_t knn_nearest_index(const KnnModel& model, const std::vector<double>& query) {
    if (model.points.empty()) throw std::invalid_argument("empty nearest-neighbor model");
    std::size_t best = 0;
    double best_d = cosine_distance(query, model.points[0]);
    for (std::size_t i = 1; i < model.points.size(); ++i) {
        const double d = cosine_distance(query, model.points[i]);
        if (d < best_d) {  // strict: ties keep the smaller index
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::size_t knn_predict(const KnnModel& model, const std::vector<double>& query) {
    if (model.labels.size() != model.points.size())
        throw std::invalid_argument("model labels and points differ in length");
    return model.labels[knn_nearest_index(model, query)];
}

}  // namespace flowbench
