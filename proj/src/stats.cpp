#include "flowbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "flowbench/rng.hpp"

namespace flowbench {

namespace {

// Pooled pairwise Euclidean distances, lower triangle, float to halve memory.
struct DistanceTable {
    std::size_t n = 0;
    std::vector<float> d;  // index i*(i-1)/2 + j for i > j

    float at(std::size_t i, std::size_t j) const {
        if (i == j) return 0.0f;
        if (i < j) std::swap(i, j);
        return d[i * (i - 1) / 2 + j];
    }
};

double energy_stat(const DistanceTable& t, const std::vector<std::size_t>& idx, std::size_t n,
                   std::size_t m) {
    // idx holds the pooled indices; first n belong to X, the rest to Y.
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) aa += t.at(idx[i], idx[j]);
    for (std::size_t i = n; i < n + m; ++i)
        for (std::size_t j = n; j < i; ++j) bb += t.at(idx[i], idx[j]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = n; j < n + m; ++j) ab += t.at(idx[i], idx[j]);
    const double nd = static_cast<double>(n), md = static_cast<double>(m);
    const double mean_ab = ab / (nd * md);
    const double mean_aa = 2.0 * aa / (nd * nd);  // biased (includes zero diagonal)
    const double mean_bb = 2.0 * bb / (md * md);
    return (nd * md / (nd + md)) * (2.0 * mean_ab - mean_aa - mean_bb);
}

}  // namespace

EnergyTestResult energy_distance_test(const std::vector<std::vector<double>>& x,
                                      const std::vector<std::vector<double>>& y,
                                      std::size_t permutations, std::uint64_t seed) {
    if (x.empty() || y.empty()) throw std::invalid_argument("energy test needs two samples");
    const std::size_t dim = x.front().size();
    for (const auto& v : x)
        if (v.size() != dim) throw std::invalid_argument("ragged sample in energy test");
    for (const auto& v : y)
        if (v.size() != dim) throw std::invalid_argument("ragged sample in energy test");

    const std::size_t n = x.size(), m = y.size(), total = n + m;
    std::vector<const std::vector<double>*> pool;
    pool.reserve(total);
    for (const auto& v : x) pool.push_back(&v);
    for (const auto& v : y) pool.push_back(&v);

    DistanceTable table;
    table.n = total;
    table.d.resize(total * (total - 1) / 2);
    for (std::size_t i = 1; i < total; ++i) {
        const double* a = pool[i]->data();
        for (std::size_t j = 0; j < i; ++j) {
            const double* b = pool[j]->data();
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double diff = a[k] - b[k];
                s += diff * diff;
            }
            table.d[i * (i - 1) / 2 + j] = static_cast<float>(std::sqrt(s));
        }
    }

    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    EnergyTestResult res;
    res.statistic = energy_stat(table, idx, n, m);
    res.permutations = permutations;

    Rng rng(seed);
    std::size_t ge = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        rng.shuffle(idx);
        if (energy_stat(table, idx, n, m) >= res.statistic) ++ge;
    }
    res.p_value = static_cast<double>(1 + ge) / static_cast<double>(permutations + 1);
    return res;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("rank correlation needs equal lengths");
    const std::size_t n = a.size();
    if (n < 2) return 0.0;

    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };

    const std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = ra[i] - ma, db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

}  // namespace flowbench
