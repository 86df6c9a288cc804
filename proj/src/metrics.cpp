#include "flowbench/metrics.hpp"

namespace flowbench {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
}

std::uint64_t ConfusionMatrix::support(std::size_t cls) const {
    std::uint64_t n = 0;
    for (std::size_t p = 0; p < k; ++p) n += at(cls, p);
    return n;
}

std::uint64_t ConfusionMatrix::predicted(std::size_t cls) const {
    std::uint64_t n = 0;
    for (std::size_t t = 0; t < k; ++t) n += at(t, cls);
    return n;
}

namespace {

struct PR {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

PR per_class(const ConfusionMatrix& cm, std::size_t cls) {
    const double tp = static_cast<double>(cm.at(cls, cls));
    const double sup = static_cast<double>(cm.support(cls));
    const double pred = static_cast<double>(cm.predicted(cls));
    PR r;
    r.precision = pred > 0 ? tp / pred : 0.0;
    r.recall = sup > 0 ? tp / sup : 0.0;
    r.f1 = (r.precision + r.recall) > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall)
                                        : 0.0;
    return r;
}

}  // namespace

double per_class_f1(const ConfusionMatrix& cm, std::size_t cls) { return per_class(cm, cls).f1; }

MetricSet metrics_from_confusion(const ConfusionMatrix& cm) {
    MetricSet m;
    const double total = static_cast<double>(cm.total());
    if (total == 0 || cm.k == 0) return m;

    double correct = 0.0;
    for (std::size_t c = 0; c < cm.k; ++c) correct += static_cast<double>(cm.at(c, c));
    m.accuracy = correct / total;

    double f1_sum = 0.0, prec_sum = 0.0, rec_sum = 0.0, wf1 = 0.0;
    std::size_t active = 0;
    for (std::size_t c = 0; c < cm.k; ++c) {
        const std::uint64_t sup = cm.support(c);
        const std::uint64_t pred = cm.predicted(c);
        if (sup == 0 && pred == 0) continue;  // class absent on both axes
        const PR r = per_class(cm, c);
        f1_sum += r.f1;
        prec_sum += r.precision;
        rec_sum += r.recall;
        wf1 += r.f1 * static_cast<double>(sup);
        ++active;
    }
    if (active > 0) {
        m.macro_f1 = f1_sum / static_cast<double>(active);
        m.macro_precision = prec_sum / static_cast<double>(active);
        m.macro_recall = rec_sum / static_cast<double>(active);
    }
    m.weighted_f1 = wf1 / total;
    return m;
}

}  // namespace flowbench
