#include "flowbench/translation.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace flowbench {

TranslationStrategy strategy_from_name(const std::string& name) {
    if (name == "all") return TranslationStrategy::AllCorrect;
    if (name == "all_downstream") return TranslationStrategy::AllDownstream;
    if (name == "all_upstream") return TranslationStrategy::AllUpstream;
    if (name == "majority") return TranslationStrategy::Majority;
    if (name == "first_two") return TranslationStrategy::FirstTwoOnePerDirection;
    if (name == "first_downstream") return TranslationStrategy::FirstPreferablyDownstream;
    throw std::invalid_argument("unknown translation strategy: " + name);
}

const char* strategy_name(TranslationStrategy s) {
    switch (s) {
        case TranslationStrategy::AllCorrect: return "all";
        case TranslationStrategy::AllDownstream: return "all_downstream";
        case TranslationStrategy::AllUpstream: return "all_upstream";
        case TranslationStrategy::Majority: return "majority";
        case TranslationStrategy::FirstTwoOnePerDirection: return "first_two";
        case TranslationStrategy::FirstPreferablyDownstream: return "first_downstream";
    }
    return "all";
}

std::vector<TranslationStrategy> all_strategies() {
    return {TranslationStrategy::AllCorrect,
            TranslationStrategy::AllDownstream,
            TranslationStrategy::AllUpstream,
            TranslationStrategy::Majority,
            TranslationStrategy::FirstTwoOnePerDirection,
            TranslationStrategy::FirstPreferablyDownstream};
}

namespace {

// Earliest by window_start; ties keep the earlier list position.
const SnapshotPrediction* earliest(const std::vector<const SnapshotPrediction*>& v) {
    const SnapshotPrediction* best = nullptr;
    for (const auto* p : v) {
        if (!best || p->window_start < best->window_start) best = p;
    }
    return best;
}

}  // namespace

FlowLevelResult flow_level_report(const std::vector<SnapshotPrediction>& preds,
                                  TranslationStrategy strategy, std::size_t num_classes) {
    if (preds.empty()) throw std::invalid_argument("no snapshot predictions to translate");

    std::map<std::string, std::vector<const SnapshotPrediction*>> flows;
    for (const auto& p : preds) {
        if (p.true_class >= num_classes || p.predicted >= num_classes)
            throw std::invalid_argument("class index out of range in snapshot prediction for '" +
                                        p.origin_id + "'");
        flows[p.origin_id].push_back(&p);
    }

    FlowLevelResult res;
    res.flows = flows.size();
    if (strategy == TranslationStrategy::FirstPreferablyDownstream) {
        res.confusion.emplace(num_classes);
    }

    std::size_t correct_flows = 0;
    for (const auto& [origin, snaps] : flows) {
        const std::size_t truth = snaps.front()->true_class;
        for (const auto* s : snaps) {
            if (s->true_class != truth)
                throw std::invalid_argument("flow '" + origin +
                                            "' has snapshots with conflicting true classes");
        }
        std::vector<const SnapshotPrediction*> down, up;
        for (const auto* s : snaps) {
            (s->direction == Direction::Downstream ? down : up).push_back(s);
        }

        bool correct = false;
        switch (strategy) {
            case TranslationStrategy::AllCorrect:
                correct = std::all_of(snaps.begin(), snaps.end(),
                                      [&](const auto* s) { return s->predicted == truth; });
                break;
            case TranslationStrategy::AllDownstream: {
                // A flow with no downstream snapshots is judged by what it has;
                // otherwise single-snapshot flows could disagree with their own
                // snapshot's correctness.
                const auto& judged = down.empty() ? snaps : down;
                correct = std::all_of(judged.begin(), judged.end(),
                                      [&](const auto* s) { return s->predicted == truth; });
                break;
            }
            case TranslationStrategy::AllUpstream: {
                const auto& judged = up.empty() ? snaps : up;
                correct = std::all_of(judged.begin(), judged.end(),
                                      [&](const auto* s) { return s->predicted == truth; });
                break;
            }
            case TranslationStrategy::Majority: {
                const std::size_t hits = static_cast<std::size_t>(
                    std::count_if(snaps.begin(), snaps.end(),
                                  [&](const auto* s) { return s->predicted == truth; }));
                correct = 2 * hits > snaps.size();
                break;
            }
            case TranslationStrategy::FirstTwoOnePerDirection: {
                correct = true;
                if (const auto* d = earliest(down)) correct = correct && d->predicted == truth;
                if (const auto* u = earliest(up)) correct = correct && u->predicted == truth;
                break;
            }
            case TranslationStrategy::FirstPreferablyDownstream: {
                const SnapshotPrediction* rep = !down.empty() ? earliest(down) : earliest(up);
                correct = rep->predicted == truth;
                res.confusion->add(truth, rep->predicted);
                break;
            }
        }
        if (correct) ++correct_flows;
    }

    res.accuracy = static_cast<double>(correct_flows) / static_cast<double>(res.flows);
    if (res.confusion) res.metrics = metrics_from_confusion(*res.confusion);
    return res;
}

}  // namespace flowbench
