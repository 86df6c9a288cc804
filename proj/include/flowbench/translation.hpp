#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowbench/flowdata.hpp"
#include "flowbench/metrics.hpp"

namespace flowbench {

// How a flow counts as correctly classified given per-snapshot predictions:
// all snapshots correct; all downstream correct (flows with no downstream
// fall back to all their snapshots); all upstream correct (same fallback);
// strictly more than half correct; the earliest snapshot of each direction
// correct; or — the only strategy that gives every flow a single prediction —
// the earliest downstream snapshot's prediction (earliest overall when no
// downstream exists). The fallbacks keep every strategy consistent with plain
// snapshot accuracy on single-snapshot flows.
enum class TranslationStrategy {
    AllCorrect,
    AllDownstream,
    AllUpstream,
    Majority,
    FirstTwoOnePerDirection,
    FirstPreferablyDownstream,
};

TranslationStrategy strategy_from_name(const std::string& name);
const char* strategy_name(TranslationStrategy s);
std::vector<TranslationStrategy> all_strategies();

struct SnapshotPrediction {
    std::string origin_id;
    Direction direction = Direction::Upstream;
    double window_start = 0.0;
    std::size_t true_class = 0;
    std::size_t predicted = 0;
};

struct FlowLevelResult {
    double accuracy = 0.0;
    std::size_t flows = 0;
    // Filled only by FirstPreferablyDownstream, which yields one prediction
    // per flow and therefore a full metric set.
    std::optional<ConfusionMatrix> confusion;
    std::optional<MetricSet> metrics;
};

// Groups predictions by origin_id; every flow's snapshots must agree on the
// true class. num_classes bounds the class indices.
FlowLevelResult flow_level_report(const std::vector<SnapshotPrediction>& preds,
                                  TranslationStrategy strategy, std::size_t num_classes);

}  // namespace flowbench
