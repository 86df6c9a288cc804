#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowbench/features.hpp"
#include "flowbench/flowdata.hpp"
#include "flowbench/labeling.hpp"
#include "flowbench/metrics.hpp"
#include "flowbench/nn/graph.hpp"
#include "flowbench/training.hpp"

namespace flowbench {

struct ExperimentConfig {
    std::string model = "first";  // preset name or "knn"
    InputView view = InputView::ThreeChannel;
    std::string norm = "minmax";  // iat handling: minmax | boxcox
    double dir_up_code = 1.0, dir_down_code = -1.0;
    nn::LrSchedule schedule = nn::LrSchedule::constant(1e-3);
    std::size_t epochs = 40;
    std::size_t batch = 64;
    std::uint64_t seed = 1;
    std::string task = "base25";  // base25 | meaningful5 | random5
    double test_fraction = 0.2;
    double val_fraction = 0.2;  // of the remaining training pool (4:1)
    std::size_t ppi_len = 30;
    std::size_t dir_len = 50;
    std::size_t grid = 32;
    double flowpic_window = 10.0, flowpic_step = 10.0;
    std::vector<std::string> task_sources;  // dataset ids the task was derived from
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
std::string config_hash(const ExperimentConfig& cfg);  // 16 hex chars

// The natural view for each model (dfcnn -> dir, lenet -> flowpic, else 3ch).
InputView default_view_for_model(const std::string& model);

struct LeakageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentReport {
    std::string dataset_id;
    MetricSet metrics;
    ConfusionMatrix confusion;
};

nlohmann::json report_to_json(const ExperimentReport& r);

struct TransferOutcome {
    ExperimentReport source_test;
    ExperimentReport target;
    double gap = 0.0;  // source-test accuracy minus target accuracy
    double val_accuracy = 0.0;
    TrainResult training;  // empty curves for knn
    std::string config_digest;
};

// Trains one model on the source's train split (grouped, leak-free) and
// evaluates the held-out source test split and the full target dataset.
// Normalizers fit on the training split only; a feature spec whose fitted
// normalizers name any other dataset is rejected (LeakageError), as is a task
// derived from the target.
TransferOutcome transfer_eval(const Dataset& source, const Dataset& target, const TaskSpec& task,
                              const ExperimentConfig& cfg);
// `feature_override` replaces the normalizers fit from the training split
// (subject to the fit-source check); `trained_out`, when non-null and the
// model is a network, receives the trained graph (best-validation weights).
TransferOutcome transfer_eval(const Dataset& source, const Dataset& target, const TaskSpec& task,
                              const ExperimentConfig& cfg,
                              const std::optional<FeatureSpec>& feature_override,
                              nn::Graph* trained_out = nullptr);

struct GroupingStudyRow {
    std::string task;
    std::string model;
    std::uint64_t seed = 0;
    double same_dataset_accuracy = 0.0;
    double transferred_accuracy = 0.0;
};

// Trains/evaluates every model and seed on the base 25-class task, the
// built-in 5-group task, and a seeded random 5-group task.
std::vector<GroupingStudyRow> grouping_study(const Dataset& source, const Dataset& target,
                                             const std::vector<std::string>& models,
                                             const std::vector<std::uint64_t>& seeds,
                                             const ExperimentConfig& base);

// Report emission: per-run metric rows, accuracy scatter, model rank table.
struct ResultRow {
    std::string model;
    std::string dataset;
    std::string task;
    std::uint64_t seed = 0;
    MetricSet metrics;
};

std::string results_csv(const std::vector<ResultRow>& rows);

struct ScatterRow {
    std::string model;
    std::uint64_t seed = 0;
    double val_accuracy = 0.0;
    double source_test_accuracy = 0.0;
    double target_accuracy = 0.0;
};

std::string scatter_csv(const std::vector<ScatterRow>& rows);
// Per-model means ranked by source-test accuracy, with target accuracy and
// the Spearman correlation between the two orderings on the last line.
std::string rank_table(const std::vector<ScatterRow>& rows);
std::string curves_csv(const TrainResult& result);

}  // namespace flowbench
