#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowbench/nn/graph.hpp"
#include "flowbench/nn/optimizer.hpp"

namespace flowbench {

struct TrainConfig {
    nn::LrSchedule schedule = nn::LrSchedule::constant(1e-3);
    std::size_t epochs = 40;
    std::size_t batch = 64;
    std::uint64_t seed = 1;      // epoch shuffling
    bool restore_best = true;    // end with the best-validation-accuracy weights
};

struct EpochStats {
    double lr = 0.0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> curves;
    std::size_t best_epoch = 0;          // earliest epoch reaching the best val accuracy
    double best_val_accuracy = 0.0;
};

struct TrainAbort : std::runtime_error {
    TrainAbort(std::size_t epoch_, double lr_, const std::string& where_)
        : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch_) + " (lr " +
                             std::to_string(lr_) + ", " + where_ + ")"),
          epoch(epoch_),
          lr(lr_),
          where(where_) {}
    std::size_t epoch;
    double lr;
    std::string where;  // offending parameter/layer, or "loss"
};

// Mini-batch Adam training with a piecewise-constant schedule. Labels are
// class indices aligned to the batch axis of x_train/x_val.
TrainResult train(nn::Graph& g, const nn::Tensor& x_train,
                  const std::vector<std::size_t>& y_train, const nn::Tensor& x_val,
                  const std::vector<std::size_t>& y_val, const TrainConfig& cfg);

// Mean loss and accuracy in inference mode.
std::pair<double, double> eval_loss_accuracy(nn::Graph& g, const nn::Tensor& x,
                                             const std::vector<std::size_t>& y,
                                             std::size_t batch = 64);

std::vector<std::size_t> predict_classes(nn::Graph& g, const nn::Tensor& x,
                                         std::size_t batch = 64);

// Rows [begin, end) of x as a new tensor.
nn::Tensor slice_rows(const nn::Tensor& x, std::size_t begin, std::size_t end);

}  // namespace flowbench
