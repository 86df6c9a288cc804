#pragma once

#include <string>
#include <vector>

#include "flowbench/flowdata.hpp"
#include "flowbench/nn/tensor.hpp"
#include "flowbench/pipeline.hpp"

namespace flowbench {

enum class InputView { ThreeChannel, TwoChannel, DirectionOnly, Flowpic };

InputView input_view_from_name(const std::string& name);  // 3ch|2ch|dir|flowpic
const char* input_view_name(InputView v);

struct FeatureSpec {
    InputView view = InputView::ThreeChannel;
    std::size_t ppi_len = 30;   // channel views
    std::size_t dir_len = 50;   // DirectionOnly
    std::size_t grid = 32;      // Flowpic
    double size_max = 1500.0;
    double iat_cap = 5.0;
    double window_len = 60.0;   // Flowpic windowing of flows/traces
    double step = 15.0;
    NormalizerSpec iat_norm;    // default MinMax [0, iat_cap]
    NormalizerSpec size_norm;   // default MinMax [0, size_max]
    NormalizerSpec dir_norm;    // default identity (signed +1/-1 codes)
};

// Spec with the per-view default normalizers filled in.
FeatureSpec default_features(InputView view);

// Per-item tensor shape: (L,3) / (L,2) / (dir_len,1) / (grid,grid,1).
nn::Shape feature_item_shape(const FeatureSpec& spec);

// Channel views consume flows, traces, and pre-extracted records; the
// Flowpic view consumes snapshots directly and windows flows/traces itself,
// rendering the representative (earliest, preferring downstream) snapshot.
// Grid cells are scaled by the grid's peak count into [0, 1]. TwoChannel is
// (direction, size) — arrival times omitted.
std::vector<double> featurize_item(const DatasetItem& item, const FeatureSpec& spec);

nn::Tensor featurize_batch(const std::vector<const DatasetItem*>& items,
                           const FeatureSpec& spec);

}  // namespace flowbench
