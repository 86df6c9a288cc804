#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowbench/nn/graph.hpp"

namespace flowbench::models {

// Five transformer presets over (30, 3) inputs. Residual adds are present in
// every trunk; they carry no parameters.
struct TransformerConfig {
    std::size_t heads = 1;
    std::size_t head_size = 3;
    std::size_t blocks = 2;
    std::size_t dense_units = 512;
    bool input_batchnorm = false;        // nomb
    bool embedding = false;              // full: Dense(embed_dim) + BatchNorm + Add
    std::size_t embed_dim = 256;
    std::size_t ff_dim = 64;
    bool dropout_after_flatten = true;   // false for nomb and full
    double trunk_dropout = 0.25;
    double head_dropout = 0.5;
};

// Preset names: first, moreblocks, newrun, nomb, full. Throws on anything else.
TransformerConfig transformer_preset(const std::string& name);

nn::Graph build_transformer(const TransformerConfig& cfg, std::size_t input_len,
                            std::size_t channels, std::size_t classes, std::uint64_t seed);
nn::Graph build_transformer(const std::string& preset, std::size_t classes = 25,
                            std::uint64_t seed = 1);

// Four conv-conv-pool blocks (widths 32/64/128/256, kernel 8, pool 8 stride 4,
// ELU in the first block then ReLU) over a single direction channel, then the
// dense head. input_len below 8 underflows the first pool and is rejected.
nn::Graph build_df_cnn(std::size_t input_len, std::size_t classes, std::uint64_t seed = 1);

// conv(6,5x5)-pool-conv(16,5x5)-pool-dense(120)-dense(84)-dense(classes) over
// an (H, W, 1) grid; convolutions pad 'same' so grids down to 8x8 work.
nn::Graph build_lenet(std::size_t grid_h, std::size_t grid_w, std::size_t classes,
                      std::uint64_t seed = 1);

// CLI dispatcher: the five transformer presets plus dfcnn (input 50) and lenet
// (32x32). dfcnn_len overrides the dfcnn input length.
nn::Graph build_preset(const std::string& name, std::size_t classes,
                       std::uint64_t seed = 1, std::size_t dfcnn_len = 50);
bool is_preset(const std::string& name);
const std::vector<std::string>& preset_names();

struct ParamDiff {
    std::string preset;
    std::string layer;
    std::size_t expected = 0;
    std::size_t actual = 0;
};

struct ParamCountReport {
    bool ok = true;
    std::vector<ParamDiff> diffs;
    std::string summary;  // one line per preset: totals and splits
};

// Builds all five presets and checks totals, trainable/non-trainable splits,
// and the frozen per-layer counts. Any mismatch lands in diffs.
ParamCountReport verify_param_counts();

}  // namespace flowbench::models
