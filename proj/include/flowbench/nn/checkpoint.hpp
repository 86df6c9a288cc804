#pragma once

#include <string>

#include "flowbench/nn/graph.hpp"

namespace flowbench::nn {

// Checkpoint layout: magic line "FBCKPT1\n", a 4-byte little-endian header
// length, a JSON header (layer spec list, per-parameter shapes/offsets, config
// hash), then all parameter arrays row-major as little-endian float32.
void save_checkpoint(const std::string& path, Graph& graph, const std::string& config_hash);

// Loads parameters into an already-built graph. Throws std::runtime_error
// naming the first layer whose spec or shape disagrees.
void load_checkpoint(const std::string& path, Graph& graph);

// Config hash stored in the header, without touching any graph.
std::string checkpoint_config_hash(const std::string& path);

}  // namespace flowbench::nn
