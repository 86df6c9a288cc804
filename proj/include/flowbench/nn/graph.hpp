#pragma once

#include <memory>
#include <string>
#include <vector>

#include "flowbench/nn/layers.hpp"

namespace flowbench::nn {

// A model is a list of nodes in topological order; node inputs reference
// earlier nodes by index, or kInput for the model input. The last node is the
// output. Forward caches per-node activations for the immediately following
// backward; the pair never interleaves across calls.
class Graph {
public:
    static constexpr int kInput = -1;

    // inputs empty: consumes the previous node (or the model input if first).
    int add(std::string name, std::unique_ptr<Layer> layer, std::vector<int> inputs = {});

    // Initializes parameters and runs the static shape check end-to-end.
    void build(Shape input_item_shape, std::uint64_t seed);

    const Tensor& forward(const Tensor& x, Mode mode);

    // Seeds the output gradient and propagates to parameters and the input.
    void backward(const Tensor& grad_out);

    void zero_grad();

    std::vector<Param*> params();
    std::size_t param_count(bool trainable_only = false) const;

    std::size_t node_count() const { return nodes_.size(); }
    const std::string& node_name(std::size_t i) const { return nodes_[i].name; }
    Layer& layer(std::size_t i) { return *nodes_[i].layer; }
    const Shape& node_item_shape(std::size_t i) const { return item_shapes_[i]; }
    int find(const std::string& name) const;  // -1 if absent
    std::size_t node_param_count(std::size_t i, bool trainable_only = false) const;

    const Shape& input_item_shape() const { return input_shape_; }
    const Tensor& input_grad() const { return input_grad_; }
    bool built() const { return built_; }

    // Pins dropout masks in place so repeated forwards evaluate a fixed function.
    void freeze_dropout(bool on);

    std::vector<Tensor> snapshot_params() const;
    void restore_params(const std::vector<Tensor>& snap);

private:
    struct Node {
        std::string name;
        std::unique_ptr<Layer> layer;
        std::vector<int> inputs;
    };

    const Tensor& activation(int idx, const Tensor& x) const {
        return idx == kInput ? x : activations_[static_cast<std::size_t>(idx)];
    }

    std::vector<Node> nodes_;
    std::vector<Shape> item_shapes_;
    std::vector<Tensor> activations_;
    std::vector<Tensor> grads_;
    Tensor input_grad_;
    Shape input_shape_;
    const Tensor* last_input_ = nullptr;
    bool built_ = false;
};

// Mean negative log-likelihood of the true class under `probs` (rows of the
// last axis are probability vectors). Fills grad with dL/dprobs when given.
double cross_entropy(const Tensor& probs, const std::vector<std::size_t>& labels,
                     Tensor* grad = nullptr);

// Lowest index wins ties.
std::size_t argmax_row(const double* v, std::size_t n);
std::size_t argmax_row(const Tensor& probs, std::size_t row);

}  // namespace flowbench::nn
