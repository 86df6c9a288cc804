#include "flowbench/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowbench::nn {

int Graph::add(std::string name, std::unique_ptr<Layer> layer, std::vector<int> inputs) {
    if (built_) throw std::logic_error("graph already built");
    if (inputs.empty()) inputs.push_back(static_cast<int>(nodes_.size()) - 1);
    for (int idx : inputs)
        if (idx < kInput || idx >= static_cast<int>(nodes_.size()))
            throw std::invalid_argument("node '" + name + "' references undefined input " + std::to_string(idx));
    if (inputs.size() != layer->arity())
        throw std::invalid_argument("node '" + name + "' wants " + std::to_string(layer->arity()) +
                                    " inputs, got " + std::to_string(inputs.size()));
    for (const Node& n : nodes_)
        if (n.name == name) throw std::invalid_argument("duplicate node name '" + name + "'");
    nodes_.push_back({std::move(name), std::move(layer), std::move(inputs)});
    return static_cast<int>(nodes_.size()) - 1;
}

void Graph::build(Shape input_item_shape, std::uint64_t seed) {
    if (built_) throw std::logic_error("graph already built");
    if (nodes_.empty()) throw std::logic_error("empty graph");
    input_shape_ = std::move(input_item_shape);
    Rng rng(seed);
    item_shapes_.clear();
    std::vector<unsigned> consumers(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        std::vector<Shape> in_shapes;
        for (int idx : nodes_[i].inputs) {
            in_shapes.push_back(idx == kInput ? input_shape_ : item_shapes_[static_cast<std::size_t>(idx)]);
            if (idx != kInput) ++consumers[static_cast<std::size_t>(idx)];
        }
        try {
            item_shapes_.push_back(nodes_[i].layer->init(in_shapes, rng));
        } catch (const std::exception& e) {
            throw std::invalid_argument("node '" + nodes_[i].name + "': " + e.what());
        }
        for (Param* p : nodes_[i].layer->params()) p->name = nodes_[i].name + "/" + p->name;
    }
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i)
        if (consumers[i] == 0)
            throw std::invalid_argument("node '" + nodes_[i].name + "' has no consumer");
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (auto* d = dynamic_cast<Dropout*>(nodes_[i].layer.get()))
            d->reseed(seed ^ fnv1a64(nodes_[i].name));
    activations_.resize(nodes_.size());
    grads_.resize(nodes_.size());
    built_ = true;
}

const Tensor& Graph::forward(const Tensor& x, Mode mode) {
    if (!built_) throw std::logic_error("graph not built");
    if (x.shape.size() != input_shape_.size() + 1)
        throw std::invalid_argument("input rank mismatch");
    for (std::size_t i = 0; i < input_shape_.size(); ++i)
        if (x.shape[i + 1] != input_shape_[i])
            throw std::invalid_argument("input item shape mismatch: got " + shape_str(x.shape));
    std::size_t batch = x.shape[0];
    last_input_ = &x;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Shape s{batch};
        for (std::size_t d : item_shapes_[i]) s.push_back(d);
        if (activations_[i].shape != s) activations_[i] = Tensor(s);
        std::vector<const Tensor*> ins;
        for (int idx : nodes_[i].inputs) ins.push_back(&activation(idx, x));
        nodes_[i].layer->forward(ins, activations_[i], mode);
    }
    return activations_.back();
}

void Graph::backward(const Tensor& grad_out) {
    if (last_input_ == nullptr) throw std::logic_error("backward before forward");
    const Tensor& x = *last_input_;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (grads_[i].shape != activations_[i].shape) grads_[i] = Tensor(activations_[i].shape);
        grads_[i].fill(0.0);
    }
    if (input_grad_.shape != x.shape) input_grad_ = Tensor(x.shape);
    input_grad_.fill(0.0);
    if (grad_out.shape != activations_.back().shape)
        throw std::invalid_argument("output gradient shape mismatch");
    grads_.back() = grad_out;
    for (std::size_t ri = nodes_.size(); ri-- > 0;) {
        std::vector<const Tensor*> ins;
        std::vector<Tensor*> gins;
        for (int idx : nodes_[ri].inputs) {
            ins.push_back(&activation(idx, x));
            gins.push_back(idx == kInput ? &input_grad_ : &grads_[static_cast<std::size_t>(idx)]);
        }
        nodes_[ri].layer->backward(ins, activations_[ri], grads_[ri], gins);
    }
}

void Graph::zero_grad() {
    for (Param* p : params()) p->grad.fill(0.0);
}

std::vector<Param*> Graph::params() {
    std::vector<Param*> out;
    for (Node& n : nodes_)
        for (Param* p : n.layer->params()) out.push_back(p);
    return out;
}

std::size_t Graph::param_count(bool trainable_only) const {
    std::size_t total = 0;
    for (const Node& n : nodes_)
        for (Param* p : const_cast<Layer&>(*n.layer).params())
            if (!trainable_only || p->trainable) total += p->value.numel();
    return total;
}

std::size_t Graph::node_param_count(std::size_t i, bool trainable_only) const {
    std::size_t total = 0;
    for (Param* p : const_cast<Layer&>(*nodes_[i].layer).params())
        if (!trainable_only || p->trainable) total += p->value.numel();
    return total;
}

int Graph::find(const std::string& name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].name == name) return static_cast<int>(i);
    return -1;
}

void Graph::freeze_dropout(bool on) {
    for (Node& n : nodes_)
        if (auto* d = dynamic_cast<Dropout*>(n.layer.get())) d->freeze(on);
}

std::vector<Tensor> Graph::snapshot_params() const {
    std::vector<Tensor> snap;
    for (const Node& n : nodes_)
        for (Param* p : const_cast<Layer&>(*n.layer).params()) snap.push_back(p->value);
    return snap;
}

void Graph::restore_params(const std::vector<Tensor>& snap) {
    std::size_t i = 0;
    for (Node& n : nodes_)
        for (Param* p : n.layer->params()) {
            if (i >= snap.size() || snap[i].shape != p->value.shape)
                throw std::invalid_argument("parameter snapshot does not match graph");
            p->value = snap[i++];
        }
    if (i != snap.size()) throw std::invalid_argument("parameter snapshot does not match graph");
}

double cross_entropy(const Tensor& probs, const std::vector<std::size_t>& labels, Tensor* grad) {
    std::size_t classes = probs.shape.back();
    std::size_t n = probs.numel() / classes;
    if (labels.size() != n) throw std::invalid_argument("label count does not match batch");
    if (grad != nullptr) {
        if (grad->shape != probs.shape) *grad = Tensor(probs.shape);
        grad->fill(0.0);
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t y = labels[r];
        if (y >= classes) throw std::invalid_argument("label out of range");
        double p = std::max(probs.data[r * classes + y], 1e-12);
        loss -= std::log(p);
        if (grad != nullptr) grad->data[r * classes + y] = -1.0 / (p * static_cast<double>(n));
    }
    return loss / static_cast<double>(n);
}

std::size_t argmax_row(const double* v, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::size_t argmax_row(const Tensor& probs, std::size_t row) {
    const std::size_t classes = probs.shape.back();
    return argmax_row(probs.data.data() + row * classes, classes);
}

}  // namespace flowbench::nn
