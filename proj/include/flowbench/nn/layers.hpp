#pragma once

#include <memory>
#include <string>
#include <vector>

#include "flowbench/nn/tensor.hpp"
#include "flowbench/rng.hpp"

namespace flowbench::nn {

enum class Mode { Train, Infer };

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
};

// One computation node. forward() may cache intermediates needed by the
// immediately following backward(); the graph never interleaves two passes.
// backward() must ACCUMULATE into param grads and input grads.
class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    virtual std::size_t arity() const { return 1; }

    // Item shape (batch axis excluded). Called once at graph build; allocates
    // params and validates wiring.
    virtual Shape init(const std::vector<Shape>& in, Rng& rng) = 0;

    virtual void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) = 0;
    virtual void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                          const Tensor& gout, const std::vector<Tensor*>& gin) = 0;

    virtual std::vector<Param*> params() { return {}; }
};

class Dense : public Layer {
public:
    explicit Dense(std::size_t units) : units_(units) {}
    std::string kind() const override { return "dense"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
    std::vector<Param*> params() override { return {&w_, &b_}; }

private:
    std::size_t units_, in_features_ = 0;
    Param w_, b_;
};

// 1-D convolution over (T, C) inputs, stride 1, zero 'same' padding.
// Kernel layout (k, C_in, filters).
class Conv1D : public Layer {
public:
    Conv1D(std::size_t filters, std::size_t kernel) : filters_(filters), kernel_(kernel) {}
    std::string kind() const override { return "conv1d"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
    std::vector<Param*> params() override { return {&w_, &b_}; }

private:
    std::size_t filters_, kernel_, t_ = 0, cin_ = 0;
    Param w_, b_;
};

// 2-D convolution over (H, W, C) inputs, stride 1, zero 'same' padding.
// Kernel layout (kh, kw, C_in, filters).
class Conv2D : public Layer {
public:
    Conv2D(std::size_t filters, std::size_t kh, std::size_t kw)
        : filters_(filters), kh_(kh), kw_(kw) {}
    std::string kind() const override { return "conv2d"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
    std::vector<Param*> params() override { return {&w_, &b_}; }

private:
    std::size_t filters_, kh_, kw_, h_ = 0, w_in_ = 0, cin_ = 0;
    Param w_, b_;
};

// Max pooling over (T, C), 'same' padding: T_out = ceil(T / stride).
// Ties resolve to the lowest input index.
class MaxPool1D : public Layer {
public:
    MaxPool1D(std::size_t pool, std::size_t stride) : pool_(pool), stride_(stride) {}
    std::string kind() const override { return "maxpool1d"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;

private:
    std::size_t pool_, stride_, t_ = 0, c_ = 0, t_out_ = 0;
    long pad_left_ = 0;
    std::vector<std::size_t> argmax_;
};

// Max pooling over (H, W, C), 'same' padding per axis.
class MaxPool2D : public Layer {
public:
    MaxPool2D(std::size_t pool_h, std::size_t pool_w, std::size_t stride_h, std::size_t stride_w)
        : ph_(pool_h), pw_(pool_w), sh_(stride_h), sw_(stride_w) {}
    std::string kind() const override { return "maxpool2d"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;

private:
    std::size_t ph_, pw_, sh_, sw_;
    std::size_t h_ = 0, w_ = 0, c_ = 0, ho_ = 0, wo_ = 0;
    long pad_top_ = 0, pad_left_ = 0;
    std::vector<std::size_t> argmax_;
};

// Multi-head attention applied across the feature axis of (T, d) inputs:
// each position t attends over its own heads, never across positions, so a
// permutation of the time axis permutes the output identically. Projections
// Wq/Wk/Wv map d -> (heads, head_size); the output kernel maps back to d.
class ChannelwiseMultiHeadAttention : public Layer {
public:
    ChannelwiseMultiHeadAttention(std::size_t heads, std::size_t head_size)
        : heads_(heads), head_size_(head_size) {}
    std::string kind() const override { return "channelwise_mha"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
    std::vector<Param*> params() override {
        return {&wq_, &bq_, &wk_, &bk_, &wv_, &bv_, &wo_, &bo_};
    }

private:
    std::size_t heads_, head_size_, t_ = 0, d_ = 0;
    Param wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
    Tensor attn_;  // (rows, heads, heads) softmax weights cached by forward
};

// Normalizes the last axis per position. y = gamma * (x - mu) / sqrt(var + eps) + beta.
class LayerNorm : public Layer {
public:
    explicit LayerNorm(double eps = 1e-6) : eps_(eps) {}
    std::string kind() const override { return "layernorm"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
    std::vector<Param*> params() override { return {&gamma_, &beta_}; }

private:
    double eps_;
    std::size_t d_ = 0;
    Param gamma_, beta_;
    std::vector<double> inv_std_;  // per row
    Tensor xhat_;
};

// Batch normalization over the last axis. Train mode uses biased batch
// statistics and updates running stats with momentum; inference uses the
// running stats. Running mean/var are the non-trainable parameters.
class BatchNorm : public Layer {
public:
    explicit BatchNorm(double momentum = 0.99, double eps = 1e-3)
        : momentum_(momentum), eps_(eps) {}
    std::string kind() const override { return "batchnorm"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
    std::vector<Param*> params() override {
        return {&gamma_, &beta_, &running_mean_, &running_var_};
    }

private:
    double momentum_, eps_;
    std::size_t c_ = 0;
    Param gamma_, beta_, running_mean_, running_var_;
    std::vector<double> inv_std_;  // per channel, batch stats
    Tensor xhat_;
    bool last_train_ = false;
};

// Inverted dropout. Train: zero with probability `rate`, scale by 1/(1-rate).
// freeze() pins the current mask so finite-difference probes see a fixed
// function; unfreeze() resumes fresh masks per forward.
class Dropout : public Layer {
public:
    Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}
    std::string kind() const override { return "dropout"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
    void freeze(bool on) { frozen_ = on; }
    void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
    double rate() const { return rate_; }

private:
    double rate_;
    Rng rng_;
    bool frozen_ = false;
    bool last_train_ = false;
    Tensor mask_;
};

class Flatten : public Layer {
public:
    std::string kind() const override { return "flatten"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
};

// Elementwise sum of two inputs of identical shape.
class Add : public Layer {
public:
    std::string kind() const override { return "add"; }
    std::size_t arity() const override { return 2; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
};

class ReLU : public Layer {
public:
    std::string kind() const override { return "relu"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
};

class ELU : public Layer {
public:
    explicit ELU(double alpha = 1.0) : alpha_(alpha) {}
    std::string kind() const override { return "elu"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;

private:
    double alpha_;
};

// Softmax over the last axis, max-shifted for stability.
class Softmax : public Layer {
public:
    std::string kind() const override { return "softmax"; }
    Shape init(const std::vector<Shape>& in, Rng& rng) override;
    void forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) override;
    void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                  const Tensor& gout, const std::vector<Tensor*>& gin) override;
};

// Glorot-style uniform init on [-limit, limit], limit = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace flowbench::nn
