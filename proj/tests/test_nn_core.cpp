#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "flowbench/nn/checkpoint.hpp"
#include "flowbench/nn/graph.hpp"
#include "flowbench/nn/layers.hpp"
#include "flowbench/nn/optimizer.hpp"
#include "support/grad_check.hpp"

using namespace flowbench;
using namespace flowbench::nn;
using gradcheck::check_graph_gradients;
using gradcheck::random_tensor;

namespace {

Graph single_layer(std::unique_ptr<Layer> layer, Shape item_shape, std::uint64_t seed = 7) {
    Graph g;
    g.add("probe", std::move(layer));
    g.build(std::move(item_shape), seed);
    return g;
}

}  // namespace

TEST_CASE("tensor basics") {
    Tensor t({4, 3, 2});
    CHECK(t.numel() == 24);
    CHECK(t.batch() == 4);
    CHECK(t.item_size() == 6);
    t.fill(2.5);
    CHECK(t.data[23] == 2.5);
    CHECK_THROWS(t.reshape({5, 5}));
    t.reshape({2, 12});
    CHECK(t.shape == Shape{2, 12});
}

TEST_CASE("lr schedule parse, query, and print") {
    auto s = LrSchedule::parse("1e-3:3,1e-4:1");
    CHECK(s.rate_at(0) == doctest::Approx(1e-3));
    CHECK(s.rate_at(2) == doctest::Approx(1e-3));
    CHECK(s.rate_at(3) == doctest::Approx(1e-4));
    CHECK(s.rate_at(99) == doctest::Approx(1e-4));  // final rate persists
    CHECK(LrSchedule::parse(s.str()).str() == s.str());
    auto c = LrSchedule::constant(5e-2);
    CHECK(c.rate_at(0) == doctest::Approx(5e-2));
    CHECK(c.rate_at(1000) == doctest::Approx(5e-2));
    auto bare = LrSchedule::parse("1e-3");  // bare rate: one constant segment
    CHECK(bare.rate_at(50) == doctest::Approx(1e-3));
    CHECK_THROWS(LrSchedule::parse(""));
    CHECK_THROWS(LrSchedule::parse("1e-3:0"));
    CHECK_THROWS(LrSchedule::parse("abc:2"));
}

TEST_CASE("glorot uniform stays within the fan limit") {
    Tensor t({64, 32});
    Rng rng(3);
    glorot_uniform(t, 64, 32, rng);
    const double limit = std::sqrt(6.0 / (64 + 32));
    double lo = 0, hi = 0;
    for (double v : t.data) {
        CHECK(std::abs(v) <= limit);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo < -0.5 * limit);  // actually spreads over the range
    CHECK(hi > 0.5 * limit);
}

// ---------------------------------------------------------------- gradients

TEST_CASE("dense gradients match finite differences") {
    auto g = single_layer(std::make_unique<Dense>(5), {7});
    auto r = check_graph_gradients(g, random_tensor({4, 7}, 11), 21);
    INFO("worst: ", r.worst);
    CHECK(r.max_rel_err <= 1e-4);
    CHECK(r.checked >= 15);
}

TEST_CASE("conv1d gradients match finite differences") {
    auto g = single_layer(std::make_unique<Conv1D>(4, 3), {10, 3});
    auto r = check_graph_gradients(g, random_tensor({3, 10, 3}, 12), 22);
    INFO("worst: ", r.worst);
    CHECK(r.max_rel_err <= 1e-4);
}

TEST_CASE("conv2d gradients match finite differences") {
    auto g = single_layer(std::make_unique<Conv2D>(3, 3, 3), {8, 8, 2});
    auto r = check_graph_gradients(g, random_tensor({2, 8, 8, 2}, 13), 23);
    INFO("worst: ", r.worst);
    CHECK(r.max_rel_err <= 1e-4);
}

TEST_CASE("maxpool1d gradients match finite differences") {
    auto g = single_layer(std::make_unique<MaxPool1D>(3, 2), {9, 2});
    auto r = check_graph_gradients(g, random_tensor({3, 9, 2}, 14), 24);
    INFO("worst: ", r.worst);
    CHECK(r.max_rel_err <= 1e-4);
}

TEST_CASE("maxpool2d gradients match finite differences") {
    auto g = single_layer(std::make_unique<MaxPool2D>(2, 2, 2, 2), {6, 6, 2});
    auto r = check_graph_gradients(g, random_tensor({2, 6, 6, 2}, 15), 25);
    INFO("worst: ", r.worst);
    CHECK(r.max_rel_err <= 1e-4);
}

TEST_CASE("channelwise attention gradients match finite differences") {
    auto g = single_layer(std::make_unique<ChannelwiseMultiHeadAttention>(2, 3), {6, 8});
    auto r = check_graph_gradients(g, random_tensor({2, 6, 8}, 16), 26);
    INFO("worst: ", r.worst);
    CHECK(r.max_rel_err <= 1e-4);
}

TEST_CASE("layernorm gradients match finite differences") {
    auto g = single_layer(std::make_unique<LayerNorm>(), {5, 6});
    auto r = check_graph_gradients(g, random_tensor({3, 5, 6}, 17), 27);
    INFO("worst: ", r.worst);
    CHECK(r.max_rel_err <= 1e-4);
}

TEST_CASE("batchnorm gradients match finite differences in train mode") {
    auto g = single_layer(std::make_unique<BatchNorm>(), {4, 5});
    auto r = check_graph_gradients(g, random_tensor({6, 4, 5}, 18), 28);
    INFO("worst: ", r.worst);
    CHECK(r.max_rel_err <= 1e-4);
}

TEST_CASE("frozen dropout gradients match finite differences") {
    auto g = single_layer(std::make_unique<Dropout>(0.4, 99), {12});
    auto r = check_graph_gradients(g, random_tensor({5, 12}, 19), 29);
    INFO("worst: ", r.worst);
    CHECK(r.max_rel_err <= 1e-4);
}

TEST_CASE("activation and shape layer gradients match finite differences") {
    auto relu = single_layer(std::make_unique<ReLU>(), {11});
    auto r1 = check_graph_gradients(relu, random_tensor({4, 11}, 31), 41);
    CHECK(r1.max_rel_err <= 1e-4);

    auto elu = single_layer(std::make_unique<ELU>(), {11});
    auto r2 = check_graph_gradients(elu, random_tensor({4, 11}, 32), 42);
    CHECK(r2.max_rel_err <= 1e-4);

    auto sm = single_layer(std::make_unique<Softmax>(), {9});
    auto r3 = check_graph_gradients(sm, random_tensor({4, 9}, 33), 43);
    CHECK(r3.max_rel_err <= 1e-4);

    auto fl = single_layer(std::make_unique<Flatten>(), {3, 4});
    auto r4 = check_graph_gradients(fl, random_tensor({2, 3, 4}, 34), 44);
    CHECK(r4.max_rel_err <= 1e-4);
}

TEST_CASE("add joins two branches and its gradients check out") {
    Graph g;
    int a = g.add("a", std::make_unique<Dense>(6), {Graph::kInput});
    int b = g.add("b", std::make_unique<Dense>(6), {Graph::kInput});
    g.add("sum", std::make_unique<Add>(), {a, b});
    g.build({5}, 5);
    auto r = check_graph_gradients(g, random_tensor({3, 5}, 35), 45);
    INFO("worst: ", r.worst);
    CHECK(r.max_rel_err <= 1e-4);
}

// ---------------------------------------------------------------- semantics

TEST_CASE("softmax rows sum to one and shifts cancel") {
    auto g = single_layer(std::make_unique<Softmax>(), {7});
    Tensor x = random_tensor({3, 7}, 40, -5, 5);
    Tensor out = g.forward(x, Mode::Infer);
    for (std::size_t r = 0; r < 3; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 7; ++c) {
            const double p = out.data[r * 7 + c];
            CHECK(p >= 0.0);
            s += p;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    Tensor shifted = x;
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 7; ++c) shifted.data[r * 7 + c] += 100.0;
    Tensor out2 = g.forward(shifted, Mode::Infer);
    for (std::size_t i = 0; i < out.numel(); ++i)
        CHECK(out2.data[i] == doctest::Approx(out.data[i]).epsilon(1e-9));
}

TEST_CASE("layernorm standardizes each position before the affine") {
    auto g = single_layer(std::make_unique<LayerNorm>(), {4, 10});
    Tensor x = random_tensor({2, 4, 10}, 41, -3, 9);
    Tensor out = g.forward(x, Mode::Infer);  // gamma=1, beta=0 at init
    for (std::size_t row = 0; row < 8; ++row) {
        double mean = 0, var = 0;
        for (std::size_t c = 0; c < 10; ++c) mean += out.data[row * 10 + c];
        mean /= 10;
        for (std::size_t c = 0; c < 10; ++c) {
            const double d = out.data[row * 10 + c] - mean;
            var += d * d;
        }
        var /= 10;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shrinks it slightly
    }
}

TEST_CASE("batchnorm train output is standardized and running stats converge") {
    auto g = single_layer(std::make_unique<BatchNorm>(0.5, 1e-3), {6});
    Tensor x = random_tensor({64, 6}, 42, 2, 4);
    Tensor out = g.forward(x, Mode::Train);
    for (std::size_t c = 0; c < 6; ++c) {
        double mean = 0;
        for (std::size_t r = 0; r < 64; ++r) mean += out.data[r * 6 + c];
        mean /= 64;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    }
    for (int i = 0; i < 20; ++i) g.forward(x, Mode::Train);
    Tensor inf = g.forward(x, Mode::Infer);
    // After many updates on the same batch, running stats match batch stats,
    // so inference output is standardized too.
    double mean0 = 0;
    for (std::size_t r = 0; r < 64; ++r) mean0 += inf.data[r * 6];
    CHECK(mean0 / 64 == doctest::Approx(0.0).epsilon(1e-3));
}

TEST_CASE("batchnorm running stats are non-trainable") {
    auto g = single_layer(std::make_unique<BatchNorm>(), {4});
    std::size_t trainable = 0, frozen = 0;
    for (Param* p : g.params()) (p->trainable ? trainable : frozen) += p->value.numel();
    CHECK(trainable == 8);
    CHECK(frozen == 8);
}

TEST_CASE("dropout scales kept values and is identity at inference") {
    auto g = single_layer(std::make_unique<Dropout>(0.25, 77), {4000});
    Tensor x({1, 4000});
    x.fill(1.0);
    Tensor out = g.forward(x, Mode::Train);
    std::size_t zeros = 0;
    for (double v : out.data) {
        if (v == 0.0) {
            ++zeros;
        } else {
            CHECK(v == doctest::Approx(1.0 / 0.75));
        }
    }
    CHECK(zeros > 800);
    CHECK(zeros < 1200);
    Tensor inf = g.forward(x, Mode::Infer);
    for (double v : inf.data) CHECK(v == 1.0);
}

TEST_CASE("channelwise attention is position-local") {
    auto g = single_layer(std::make_unique<ChannelwiseMultiHeadAttention>(2, 4), {5, 6});
    Tensor x = random_tensor({1, 5, 6}, 43);
    Tensor out = g.forward(x, Mode::Infer);

    // Reverse the positions; the outputs must follow the permutation exactly.
    Tensor xp({1, 5, 6});
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t c = 0; c < 6; ++c) xp.data[t * 6 + c] = x.data[(4 - t) * 6 + c];
    Tensor outp = g.forward(xp, Mode::Infer);
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t c = 0; c < 6; ++c)
            CHECK(outp.data[t * 6 + c] == doctest::Approx(out.data[(4 - t) * 6 + c]).epsilon(1e-12));
}

TEST_CASE("graph wiring validation") {
    Graph g;
    g.add("d", std::make_unique<Dense>(3));
    CHECK_THROWS(g.add("d", std::make_unique<Dense>(3)));       // duplicate name
    CHECK_THROWS(g.add("bad", std::make_unique<Dense>(3), {5}));  // forward reference
    Graph g2;
    CHECK_THROWS(g2.add("sum", std::make_unique<Add>(), {Graph::kInput}));  // arity mismatch
}

TEST_CASE("graph parameter names carry the node prefix") {
    Graph g;
    g.add("head", std::make_unique<Dense>(3));
    g.build({4}, 1);
    std::set<std::string> names;
    for (Param* p : g.params()) names.insert(p->name);
    CHECK(names.count("head/kernel") == 1);
    CHECK(names.count("head/bias") == 1);
}

TEST_CASE("graph snapshot and restore round-trips parameters") {
    Graph g;
    g.add("a", std::make_unique<Dense>(8));
    g.add("b", std::make_unique<Dense>(3));
    g.build({6}, 9);
    auto snap = g.snapshot_params();
    Tensor x = random_tensor({2, 6}, 44);
    Tensor before = g.forward(x, Mode::Infer);
    for (Param* p : g.params())
        for (double& v : p->value.data) v += 0.5;
    g.restore_params(snap);
    Tensor after = g.forward(x, Mode::Infer);
    for (std::size_t i = 0; i < before.numel(); ++i) CHECK(after.data[i] == before.data[i]);

    Graph other;
    other.add("a", std::make_unique<Dense>(4));
    other.build({6}, 9);
    CHECK_THROWS(other.restore_params(snap));
}

TEST_CASE("cross entropy matches a direct oracle and rejects bad labels") {
    Tensor probs({2, 3});
    probs.data = {0.7, 0.2, 0.1, 0.05, 0.05, 0.9};
    const std::vector<std::size_t> y = {0, 2};
    const double expect = -(std::log(0.7) + std::log(0.9)) / 2.0;
    CHECK(cross_entropy(probs, y) == doctest::Approx(expect).epsilon(1e-12));

    Tensor grad;
    cross_entropy(probs, y, &grad);
    CHECK(grad.data[0] == doctest::Approx(-1.0 / (0.7 * 2)));
    CHECK(grad.data[1] == 0.0);
    CHECK(grad.data[5] == doctest::Approx(-1.0 / (0.9 * 2)));
    CHECK_THROWS(cross_entropy(probs, {0, 3}));
    CHECK_THROWS(cross_entropy(probs, {0}));

    // Probability clamp keeps the loss finite.
    Tensor zero({1, 2});
    zero.data = {0.0, 1.0};
    CHECK(std::isfinite(cross_entropy(zero, {0})));
}

TEST_CASE("argmax takes the lowest index on ties") {
    const double v[4] = {0.2, 0.5, 0.5, 0.1};
    CHECK(argmax_row(v, 4) == 1);
    Tensor t({2, 2});
    t.data = {1.0, 1.0, 0.0, 2.0};
    CHECK(argmax_row(t, 0) == 0);
    CHECK(argmax_row(t, 1) == 1);
}

TEST_CASE("adam single step matches the closed form") {
    Graph g;
    g.add("d", std::make_unique<Dense>(1));
    g.build({1}, 1);
    auto ps = g.params();  // w (1x1), b (1)
    ps[0]->value.data[0] = 2.0;
    ps[1]->value.data[0] = 0.0;
    g.zero_grad();
    ps[0]->grad.data[0] = 0.5;
    ps[1]->grad.data[0] = -0.25;

    Adam opt(ps);
    opt.step(0.1);
    // First step: m-hat = grad, v-hat = grad^2, update = lr * g/(|g| + eps).
    const double eps = 1e-7;
    CHECK(ps[0]->value.data[0] == doctest::Approx(2.0 - 0.1 * 0.5 / (0.5 + eps)).epsilon(1e-12));
    CHECK(ps[1]->value.data[0] == doctest::Approx(0.0 + 0.1 * 0.25 / (0.25 + eps)).epsilon(1e-12));
}

TEST_CASE("adam rejects non-finite gradients by parameter name") {
    Graph g;
    g.add("head", std::make_unique<Dense>(2));
    g.build({2}, 1);
    auto ps = g.params();
    ps[0]->grad.data[0] = std::nan("");
    Adam opt(ps);
    CHECK_THROWS_WITH_AS(opt.step(0.1), doctest::Contains("head/kernel"), std::runtime_error);
}

TEST_CASE("adam skips non-trainable parameters") {
    auto g = single_layer(std::make_unique<BatchNorm>(), {3});
    auto ps = g.params();
    Adam opt(ps);
    std::vector<double> before;
    for (Param* p : ps)
        if (!p->trainable) before.push_back(p->value.data[0]);
    for (Param* p : ps) p->grad.fill(1.0);
    opt.step(0.5);
    std::size_t i = 0;
    for (Param* p : ps)
        if (!p->trainable) CHECK(p->value.data[0] == before[i++]);
}

TEST_CASE("checkpoint round-trip restores float32-exact parameters") {
    Graph g;
    g.add("a", std::make_unique<Dense>(5));
    g.add("act", std::make_unique<ReLU>());
    g.add("b", std::make_unique<Dense>(2));
    g.build({4}, 31);

    const std::string path = "test_ckpt_roundtrip.ckpt";
    save_checkpoint(path, g, "deadbeefdeadbeef");
    CHECK(checkpoint_config_hash(path) == "deadbeefdeadbeef");

    Graph g2;
    g2.add("a", std::make_unique<Dense>(5));
    g2.add("act", std::make_unique<ReLU>());
    g2.add("b", std::make_unique<Dense>(2));
    g2.build({4}, 99);  // different init — must be overwritten
    load_checkpoint(path, g2);

    auto pa = g.params();
    auto pb = g2.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i)
        for (std::size_t j = 0; j < pa[i]->value.numel(); ++j)
            CHECK(pb[i]->value.data[j] ==
                  static_cast<double>(static_cast<float>(pa[i]->value.data[j])));

    Graph wrong;
    wrong.add("a", std::make_unique<Dense>(6));
    wrong.build({4}, 1);
    CHECK_THROWS_WITH_AS(load_checkpoint(path, wrong), doctest::Contains("a"),
                         std::runtime_error);
    std::remove(path.c_str());
}
