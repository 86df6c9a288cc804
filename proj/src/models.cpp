#include "flowbench/models.hpp"

#include <stdexcept>

namespace flowbench::models {

using nn::Graph;

TransformerConfig transformer_preset(const std::string& name) {
    TransformerConfig c;
    if (name == "first") {
        c.heads = 1;
        c.head_size = 3;
        c.blocks = 2;
        c.dense_units = 512;
    } else if (name == "moreblocks") {
        c.heads = 2;
        c.head_size = 6;
        c.blocks = 4;
        c.dense_units = 512;
    } else if (name == "newrun") {
        c.heads = 8;
        c.head_size = 3;
        c.blocks = 2;
        c.dense_units = 90;
    } else if (name == "nomb") {
        c.heads = 8;
        c.head_size = 256;
        c.blocks = 2;
        c.dense_units = 512;
        c.input_batchnorm = true;
        c.dropout_after_flatten = false;
    } else if (name == "full") {
        c.heads = 8;
        c.head_size = 256;
        c.blocks = 2;
        c.dense_units = 512;
        c.embedding = true;
        c.dropout_after_flatten = false;
    } else {
        throw std::invalid_argument("unknown transformer preset '" + name + "'");
    }
    return c;
}

namespace {

// mha -> dropout -> add -> norm -> conv(ff, 1) relu -> dropout -> conv(d, 1) -> add -> norm
int encoder_block(Graph& g, const std::string& prefix, int x, std::size_t d,
                  const TransformerConfig& cfg) {
    int mha = g.add(prefix + "_mha",
                    std::make_unique<nn::ChannelwiseMultiHeadAttention>(cfg.heads, cfg.head_size), {x});
    int drop1 = g.add(prefix + "_mha_drop", std::make_unique<nn::Dropout>(cfg.trunk_dropout, 0), {mha});
    int add1 = g.add(prefix + "_mha_add", std::make_unique<nn::Add>(), {x, drop1});
    int norm1 = g.add(prefix + "_mha_norm", std::make_unique<nn::LayerNorm>(), {add1});
    int ff1 = g.add(prefix + "_ff1", std::make_unique<nn::Conv1D>(cfg.ff_dim, 1), {norm1});
    int relu = g.add(prefix + "_ff1_relu", std::make_unique<nn::ReLU>(), {ff1});
    int drop2 = g.add(prefix + "_ff_drop", std::make_unique<nn::Dropout>(cfg.trunk_dropout, 0), {relu});
    int ff2 = g.add(prefix + "_ff2", std::make_unique<nn::Conv1D>(d, 1), {drop2});
    int add2 = g.add(prefix + "_ff_add", std::make_unique<nn::Add>(), {norm1, ff2});
    return g.add(prefix + "_ff_norm", std::make_unique<nn::LayerNorm>(), {add2});
}

}  // namespace

nn::Graph build_transformer(const TransformerConfig& cfg, std::size_t input_len,
                            std::size_t channels, std::size_t classes, std::uint64_t seed) {
    Graph g;
    int x = Graph::kInput;
    std::size_t d = channels;
    if (cfg.embedding) {
        int dense = g.add("embed_dense", std::make_unique<nn::Dense>(cfg.embed_dim), {x});
        int bn = g.add("embed_bn", std::make_unique<nn::BatchNorm>(), {dense});
        x = g.add("embed_add", std::make_unique<nn::Add>(), {dense, bn});
        d = cfg.embed_dim;
    } else if (cfg.input_batchnorm) {
        x = g.add("input_bn", std::make_unique<nn::BatchNorm>(), {x});
    }
    for (std::size_t b = 1; b <= cfg.blocks; ++b)
        x = encoder_block(g, "enc" + std::to_string(b), x, d, cfg);
    x = g.add("flatten", std::make_unique<nn::Flatten>(), {x});
    if (cfg.dropout_after_flatten)
        x = g.add("head_drop0", std::make_unique<nn::Dropout>(cfg.head_dropout, 0), {x});
    x = g.add("head_dense", std::make_unique<nn::Dense>(cfg.dense_units), {x});
    x = g.add("head_relu", std::make_unique<nn::ReLU>(), {x});
    x = g.add("head_drop", std::make_unique<nn::Dropout>(cfg.head_dropout, 0), {x});
    x = g.add("class_dense", std::make_unique<nn::Dense>(classes), {x});
    g.add("softmax", std::make_unique<nn::Softmax>(), {x});
    g.build({input_len, channels}, seed);
    return g;
}

nn::Graph build_transformer(const std::string& preset, std::size_t classes, std::uint64_t seed) {
    return build_transformer(transformer_preset(preset), 30, 3, classes, seed);
}

nn::Graph build_df_cnn(std::size_t input_len, std::size_t classes, std::uint64_t seed) {
    if (input_len < 8)
        throw std::invalid_argument("dfcnn input length " + std::to_string(input_len) +
                                    " underflows the first pooling stage (minimum 8)");
    Graph g;
    const std::size_t widths[4] = {32, 64, 128, 256};
    int x = Graph::kInput;
    for (int b = 0; b < 4; ++b) {
        std::string p = "blk" + std::to_string(b + 1);
        auto act = [&]() -> std::unique_ptr<nn::Layer> {
            if (b == 0) return std::make_unique<nn::ELU>();
            return std::make_unique<nn::ReLU>();
        };
        x = g.add(p + "_conv1", std::make_unique<nn::Conv1D>(widths[b], 8), {x});
        x = g.add(p + "_bn1", std::make_unique<nn::BatchNorm>(), {x});
        x = g.add(p + "_act1", act(), {x});
        x = g.add(p + "_conv2", std::make_unique<nn::Conv1D>(widths[b], 8), {x});
        x = g.add(p + "_bn2", std::make_unique<nn::BatchNorm>(), {x});
        x = g.add(p + "_act2", act(), {x});
        x = g.add(p + "_pool", std::make_unique<nn::MaxPool1D>(8, 4), {x});
        x = g.add(p + "_drop", std::make_unique<nn::Dropout>(0.1, 0), {x});
    }
    x = g.add("flatten", std::make_unique<nn::Flatten>(), {x});
    x = g.add("head_dense", std::make_unique<nn::Dense>(512), {x});
    x = g.add("head_relu", std::make_unique<nn::ReLU>(), {x});
    x = g.add("head_drop", std::make_unique<nn::Dropout>(0.5, 0), {x});
    x = g.add("class_dense", std::make_unique<nn::Dense>(classes), {x});
    g.add("softmax", std::make_unique<nn::Softmax>(), {x});
    g.build({input_len, 1}, seed);
    return g;
}

nn::Graph build_lenet(std::size_t grid_h, std::size_t grid_w, std::size_t classes,
                      std::uint64_t seed) {
    if (grid_h < 8 || grid_w < 8)
        throw std::invalid_argument("lenet grid " + std::to_string(grid_h) + "x" +
                                    std::to_string(grid_w) + " is undersized (minimum 8x8)");
    Graph g;
    int x = g.add("conv1", std::make_unique<nn::Conv2D>(6, 5, 5), {Graph::kInput});
    x = g.add("conv1_relu", std::make_unique<nn::ReLU>(), {x});
    x = g.add("pool1", std::make_unique<nn::MaxPool2D>(2, 2, 2, 2), {x});
    x = g.add("conv2", std::make_unique<nn::Conv2D>(16, 5, 5), {x});
    x = g.add("conv2_relu", std::make_unique<nn::ReLU>(), {x});
    x = g.add("pool2", std::make_unique<nn::MaxPool2D>(2, 2, 2, 2), {x});
    x = g.add("flatten", std::make_unique<nn::Flatten>(), {x});
    x = g.add("dense1", std::make_unique<nn::Dense>(120), {x});
    x = g.add("dense1_relu", std::make_unique<nn::ReLU>(), {x});
    x = g.add("dense2", std::make_unique<nn::Dense>(84), {x});
    x = g.add("dense2_relu", std::make_unique<nn::ReLU>(), {x});
    x = g.add("class_dense", std::make_unique<nn::Dense>(classes), {x});
    g.add("softmax", std::make_unique<nn::Softmax>(), {x});
    g.build({grid_h, grid_w, 1}, seed);
    return g;
}

nn::Graph build_preset(const std::string& name, std::size_t classes, std::uint64_t seed,
                       std::size_t dfcnn_len) {
    if (name == "dfcnn") return build_df_cnn(dfcnn_len, classes, seed);
    if (name == "lenet") return build_lenet(32, 32, classes, seed);
    return build_transformer(name, classes, seed);
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"first",  "moreblocks", "newrun", "nomb",
                                                   "full",   "dfcnn",      "lenet"};
    return names;
}

bool is_preset(const std::string& name) {
    for (const std::string& n : preset_names())
        if (n == name) return true;
    return false;
}

namespace {

struct PresetExpectation {
    std::string name;
    std::size_t total, trainable;
    // per-layer counts for the parameter-bearing nodes, in graph order
    std::vector<std::pair<std::string, std::size_t>> layers;
};

std::vector<PresetExpectation> expectations() {
    auto trunk = [](std::size_t blocks, std::size_t mha) {
        std::vector<std::pair<std::string, std::size_t>> v;
        for (std::size_t b = 1; b <= blocks; ++b) {
            std::string p = "enc" + std::to_string(b);
            v.push_back({p + "_mha", mha});
            v.push_back({p + "_mha_norm", 6});
            v.push_back({p + "_ff1", 256});
            v.push_back({p + "_ff2", 195});
            v.push_back({p + "_ff_norm", 6});
        }
        return v;
    };
    std::vector<PresetExpectation> out;

    PresetExpectation first{"first", 60439, 60439, trunk(2, 48)};
    first.layers.push_back({"head_dense", 46592});
    first.layers.push_back({"class_dense", 12825});
    out.push_back(first);

    PresetExpectation more{"moreblocks", 62001, 62001, trunk(4, 183)};
    more.layers.push_back({"head_dense", 46592});
    more.layers.push_back({"class_dense", 12825});
    out.push_back(more);

    PresetExpectation newrun{"newrun", 12117, 12117, trunk(2, 363)};
    newrun.layers.push_back({"head_dense", 8190});
    newrun.layers.push_back({"class_dense", 2275});
    out.push_back(newrun);

    PresetExpectation nomb{"nomb", 121801, 121795, {{"input_bn", 12}}};
    for (auto& kv : trunk(2, 30723)) nomb.layers.push_back(kv);
    nomb.layers.push_back({"head_dense", 46592});
    nomb.layers.push_back({"class_dense", 12825});
    out.push_back(nomb);

    PresetExpectation full{"full", 8222873, 8222361, {{"embed_dense", 1024}, {"embed_bn", 1024}}};
    for (std::size_t b = 1; b <= 2; ++b) {
        std::string p = "enc" + std::to_string(b);
        full.layers.push_back({p + "_mha", 2103552});
        full.layers.push_back({p + "_mha_norm", 512});
        full.layers.push_back({p + "_ff1", 16448});
        full.layers.push_back({p + "_ff2", 16640});
        full.layers.push_back({p + "_ff_norm", 512});
    }
    full.layers.push_back({"head_dense", 3932672});
    full.layers.push_back({"class_dense", 12825});
    out.push_back(full);
    return out;
}

}  // namespace

ParamCountReport verify_param_counts() {
    ParamCountReport report;
    for (const PresetExpectation& exp : expectations()) {
        Graph g = build_transformer(exp.name, 25, 1);
        std::size_t total = g.param_count(false);
        std::size_t trainable = g.param_count(true);
        if (total != exp.total)
            report.diffs.push_back({exp.name, "<total>", exp.total, total});
        if (trainable != exp.trainable)
            report.diffs.push_back({exp.name, "<trainable>", exp.trainable, trainable});
        for (const auto& [layer, count] : exp.layers) {
            int idx = g.find(layer);
            if (idx < 0) {
                report.diffs.push_back({exp.name, layer, count, 0});
                continue;
            }
            std::size_t actual = g.node_param_count(static_cast<std::size_t>(idx));
            if (actual != count) report.diffs.push_back({exp.name, layer, count, actual});
        }
        report.summary += exp.name + ": total " + std::to_string(total) + ", trainable " +
                          std::to_string(trainable) + ", non-trainable " +
                          std::to_string(total - trainable) + "\n";
    }
    report.ok = report.diffs.empty();
    return report;
}

}  // namespace flowbench::models
