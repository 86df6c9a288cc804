#include "flowbench/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include <json.hpp>

namespace flowbench::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian host");

namespace {
constexpr char kMagic[] = "FBCKPT1\n";

nlohmann::json header_json(Graph& graph, const std::string& config_hash) {
    nlohmann::json layers = nlohmann::json::array();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
        nlohmann::json params = nlohmann::json::array();
        for (Param* p : graph.layer(i).params()) {
            params.push_back({{"name", p->name},
                              {"shape", p->value.shape},
                              {"offset", offset},
                              {"count", p->value.numel()},
                              {"trainable", p->trainable}});
            offset += p->value.numel();
        }
        layers.push_back({{"name", graph.node_name(i)},
                          {"kind", graph.layer(i).kind()},
                          {"params", params}});
    }
    return {{"magic", "fbckpt"},
            {"version", 1},
            {"config_hash", config_hash},
            {"total_values", offset},
            {"layers", layers}};
}
}  // namespace

void save_checkpoint(const std::string& path, Graph& graph, const std::string& config_hash) {
    std::string header = header_json(graph, config_hash).dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, 8);
    std::uint32_t len = static_cast<std::uint32_t>(header.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<float> buf;
    for (std::size_t i = 0; i < graph.node_count(); ++i)
        for (Param* p : graph.layer(i).params()) {
            buf.assign(p->value.data.begin(), p->value.data.end());
            out.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(buf.size() * sizeof(float)));
        }
    if (!out) throw std::runtime_error("short write on checkpoint " + path);
}

namespace {
nlohmann::json read_header(std::ifstream& in, const std::string& path) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != kMagic)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string header(len, '\0');
    in.read(header.data(), len);
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
    return nlohmann::json::parse(header);
}
}  // namespace

void load_checkpoint(const std::string& path, Graph& graph) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint " + path);
    nlohmann::json header = read_header(in, path);
    const nlohmann::json& layers = header.at("layers");
    if (layers.size() != graph.node_count())
        throw std::runtime_error("checkpoint has " + std::to_string(layers.size()) +
                                 " layers, graph has " + std::to_string(graph.node_count()));
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
        const nlohmann::json& ls = layers[i];
        if (ls.at("kind").get<std::string>() != graph.layer(i).kind() ||
            ls.at("name").get<std::string>() != graph.node_name(i))
            throw std::runtime_error("checkpoint layer '" + ls.at("name").get<std::string>() +
                                     "' does not match graph node '" + graph.node_name(i) + "'");
        auto params = graph.layer(i).params();
        const nlohmann::json& specs = ls.at("params");
        if (specs.size() != params.size())
            throw std::runtime_error("parameter count mismatch in layer '" + graph.node_name(i) + "'");
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Shape shape = specs[pi].at("shape").get<Shape>();
            if (shape != params[pi]->value.shape)
                throw std::runtime_error("shape mismatch for " + params[pi]->name + ": checkpoint " +
                                         shape_str(shape) + " vs graph " +
                                         shape_str(params[pi]->value.shape));
        }
    }
    for (std::size_t i = 0; i < graph.node_count(); ++i)
        for (Param* p : graph.layer(i).params()) {
            std::vector<float> buf(p->value.numel());
            in.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(buf.size() * sizeof(float)));
            if (!in) throw std::runtime_error("truncated checkpoint data: " + path);
            for (std::size_t j = 0; j < buf.size(); ++j) p->value.data[j] = buf[j];
        }
}

std::string checkpoint_config_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint " + path);
    return read_header(in, path).at("config_hash").get<std::string>();
}

}  // namespace flowbench::nn
