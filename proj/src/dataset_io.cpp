#include "flowbench/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace flowbench {

namespace {

using nlohmann::json;

json label_to_json(const LabelPair& lp) {
    return json{{"service", lp.service}, {"category", lp.category}};
}

void put_label(json& j, const std::optional<LabelPair>& lp) {
    if (lp) j["label"] = label_to_json(*lp);
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
    if (line > 0) {
        throw MalformedInput("line " + std::to_string(line) + ": " + what, line);
    }
    throw MalformedInput(what);
}

double need_finite(const json& v, std::size_t line, const char* what) {
    if (!v.is_number()) fail(line, std::string(what) + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(line, std::string(what) + " must be finite");
    return x;
}

std::optional<LabelPair> read_label(const json& j, std::size_t line) {
    if (!j.contains("label") || j.at("label").is_null()) return std::nullopt;
    const json& l = j.at("label");
    if (!l.is_object() || !l.contains("service") || !l.contains("category"))
        fail(line, "label must be an object with 'service' and 'category'");
    return LabelPair{l.at("service").get<std::string>(), l.at("category").get<std::string>()};
}

std::vector<PacketRecord> read_dir_packets(const json& j, std::size_t line) {
    if (!j.is_array() || j.empty()) fail(line, "'packets' must be a non-empty array");
    std::vector<PacketRecord> out;
    out.reserve(j.size());
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 4)
            fail(line, "each packet must be [time, dir, size, payload]");
        PacketRecord pr;
        pr.timestamp = need_finite(p[0], line, "packet time");
        const double d = need_finite(p[1], line, "packet dir");
        if (d != 1.0 && d != -1.0) fail(line, "packet dir must be 1 or -1");
        pr.dir = d > 0 ? Direction::Upstream : Direction::Downstream;
        const double sz = need_finite(p[2], line, "packet size");
        const double pl = need_finite(p[3], line, "packet payload");
        if (sz < 0 || pl < 0) fail(line, "packet sizes must be non-negative");
        if (pl > sz) fail(line, "payload exceeds packet size");
        pr.packet_size = static_cast<std::uint32_t>(sz);
        pr.payload_size = static_cast<std::uint32_t>(pl);
        if (pr.timestamp < 0) fail(line, "negative packet time");
        out.push_back(pr);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const PacketRecord& a, const PacketRecord& b) {
                         return a.timestamp < b.timestamp;
                     });
    const double t0 = out.front().timestamp;
    for (auto& pr : out) pr.timestamp -= t0;
    return out;
}

json dir_packets_to_json(const std::vector<PacketRecord>& packets) {
    json arr = json::array();
    for (const auto& p : packets) {
        arr.push_back(json::array(
            {p.timestamp, dir_code(p.dir), p.packet_size, p.payload_size}));
    }
    return arr;
}

}  // namespace

json item_to_json(const DatasetItem& item) {
    json j;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            j["id"] = v.id;
            if constexpr (std::is_same_v<T, Flow>) {
                j["src"] = v.key.src;
                j["dst"] = v.key.dst;
                j["proto"] = v.key.proto;
                j["packets"] = dir_packets_to_json(v.packets);
                if (v.sni) j["sni"] = *v.sni;
            } else if constexpr (std::is_same_v<T, Trace>) {
                j["packets"] = dir_packets_to_json(v.packets);
            } else if constexpr (std::is_same_v<T, Snapshot>) {
                j["origin_id"] = v.origin_id;
                j["direction"] = dir_code(v.direction);
                j["window_start"] = v.window_start;
                j["window_len"] = v.window_len;
                json arr = json::array();
                for (const auto& p : v.packets) arr.push_back(json::array({p.t, p.size}));
                j["packets"] = arr;
            } else {
                j["ppi_iat"] = v.iat;
                j["ppi_dir"] = v.dir;
                j["ppi_size"] = v.size;
            }
            put_label(j, v.label);
        },
        item.data);
    return j;
}

DatasetItem item_from_json(const json& j, std::size_t line) {
    if (!j.is_object()) fail(line, "record must be a JSON object");
    if (!j.contains("id") || !j.at("id").is_string()) fail(line, "record needs a string 'id'");
    const std::string id = j.at("id").get<std::string>();

    if (j.contains("ppi_iat")) {
        PpiRecord p;
        p.id = id;
        for (const char* k : {"ppi_iat", "ppi_dir", "ppi_size"}) {
            if (!j.contains(k) || !j.at(k).is_array())
                fail(line, std::string("'") + k + "' must be an array");
        }
        for (const auto& v : j.at("ppi_iat")) p.iat.push_back(need_finite(v, line, "ppi_iat"));
        for (const auto& v : j.at("ppi_dir")) {
            const double d = need_finite(v, line, "ppi_dir");
            if (d != 1.0 && d != -1.0) fail(line, "ppi_dir entries must be 1 or -1");
            p.dir.push_back(static_cast<int>(d));
        }
        for (const auto& v : j.at("ppi_size")) p.size.push_back(need_finite(v, line, "ppi_size"));
        if (p.iat.size() != p.dir.size() || p.iat.size() != p.size.size())
            fail(line, "ppi arrays must have equal length");
        p.label = read_label(j, line);
        return make_item(std::move(p));
    }

    if (j.contains("window_start")) {
        Snapshot s;
        s.id = id;
        if (!j.contains("origin_id") || !j.at("origin_id").is_string())
            fail(line, "snapshot needs a string 'origin_id'");
        s.origin_id = j.at("origin_id").get<std::string>();
        const double d = need_finite(j.value("direction", json(0)), line, "direction");
        if (d != 1.0 && d != -1.0) fail(line, "direction must be 1 or -1");
        s.direction = d > 0 ? Direction::Upstream : Direction::Downstream;
        s.window_start = need_finite(j.at("window_start"), line, "window_start");
        s.window_len = need_finite(j.at("window_len"), line, "window_len");
        if (s.window_len <= 0) fail(line, "window_len must be positive");
        if (!j.contains("packets") || !j.at("packets").is_array() || j.at("packets").empty())
            fail(line, "snapshot 'packets' must be a non-empty array");
        for (const auto& p : j.at("packets")) {
            if (!p.is_array() || p.size() != 2) fail(line, "each snapshot packet must be [t, size]");
            SnapshotPacket sp;
            sp.t = need_finite(p[0], line, "snapshot packet time");
            sp.size = need_finite(p[1], line, "snapshot packet size");
            if (sp.t < 0) fail(line, "negative snapshot packet time");
            if (sp.size < 0) fail(line, "negative snapshot packet size");
            s.packets.push_back(sp);
        }
        s.label = read_label(j, line);
        return make_item(std::move(s));
    }

    if (!j.contains("packets")) fail(line, "unrecognized record form");
    if (j.contains("src") || j.contains("dst") || j.contains("proto")) {
        Flow f;
        f.id = id;
        for (const char* k : {"src", "dst", "proto"}) {
            if (!j.contains(k) || !j.at(k).is_string())
                fail(line, std::string("flow needs a string '") + k + "'");
        }
        f.key.src = j.at("src").get<std::string>();
        f.key.dst = j.at("dst").get<std::string>();
        f.key.proto = j.at("proto").get<std::string>();
        f.packets = read_dir_packets(j.at("packets"), line);
        if (j.contains("sni") && j.at("sni").is_string())
            f.sni = j.at("sni").get<std::string>();
        f.label = read_label(j, line);
        return make_item(std::move(f));
    }

    Trace t;
    t.id = id;
    t.packets = read_dir_packets(j.at("packets"), line);
    t.label = read_label(j, line);
    return make_item(std::move(t));
}

Dataset read_dataset_jsonl(std::istream& in, const std::string& name) {
    Dataset ds;
    ds.name = name;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // Tolerate blank lines; everything else must parse.
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            fail(lineno, std::string("invalid JSON: ") + e.what());
        }
        ds.items.push_back(item_from_json(j, lineno));
    }
    return ds;
}

Dataset read_dataset_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedInput("cannot open dataset file: " + path);
    return read_dataset_jsonl(in, std::filesystem::path(path).stem().string());
}

void write_dataset_jsonl(const Dataset& ds, std::ostream& out) {
    for (const auto& it : ds.items) out << item_to_json(it).dump() << "\n";
}

void write_dataset_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    write_dataset_jsonl(ds, out);
}

}  // namespace flowbench
