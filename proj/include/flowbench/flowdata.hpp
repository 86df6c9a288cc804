#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace flowbench {

enum class Direction : int { Upstream = 1, Downstream = -1 };

inline int dir_code(Direction d) { return static_cast<int>(d); }

struct LabelPair {
    std::string service;   // fine label
    std::string category;  // broad label
    bool operator==(const LabelPair&) const = default;
};

struct PacketRecord {
    double timestamp = 0.0;  // seconds since capture start
    Direction dir = Direction::Upstream;
    std::uint32_t packet_size = 0;
    std::uint32_t payload_size = 0;  // <= packet_size
};

// Endpoints are opaque strings; equality is bidirectional (endpoint-swapped
// keys compare equal).
struct FlowKey {
    std::string src;
    std::string dst;
    std::string proto;

    bool matches(const FlowKey& o) const {
        return proto == o.proto &&
               ((src == o.src && dst == o.dst) || (src == o.dst && dst == o.src));
    }
    // Endpoint-order-independent identity string.
    std::string canonical() const {
        return (src <= dst ? src + "|" + dst : dst + "|" + src) + "|" + proto;
    }
};

struct Flow {
    std::string id;
    FlowKey key;
    std::vector<PacketRecord> packets;  // ascending timestamps
    std::optional<std::string> sni;
    std::optional<LabelPair> label;
};

// Like a flow but without key semantics (e.g. interwoven capture slices).
struct Trace {
    std::string id;
    std::vector<PacketRecord> packets;
    std::optional<LabelPair> label;
};

struct SnapshotPacket {
    double t = 0.0;  // relative to window start, in [0, window_len)
    double size = 0.0;
};

struct Snapshot {
    std::string id;
    std::string origin_id;  // source flow/trace
    Direction direction = Direction::Upstream;
    double window_start = 0.0;
    double window_len = 0.0;
    std::vector<SnapshotPacket> packets;  // non-empty
    std::optional<LabelPair> label;
};

// Pre-extracted per-packet triples (compact dataset form). Arrays hold only
// the valid prefix; consumers pad to the model input length.
struct PpiRecord {
    std::string id;
    std::vector<double> iat;
    std::vector<int> dir;  // +1 / -1
    std::vector<double> size;
    std::optional<LabelPair> label;
};

struct DatasetItem {
    std::string origin_id;
    std::variant<Flow, Trace, Snapshot, PpiRecord> data;

    const std::optional<LabelPair>& label() const;
    void set_label(const LabelPair& lp);
    const std::string& item_id() const;
};

struct Dataset {
    std::string name;        // dataset id, referenced by normalizer sidecars
    std::string collection;  // corpus tag
    std::vector<DatasetItem> items;
};

DatasetItem make_item(Flow f);
DatasetItem make_item(Trace t);
DatasetItem make_item(Snapshot s);
DatasetItem make_item(PpiRecord p);

// Raw input record for flow assembly.
struct KeyedPacket {
    FlowKey key;
    double timestamp = 0.0;
    std::uint32_t packet_size = 0;
    std::uint32_t payload_size = 0;
    std::optional<std::string> sni;
};

struct MalformedInput : std::invalid_argument {
    explicit MalformedInput(const std::string& what, std::size_t line = 0)
        : std::invalid_argument(what), line_number(line) {}
    std::size_t line_number;  // 0 when not file-based
};

// Groups packets by bidirectional key, sorts each key's packets by time, and
// cuts a new flow whenever the gap exceeds idle_timeout. The first packet of
// each flow defines Upstream. Negative timestamps are malformed input.
std::vector<Flow> assemble_flows(const std::vector<KeyedPacket>& packets, double idle_timeout);

struct PercentileRow {
    std::string class_name;  // "__all__" for the overall row
    double percentile = 0.0;
    std::uint64_t packet_count = 0;
    double duration = 0.0;
};

struct PercentileTable {
    std::vector<PercentileRow> rows;
    std::vector<std::string> warnings;  // classes with no items, rows omitted
};

// Nearest-rank percentiles of packet count and duration, per class plus an
// overall row. Classes come from item labels; `expected_classes` (optional)
// adds warning records for classes with no items.
PercentileTable length_percentiles(const Dataset& ds, const std::vector<double>& percentiles,
                                   const std::vector<std::string>& expected_classes = {});

// Group-aware split: no origin_id lands on both sides. Groups are shuffled by
// seed and greedily assigned to test while that moves the test size strictly
// closer to round(test_fraction * N).
std::pair<Dataset, Dataset> grouped_split(const Dataset& ds, double test_fraction,
                                          std::uint64_t seed);

// Uniform without-replacement undersample to exactly per_class items per
// class. Unlabeled items are dropped. Throws when a class is short, naming it
// and its available count.
Dataset undersample_balanced(const Dataset& ds, std::size_t per_class, std::uint64_t seed);

}  // namespace flowbench
