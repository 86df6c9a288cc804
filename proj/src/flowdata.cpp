#include "flowbench/flowdata.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "flowbench/rng.hpp"

namespace flowbench {

const std::optional<LabelPair>& DatasetItem::label() const {
    return std::visit([](const auto& v) -> const std::optional<LabelPair>& { return v.label; },
                      data);
}

void DatasetItem::set_label(const LabelPair& lp) {
    std::visit([&](auto& v) { v.label = lp; }, data);
}

const std::string& DatasetItem::item_id() const {
    return std::visit([](const auto& v) -> const std::string& { return v.id; }, data);
}

DatasetItem make_item(Flow f) {
    DatasetItem it;
    it.origin_id = f.id;
    it.data = std::move(f);
    return it;
}

DatasetItem make_item(Trace t) {
    DatasetItem it;
    it.origin_id = t.id;
    it.data = std::move(t);
    return it;
}

DatasetItem make_item(Snapshot s) {
    DatasetItem it;
    it.origin_id = s.origin_id;
    it.data = std::move(s);
    return it;
}

DatasetItem make_item(PpiRecord p) {
    DatasetItem it;
    it.origin_id = p.id;
    it.data = std::move(p);
    return it;
}

std::vector<Flow> assemble_flows(const std::vector<KeyedPacket>& packets, double idle_timeout) {
    for (std::size_t i = 0; i < packets.size(); ++i) {
        if (packets[i].timestamp < 0.0) {
            throw MalformedInput("negative timestamp " + std::to_string(packets[i].timestamp) +
                                 " in packet record " + std::to_string(i) + " (key " +
                                 packets[i].key.canonical() + ")");
        }
    }

    // Bucket by bidirectional key, keeping keys in first-appearance order.
    std::unordered_map<std::string, std::size_t> key_slot;
    std::vector<std::string> key_order;
    std::vector<std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const std::string ck = packets[i].key.canonical();
        auto [it, inserted] = key_slot.emplace(ck, buckets.size());
        if (inserted) {
            key_order.push_back(ck);
            buckets.emplace_back();
        }
        buckets[it->second].push_back(i);
    }

    std::vector<Flow> flows;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        auto& idx = buckets[b];
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t c) {
            return packets[a].timestamp < packets[c].timestamp;
        });

        std::size_t seq = 0;
        std::size_t start = 0;
        while (start < idx.size()) {
            std::size_t end = start + 1;
            while (end < idx.size() &&
                   packets[idx[end]].timestamp - packets[idx[end - 1]].timestamp <= idle_timeout) {
                ++end;
            }
            const KeyedPacket& first = packets[idx[start]];
            Flow f;
            f.key = first.key;  // first packet's sender is the flow source
            f.id = f.key.canonical() + "#" + std::to_string(seq++);
            const double t0 = first.timestamp;
            for (std::size_t j = start; j < end; ++j) {
                const KeyedPacket& kp = packets[idx[j]];
                PacketRecord pr;
                pr.timestamp = kp.timestamp - t0;
                pr.dir = (kp.key.src == first.key.src) ? Direction::Upstream
                                                       : Direction::Downstream;
                pr.packet_size = kp.packet_size;
                pr.payload_size = kp.payload_size;
                f.packets.push_back(pr);
                if (!f.sni && kp.sni) f.sni = kp.sni;
            }
            flows.push_back(std::move(f));
            start = end;
        }
    }
    return flows;
}

namespace {

double nearest_rank(std::vector<double>& sorted_vals, double p) {
    const std::size_t n = sorted_vals.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted_vals[rank - 1];
}

struct LenStats {
    std::vector<double> counts;
    std::vector<double> durations;
};

void accumulate(LenStats& s, const DatasetItem& it) {
    double n = 0.0, dur = 0.0;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Flow> || std::is_same_v<T, Trace>) {
                n = static_cast<double>(v.packets.size());
                if (v.packets.size() >= 2)
                    dur = v.packets.back().timestamp - v.packets.front().timestamp;
            } else if constexpr (std::is_same_v<T, Snapshot>) {
                n = static_cast<double>(v.packets.size());
                if (v.packets.size() >= 2) dur = v.packets.back().t - v.packets.front().t;
            } else {
                n = static_cast<double>(v.iat.size());
                for (double x : v.iat) dur += x;
            }
        },
        it.data);
    s.counts.push_back(n);
    s.durations.push_back(dur);
}

}  // namespace

PercentileTable length_percentiles(const Dataset& ds, const std::vector<double>& percentiles,
                                   const std::vector<std::string>& expected_classes) {
    std::map<std::string, LenStats> per_class;
    LenStats overall;
    for (const auto& it : ds.items) {
        accumulate(overall, it);
        if (it.label()) accumulate(per_class[it.label()->service], it);
    }
    for (const auto& c : expected_classes) per_class.try_emplace(c);

    PercentileTable out;
    auto emit = [&](const std::string& name, LenStats& s) {
        if (s.counts.empty()) {
            out.warnings.push_back("class '" + name + "' has no items; percentile rows omitted");
            return;
        }
        std::sort(s.counts.begin(), s.counts.end());
        std::sort(s.durations.begin(), s.durations.end());
        for (double p : percentiles) {
            PercentileRow row;
            row.class_name = name;
            row.percentile = p;
            row.packet_count = static_cast<std::uint64_t>(nearest_rank(s.counts, p));
            row.duration = nearest_rank(s.durations, p);
            out.rows.push_back(row);
        }
    };
    for (auto& [name, stats] : per_class) emit(name, stats);
    if (!overall.counts.empty()) emit("__all__", overall);
    return out;
}

std::pair<Dataset, Dataset> grouped_split(const Dataset& ds, double test_fraction,
                                          std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
        throw std::invalid_argument("test_fraction must be in [0, 1], got " +
                                    std::to_string(test_fraction));
    }

    // A class whose items all share one group cannot appear on both sides.
    std::map<std::string, std::set<std::string>> class_groups;
    for (const auto& it : ds.items) {
        if (it.label()) class_groups[it.label()->service].insert(it.origin_id);
    }
    for (const auto& [cls, groups] : class_groups) {
        if (groups.size() == 1) {
            throw std::invalid_argument("class '" + cls + "' has a single origin group ('" +
                                        *groups.begin() +
                                        "'); a group-aware split cannot place it on both sides");
        }
    }

    std::unordered_map<std::string, std::size_t> group_slot;
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::string> group_order;
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        auto [it, inserted] = group_slot.emplace(ds.items[i].origin_id, groups.size());
        if (inserted) {
            groups.emplace_back();
            group_order.push_back(ds.items[i].origin_id);
        }
        groups[it->second].push_back(i);
    }

    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    const double target = test_fraction * static_cast<double>(ds.items.size());
    std::vector<bool> in_test(groups.size(), false);
    double test_n = 0.0;
    for (std::size_t gi : order) {
        const double g = static_cast<double>(groups[gi].size());
        if (std::abs(test_n + g - target) < std::abs(test_n - target)) {
            in_test[gi] = true;
            test_n += g;
        }
    }

    Dataset train, test;
    train.name = ds.name + "/train";
    test.name = ds.name + "/test";
    train.collection = ds.collection;
    test.collection = ds.collection;
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        (in_test[group_slot[ds.items[i].origin_id]] ? test : train).items.push_back(ds.items[i]);
    }
    return {std::move(train), std::move(test)};
}

Dataset undersample_balanced(const Dataset& ds, std::size_t per_class, std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        if (ds.items[i].label()) by_class[ds.items[i].label()->service].push_back(i);
    }
    for (const auto& [cls, idx] : by_class) {
        if (idx.size() < per_class) {
            throw std::invalid_argument("class '" + cls + "' has only " +
                                        std::to_string(idx.size()) + " items; " +
                                        std::to_string(per_class) + " requested");
        }
    }
    std::vector<std::size_t> keep;
    for (auto& [cls, idx] : by_class) {
        Rng rng(seed ^ fnv1a64(cls));
        rng.shuffle(idx);
        keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(per_class));
    }
    std::sort(keep.begin(), keep.end());

    Dataset out;
    out.name = ds.name + "/balanced";
    out.collection = ds.collection;
    out.items.reserve(keep.size());
    for (std::size_t i : keep) out.items.push_back(ds.items[i]);
    return out;
}

}  // namespace flowbench
