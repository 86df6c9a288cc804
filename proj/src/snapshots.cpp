#include "flowbench/snapshots.hpp"

#include <algorithm>
#include <stdexcept>

#include "flowbench/rng.hpp"

namespace flowbench {

std::vector<UniSequence> split_unidirectional(const std::vector<PacketRecord>& packets) {
    UniSequence up, down;
    up.dir = Direction::Upstream;
    down.dir = Direction::Downstream;
    for (const auto& p : packets) {
        (p.dir == Direction::Upstream ? up : down).packets.push_back(p);
    }
    std::vector<UniSequence> out;
    if (!up.packets.empty()) out.push_back(std::move(up));
    if (!down.packets.empty()) out.push_back(std::move(down));
    return out;
}

std::vector<UniSequence> split_unidirectional(const Flow& flow) {
    return split_unidirectional(flow.packets);
}

std::vector<UniSequence> split_unidirectional(const Trace& trace) {
    return split_unidirectional(trace.packets);
}

std::vector<Snapshot> window_snapshots(const UniSequence& seq, const std::string& origin_id,
                                       const std::optional<LabelPair>& label, double window_len,
                                       double step) {
    if (!(window_len > 0.0)) throw std::invalid_argument("window_len must be positive");
    if (!(step > 0.0 && step <= window_len))
        throw std::invalid_argument("step must be in (0, window_len]");

    std::vector<Snapshot> out;
    if (seq.packets.empty()) return out;
    const double t0 = seq.packets.front().timestamp;
    const double t_last = seq.packets.back().timestamp;
    const char dir_letter = seq.dir == Direction::Upstream ? 'u' : 'd';

    for (std::uint64_t k = 0;; ++k) {
        const double start = t0 + static_cast<double>(k) * step;
        if (start > t_last) break;
        const double end = start + window_len;
        Snapshot s;
        for (const auto& p : seq.packets) {
            if (p.timestamp >= start && p.timestamp < end) {
                s.packets.push_back({p.timestamp - start, static_cast<double>(p.packet_size)});
            }
        }
        if (s.packets.empty()) continue;
        s.origin_id = origin_id;
        s.id = origin_id + "/" + dir_letter + std::to_string(k);
        s.direction = seq.dir;
        s.window_start = start;
        s.window_len = window_len;
        s.label = label;
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

Dataset window_all(const Dataset& ds, double window_len, double step) {
    Dataset out;
    out.name = ds.name + "/snapshots";
    out.collection = ds.collection;
    for (const auto& item : ds.items) {
        if (!item.label()) {
            throw std::invalid_argument("augmentation requires labeled input; item '" +
                                        item.item_id() + "' has no label");
        }
        std::vector<UniSequence> seqs;
        if (const auto* f = std::get_if<Flow>(&item.data)) {
            seqs = split_unidirectional(*f);
        } else if (const auto* t = std::get_if<Trace>(&item.data)) {
            seqs = split_unidirectional(*t);
        } else {
            throw std::invalid_argument("augmentation input must be flows or traces; item '" +
                                        item.item_id() + "' is not one");
        }
        for (const auto& seq : seqs) {
            for (auto& s :
                 window_snapshots(seq, item.item_id(), item.label(), window_len, step)) {
                out.items.push_back(make_item(std::move(s)));
            }
        }
    }
    return out;
}

}  // namespace

Dataset augment_dataset(const Dataset& ds, double window_len, double step) {
    return window_all(ds, window_len, step);
}

Dataset augment_dataset(const Dataset& ds, double window_len, double step,
                        const std::map<std::string, std::size_t>& balance, std::uint64_t seed) {
    Dataset snaps = window_all(ds, window_len, step);

    std::map<std::string, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < snaps.items.size(); ++i) {
        pools[snaps.items[i].label()->service].push_back(i);
    }
    // Classes present in the input must survive windowing.
    std::map<std::string, bool> input_classes;
    for (const auto& item : ds.items) input_classes[item.label()->service] = true;
    for (const auto& [cls, _] : input_classes) {
        if (pools.find(cls) == pools.end()) {
            throw std::invalid_argument("class '" + cls +
                                        "' produced zero snapshots; cannot balance");
        }
    }
    for (const auto& [cls, _] : pools) {
        if (balance.find(cls) == balance.end()) {
            throw std::invalid_argument("balance targets missing class '" + cls + "'");
        }
    }

    // Undersample: seeded omission. Oversample: seeded verbatim duplication.
    std::vector<bool> keep(snaps.items.size(), true);
    std::map<std::string, std::vector<std::size_t>> dup_picks;  // class -> source indices
    for (auto& [cls, idx] : pools) {
        const std::size_t target = balance.at(cls);
        Rng rng(seed ^ fnv1a64(cls));
        if (idx.size() > target) {
            std::vector<std::size_t> order = idx;
            rng.shuffle(order);
            for (std::size_t i = target; i < order.size(); ++i) keep[order[i]] = false;
        } else if (idx.size() < target) {
            auto& picks = dup_picks[cls];
            for (std::size_t i = idx.size(); i < target; ++i) {
                picks.push_back(idx[rng.below(idx.size())]);
            }
        }
    }

    Dataset out;
    out.name = snaps.name + "/balanced";
    out.collection = snaps.collection;
    for (std::size_t i = 0; i < snaps.items.size(); ++i) {
        if (keep[i]) out.items.push_back(snaps.items[i]);
    }
    for (const auto& [cls, picks] : dup_picks) {
        std::size_t n = 0;
        for (std::size_t src : picks) {
            DatasetItem copy = snaps.items[src];
            std::get<Snapshot>(copy.data).id += "+dup" + std::to_string(n++);
            out.items.push_back(std::move(copy));
        }
    }
    return out;
}

Dataset augment_dataset(const Dataset& ds, double window_len, double step,
                        std::size_t per_class_target, std::uint64_t seed) {
    std::map<std::string, std::size_t> balance;
    for (const auto& item : ds.items) {
        if (item.label()) balance[item.label()->service] = per_class_target;
    }
    return augment_dataset(ds, window_len, step, balance, seed);
}

}  // namespace flowbench
