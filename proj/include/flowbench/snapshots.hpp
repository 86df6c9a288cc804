#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowbench/flowdata.hpp"

namespace flowbench {

struct UniSequence {
    Direction dir = Direction::Upstream;
    std::vector<PacketRecord> packets;  // time-ordered
};

// One sequence per direction present (Upstream first), each time-ordered.
std::vector<UniSequence> split_unidirectional(const std::vector<PacketRecord>& packets);
std::vector<UniSequence> split_unidirectional(const Flow& flow);
std::vector<UniSequence> split_unidirectional(const Trace& trace);

// Fixed-duration windows anchored at the sequence's first packet: starts at
// t0 + k*step while start <= last packet time, covering [start,
// start+window_len). Non-empty windows become snapshots with times rebased to
// the window start. Snapshot sizes are packet sizes.
std::vector<Snapshot> window_snapshots(const UniSequence& seq, const std::string& origin_id,
                                       const std::optional<LabelPair>& label, double window_len,
                                       double step);

// Splits and windows every flow/trace; optionally balances class counts by
// seeded duplication (up) or omission (down). Input items must be labeled.
Dataset augment_dataset(const Dataset& ds, double window_len, double step,
                        const std::map<std::string, std::size_t>& balance, std::uint64_t seed);
Dataset augment_dataset(const Dataset& ds, double window_len, double step);
// Uniform target for every class present.
Dataset augment_dataset(const Dataset& ds, double window_len, double step,
                        std::size_t per_class_target, std::uint64_t seed);

}  // namespace flowbench
