#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowbench/flowdata.hpp"

namespace flowbench {

struct FlowpicGrid {
    std::size_t h = 32, w = 32;
    std::vector<double> cells;  // row-major counts; sum == packet count
    double size_max = 1500.0;
    double window_len = 0.0;

    double at(std::size_t r, std::size_t c) const { return cells[r * w + c]; }
    double& at(std::size_t r, std::size_t c) { return cells[r * w + c]; }
    double mass() const;
};

// Packet (t, s) lands in row min(floor(clamp(s,0,size_max)*H/size_max), H-1),
// col min(floor(t*W/window_len), W-1); linear bin edges.
FlowpicGrid build_flowpic(const Snapshot& snapshot, std::size_t h = 32, std::size_t w = 32,
                          double size_max = 1500.0);

// Earliest-window Downstream snapshot if any, else earliest overall. Ties on
// window_start keep the earlier list position. All snapshots must share one
// origin_id.
const Snapshot& representative_snapshot(const std::vector<Snapshot>& snaps);

// Plain-text portable graymap (P2) for visual inspection; max gray = peak
// cell count (min 1).
std::string to_pgm(const FlowpicGrid& grid);

}  // namespace flowbench
