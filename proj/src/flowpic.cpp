#include "flowbench/flowpic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace flowbench {

double FlowpicGrid::mass() const {
    double m = 0.0;
    for (double c : cells) m += c;
    return m;
}

FlowpicGrid build_flowpic(const Snapshot& snapshot, std::size_t h, std::size_t w,
                          double size_max) {
    if (h < 1 || w < 1) throw std::invalid_argument("grid dims must be at least 1x1");
    if (!(size_max > 0.0)) throw std::invalid_argument("size_max must be positive");
    if (!(snapshot.window_len > 0.0))
        throw std::invalid_argument("snapshot '" + snapshot.id + "' has window_len <= 0");

    FlowpicGrid g;
    g.h = h;
    g.w = w;
    g.size_max = size_max;
    g.window_len = snapshot.window_len;
    g.cells.assign(h * w, 0.0);
    for (const auto& p : snapshot.packets) {
        const double s = std::clamp(p.size, 0.0, size_max);
        std::size_t row = static_cast<std::size_t>(
            std::floor(s * static_cast<double>(h) / size_max));
        if (row >= h) row = h - 1;
        std::size_t col = static_cast<std::size_t>(
            std::floor(p.t * static_cast<double>(w) / snapshot.window_len));
        if (col >= w) col = w - 1;
        g.at(row, col) += 1.0;
    }
    return g;
}

const Snapshot& representative_snapshot(const std::vector<Snapshot>& snaps) {
    if (snaps.empty()) throw std::invalid_argument("no snapshots to choose from");
    for (const auto& s : snaps) {
        if (s.origin_id != snaps.front().origin_id) {
            throw std::invalid_argument("snapshots mix origin ids: '" +
                                        snaps.front().origin_id + "' and '" + s.origin_id + "'");
        }
    }
    const Snapshot* best = nullptr;
    auto better = [](const Snapshot& a, const Snapshot& b) {
        const int pa = a.direction == Direction::Downstream ? 0 : 1;
        const int pb = b.direction == Direction::Downstream ? 0 : 1;
        if (pa != pb) return pa < pb;
        return a.window_start < b.window_start;  // strict: ties keep earlier position
    };
    for (const auto& s : snaps) {
        if (!best || better(s, *best)) best = &s;
    }
    return *best;
}

std::string to_pgm(const FlowpicGrid& grid) {
    double peak = 1.0;
    for (double c : grid.cells) peak = std::max(peak, c);
    std::ostringstream out;
    out << "P2\n" << grid.w << " " << grid.h << "\n" << static_cast<long long>(peak) << "\n";
    for (std::size_t r = 0; r < grid.h; ++r) {
        for (std::size_t c = 0; c < grid.w; ++c) {
            if (c) out << " ";
            out << static_cast<long long>(grid.at(r, c));
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace flowbench
