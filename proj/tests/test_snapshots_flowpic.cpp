#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "flowbench/flowpic.hpp"
#include "flowbench/rng.hpp"
#include "flowbench/snapshots.hpp"

using namespace flowbench;

namespace {

PacketRecord pr(double t, Direction d, std::uint32_t size) { return {t, d, size, size / 2}; }

UniSequence random_sequence(Rng& rng, std::size_t max_packets = 40, double horizon = 120.0) {
    UniSequence seq;
    seq.dir = rng.bernoulli(0.5) ? Direction::Upstream : Direction::Downstream;
    const std::size_t n = 1 + rng.below(max_packets);
    std::vector<double> times;
    for (std::size_t i = 0; i < n; ++i) times.push_back(rng.uniform(0.0, horizon));
    std::sort(times.begin(), times.end());
    for (double t : times)
        seq.packets.push_back(pr(t, seq.dir, 40 + static_cast<std::uint32_t>(rng.below(1500))));
    return seq;
}

// Windowing reference, written directly from the contract: anchors at
// t0 + k*step while the anchor is not past the last packet; a window keeps
// packets with start <= t < start + window_len, rebased to the start.
std::vector<Snapshot> windows_reference(const UniSequence& seq, const std::string& origin,
                                        const std::optional<LabelPair>& label, double win,
                                        double step) {
    std::vector<Snapshot> out;
    if (seq.packets.empty()) return out;
    const double t0 = seq.packets.front().timestamp;
    const double t_last = seq.packets.back().timestamp;
    for (std::uint64_t k = 0; t0 + static_cast<double>(k) * step <= t_last; ++k) {
        const double start = t0 + static_cast<double>(k) * step;
        Snapshot s;
        s.origin_id = origin;
        s.id = origin + "/" + (seq.dir == Direction::Upstream ? "u" : "d") + std::to_string(k);
        s.direction = seq.dir;
        s.window_start = start;
        s.window_len = win;
        s.label = label;
        for (const auto& p : seq.packets) {
            if (p.timestamp >= start && p.timestamp < start + win)
                s.packets.push_back({p.timestamp - start, static_cast<double>(p.packet_size)});
        }
        if (!s.packets.empty()) out.push_back(std::move(s));
    }
    return out;
}

bool same_snapshot(const Snapshot& a, const Snapshot& b) {
    if (a.id != b.id || a.origin_id != b.origin_id || a.direction != b.direction) return false;
    if (a.window_start != b.window_start || a.window_len != b.window_len) return false;
    if (a.packets.size() != b.packets.size()) return false;
    for (std::size_t i = 0; i < a.packets.size(); ++i) {
        if (a.packets[i].t != b.packets[i].t || a.packets[i].size != b.packets[i].size)
            return false;
    }
    return a.label == b.label;
}

Snapshot snap(const std::string& id, double window_len, std::vector<SnapshotPacket> packets,
              Direction dir = Direction::Upstream, double window_start = 0.0,
              const std::string& origin = "o") {
    Snapshot s;
    s.id = id;
    s.origin_id = origin;
    s.direction = dir;
    s.window_start = window_start;
    s.window_len = window_len;
    s.packets = std::move(packets);
    return s;
}

// Flowpic reference: finds each packet's bin by scanning linear bin edges
// instead of computing the index arithmetically.
FlowpicGrid flowpic_reference(const Snapshot& s, std::size_t h, std::size_t w, double size_max) {
    FlowpicGrid g;
    g.h = h;
    g.w = w;
    g.size_max = size_max;
    g.window_len = s.window_len;
    g.cells.assign(h * w, 0.0);
    for (const auto& p : s.packets) {
        const double sz = std::min(std::max(p.size, 0.0), size_max);
        std::size_t row = h - 1;  // top bin is closed at size_max
        for (std::size_t r = 0; r < h; ++r) {
            const double lo = size_max * static_cast<double>(r) / static_cast<double>(h);
            const double hi = size_max * static_cast<double>(r + 1) / static_cast<double>(h);
            if (sz >= lo && sz < hi) {
                row = r;
                break;
            }
        }
        std::size_t col = w - 1;
        for (std::size_t c = 0; c < w; ++c) {
            const double lo = s.window_len * static_cast<double>(c) / static_cast<double>(w);
            const double hi = s.window_len * static_cast<double>(c + 1) / static_cast<double>(w);
            if (p.t >= lo && p.t < hi) {
                col = c;
                break;
            }
        }
        g.at(row, col) += 1.0;
    }
    return g;
}

}  // namespace

// ------------------------------------------------------------ direction split

TEST_CASE("unidirectional split partitions by direction, upstream first") {
    std::vector<PacketRecord> pkts = {
        pr(0.0, Direction::Upstream, 100), pr(1.0, Direction::Downstream, 1200),
        pr(2.0, Direction::Upstream, 80), pr(3.0, Direction::Downstream, 1400)};
    auto seqs = split_unidirectional(pkts);
    REQUIRE(seqs.size() == 2);
    CHECK(seqs[0].dir == Direction::Upstream);
    CHECK(seqs[1].dir == Direction::Downstream);
    REQUIRE(seqs[0].packets.size() == 2);
    CHECK(seqs[0].packets[1].timestamp == 2.0);
    CHECK(seqs[1].packets[0].packet_size == 1200);

    auto up_only = split_unidirectional(std::vector<PacketRecord>{pr(0, Direction::Upstream, 9)});
    REQUIRE(up_only.size() == 1);
    CHECK(up_only[0].dir == Direction::Upstream);
    CHECK(split_unidirectional(std::vector<PacketRecord>{}).empty());
}

// ------------------------------------------------------------ windowing

TEST_CASE("windowing matches the brute-force reference on random sequences") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        UniSequence seq = random_sequence(rng);
        const double win = rng.uniform(1.0, 40.0);
        const double step = rng.uniform(0.1, win);  // step <= window
        const std::optional<LabelPair> label = LabelPair{"svc", "cat"};
        auto got = window_snapshots(seq, "flow" + std::to_string(trial), label, win, step);
        auto want = windows_reference(seq, "flow" + std::to_string(trial), label, win, step);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(same_snapshot(got[i], want[i]));
    }
}

TEST_CASE("a sequence shorter than the step yields exactly one snapshot") {
    UniSequence seq;
    seq.dir = Direction::Downstream;
    for (double t : {5.0, 6.0, 7.5}) seq.packets.push_back(pr(t, seq.dir, 100));
    auto snaps = window_snapshots(seq, "o", std::nullopt, 60.0, 15.0);
    REQUIRE(snaps.size() == 1);
    CHECK(snaps[0].id == "o/d0");
    CHECK(snaps[0].window_start == 5.0);  // anchored at the first packet
    CHECK(snaps[0].packets.size() == 3);
    CHECK(snaps[0].packets[0].t == 0.0);  // rebased
    CHECK(snaps[0].packets[2].t == doctest::Approx(2.5));
}

TEST_CASE("window ids keep the anchor index when empty windows are skipped") {
    UniSequence seq;
    seq.dir = Direction::Upstream;
    seq.packets = {pr(0.0, seq.dir, 50), pr(10.0, seq.dir, 60)};
    auto snaps = window_snapshots(seq, "o", std::nullopt, 2.0, 2.0);
    REQUIRE(snaps.size() == 2);
    CHECK(snaps[0].id == "o/u0");
    CHECK(snaps[1].id == "o/u5");  // anchors 1..4 were empty
    CHECK(snaps[1].window_start == 10.0);
}

TEST_CASE("tiling windows conserve the packet count") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        UniSequence seq = random_sequence(rng);
        const double win = rng.uniform(1.0, 30.0);
        auto snaps = window_snapshots(seq, "o", std::nullopt, win, win);
        std::size_t total = 0;
        for (const auto& s : snaps) total += s.packets.size();
        CHECK(total == seq.packets.size());
    }
}

TEST_CASE("windowing validates its parameters") {
    UniSequence seq;
    seq.packets = {pr(0.0, Direction::Upstream, 50)};
    CHECK_THROWS_AS(window_snapshots(seq, "o", std::nullopt, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(window_snapshots(seq, "o", std::nullopt, -5.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(window_snapshots(seq, "o", std::nullopt, 10.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(window_snapshots(seq, "o", std::nullopt, 10.0, 20.0), std::invalid_argument);
    CHECK(window_snapshots(UniSequence{}, "o", std::nullopt, 10.0, 5.0).empty());
}

// ------------------------------------------------------------ augmentation

namespace {

Dataset two_class_flows() {
    Dataset ds;
    ds.name = "aug";
    Rng rng(11);
    for (int i = 0; i < 6; ++i) {
        Flow f;
        f.id = "f" + std::to_string(i);
        f.key = {"h" + std::to_string(i), "s:443", "tcp"};
        f.label = LabelPair{i % 2 ? "odd" : "even", "cat"};
        double t = 0.0;
        const std::size_t n = 3 + rng.below(20);
        for (std::size_t k = 0; k < n; ++k) {
            t += rng.uniform(0.0, 20.0);
            f.packets.push_back(pr(t, rng.bernoulli(0.5) ? Direction::Upstream
                                                         : Direction::Downstream,
                                   60 + static_cast<std::uint32_t>(rng.below(1200))));
        }
        ds.items.push_back(make_item(f));
    }
    return ds;
}

}  // namespace

TEST_CASE("augmentation windows every flow and keeps labels") {
    Dataset ds = two_class_flows();
    Dataset snaps = augment_dataset(ds, 30.0, 15.0);
    CHECK(snaps.name == "aug/snapshots");
    CHECK(!snaps.items.empty());
    std::size_t want = 0;
    for (const auto& item : ds.items) {
        for (const auto& seq : split_unidirectional(std::get<Flow>(item.data)))
            want += window_snapshots(seq, item.item_id(), item.label(), 30.0, 15.0).size();
    }
    CHECK(snaps.items.size() == want);
    for (const auto& item : snaps.items) {
        REQUIRE(item.label().has_value());
        const auto& s = std::get<Snapshot>(item.data);
        CHECK(item.origin_id == s.origin_id);
        CHECK(s.id.find(s.origin_id + "/") == 0);
    }
}

TEST_CASE("augmentation rejects unlabeled or non-flow items") {
    Dataset ds = two_class_flows();
    std::get<Flow>(ds.items[0].data).label.reset();
    CHECK_THROWS_WITH_AS(augment_dataset(ds, 30.0, 15.0), doctest::Contains("label"),
                         std::invalid_argument);

    Dataset ppi;
    ppi.name = "p";
    PpiRecord rec;
    rec.id = "r";
    rec.iat = {0.0};
    rec.dir = {1};
    rec.size = {10.0};
    rec.label = LabelPair{"svc", "cat"};
    ppi.items.push_back(make_item(rec));
    CHECK_THROWS_WITH_AS(augment_dataset(ppi, 30.0, 15.0), doctest::Contains("flows or traces"),
                         std::invalid_argument);
}

TEST_CASE("balanced augmentation hits the target in both directions") {
    Dataset ds = two_class_flows();
    Dataset plain = augment_dataset(ds, 30.0, 15.0);
    std::map<std::string, std::size_t> have;
    for (const auto& item : plain.items) ++have[item.label()->service];
    REQUIRE(have.size() == 2);

    // Force one class under and one over its natural count.
    std::map<std::string, std::size_t> targets = {{"even", have["even"] + 7},
                                                  {"odd", have["odd"] > 2 ? have["odd"] - 2 : 1}};
    Dataset bal = augment_dataset(ds, 30.0, 15.0, targets, 99);
    std::map<std::string, std::size_t> got;
    std::size_t dups = 0;
    std::set<std::string> ids;
    for (const auto& item : bal.items) {
        ++got[item.label()->service];
        const std::string& id = std::get<Snapshot>(item.data).id;
        CHECK(ids.insert(id).second);  // ids stay unique after duplication
        if (id.find("+dup") != std::string::npos) ++dups;
    }
    CHECK(got["even"] == targets["even"]);
    CHECK(got["odd"] == targets["odd"]);
    CHECK(dups == 7);

    // Uniform overload: same engine, one target for all classes.
    Dataset uni = augment_dataset(ds, 30.0, 15.0, 10, 99);
    std::map<std::string, std::size_t> ucounts;
    for (const auto& item : uni.items) ++ucounts[item.label()->service];
    CHECK(ucounts["even"] == 10);
    CHECK(ucounts["odd"] == 10);

    // Determinism: identical seeds give identical item id sequences.
    Dataset again = augment_dataset(ds, 30.0, 15.0, targets, 99);
    REQUIRE(again.items.size() == bal.items.size());
    for (std::size_t i = 0; i < bal.items.size(); ++i)
        CHECK(again.items[i].item_id() == bal.items[i].item_id());
}

TEST_CASE("balanced augmentation validates its class bookkeeping") {
    Dataset ds = two_class_flows();
    std::map<std::string, std::size_t> missing = {{"even", 5}};
    CHECK_THROWS_WITH_AS(augment_dataset(ds, 30.0, 15.0, missing, 1), doctest::Contains("odd"),
                         std::invalid_argument);

    Flow empty;
    empty.id = "empty";
    empty.label = LabelPair{"ghost", "cat"};
    Dataset with_empty = two_class_flows();
    with_empty.items.push_back(make_item(empty));
    CHECK_THROWS_WITH_AS(augment_dataset(with_empty, 30.0, 15.0, 5, 1),
                         doctest::Contains("ghost"), std::invalid_argument);
}

// ------------------------------------------------------------ flowpic

TEST_CASE("flowpic binning matches the edge-scanning reference on random snapshots") {
    Rng rng(31337);
    for (int trial = 0; trial < 300; ++trial) {
        const double win = rng.uniform(0.5, 90.0);
        std::vector<SnapshotPacket> pkts;
        const std::size_t n = 1 + rng.below(60);
        for (std::size_t i = 0; i < n; ++i) {
            // Includes occasional boundary-exact times and oversized packets.
            double t = rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, win);
            double s = rng.bernoulli(0.1) ? 1500.0 : rng.uniform(0.0, 1800.0);
            pkts.push_back({t, s});
        }
        Snapshot s = snap("s" + std::to_string(trial), win, pkts);
        const std::size_t h = 1 + rng.below(40);
        const std::size_t w = 1 + rng.below(40);
        FlowpicGrid got = build_flowpic(s, h, w, 1500.0);
        FlowpicGrid want = flowpic_reference(s, h, w, 1500.0);
        REQUIRE(got.cells.size() == want.cells.size());
        bool equal = true;
        for (std::size_t i = 0; i < got.cells.size(); ++i)
            if (got.cells[i] != want.cells[i]) equal = false;
        CHECK(equal);
        CHECK(got.mass() == static_cast<double>(n));  // exact conservation
    }
}

TEST_CASE("flowpic handles boundary packets per the bin-edge contract") {
    Snapshot s = snap("b", 10.0,
                      {{0.0, 0.0},        // first col, bottom row
                       {9.999, 1500.0},   // last col, top row (size at max)
                       {5.0, 2000.0},     // clamped to top row
                       {2.5, 750.0}});    // middle
    FlowpicGrid g = build_flowpic(s, 4, 4, 1500.0);
    CHECK(g.at(0, 0) == 1.0);
    CHECK(g.at(3, 3) == 1.0);
    CHECK(g.at(3, 2) == 1.0);   // size 2000 -> clamp 1500 -> top row, col floor(5/2.5)=2
    CHECK(g.at(2, 1) == 1.0);   // 750*4/1500 = 2, 2.5*4/10 = 1
    CHECK(g.mass() == 4.0);

    FlowpicGrid one = build_flowpic(s, 1, 1, 1500.0);
    CHECK(one.at(0, 0) == 4.0);

    CHECK_THROWS_AS(build_flowpic(s, 0, 4, 1500.0), std::invalid_argument);
    CHECK_THROWS_AS(build_flowpic(s, 4, 4, 0.0), std::invalid_argument);
    Snapshot bad = snap("z", 0.0, {{0.0, 1.0}});
    CHECK_THROWS_AS(build_flowpic(bad, 4, 4, 1500.0), std::invalid_argument);
}

// ------------------------------------------------------------ representative

TEST_CASE("representative snapshot prefers the earliest downstream window") {
    std::vector<Snapshot> snaps = {
        snap("o/u0", 30.0, {{0, 1}}, Direction::Upstream, 0.0),
        snap("o/d2", 30.0, {{0, 1}}, Direction::Downstream, 30.0),
        snap("o/d1", 30.0, {{0, 1}}, Direction::Downstream, 15.0),
    };
    CHECK(representative_snapshot(snaps).id == "o/d1");

    // No downstream: earliest overall.
    std::vector<Snapshot> ups = {
        snap("o/u1", 30.0, {{0, 1}}, Direction::Upstream, 15.0),
        snap("o/u0", 30.0, {{0, 1}}, Direction::Upstream, 0.0),
    };
    CHECK(representative_snapshot(ups).id == "o/u0");

    // Equal window_start: the earlier list position wins.
    std::vector<Snapshot> tie = {
        snap("first", 30.0, {{0, 1}}, Direction::Downstream, 5.0),
        snap("second", 30.0, {{0, 1}}, Direction::Downstream, 5.0),
    };
    CHECK(representative_snapshot(tie).id == "first");

    std::vector<Snapshot> mixed = {
        snap("a/u0", 30.0, {{0, 1}}, Direction::Upstream, 0.0, "a"),
        snap("b/u0", 30.0, {{0, 1}}, Direction::Upstream, 0.0, "b"),
    };
    CHECK_THROWS_WITH_AS(representative_snapshot(mixed), doctest::Contains("origin"),
                         std::invalid_argument);
    CHECK_THROWS_AS(representative_snapshot({}), std::invalid_argument);
}

// ------------------------------------------------------------ pgm

TEST_CASE("pgm rendering emits a P2 graymap with the peak as max gray") {
    FlowpicGrid g;
    g.h = 2;
    g.w = 3;
    g.cells = {0, 1, 2, 3, 0, 5};
    CHECK(to_pgm(g) == "P2\n3 2\n5\n0 1 2\n3 0 5\n");

    FlowpicGrid zero;
    zero.h = 1;
    zero.w = 2;
    zero.cells = {0, 0};
    CHECK(to_pgm(zero) == "P2\n2 1\n1\n0 0\n");  // max gray floors at 1
}
