#include "flowbench/features.hpp"

#include <algorithm>
#include <stdexcept>

#include "flowbench/flowpic.hpp"
#include "flowbench/snapshots.hpp"

namespace flowbench {

InputView input_view_from_name(const std::string& name) {
    if (name == "3ch") return InputView::ThreeChannel;
    if (name == "2ch") return InputView::TwoChannel;
    if (name == "dir") return InputView::DirectionOnly;
    if (name == "flowpic") return InputView::Flowpic;
    throw std::invalid_argument("unknown input view: " + name +
                                " (expected 3ch|2ch|dir|flowpic)");
}

const char* input_view_name(InputView v) {
    switch (v) {
        case InputView::ThreeChannel: return "3ch";
        case InputView::TwoChannel: return "2ch";
        case InputView::DirectionOnly: return "dir";
        case InputView::Flowpic: return "flowpic";
    }
    return "3ch";
}

FeatureSpec default_features(InputView view) {
    FeatureSpec s;
    s.view = view;
    s.iat_norm = minmax_fixed(0.0, s.iat_cap);
    s.size_norm = minmax_fixed(0.0, s.size_max);
    s.dir_norm.kind = NormKind::Identity;
    return s;
}

nn::Shape feature_item_shape(const FeatureSpec& spec) {
    switch (spec.view) {
        case InputView::ThreeChannel: return {spec.ppi_len, 3};
        case InputView::TwoChannel: return {spec.ppi_len, 2};
        case InputView::DirectionOnly: return {spec.dir_len, 1};
        case InputView::Flowpic: return {spec.grid, spec.grid, 1};
    }
    return {};
}

namespace {

TimeSeriesInput channel_input(const DatasetItem& item, const FeatureSpec& spec) {
    const std::size_t L = std::max(spec.ppi_len, spec.dir_len);
    TimeSeriesInput x;
    if (const auto* f = std::get_if<Flow>(&item.data)) {
        x = extract_ppi(*f, L);
    } else if (const auto* t = std::get_if<Trace>(&item.data)) {
        x = extract_ppi(*t, L);
    } else if (const auto* p = std::get_if<PpiRecord>(&item.data)) {
        x = from_ppi_record(*p, L);
    } else {
        throw std::invalid_argument("item '" + item.item_id() +
                                    "' is a snapshot; channel views need flows, traces, or "
                                    "extracted records");
    }
    x = clean(std::move(x), spec.iat_cap);
    apply_to_channel(x, Channel::Iat, spec.iat_norm);
    apply_to_channel(x, Channel::Size, spec.size_norm);
    apply_to_channel(x, Channel::Dir, spec.dir_norm);
    return x;
}

FlowpicGrid grid_input(const DatasetItem& item, const FeatureSpec& spec) {
    if (const auto* s = std::get_if<Snapshot>(&item.data)) {
        return build_flowpic(*s, spec.grid, spec.grid, spec.size_max);
    }
    std::vector<UniSequence> seqs;
    if (const auto* f = std::get_if<Flow>(&item.data)) {
        seqs = split_unidirectional(*f);
    } else if (const auto* t = std::get_if<Trace>(&item.data)) {
        seqs = split_unidirectional(*t);
    } else {
        throw std::invalid_argument("item '" + item.item_id() +
                                    "' has no packet times; the flowpic view needs snapshots, "
                                    "flows, or traces");
    }
    std::vector<Snapshot> snaps;
    for (const auto& seq : seqs) {
        auto ws = window_snapshots(seq, item.item_id(), item.label(), spec.window_len, spec.step);
        snaps.insert(snaps.end(), ws.begin(), ws.end());
    }
    if (snaps.empty()) {
        throw std::invalid_argument("item '" + item.item_id() + "' produced no snapshots");
    }
    return build_flowpic(representative_snapshot(snaps), spec.grid, spec.grid, spec.size_max);
}

}  // namespace

std::vector<double> featurize_item(const DatasetItem& item, const FeatureSpec& spec) {
    std::vector<double> out;
    switch (spec.view) {
        case InputView::ThreeChannel: {
            const TimeSeriesInput x = channel_input(item, spec);
            out.resize(spec.ppi_len * 3);
            for (std::size_t i = 0; i < spec.ppi_len; ++i) {
                out[i * 3 + 0] = x.iat[i];
                out[i * 3 + 1] = x.dir[i];
                out[i * 3 + 2] = x.size[i];
            }
            break;
        }
        case InputView::TwoChannel: {
            const TimeSeriesInput x = channel_input(item, spec);
            out.resize(spec.ppi_len * 2);
            for (std::size_t i = 0; i < spec.ppi_len; ++i) {
                out[i * 2 + 0] = x.dir[i];
                out[i * 2 + 1] = x.size[i];
            }
            break;
        }
        case InputView::DirectionOnly: {
            const TimeSeriesInput x = channel_input(item, spec);
            out = directions_only(x, spec.dir_len);
            break;
        }
        case InputView::Flowpic: {
            const FlowpicGrid g = grid_input(item, spec);
            double peak = 0.0;
            for (double c : g.cells) peak = std::max(peak, c);
            out.resize(g.cells.size());
            const double scale = peak > 0 ? 1.0 / peak : 0.0;
            for (std::size_t i = 0; i < g.cells.size(); ++i) out[i] = g.cells[i] * scale;
            break;
        }
    }
    return out;
}

nn::Tensor featurize_batch(const std::vector<const DatasetItem*>& items,
                           const FeatureSpec& spec) {
    const nn::Shape item_shape = feature_item_shape(spec);
    nn::Shape shape;
    shape.push_back(items.size());
    shape.insert(shape.end(), item_shape.begin(), item_shape.end());
    nn::Tensor t(shape);
    const std::size_t stride = t.item_size();
    for (std::size_t i = 0; i < items.size(); ++i) {
        const std::vector<double> v = featurize_item(*items[i], spec);
        std::copy(v.begin(), v.end(), t.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
    }
    return t;
}

}  // namespace flowbench
