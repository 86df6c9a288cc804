#include "flowbench/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace flowbench {

namespace {

using nlohmann::json;

const char* kind_name(NormKind k) {
    switch (k) {
        case NormKind::Identity: return "identity";
        case NormKind::MinMax: return "minmax";
        case NormKind::BoxCox: return "boxcox";
        case NormKind::DirectionMap: return "direction_map";
    }
    return "identity";
}

NormKind kind_from_name(const std::string& s) {
    if (s == "identity") return NormKind::Identity;
    if (s == "minmax") return NormKind::MinMax;
    if (s == "boxcox") return NormKind::BoxCox;
    if (s == "direction_map") return NormKind::DirectionMap;
    throw std::invalid_argument("unknown normalizer kind: " + s);
}

}  // namespace

json normalizer_to_json(const NormalizerSpec& spec) {
    json p;
    switch (spec.kind) {
        case NormKind::Identity: break;
        case NormKind::MinMax:
            p["min"] = spec.min;
            p["max"] = spec.max;
            break;
        case NormKind::BoxCox:
            p["lambda"] = spec.lambda;
            p["shift"] = spec.shift;
            p["mean"] = spec.mean;
            p["stddev"] = spec.stddev;
            break;
        case NormKind::DirectionMap:
            p["up_code"] = spec.up_code;
            p["down_code"] = spec.down_code;
            break;
    }
    return json{{"kind", kind_name(spec.kind)}, {"params", p}, {"fit_source", spec.fit_source}};
}

NormalizerSpec normalizer_from_json(const json& j) {
    NormalizerSpec s;
    s.kind = kind_from_name(j.at("kind").get<std::string>());
    const json& p = j.value("params", json::object());
    switch (s.kind) {
        case NormKind::Identity: break;
        case NormKind::MinMax:
            s.min = p.at("min").get<double>();
            s.max = p.at("max").get<double>();
            break;
        case NormKind::BoxCox:
            s.lambda = p.at("lambda").get<double>();
            s.shift = p.at("shift").get<double>();
            s.mean = p.at("mean").get<double>();
            s.stddev = p.at("stddev").get<double>();
            break;
        case NormKind::DirectionMap:
            s.up_code = p.at("up_code").get<double>();
            s.down_code = p.at("down_code").get<double>();
            break;
    }
    s.fit_source = j.value("fit_source", "");
    return s;
}

void save_normalizer(const NormalizerSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write normalizer sidecar: " + path);
    out << normalizer_to_json(spec).dump(2) << "\n";
}

NormalizerSpec load_normalizer(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open normalizer sidecar: " + path);
    json j;
    in >> j;
    return normalizer_from_json(j);
}

TimeSeriesInput extract_ppi(const std::vector<PacketRecord>& packets, std::size_t L) {
    if (L < 1) throw std::invalid_argument("input length must be at least 1");
    TimeSeriesInput x;
    x.iat.assign(L, 0.0);
    x.size.assign(L, 0.0);
    x.dir.assign(L, 0.0);

    double prev_t = 0.0;
    bool have_prev = false;
    std::size_t n = 0;
    for (const auto& p : packets) {
        if (p.payload_size == 0) continue;
        if (n < L) {
            x.iat[n] = have_prev ? p.timestamp - prev_t : 0.0;
            x.size[n] = static_cast<double>(p.payload_size);
            x.dir[n] = static_cast<double>(dir_code(p.dir));
            ++n;
        }
        prev_t = p.timestamp;
        have_prev = true;
        if (n == L) break;
    }
    if (n == 0) throw std::invalid_argument("no payload-bearing packets to extract");
    x.valid_len = n;
    return x;
}

TimeSeriesInput extract_ppi(const Flow& flow, std::size_t L) { return extract_ppi(flow.packets, L); }
TimeSeriesInput extract_ppi(const Trace& trace, std::size_t L) {
    return extract_ppi(trace.packets, L);
}

TimeSeriesInput from_ppi_record(const PpiRecord& rec, std::size_t L) {
    if (L < 1) throw std::invalid_argument("input length must be at least 1");
    TimeSeriesInput x;
    x.iat.assign(L, 0.0);
    x.size.assign(L, 0.0);
    x.dir.assign(L, 0.0);
    x.valid_len = std::min(L, rec.iat.size());
    for (std::size_t i = 0; i < x.valid_len; ++i) {
        x.iat[i] = rec.iat[i];
        x.size[i] = rec.size[i];
        x.dir[i] = static_cast<double>(rec.dir[i]);
    }
    return x;
}

TimeSeriesInput clean(TimeSeriesInput x, double iat_cap) {
    for (std::size_t i = 0; i < x.valid_len; ++i) {
        if (x.iat[i] > iat_cap) x.iat[i] = iat_cap;
        if (x.iat[i] < 0.0) x.iat[i] = 0.0;
    }
    return x;
}

NormalizerSpec fit_minmax(const std::vector<double>& values, const std::string& fit_source) {
    if (values.empty()) throw std::invalid_argument("cannot fit bounds on an empty sample");
    NormalizerSpec s;
    s.kind = NormKind::MinMax;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    s.fit_source = fit_source;
    if (!(s.min < s.max))
        throw std::invalid_argument("degenerate bounds: min " + std::to_string(s.min) +
                                    " >= max " + std::to_string(s.max));
    return s;
}

NormalizerSpec minmax_fixed(double min, double max) {
    if (!(min < max))
        throw std::invalid_argument("degenerate bounds: min " + std::to_string(min) + " >= max " +
                                    std::to_string(max));
    NormalizerSpec s;
    s.kind = NormKind::MinMax;
    s.min = min;
    s.max = max;
    s.fit_source = "fixed";
    return s;
}

double apply_minmax(double v, const NormalizerSpec& spec) {
    if (!(spec.min < spec.max)) throw std::invalid_argument("degenerate bounds in normalizer");
    return std::clamp((v - spec.min) / (spec.max - spec.min), 0.0, 1.0);
}

namespace {

double boxcox_raw(double v, double lambda, double shift) {
    const double y = v + shift;
    if (y <= 0.0)
        throw std::invalid_argument("non-positive shifted value " + std::to_string(y) +
                                    " in Box-Cox transform");
    if (lambda == 0.0) return std::log(y);
    return (std::pow(y, lambda) - 1.0) / lambda;
}

}  // namespace

NormalizerSpec fit_boxcox(const std::vector<double>& train, double shift,
                          const std::string& fit_source) {
    if (train.size() < 100)
        throw std::invalid_argument("Box-Cox fit needs at least 100 samples, got " +
                                    std::to_string(train.size()));
    const double n = static_cast<double>(train.size());
    double sum_log = 0.0;
    for (double v : train) {
        if (v + shift <= 0.0)
            throw std::invalid_argument("non-positive shifted value " + std::to_string(v + shift) +
                                        " in Box-Cox fit");
        sum_log += std::log(v + shift);
    }
    // Rounding can leave a constant sample with a tiny nonzero variance, so
    // the var<=0 guard below is not enough on its own.
    const auto [lo, hi] = std::minmax_element(train.begin(), train.end());
    if (*lo == *hi) throw std::invalid_argument("Box-Cox fit degenerate: constant sample");

    double best_lambda = 0.0;
    double best_llh = -std::numeric_limits<double>::infinity();
    // Grid ends included; index arithmetic avoids drift from repeated adds.
    for (int gi = -200; gi <= 200; ++gi) {
        const double lambda = static_cast<double>(gi) / 100.0;
        double mean = 0.0;
        for (double v : train) mean += boxcox_raw(v, lambda, shift);
        mean /= n;
        double var = 0.0;
        for (double v : train) {
            const double d = boxcox_raw(v, lambda, shift) - mean;
            var += d * d;
        }
        var /= n;
        if (var <= 0.0) continue;
        const double llh = -0.5 * n * std::log(var) + (lambda - 1.0) * sum_log;
        if (llh > best_llh) {
            best_llh = llh;
            best_lambda = lambda;
        }
    }
    if (!std::isfinite(best_llh))
        throw std::invalid_argument("Box-Cox fit degenerate: constant sample");

    NormalizerSpec s;
    s.kind = NormKind::BoxCox;
    s.lambda = best_lambda;
    s.shift = shift;
    s.fit_source = fit_source;
    double mean = 0.0;
    for (double v : train) mean += boxcox_raw(v, best_lambda, shift);
    mean /= n;
    double var = 0.0;
    for (double v : train) {
        const double d = boxcox_raw(v, best_lambda, shift) - mean;
        var += d * d;
    }
    var /= n;
    s.mean = mean;
    s.stddev = std::sqrt(var);
    if (s.stddev <= 0.0) throw std::invalid_argument("Box-Cox fit degenerate: zero variance");
    return s;
}

double apply_boxcox(double v, const NormalizerSpec& spec) {
    return (boxcox_raw(v, spec.lambda, spec.shift) - spec.mean) / spec.stddev;
}

double apply_normalizer(double v, const NormalizerSpec& spec) {
    switch (spec.kind) {
        case NormKind::Identity: return v;
        case NormKind::MinMax: return apply_minmax(v, spec);
        case NormKind::BoxCox: return apply_boxcox(v, spec);
        case NormKind::DirectionMap:
            return v > 0 ? spec.up_code : (v < 0 ? spec.down_code : 0.0);
    }
    return v;
}

void apply_to_channel(TimeSeriesInput& x, Channel which, const NormalizerSpec& spec) {
    std::vector<double>& ch = which == Channel::Iat ? x.iat
                              : which == Channel::Size ? x.size
                                                       : x.dir;
    for (std::size_t i = 0; i < x.valid_len; ++i) ch[i] = apply_normalizer(ch[i], spec);
    for (std::size_t i = x.valid_len; i < ch.size(); ++i) ch[i] = 0.0;
}

NormalizerSpec direction_map(double up_code, double down_code) {
    if (up_code == down_code)
        throw std::invalid_argument("direction codes must be distinct");
    NormalizerSpec s;
    s.kind = NormKind::DirectionMap;
    s.up_code = up_code;
    s.down_code = down_code;
    s.fit_source = "fixed";
    return s;
}

TimeSeriesInput map_directions(TimeSeriesInput x, const NormalizerSpec& spec) {
    if (spec.kind != NormKind::DirectionMap)
        throw std::invalid_argument("map_directions needs a direction_map normalizer");
    apply_to_channel(x, Channel::Dir, spec);
    return x;
}

std::vector<double> directions_only(const TimeSeriesInput& x, std::size_t out_len) {
    std::vector<double> out(out_len, 0.0);
    const std::size_t n = std::min(out_len, x.valid_len);
    for (std::size_t i = 0; i < n; ++i) out[i] = x.dir[i];
    return out;
}

}  // namespace flowbench
