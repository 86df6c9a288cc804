#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowbench/flowdata.hpp"

namespace flowbench {

// Fixed-length per-packet model input. Entries past valid_len are 0 on every
// channel, and stay 0 through every normalizer.
struct TimeSeriesInput {
    std::vector<double> iat;   // seconds
    std::vector<double> size;  // payload bytes
    std::vector<double> dir;   // direction codes
    std::size_t valid_len = 0;

    std::size_t length() const { return iat.size(); }
};

enum class NormKind { Identity, MinMax, BoxCox, DirectionMap };

struct NormalizerSpec {
    NormKind kind = NormKind::Identity;
    // MinMax
    double min = 0.0, max = 1.0;
    // BoxCox (standardized by the fit sample's mean/std after the transform)
    double lambda = 1.0, shift = 1e-6, mean = 0.0, stddev = 1.0;
    // DirectionMap
    double up_code = 1.0, down_code = -1.0;

    std::string fit_source;  // dataset id the parameters were fitted on
};

nlohmann::json normalizer_to_json(const NormalizerSpec& spec);
NormalizerSpec normalizer_from_json(const nlohmann::json& j);
void save_normalizer(const NormalizerSpec& spec, const std::string& path);
NormalizerSpec load_normalizer(const std::string& path);

// First L payload-bearing packets as (inter-arrival time, payload size,
// direction) with the first kept packet's IAT = 0. Throws when no packet
// carries payload.
TimeSeriesInput extract_ppi(const std::vector<PacketRecord>& packets, std::size_t L = 30);
TimeSeriesInput extract_ppi(const Flow& flow, std::size_t L = 30);
TimeSeriesInput extract_ppi(const Trace& trace, std::size_t L = 30);

// Pads or cuts an already-extracted record to length L.
TimeSeriesInput from_ppi_record(const PpiRecord& rec, std::size_t L = 30);

// IAT entries above the cap are set to the cap; negative IATs to 0.
TimeSeriesInput clean(TimeSeriesInput x, double iat_cap = 5.0);

NormalizerSpec fit_minmax(const std::vector<double>& values, const std::string& fit_source = "");
NormalizerSpec minmax_fixed(double min, double max);
double apply_minmax(double v, const NormalizerSpec& spec);

// Grid-fitted Box-Cox over lambda in [-2, 2] step 0.01, maximizing the
// profile log-likelihood of (v + shift); the output is standardized by the
// training sample's post-transform mean and standard deviation.
NormalizerSpec fit_boxcox(const std::vector<double>& train, double shift = 1e-6,
                          const std::string& fit_source = "");
double apply_boxcox(double v, const NormalizerSpec& spec);

double apply_normalizer(double v, const NormalizerSpec& spec);

enum class Channel { Iat, Size, Dir };

// Applies the normalizer elementwise to one channel, then re-zeroes the pad
// region so pad semantics survive arbitrary transforms.
void apply_to_channel(TimeSeriesInput& x, Channel which, const NormalizerSpec& spec);

// Upstream -> up_code, Downstream -> down_code; pads stay 0.
NormalizerSpec direction_map(double up_code, double down_code);
TimeSeriesInput map_directions(TimeSeriesInput x, const NormalizerSpec& spec);

// The dir channel alone, cut or zero-padded to out_len.
std::vector<double> directions_only(const TimeSeriesInput& x, std::size_t out_len);

}  // namespace flowbench
