#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowbench/flowdata.hpp"

namespace flowbench {

// Per-class generative parameters for the synthetic corpus. 25 classes in 5
// families; classes within a family share a parameter template with small
// offsets, so fine classes are mutually confusable while families stay far
// apart.
struct ClassParams {
    std::string service;
    std::string category;
    std::vector<std::string> hostnames;  // SNI values emitted round-robin

    double iat_mu = -3.0;      // log-scale of the lognormal inter-arrival time
    double iat_sigma = 0.7;
    double small_mean = 120;   // payload mixture: small component (bytes)
    double small_sd = 40;
    double large_mean = 1200;  // large component
    double large_sd = 150;
    double large_frac = 0.5;   // P(large | downstream); upstream uses 0.25x
    double sw_up_to_down = 0.5;  // per-packet direction switch probabilities
    double sw_down_to_up = 0.4;
    double packets_mean = 60;  // mean packet count per flow
    double ack_prob = 0.15;    // chance a packet carries no payload
};

std::vector<ClassParams> synth_base_classes();
std::vector<std::string> synth_class_names();

struct SynthSpec {
    std::size_t flows_per_class = 200;
    double shift = 0.0;          // parameter perturbation scale for the target
    std::uint64_t seed = 1;      // sampling randomness
    std::uint64_t shift_seed = 7;  // which direction each class's parameters drift
    bool attach_labels = true;   // set ground-truth labels (SNIs are set always)
};

// Applies the seeded perturbation: multiplicative on sizes and switch
// probabilities, additive on the lognormal IAT parameters and mixture
// weight. shift = 0 returns the input exactly.
ClassParams shift_params(const ClassParams& base, double shift, std::uint64_t shift_seed);

// One corpus; `shifted` selects base or perturbed parameters.
Dataset synth_dataset(const std::string& name, const SynthSpec& spec, bool shifted);

// (source, target): source from base parameters, target from shifted ones,
// sampled independently.
std::pair<Dataset, Dataset> synth_generate(const SynthSpec& spec);

}  // namespace flowbench
