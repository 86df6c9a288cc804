#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowbench/nn/graph.hpp"

namespace flowbench::nn {

// Piecewise-constant learning-rate sequence. rate_at takes a 0-based epoch
// index; epochs past the last segment keep the final rate.
class LrSchedule {
public:
    struct Segment {
        double rate;
        int epochs;
    };

    LrSchedule() = default;
    explicit LrSchedule(std::vector<Segment> segments);

    static LrSchedule constant(double rate) { return LrSchedule({{rate, 1}}); }

    // "1e-3:3,1e-4:1,1e-5:2" -> three segments. A bare rate means one segment.
    static LrSchedule parse(const std::string& text);

    double rate_at(int epoch) const;
    const std::vector<Segment>& segments() const { return segments_; }
    std::string str() const;

private:
    std::vector<Segment> segments_;
};

// Adam with bias correction. Moment buffers are keyed to the parameter list
// given at construction; the list must not change between steps.
class Adam {
public:
    explicit Adam(std::vector<Param*> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-7);

    // Applies one update from the accumulated grads. Throws std::runtime_error
    // naming the parameter if any gradient is non-finite.
    void step(double lr);

    std::size_t steps_taken() const { return t_; }

private:
    std::vector<Param*> params_;
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace flowbench::nn
