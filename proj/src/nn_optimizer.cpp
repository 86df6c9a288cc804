#include "flowbench/nn/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace flowbench::nn {

LrSchedule::LrSchedule(std::vector<Segment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw std::invalid_argument("schedule needs at least one segment");
    for (const Segment& s : segments_) {
        if (!(s.rate >= 0.0) || !std::isfinite(s.rate))
            throw std::invalid_argument("schedule rate must be finite and non-negative");
        if (s.epochs <= 0) throw std::invalid_argument("schedule segment epochs must be positive");
    }
}

LrSchedule LrSchedule::parse(const std::string& text) {
    std::vector<Segment> segs;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string part = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (part.empty()) throw std::invalid_argument("empty schedule segment in '" + text + "'");
        std::size_t colon = part.find(':');
        try {
            if (colon == std::string::npos) {
                segs.push_back({std::stod(part), 1});
            } else {
                segs.push_back({std::stod(part.substr(0, colon)),
                                std::stoi(part.substr(colon + 1))});
            }
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("bad schedule segment '" + part + "'");
        } catch (const std::out_of_range&) {
            throw std::invalid_argument("bad schedule segment '" + part + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return LrSchedule(std::move(segs));
}

double LrSchedule::rate_at(int epoch) const {
    int cum = 0;
    for (const Segment& s : segments_) {
        cum += s.epochs;
        if (epoch < cum) return s.rate;
    }
    return segments_.back().rate;
}

std::string LrSchedule::str() const {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        if (i) out += ",";
        std::snprintf(buf, sizeof buf, "%g:%d", segments_[i].rate, segments_[i].epochs);
        out += buf;
    }
    return out;
}

Adam::Adam(std::vector<Param*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Param* p : params_) {
        m_.emplace_back(p->value.numel(), 0.0);
        v_.emplace_back(p->value.numel(), 0.0);
    }
}

void Adam::step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Param* p = params_[pi];
        if (!p->trainable) continue;
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        for (std::size_t i = 0; i < m.size(); ++i) {
            double g = p->grad.data[i];
            if (!std::isfinite(g))
                throw std::runtime_error("non-finite gradient in " + p->name);
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace flowbench::nn
