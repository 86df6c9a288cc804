#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowbench::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

// Dense row-major tensor of doubles. Dim 0 is the batch axis for activations.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}

    std::size_t numel() const { return data.size(); }
    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    std::size_t batch() const { return shape.empty() ? 0 : shape[0]; }

    // Elements per batch item.
    std::size_t item_size() const { return shape.empty() || shape[0] == 0 ? 0 : data.size() / shape[0]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    void reshape(Shape s) {
        if (numel_of(s) != data.size())
            throw std::invalid_argument("reshape to " + shape_str(s) + " changes element count");
        shape = std::move(s);
    }
};

// y[r,c] += sum_k a[r,k] * b[k,c]
inline void matmul_acc(const double* a, const double* b, double* y,
                       std::size_t rows, std::size_t inner, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* ar = a + r * inner;
        double* yr = y + r * cols;
        for (std::size_t k = 0; k < inner; ++k) {
            double ark = ar[k];
            if (ark == 0.0) continue;
            const double* bk = b + k * cols;
            for (std::size_t c = 0; c < cols; ++c) yr[c] += ark * bk[c];
        }
    }
}

// w[k,c] += sum_r a[r,k] * g[r,c]   (a transposed against g)
inline void matmul_at_acc(const double* a, const double* g, double* w,
                          std::size_t rows, std::size_t inner, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* ar = a + r * inner;
        const double* gr = g + r * cols;
        for (std::size_t k = 0; k < inner; ++k) {
            double ark = ar[k];
            if (ark == 0.0) continue;
            double* wk = w + k * cols;
            for (std::size_t c = 0; c < cols; ++c) wk[c] += ark * gr[c];
        }
    }
}

// x[r,k] += sum_c g[r,c] * b[k,c]   (b transposed)
inline void matmul_bt_acc(const double* g, const double* b, double* x,
                          std::size_t rows, std::size_t inner, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g + r * cols;
        double* xr = x + r * inner;
        for (std::size_t k = 0; k < inner; ++k) {
            const double* bk = b + k * cols;
            double acc = 0.0;
            for (std::size_t c = 0; c < cols; ++c) acc += gr[c] * bk[c];
            xr[k] += acc;
        }
    }
}

}  // namespace flowbench::nn
