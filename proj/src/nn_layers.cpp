#include "flowbench/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowbench::nn {

namespace {

void add_bias_rows(double* y, const double* b, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* yr = y + r * cols;
        for (std::size_t c = 0; c < cols; ++c) yr[c] += b[c];
    }
}

void colsum_acc(const double* g, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += gr[c];
    }
}

void softmax_row(double* v, std::size_t n) {
    double mx = v[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::exp(v[i] - mx);
        sum += v[i];
    }
    for (std::size_t i = 0; i < n; ++i) v[i] /= sum;
}

}  // namespace

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
}

// ---------------------------------------------------------------- Dense

Shape Dense::init(const std::vector<Shape>& in, Rng& rng) {
    if (in.size() != 1 || in[0].empty()) throw std::invalid_argument("dense expects one ranked input");
    in_features_ = in[0].back();
    w_ = {"kernel", Tensor({in_features_, units_}), Tensor({in_features_, units_}), true};
    b_ = {"bias", Tensor({units_}), Tensor({units_}), true};
    glorot_uniform(w_.value, in_features_, units_, rng);
    Shape out = in[0];
    out.back() = units_;
    return out;
}

void Dense::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    const Tensor& x = *in[0];
    std::size_t rows = x.numel() / in_features_;
    out.fill(0.0);
    matmul_acc(x.ptr(), w_.value.ptr(), out.ptr(), rows, in_features_, units_);
    add_bias_rows(out.ptr(), b_.value.ptr(), rows, units_);
}

void Dense::backward(const std::vector<const Tensor*>& in, const Tensor&,
                     const Tensor& gout, const std::vector<Tensor*>& gin) {
    const Tensor& x = *in[0];
    std::size_t rows = x.numel() / in_features_;
    matmul_at_acc(x.ptr(), gout.ptr(), w_.grad.ptr(), rows, in_features_, units_);
    colsum_acc(gout.ptr(), b_.grad.ptr(), rows, units_);
    matmul_bt_acc(gout.ptr(), w_.value.ptr(), gin[0]->ptr(), rows, in_features_, units_);
}

// ---------------------------------------------------------------- Conv1D

Shape Conv1D::init(const std::vector<Shape>& in, Rng& rng) {
    if (in.size() != 1 || in[0].size() != 2) throw std::invalid_argument("conv1d expects (T, C) input");
    t_ = in[0][0];
    cin_ = in[0][1];
    w_ = {"kernel", Tensor({kernel_, cin_, filters_}), Tensor({kernel_, cin_, filters_}), true};
    b_ = {"bias", Tensor({filters_}), Tensor({filters_}), true};
    glorot_uniform(w_.value, kernel_ * cin_, kernel_ * filters_, rng);
    return {t_, filters_};
}

void Conv1D::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    const Tensor& x = *in[0];
    std::size_t n = x.shape[0];
    long pl = static_cast<long>((kernel_ - 1) / 2);
    out.fill(0.0);
    for (std::size_t b = 0; b < n; ++b) {
        const double* xb = x.ptr() + b * t_ * cin_;
        double* yb = out.ptr() + b * t_ * filters_;
        for (std::size_t dk = 0; dk < kernel_; ++dk) {
            long off = static_cast<long>(dk) - pl;
            long p0 = std::max<long>(0, -off);
            long p1 = std::min<long>(static_cast<long>(t_), static_cast<long>(t_) - off);
            if (p0 >= p1) continue;
            matmul_acc(xb + (p0 + off) * static_cast<long>(cin_),
                       w_.value.ptr() + dk * cin_ * filters_,
                       yb + p0 * static_cast<long>(filters_),
                       static_cast<std::size_t>(p1 - p0), cin_, filters_);
        }
        add_bias_rows(yb, b_.value.ptr(), t_, filters_);
    }
}

void Conv1D::backward(const std::vector<const Tensor*>& in, const Tensor&,
                      const Tensor& gout, const std::vector<Tensor*>& gin) {
    const Tensor& x = *in[0];
    std::size_t n = x.shape[0];
    long pl = static_cast<long>((kernel_ - 1) / 2);
    for (std::size_t b = 0; b < n; ++b) {
        const double* xb = x.ptr() + b * t_ * cin_;
        const double* gb = gout.ptr() + b * t_ * filters_;
        double* gxb = gin[0]->ptr() + b * t_ * cin_;
        colsum_acc(gb, b_.grad.ptr(), t_, filters_);
        for (std::size_t dk = 0; dk < kernel_; ++dk) {
            long off = static_cast<long>(dk) - pl;
            long p0 = std::max<long>(0, -off);
            long p1 = std::min<long>(static_cast<long>(t_), static_cast<long>(t_) - off);
            if (p0 >= p1) continue;
            std::size_t rows = static_cast<std::size_t>(p1 - p0);
            matmul_at_acc(xb + (p0 + off) * static_cast<long>(cin_),
                          gb + p0 * static_cast<long>(filters_),
                          w_.grad.ptr() + dk * cin_ * filters_, rows, cin_, filters_);
            matmul_bt_acc(gb + p0 * static_cast<long>(filters_),
                          w_.value.ptr() + dk * cin_ * filters_,
                          gxb + (p0 + off) * static_cast<long>(cin_), rows, cin_, filters_);
        }
    }
}

// ---------------------------------------------------------------- Conv2D

Shape Conv2D::init(const std::vector<Shape>& in, Rng& rng) {
    if (in.size() != 1 || in[0].size() != 3) throw std::invalid_argument("conv2d expects (H, W, C) input");
    h_ = in[0][0];
    w_in_ = in[0][1];
    cin_ = in[0][2];
    w_ = {"kernel", Tensor({kh_, kw_, cin_, filters_}), Tensor({kh_, kw_, cin_, filters_}), true};
    b_ = {"bias", Tensor({filters_}), Tensor({filters_}), true};
    glorot_uniform(w_.value, kh_ * kw_ * cin_, kh_ * kw_ * filters_, rng);
    return {h_, w_in_, filters_};
}

void Conv2D::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    const Tensor& x = *in[0];
    std::size_t n = x.shape[0];
    long pt = static_cast<long>((kh_ - 1) / 2), pl = static_cast<long>((kw_ - 1) / 2);
    out.fill(0.0);
    for (std::size_t b = 0; b < n; ++b) {
        const double* xb = x.ptr() + b * h_ * w_in_ * cin_;
        double* yb = out.ptr() + b * h_ * w_in_ * filters_;
        for (std::size_t dy = 0; dy < kh_; ++dy) {
            long offy = static_cast<long>(dy) - pt;
            for (std::size_t dx = 0; dx < kw_; ++dx) {
                long offx = static_cast<long>(dx) - pl;
                long c0 = std::max<long>(0, -offx);
                long c1 = std::min<long>(static_cast<long>(w_in_), static_cast<long>(w_in_) - offx);
                if (c0 >= c1) continue;
                const double* wk = w_.value.ptr() + (dy * kw_ + dx) * cin_ * filters_;
                for (long r = std::max<long>(0, -offy);
                     r < std::min<long>(static_cast<long>(h_), static_cast<long>(h_) - offy); ++r) {
                    matmul_acc(xb + ((r + offy) * static_cast<long>(w_in_) + c0 + offx) * static_cast<long>(cin_),
                               wk,
                               yb + (r * static_cast<long>(w_in_) + c0) * static_cast<long>(filters_),
                               static_cast<std::size_t>(c1 - c0), cin_, filters_);
                }
            }
        }
        add_bias_rows(yb, b_.value.ptr(), h_ * w_in_, filters_);
    }
}

void Conv2D::backward(const std::vector<const Tensor*>& in, const Tensor&,
                      const Tensor& gout, const std::vector<Tensor*>& gin) {
    const Tensor& x = *in[0];
    std::size_t n = x.shape[0];
    long pt = static_cast<long>((kh_ - 1) / 2), pl = static_cast<long>((kw_ - 1) / 2);
    for (std::size_t b = 0; b < n; ++b) {
        const double* xb = x.ptr() + b * h_ * w_in_ * cin_;
        const double* gb = gout.ptr() + b * h_ * w_in_ * filters_;
        double* gxb = gin[0]->ptr() + b * h_ * w_in_ * cin_;
        colsum_acc(gb, b_.grad.ptr(), h_ * w_in_, filters_);
        for (std::size_t dy = 0; dy < kh_; ++dy) {
            long offy = static_cast<long>(dy) - pt;
            for (std::size_t dx = 0; dx < kw_; ++dx) {
                long offx = static_cast<long>(dx) - pl;
                long c0 = std::max<long>(0, -offx);
                long c1 = std::min<long>(static_cast<long>(w_in_), static_cast<long>(w_in_) - offx);
                if (c0 >= c1) continue;
                std::size_t cols = static_cast<std::size_t>(c1 - c0);
                const double* wk = w_.value.ptr() + (dy * kw_ + dx) * cin_ * filters_;
                double* gwk = w_.grad.ptr() + (dy * kw_ + dx) * cin_ * filters_;
                for (long r = std::max<long>(0, -offy);
                     r < std::min<long>(static_cast<long>(h_), static_cast<long>(h_) - offy); ++r) {
                    const double* xrow = xb + ((r + offy) * static_cast<long>(w_in_) + c0 + offx) * static_cast<long>(cin_);
                    const double* grow = gb + (r * static_cast<long>(w_in_) + c0) * static_cast<long>(filters_);
                    matmul_at_acc(xrow, grow, gwk, cols, cin_, filters_);
                    matmul_bt_acc(grow, wk,
                                  gxb + ((r + offy) * static_cast<long>(w_in_) + c0 + offx) * static_cast<long>(cin_),
                                  cols, cin_, filters_);
                }
            }
        }
    }
}

// ---------------------------------------------------------------- MaxPool1D

Shape MaxPool1D::init(const std::vector<Shape>& in, Rng&) {
    if (in.size() != 1 || in[0].size() != 2) throw std::invalid_argument("maxpool1d expects (T, C) input");
    t_ = in[0][0];
    c_ = in[0][1];
    t_out_ = (t_ + stride_ - 1) / stride_;
    long pad_total = std::max<long>(
        0, static_cast<long>((t_out_ - 1) * stride_ + pool_) - static_cast<long>(t_));
    pad_left_ = pad_total / 2;
    return {t_out_, c_};
}

void MaxPool1D::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    const Tensor& x = *in[0];
    std::size_t n = x.shape[0];
    argmax_.assign(n * t_out_ * c_, 0);
    for (std::size_t b = 0; b < n; ++b) {
        const double* xb = x.ptr() + b * t_ * c_;
        double* yb = out.ptr() + b * t_out_ * c_;
        for (std::size_t p = 0; p < t_out_; ++p) {
            long q0 = std::max<long>(0, static_cast<long>(p * stride_) - pad_left_);
            long q1 = std::min<long>(static_cast<long>(t_),
                                     static_cast<long>(p * stride_) - pad_left_ + static_cast<long>(pool_));
            for (std::size_t ch = 0; ch < c_; ++ch) {
                double best = xb[q0 * static_cast<long>(c_) + static_cast<long>(ch)];
                std::size_t bestq = static_cast<std::size_t>(q0);
                for (long q = q0 + 1; q < q1; ++q) {
                    double v = xb[q * static_cast<long>(c_) + static_cast<long>(ch)];
                    if (v > best) {
                        best = v;
                        bestq = static_cast<std::size_t>(q);
                    }
                }
                yb[p * c_ + ch] = best;
                argmax_[(b * t_out_ + p) * c_ + ch] = bestq;
            }
        }
    }
}

void MaxPool1D::backward(const std::vector<const Tensor*>&, const Tensor&,
                         const Tensor& gout, const std::vector<Tensor*>& gin) {
    std::size_t n = gout.shape[0];
    for (std::size_t b = 0; b < n; ++b) {
        const double* gb = gout.ptr() + b * t_out_ * c_;
        double* gxb = gin[0]->ptr() + b * t_ * c_;
        for (std::size_t p = 0; p < t_out_; ++p)
            for (std::size_t ch = 0; ch < c_; ++ch)
                gxb[argmax_[(b * t_out_ + p) * c_ + ch] * c_ + ch] += gb[p * c_ + ch];
    }
}

// ---------------------------------------------------------------- MaxPool2D

Shape MaxPool2D::init(const std::vector<Shape>& in, Rng&) {
    if (in.size() != 1 || in[0].size() != 3) throw std::invalid_argument("maxpool2d expects (H, W, C) input");
    h_ = in[0][0];
    w_ = in[0][1];
    c_ = in[0][2];
    ho_ = (h_ + sh_ - 1) / sh_;
    wo_ = (w_ + sw_ - 1) / sw_;
    pad_top_ = std::max<long>(0, static_cast<long>((ho_ - 1) * sh_ + ph_) - static_cast<long>(h_)) / 2;
    pad_left_ = std::max<long>(0, static_cast<long>((wo_ - 1) * sw_ + pw_) - static_cast<long>(w_)) / 2;
    return {ho_, wo_, c_};
}

void MaxPool2D::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    const Tensor& x = *in[0];
    std::size_t n = x.shape[0];
    argmax_.assign(n * ho_ * wo_ * c_, 0);
    for (std::size_t b = 0; b < n; ++b) {
        const double* xb = x.ptr() + b * h_ * w_ * c_;
        double* yb = out.ptr() + b * ho_ * wo_ * c_;
        for (std::size_t py = 0; py < ho_; ++py) {
            long r0 = std::max<long>(0, static_cast<long>(py * sh_) - pad_top_);
            long r1 = std::min<long>(static_cast<long>(h_),
                                     static_cast<long>(py * sh_) - pad_top_ + static_cast<long>(ph_));
            for (std::size_t px = 0; px < wo_; ++px) {
                long s0 = std::max<long>(0, static_cast<long>(px * sw_) - pad_left_);
                long s1 = std::min<long>(static_cast<long>(w_),
                                         static_cast<long>(px * sw_) - pad_left_ + static_cast<long>(pw_));
                for (std::size_t ch = 0; ch < c_; ++ch) {
                    double best = xb[(r0 * static_cast<long>(w_) + s0) * static_cast<long>(c_) + static_cast<long>(ch)];
                    std::size_t bestq = static_cast<std::size_t>(r0 * static_cast<long>(w_) + s0);
                    for (long r = r0; r < r1; ++r)
                        for (long s = s0; s < s1; ++s) {
                            double v = xb[(r * static_cast<long>(w_) + s) * static_cast<long>(c_) + static_cast<long>(ch)];
                            if (v > best) {
                                best = v;
                                bestq = static_cast<std::size_t>(r * static_cast<long>(w_) + s);
                            }
                        }
                    yb[(py * wo_ + px) * c_ + ch] = best;
                    argmax_[((b * ho_ + py) * wo_ + px) * c_ + ch] = bestq;
                }
            }
        }
    }
}

void MaxPool2D::backward(const std::vector<const Tensor*>&, const Tensor&,
                         const Tensor& gout, const std::vector<Tensor*>& gin) {
    std::size_t n = gout.shape[0];
    for (std::size_t b = 0; b < n; ++b) {
        const double* gb = gout.ptr() + b * ho_ * wo_ * c_;
        double* gxb = gin[0]->ptr() + b * h_ * w_ * c_;
        for (std::size_t p = 0; p < ho_ * wo_; ++p)
            for (std::size_t ch = 0; ch < c_; ++ch)
                gxb[argmax_[(b * ho_ * wo_ + p) * c_ + ch] * c_ + ch] += gb[p * c_ + ch];
    }
}

// ------------------------------------------- ChannelwiseMultiHeadAttention

Shape ChannelwiseMultiHeadAttention::init(const std::vector<Shape>& in, Rng& rng) {
    if (in.size() != 1 || in[0].size() != 2) throw std::invalid_argument("attention expects (T, d) input");
    t_ = in[0][0];
    d_ = in[0][1];
    std::size_t hs = heads_ * head_size_;
    auto make = [&](const char* name, Shape s, std::size_t fi, std::size_t fo) {
        Param p{name, Tensor(std::move(s)), Tensor(), true};
        p.grad = Tensor(p.value.shape);
        if (fi) glorot_uniform(p.value, fi, fo, rng);
        return p;
    };
    wq_ = make("query_kernel", {d_, heads_, head_size_}, d_, hs);
    bq_ = make("query_bias", {heads_, head_size_}, 0, 0);
    wk_ = make("key_kernel", {d_, heads_, head_size_}, d_, hs);
    bk_ = make("key_bias", {heads_, head_size_}, 0, 0);
    wv_ = make("value_kernel", {d_, heads_, head_size_}, d_, hs);
    bv_ = make("value_bias", {heads_, head_size_}, 0, 0);
    wo_ = make("output_kernel", {heads_, head_size_, d_}, hs, d_);
    bo_ = make("output_bias", {d_}, 0, 0);
    return {t_, d_};
}

void ChannelwiseMultiHeadAttention::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    const Tensor& x = *in[0];
    std::size_t rows = x.numel() / d_;
    std::size_t hs = heads_ * head_size_;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_size_));
    attn_ = Tensor({rows, heads_, heads_});
    out.fill(0.0);

    std::size_t chunk = std::clamp<std::size_t>(262144 / std::max<std::size_t>(hs, 1), 8, 2048);
    Tensor q({chunk, hs}), k({chunk, hs}), v({chunk, hs}), o({chunk, hs});
    for (std::size_t r0 = 0; r0 < rows; r0 += chunk) {
        std::size_t m = std::min(chunk, rows - r0);
        const double* xr = x.ptr() + r0 * d_;
        q.fill(0.0);
        k.fill(0.0);
        v.fill(0.0);
        matmul_acc(xr, wq_.value.ptr(), q.ptr(), m, d_, hs);
        matmul_acc(xr, wk_.value.ptr(), k.ptr(), m, d_, hs);
        matmul_acc(xr, wv_.value.ptr(), v.ptr(), m, d_, hs);
        add_bias_rows(q.ptr(), bq_.value.ptr(), m, hs);
        add_bias_rows(k.ptr(), bk_.value.ptr(), m, hs);
        add_bias_rows(v.ptr(), bv_.value.ptr(), m, hs);
        for (std::size_t r = 0; r < m; ++r) {
            const double* qr = q.ptr() + r * hs;
            const double* kr = k.ptr() + r * hs;
            const double* vr = v.ptr() + r * hs;
            double* ar = attn_.ptr() + (r0 + r) * heads_ * heads_;
            for (std::size_t a = 0; a < heads_; ++a) {
                double* row = ar + a * heads_;
                for (std::size_t b = 0; b < heads_; ++b) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < head_size_; ++i)
                        dot += qr[a * head_size_ + i] * kr[b * head_size_ + i];
                    row[b] = dot * inv_sqrt;
                }
                softmax_row(row, heads_);
            }
            double* orow = o.ptr() + r * hs;
            std::fill(orow, orow + hs, 0.0);
            for (std::size_t a = 0; a < heads_; ++a)
                for (std::size_t b = 0; b < heads_; ++b) {
                    double w = ar[a * heads_ + b];
                    for (std::size_t i = 0; i < head_size_; ++i)
                        orow[a * head_size_ + i] += w * vr[b * head_size_ + i];
                }
        }
        matmul_acc(o.ptr(), wo_.value.ptr(), out.ptr() + r0 * d_, m, hs, d_);
        add_bias_rows(out.ptr() + r0 * d_, bo_.value.ptr(), m, d_);
    }
}

void ChannelwiseMultiHeadAttention::backward(const std::vector<const Tensor*>& in, const Tensor&,
                                             const Tensor& gout, const std::vector<Tensor*>& gin) {
    const Tensor& x = *in[0];
    std::size_t rows = x.numel() / d_;
    std::size_t hs = heads_ * head_size_;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_size_));

    std::size_t chunk = std::clamp<std::size_t>(262144 / std::max<std::size_t>(hs, 1), 8, 2048);
    Tensor q({chunk, hs}), k({chunk, hs}), v({chunk, hs}), o({chunk, hs});
    Tensor dq({chunk, hs}), dk({chunk, hs}), dv({chunk, hs}), dob({chunk, hs});
    std::vector<double> da(heads_ * heads_), ds(heads_ * heads_);

    for (std::size_t r0 = 0; r0 < rows; r0 += chunk) {
        std::size_t m = std::min(chunk, rows - r0);
        const double* xr = x.ptr() + r0 * d_;
        const double* gr = gout.ptr() + r0 * d_;

        q.fill(0.0);
        k.fill(0.0);
        v.fill(0.0);
        matmul_acc(xr, wq_.value.ptr(), q.ptr(), m, d_, hs);
        matmul_acc(xr, wk_.value.ptr(), k.ptr(), m, d_, hs);
        matmul_acc(xr, wv_.value.ptr(), v.ptr(), m, d_, hs);
        add_bias_rows(q.ptr(), bq_.value.ptr(), m, hs);
        add_bias_rows(k.ptr(), bk_.value.ptr(), m, hs);
        add_bias_rows(v.ptr(), bv_.value.ptr(), m, hs);

        // o rebuilt from cached attention weights; dob = gout * Wo^T
        dob.fill(0.0);
        matmul_bt_acc(gr, wo_.value.ptr(), dob.ptr(), m, hs, d_);
        colsum_acc(gr, bo_.grad.ptr(), m, d_);

        dq.fill(0.0);
        dk.fill(0.0);
        dv.fill(0.0);
        for (std::size_t r = 0; r < m; ++r) {
            const double* ar = attn_.ptr() + (r0 + r) * heads_ * heads_;
            const double* qr = q.ptr() + r * hs;
            const double* kr = k.ptr() + r * hs;
            const double* vr = v.ptr() + r * hs;
            const double* dor = dob.ptr() + r * hs;
            double* orow = o.ptr() + r * hs;
            std::fill(orow, orow + hs, 0.0);
            for (std::size_t a = 0; a < heads_; ++a)
                for (std::size_t b = 0; b < heads_; ++b) {
                    double w = ar[a * heads_ + b];
                    for (std::size_t i = 0; i < head_size_; ++i)
                        orow[a * head_size_ + i] += w * vr[b * head_size_ + i];
                }

            double* dqr = dq.ptr() + r * hs;
            double* dkr = dk.ptr() + r * hs;
            double* dvr = dv.ptr() + r * hs;
            for (std::size_t a = 0; a < heads_; ++a) {
                for (std::size_t b = 0; b < heads_; ++b) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < head_size_; ++i)
                        acc += dor[a * head_size_ + i] * vr[b * head_size_ + i];
                    da[a * heads_ + b] = acc;
                }
                double dot = 0.0;
                for (std::size_t b = 0; b < heads_; ++b)
                    dot += da[a * heads_ + b] * ar[a * heads_ + b];
                for (std::size_t b = 0; b < heads_; ++b)
                    ds[a * heads_ + b] = ar[a * heads_ + b] * (da[a * heads_ + b] - dot);
            }
            for (std::size_t a = 0; a < heads_; ++a)
                for (std::size_t b = 0; b < heads_; ++b) {
                    double w = ar[a * heads_ + b];
                    double s = ds[a * heads_ + b] * inv_sqrt;
                    for (std::size_t i = 0; i < head_size_; ++i) {
                        dvr[b * head_size_ + i] += w * dor[a * head_size_ + i];
                        dqr[a * head_size_ + i] += s * kr[b * head_size_ + i];
                        dkr[b * head_size_ + i] += s * qr[a * head_size_ + i];
                    }
                }
        }

        matmul_at_acc(o.ptr(), gr, wo_.grad.ptr(), m, hs, d_);
        matmul_at_acc(xr, dq.ptr(), wq_.grad.ptr(), m, d_, hs);
        matmul_at_acc(xr, dk.ptr(), wk_.grad.ptr(), m, d_, hs);
        matmul_at_acc(xr, dv.ptr(), wv_.grad.ptr(), m, d_, hs);
        colsum_acc(dq.ptr(), bq_.grad.ptr(), m, hs);
        colsum_acc(dk.ptr(), bk_.grad.ptr(), m, hs);
        colsum_acc(dv.ptr(), bv_.grad.ptr(), m, hs);
        double* gx = gin[0]->ptr() + r0 * d_;
        matmul_bt_acc(dq.ptr(), wq_.value.ptr(), gx, m, d_, hs);
        matmul_bt_acc(dk.ptr(), wk_.value.ptr(), gx, m, d_, hs);
        matmul_bt_acc(dv.ptr(), wv_.value.ptr(), gx, m, d_, hs);
    }
}

// ---------------------------------------------------------------- LayerNorm

Shape LayerNorm::init(const std::vector<Shape>& in, Rng&) {
    if (in.size() != 1 || in[0].empty()) throw std::invalid_argument("layernorm expects one ranked input");
    d_ = in[0].back();
    gamma_ = {"gamma", Tensor({d_}), Tensor({d_}), true};
    beta_ = {"beta", Tensor({d_}), Tensor({d_}), true};
    gamma_.value.fill(1.0);
    return in[0];
}

void LayerNorm::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    const Tensor& x = *in[0];
    std::size_t rows = x.numel() / d_;
    inv_std_.assign(rows, 0.0);
    xhat_ = Tensor(x.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.ptr() + r * d_;
        double mu = 0.0;
        for (std::size_t i = 0; i < d_; ++i) mu += xr[i];
        mu /= static_cast<double>(d_);
        double var = 0.0;
        for (std::size_t i = 0; i < d_; ++i) {
            double c = xr[i] - mu;
            var += c * c;
        }
        var /= static_cast<double>(d_);
        double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[r] = inv;
        double* hr = xhat_.ptr() + r * d_;
        double* yr = out.ptr() + r * d_;
        for (std::size_t i = 0; i < d_; ++i) {
            hr[i] = (xr[i] - mu) * inv;
            yr[i] = gamma_.value.data[i] * hr[i] + beta_.value.data[i];
        }
    }
}

void LayerNorm::backward(const std::vector<const Tensor*>& in, const Tensor&,
                         const Tensor& gout, const std::vector<Tensor*>& gin) {
    std::size_t rows = in[0]->numel() / d_;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = gout.ptr() + r * d_;
        const double* hr = xhat_.ptr() + r * d_;
        double* gx = gin[0]->ptr() + r * d_;
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t i = 0; i < d_; ++i) {
            double dh = gr[i] * gamma_.value.data[i];
            mean_dh += dh;
            mean_dh_h += dh * hr[i];
            gamma_.grad.data[i] += gr[i] * hr[i];
            beta_.grad.data[i] += gr[i];
        }
        mean_dh /= static_cast<double>(d_);
        mean_dh_h /= static_cast<double>(d_);
        for (std::size_t i = 0; i < d_; ++i) {
            double dh = gr[i] * gamma_.value.data[i];
            gx[i] += inv_std_[r] * (dh - mean_dh - hr[i] * mean_dh_h);
        }
    }
}

// ---------------------------------------------------------------- BatchNorm

Shape BatchNorm::init(const std::vector<Shape>& in, Rng&) {
    if (in.size() != 1 || in[0].empty()) throw std::invalid_argument("batchnorm expects one ranked input");
    c_ = in[0].back();
    gamma_ = {"gamma", Tensor({c_}), Tensor({c_}), true};
    beta_ = {"beta", Tensor({c_}), Tensor({c_}), true};
    running_mean_ = {"moving_mean", Tensor({c_}), Tensor({c_}), false};
    running_var_ = {"moving_variance", Tensor({c_}), Tensor({c_}), false};
    gamma_.value.fill(1.0);
    running_var_.value.fill(1.0);
    return in[0];
}

void BatchNorm::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) {
    const Tensor& x = *in[0];
    std::size_t rows = x.numel() / c_;
    last_train_ = (mode == Mode::Train);
    inv_std_.assign(c_, 0.0);
    std::vector<double> mean(c_, 0.0);
    if (mode == Mode::Train) {
        std::vector<double> var(c_, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = x.ptr() + r * c_;
            for (std::size_t i = 0; i < c_; ++i) mean[i] += xr[i];
        }
        for (std::size_t i = 0; i < c_; ++i) mean[i] /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = x.ptr() + r * c_;
            for (std::size_t i = 0; i < c_; ++i) {
                double cdev = xr[i] - mean[i];
                var[i] += cdev * cdev;
            }
        }
        for (std::size_t i = 0; i < c_; ++i) {
            var[i] /= static_cast<double>(rows);
            inv_std_[i] = 1.0 / std::sqrt(var[i] + eps_);
            running_mean_.value.data[i] = momentum_ * running_mean_.value.data[i] + (1.0 - momentum_) * mean[i];
            running_var_.value.data[i] = momentum_ * running_var_.value.data[i] + (1.0 - momentum_) * var[i];
        }
        xhat_ = Tensor(x.shape);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = x.ptr() + r * c_;
            double* hr = xhat_.ptr() + r * c_;
            double* yr = out.ptr() + r * c_;
            for (std::size_t i = 0; i < c_; ++i) {
                hr[i] = (xr[i] - mean[i]) * inv_std_[i];
                yr[i] = gamma_.value.data[i] * hr[i] + beta_.value.data[i];
            }
        }
    } else {
        for (std::size_t i = 0; i < c_; ++i)
            inv_std_[i] = 1.0 / std::sqrt(running_var_.value.data[i] + eps_);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = x.ptr() + r * c_;
            double* yr = out.ptr() + r * c_;
            for (std::size_t i = 0; i < c_; ++i)
                yr[i] = gamma_.value.data[i] * (xr[i] - running_mean_.value.data[i]) * inv_std_[i] +
                        beta_.value.data[i];
        }
    }
}

void BatchNorm::backward(const std::vector<const Tensor*>& in, const Tensor&,
                         const Tensor& gout, const std::vector<Tensor*>& gin) {
    const Tensor& x = *in[0];
    std::size_t rows = x.numel() / c_;
    if (last_train_) {
        std::vector<double> sum_g(c_, 0.0), sum_gh(c_, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = gout.ptr() + r * c_;
            const double* hr = xhat_.ptr() + r * c_;
            for (std::size_t i = 0; i < c_; ++i) {
                sum_g[i] += gr[i];
                sum_gh[i] += gr[i] * hr[i];
            }
        }
        for (std::size_t i = 0; i < c_; ++i) {
            gamma_.grad.data[i] += sum_gh[i];
            beta_.grad.data[i] += sum_g[i];
        }
        double invn = 1.0 / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = gout.ptr() + r * c_;
            const double* hr = xhat_.ptr() + r * c_;
            double* gx = gin[0]->ptr() + r * c_;
            for (std::size_t i = 0; i < c_; ++i)
                gx[i] += gamma_.value.data[i] * inv_std_[i] *
                         (gr[i] - invn * sum_g[i] - hr[i] * invn * sum_gh[i]);
        }
    } else {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = gout.ptr() + r * c_;
            const double* xr = x.ptr() + r * c_;
            double* gx = gin[0]->ptr() + r * c_;
            for (std::size_t i = 0; i < c_; ++i) {
                gx[i] += gr[i] * gamma_.value.data[i] * inv_std_[i];
                gamma_.grad.data[i] += gr[i] * (xr[i] - running_mean_.value.data[i]) * inv_std_[i];
                beta_.grad.data[i] += gr[i];
            }
        }
    }
}

// ---------------------------------------------------------------- Dropout

Shape Dropout::init(const std::vector<Shape>& in, Rng&) {
    if (in.size() != 1) throw std::invalid_argument("dropout expects one input");
    if (rate_ < 0.0 || rate_ >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
    return in[0];
}

void Dropout::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode mode) {
    const Tensor& x = *in[0];
    last_train_ = (mode == Mode::Train);
    if (mode == Mode::Infer || rate_ == 0.0) {
        out.data = x.data;
        return;
    }
    bool need_mask = !frozen_ || mask_.numel() != x.numel();
    if (need_mask) {
        mask_ = Tensor(x.shape);
        double keep = 1.0 - rate_;
        for (double& m : mask_.data) m = rng_.bernoulli(keep) ? 1.0 / keep : 0.0;
    }
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] * mask_.data[i];
}

void Dropout::backward(const std::vector<const Tensor*>&, const Tensor&,
                       const Tensor& gout, const std::vector<Tensor*>& gin) {
    if (!last_train_ || rate_ == 0.0) {
        for (std::size_t i = 0; i < gout.numel(); ++i) gin[0]->data[i] += gout.data[i];
        return;
    }
    for (std::size_t i = 0; i < gout.numel(); ++i) gin[0]->data[i] += gout.data[i] * mask_.data[i];
}

// ---------------------------------------------------------------- Flatten

Shape Flatten::init(const std::vector<Shape>& in, Rng&) {
    if (in.size() != 1) throw std::invalid_argument("flatten expects one input");
    return {numel_of(in[0])};
}

void Flatten::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    out.data = in[0]->data;
}

void Flatten::backward(const std::vector<const Tensor*>&, const Tensor&,
                       const Tensor& gout, const std::vector<Tensor*>& gin) {
    for (std::size_t i = 0; i < gout.numel(); ++i) gin[0]->data[i] += gout.data[i];
}

// ---------------------------------------------------------------- Add

Shape Add::init(const std::vector<Shape>& in, Rng&) {
    if (in.size() != 2 || in[0] != in[1])
        throw std::invalid_argument("add expects two inputs of identical shape");
    return in[0];
}

void Add::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = in[0]->data[i] + in[1]->data[i];
}

void Add::backward(const std::vector<const Tensor*>&, const Tensor&,
                   const Tensor& gout, const std::vector<Tensor*>& gin) {
    for (std::size_t i = 0; i < gout.numel(); ++i) {
        gin[0]->data[i] += gout.data[i];
        gin[1]->data[i] += gout.data[i];
    }
}

// ---------------------------------------------------------------- activations

Shape ReLU::init(const std::vector<Shape>& in, Rng&) { return in.at(0); }

void ReLU::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::max(0.0, in[0]->data[i]);
}

void ReLU::backward(const std::vector<const Tensor*>& in, const Tensor&,
                    const Tensor& gout, const std::vector<Tensor*>& gin) {
    for (std::size_t i = 0; i < gout.numel(); ++i)
        if (in[0]->data[i] > 0.0) gin[0]->data[i] += gout.data[i];
}

Shape ELU::init(const std::vector<Shape>& in, Rng&) { return in.at(0); }

void ELU::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    for (std::size_t i = 0; i < out.numel(); ++i) {
        double v = in[0]->data[i];
        out.data[i] = v > 0.0 ? v : alpha_ * (std::exp(v) - 1.0);
    }
}

void ELU::backward(const std::vector<const Tensor*>& in, const Tensor& out,
                   const Tensor& gout, const std::vector<Tensor*>& gin) {
    for (std::size_t i = 0; i < gout.numel(); ++i) {
        double v = in[0]->data[i];
        gin[0]->data[i] += v > 0.0 ? gout.data[i] : gout.data[i] * (out.data[i] + alpha_);
    }
}

Shape Softmax::init(const std::vector<Shape>& in, Rng&) {
    if (in.size() != 1 || in[0].empty()) throw std::invalid_argument("softmax expects one ranked input");
    return in[0];
}

void Softmax::forward(const std::vector<const Tensor*>& in, Tensor& out, Mode) {
    std::size_t d = out.shape.back();
    std::size_t rows = out.numel() / d;
    out.data = in[0]->data;
    for (std::size_t r = 0; r < rows; ++r) softmax_row(out.ptr() + r * d, d);
}

void Softmax::backward(const std::vector<const Tensor*>&, const Tensor& out,
                       const Tensor& gout, const std::vector<Tensor*>& gin) {
    std::size_t d = out.shape.back();
    std::size_t rows = out.numel() / d;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = out.ptr() + r * d;
        const double* gr = gout.ptr() + r * d;
        double* gx = gin[0]->ptr() + r * d;
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += gr[i] * yr[i];
        for (std::size_t i = 0; i < d; ++i) gx[i] += yr[i] * (gr[i] - dot);
    }
}

}  // namespace flowbench::nn
