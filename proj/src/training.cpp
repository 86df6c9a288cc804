#include "flowbench/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowbench/rng.hpp"

namespace flowbench {

nn::Tensor slice_rows(const nn::Tensor& x, std::size_t begin, std::size_t end) {
    nn::Shape s = x.shape;
    s[0] = end - begin;
    nn::Tensor out(s);
    const std::size_t stride = x.item_size();
    std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(begin * stride),
              x.data.begin() + static_cast<std::ptrdiff_t>(end * stride), out.data.begin());
    return out;
}

namespace {

nn::Tensor gather_rows(const nn::Tensor& x, const std::vector<std::size_t>& idx,
                       std::size_t begin, std::size_t end) {
    nn::Shape s = x.shape;
    s[0] = end - begin;
    nn::Tensor out(s);
    const std::size_t stride = x.item_size();
    for (std::size_t i = begin; i < end; ++i) {
        std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(idx[i] * stride),
                  x.data.begin() + static_cast<std::ptrdiff_t>((idx[i] + 1) * stride),
                  out.data.begin() + static_cast<std::ptrdiff_t>((i - begin) * stride));
    }
    return out;
}

}  // namespace

std::pair<double, double> eval_loss_accuracy(nn::Graph& g, const nn::Tensor& x,
                                             const std::vector<std::size_t>& y,
                                             std::size_t batch) {
    const std::size_t n = x.batch();
    if (n == 0) return {0.0, 0.0};
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < n; b += batch) {
        const std::size_t e = std::min(n, b + batch);
        const nn::Tensor xb = slice_rows(x, b, e);
        const std::vector<std::size_t> yb(y.begin() + static_cast<std::ptrdiff_t>(b),
                                          y.begin() + static_cast<std::ptrdiff_t>(e));
        const nn::Tensor& probs = g.forward(xb, nn::Mode::Infer);
        loss_sum += nn::cross_entropy(probs, yb) * static_cast<double>(e - b);
        for (std::size_t r = 0; r < e - b; ++r) {
            if (nn::argmax_row(probs, r) == yb[r]) ++correct;
        }
    }
    return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

std::vector<std::size_t> predict_classes(nn::Graph& g, const nn::Tensor& x, std::size_t batch) {
    const std::size_t n = x.batch();
    std::vector<std::size_t> out(n);
    for (std::size_t b = 0; b < n; b += batch) {
        const std::size_t e = std::min(n, b + batch);
        const nn::Tensor xb = slice_rows(x, b, e);
        const nn::Tensor& probs = g.forward(xb, nn::Mode::Infer);
        for (std::size_t r = 0; r < e - b; ++r) out[b + r] = nn::argmax_row(probs, r);
    }
    return out;
}

TrainResult train(nn::Graph& g, const nn::Tensor& x_train, const std::vector<std::size_t>& y_train,
                  const nn::Tensor& x_val, const std::vector<std::size_t>& y_val,
                  const TrainConfig& cfg) {
    const std::size_t n = x_train.batch();
    if (n == 0) throw std::invalid_argument("empty training set");
    if (y_train.size() != n) throw std::invalid_argument("training labels misaligned");
    if (y_val.size() != x_val.batch()) throw std::invalid_argument("validation labels misaligned");
    if (cfg.batch == 0) throw std::invalid_argument("batch size must be positive");

    nn::Adam opt(g.params());
    Rng shuffle_rng(cfg.seed ^ 0x8badf00d5eedULL);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult res;
    std::vector<nn::Tensor> best_params;
    bool have_best = false;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.schedule.rate_at(epoch);
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t b = 0; b < n; b += cfg.batch) {
            const std::size_t e = std::min(n, b + cfg.batch);
            const nn::Tensor xb = gather_rows(x_train, order, b, e);
            std::vector<std::size_t> yb(e - b);
            for (std::size_t i = b; i < e; ++i) yb[i - b] = y_train[order[i]];

            const nn::Tensor& probs = g.forward(xb, nn::Mode::Train);
            nn::Tensor grad;
            const double loss = nn::cross_entropy(probs, yb, &grad);
            if (!std::isfinite(loss)) throw TrainAbort(epoch, lr, "loss");
            loss_sum += loss * static_cast<double>(e - b);
            for (std::size_t r = 0; r < e - b; ++r) {
                if (nn::argmax_row(probs, r) == yb[r]) ++correct;
            }

            g.backward(grad);
            try {
                opt.step(lr);
            } catch (const std::runtime_error& err) {
                throw TrainAbort(epoch, lr, err.what());
            }
        }

        EpochStats st;
        st.lr = lr;
        st.train_loss = loss_sum / static_cast<double>(n);
        st.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
        if (x_val.batch() > 0) {
            std::tie(st.val_loss, st.val_accuracy) = eval_loss_accuracy(g, x_val, y_val, cfg.batch);
        }
        res.curves.push_back(st);

        if (!have_best || st.val_accuracy > res.best_val_accuracy) {
            have_best = true;
            res.best_val_accuracy = st.val_accuracy;
            res.best_epoch = epoch;
            if (cfg.restore_best) best_params = g.snapshot_params();
        }
    }

    if (cfg.restore_best && have_best) g.restore_params(best_params);
    return res;
}

}  // namespace flowbench
