#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "pixelnet/tape.hpp"

namespace pixelnet {

template <typename T>
inline T softplus(T t) {
    if (t > T(30)) return t;
    if (t < T(-30)) return std::exp(t);
    return std::log1p(std::exp(t));
}

template <typename T>
inline T sigmoid(T z) {
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

// Row-wise softmax, numerically shifted by the row max.
template <typename T>
void softmax_rows(const Tensor<T>& logits, Tensor<T>& probs) {
    const int n = logits.dim(0), k = logits.dim(1);
    for (int i = 0; i < n; ++i) {
        const T* row = logits.data() + static_cast<std::int64_t>(i) * k;
        T* p = probs.data() + static_cast<std::int64_t>(i) * k;
        T m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
        T z = T(0);
        for (int j = 0; j < k; ++j) {
            p[j] = std::exp(row[j] - m);
            z += p[j];
        }
        for (int j = 0; j < k; ++j) p[j] /= z;
    }
}

// Mean over rows of -log softmax(logits)[label].
template <typename T>
NodePtr<T> softmax_xent(Tape<T>& tape, const NodePtr<T>& logits, const std::vector<int>& labels) {
    if (logits->value.ndim() != 2) throw ConfigError("softmax_xent expects logits[N,K]");
    const int n = logits->value.dim(0), k = logits->value.dim(1);
    if (static_cast<int>(labels.size()) != n) {
        throw ConfigError("softmax_xent got " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(n) + " rows");
    }
    if (n < 1) throw ConfigError("softmax_xent needs at least one row");
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= k) {
            throw DataError("label " + std::to_string(labels[i]) + " out of range at row " +
                            std::to_string(i));
        }
    }

    auto probs = std::make_shared<Tensor<T>>(std::vector<int>{n, k});
    softmax_rows(logits->value, *probs);
    T loss = T(0);
    for (int i = 0; i < n; ++i) {
        const T* row = logits->value.data() + static_cast<std::int64_t>(i) * k;
        T m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
        T lse = T(0);
        for (int j = 0; j < k; ++j) lse += std::exp(row[j] - m);
        loss += -(row[labels[i]] - m - std::log(lse));
    }
    loss /= static_cast<T>(n);

    auto out = tape.output(Tensor<T>({1}, {loss}), logits->needs_grad, "softmax_xent");
    if (out->needs_grad) {
        auto labels_copy = std::make_shared<std::vector<int>>(labels);
        tape.record([logits, out, probs, labels_copy, n, k] {
            const T g = out->grad[0] / static_cast<T>(n);
            T* lg = logits->grad.data();
            const T* p = probs->data();
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < k; ++j) {
                    const std::int64_t o = static_cast<std::int64_t>(i) * k + j;
                    lg[o] += g * (p[o] - ((*labels_copy)[i] == j ? T(1) : T(0)));
                }
            }
        });
    }
    return out;
}

// HED-style class-balanced binary cross-entropy:
//   loss = -beta * sum_pos log sigmoid(z) - (1-beta) * sum_neg log(1-sigmoid(z))
// with beta = N_neg/N. An absent class drops its term and the remaining
// weight becomes 1.
template <typename T>
NodePtr<T> balanced_sigmoid_xent(Tape<T>& tape, const NodePtr<T>& logits,
                                 const std::vector<std::uint8_t>& labels) {
    const std::int64_t n = logits->value.size();
    if (static_cast<std::int64_t>(labels.size()) != n) {
        throw ConfigError("balanced_sigmoid_xent got " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(n) + " logits");
    }
    if (n < 1) throw ConfigError("balanced_sigmoid_xent needs at least one element");

    std::int64_t npos = 0;
    for (auto l : labels) npos += (l != 0);
    const std::int64_t nneg = n - npos;
    T wpos, wneg;
    if (npos == 0 || nneg == 0) {
        wpos = wneg = T(1);
    } else {
        wpos = static_cast<T>(nneg) / static_cast<T>(n);
        wneg = static_cast<T>(npos) / static_cast<T>(n);
    }

    const T* z = logits->value.data();
    T loss = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
        // -log sigmoid(z) = softplus(-z); -log(1-sigmoid(z)) = softplus(z)
        loss += labels[i] ? wpos * softplus(-z[i]) : wneg * softplus(z[i]);
    }

    auto out = tape.output(Tensor<T>({1}, {loss}), logits->needs_grad, "balanced_sigmoid_xent");
    if (out->needs_grad) {
        auto labels_copy = std::make_shared<std::vector<std::uint8_t>>(labels);
        tape.record([logits, out, labels_copy, wpos, wneg, n] {
            const T g = out->grad[0];
            const T* zv = logits->value.data();
            T* lg = logits->grad.data();
            for (std::int64_t i = 0; i < n; ++i) {
                const T s = sigmoid(zv[i]);
                lg[i] += g * ((*labels_copy)[i] ? wpos * (s - T(1)) : wneg * s);
            }
        });
    }
    return out;
}

// Mean over rows of 1 - <pred/||pred||, gt>. Ground-truth rows must be unit
// norm; predictions are normalized inside the op with an epsilon guard.
template <typename T>
NodePtr<T> cosine_normal_loss(Tape<T>& tape, const NodePtr<T>& pred, const Tensor<T>& gt) {
    if (pred->value.ndim() != 2 || pred->value.dim(1) != 3 || !pred->value.same_shape(gt)) {
        throw ConfigError("cosine_normal_loss expects pred[N,3] matching gt, got " +
                          pred->value.shape_string());
    }
    const int n = pred->value.dim(0);
    constexpr double kEps = 1e-12;
    for (int i = 0; i < n; ++i) {
        const T* g = gt.data() + 3 * static_cast<std::int64_t>(i);
        const double nrm = std::sqrt(double(g[0]) * g[0] + double(g[1]) * g[1] + double(g[2]) * g[2]);
        if (nrm < 1e-6) throw DataError("zero-norm ground-truth normal at row " + std::to_string(i));
    }

    const T* p = pred->value.data();
    T loss = T(0);
    for (int i = 0; i < n; ++i) {
        const T* pi = p + 3 * static_cast<std::int64_t>(i);
        const T* gi = gt.data() + 3 * static_cast<std::int64_t>(i);
        const T nrm = std::max(static_cast<T>(std::sqrt(pi[0] * pi[0] + pi[1] * pi[1] + pi[2] * pi[2])),
                               static_cast<T>(kEps));
        const T dot = (pi[0] * gi[0] + pi[1] * gi[1] + pi[2] * gi[2]) / nrm;
        loss += T(1) - dot;
    }
    loss /= static_cast<T>(n);

    auto out = tape.output(Tensor<T>({1}, {loss}), pred->needs_grad, "cosine_normal_loss");
    if (out->needs_grad) {
        auto gt_copy = std::make_shared<Tensor<T>>(gt);
        tape.record([pred, out, gt_copy, n] {
            const T g = out->grad[0] / static_cast<T>(n);
            const T* pv = pred->value.data();
            T* pg = pred->grad.data();
            for (int i = 0; i < n; ++i) {
                const T* pi = pv + 3 * static_cast<std::int64_t>(i);
                const T* gi = gt_copy->data() + 3 * static_cast<std::int64_t>(i);
                const T nrm = std::max(
                    static_cast<T>(std::sqrt(pi[0] * pi[0] + pi[1] * pi[1] + pi[2] * pi[2])),
                    static_cast<T>(kEps));
                const T inv = T(1) / nrm;
                const T dot = (pi[0] * gi[0] + pi[1] * gi[1] + pi[2] * gi[2]) * inv;
                // d(1 - <p/|p|, g>)/dp = -(g - phat * <phat,g>) / |p|
                for (int d = 0; d < 3; ++d) {
                    pg[3 * static_cast<std::int64_t>(i) + d] +=
                        g * (-(gi[d] - pi[d] * inv * dot) * inv);
                }
            }
        });
    }
    return out;
}

}  // namespace pixelnet
