#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pixelnet/matmul.hpp"
#include "pixelnet/rng.hpp"
#include "pixelnet/tape.hpp"

namespace pixelnet {

namespace detail {
// Test hook for the gradient-check mutation canary: scales the weight
// gradient of every linear op. Leave at 1.0 outside tests.
inline double linear_weight_grad_scale = 1.0;
}  // namespace detail

template <typename T>
inline void debug_check_finite(const Tensor<T>& t, const char* op) {
#ifndef NDEBUG
    if (!t.all_finite()) throw InternalError(std::string("non-finite values out of ") + op);
#else
    (void)t;
    (void)op;
#endif
}

template <typename T>
NodePtr<T> relu(Tape<T>& tape, const NodePtr<T>& x) {
    Tensor<T> y(x->value.shape());
    const T* xd = x->value.data();
    T* yd = y.data();
    for (std::int64_t i = 0; i < y.size(); ++i) yd[i] = xd[i] > T(0) ? xd[i] : T(0);
    auto out = tape.output(std::move(y), x->needs_grad, "relu");
    if (out->needs_grad) {
        tape.record([x, out] {
            const T* g = out->grad.data();
            const T* xv = x->value.data();
            T* xg = x->grad.data();
            // subgradient 0 at the kink
            for (std::int64_t i = 0; i < out->grad.size(); ++i) {
                if (xv[i] > T(0)) xg[i] += g[i];
            }
        });
    }
    return out;
}

// y[N,Dout] = x[N,Din] * W^T + b, W stored [Dout,Din].
template <typename T>
NodePtr<T> linear(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b) {
    if (x->value.ndim() != 2 || w->value.ndim() != 2) {
        throw ConfigError("linear expects rank-2 input and weight, got " +
                          x->value.shape_string() + " and " + w->value.shape_string());
    }
    const int n = x->value.dim(0), din = x->value.dim(1);
    const int dout = w->value.dim(0);
    if (w->value.dim(1) != din) {
        throw ConfigError("linear width mismatch: input " + std::to_string(din) + " vs weight " +
                          std::to_string(w->value.dim(1)));
    }
    if (b->value.size() != dout) {
        throw ConfigError("linear bias size " + std::to_string(b->value.size()) + " != " +
                          std::to_string(dout));
    }

    Tensor<T> wt({din, dout});
    transpose(dout, din, w->value.data(), wt.data());
    Tensor<T> y({n, dout});
    gemm_nn(n, dout, din, x->value.data(), wt.data(), y.data(), false);
    const T* bd = b->value.data();
    T* yd = y.data();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dout; ++j) yd[static_cast<std::int64_t>(i) * dout + j] += bd[j];
    }
    debug_check_finite(y, "linear");

    bool ng = x->needs_grad || w->needs_grad || b->needs_grad;
    auto out = tape.output(std::move(y), ng, "linear");
    if (out->needs_grad) {
        tape.record([x, w, b, out, n, din, dout] {
            const T* dy = out->grad.data();
            if (x->needs_grad) {
                gemm_nn(n, din, dout, dy, w->value.data(), x->grad.data(), true);
            }
            if (w->needs_grad) {
                const T scale = static_cast<T>(detail::linear_weight_grad_scale);
                if (scale == T(1)) {
                    gemm_tn(dout, din, n, dy, x->value.data(), w->grad.data(), true);
                } else {
                    Tensor<T> dw({dout, din});
                    gemm_tn(dout, din, n, dy, x->value.data(), dw.data(), false);
                    T* wg = w->grad.data();
                    for (std::int64_t i = 0; i < dw.size(); ++i) wg[i] += scale * dw[i];
                }
            }
            if (b->needs_grad) {
                T* bg = b->grad.data();
                for (int i = 0; i < n; ++i) {
                    const T* row = dy + static_cast<std::int64_t>(i) * dout;
                    for (int j = 0; j < dout; ++j) bg[j] += row[j];
                }
            }
        });
    }
    return out;
}

// Train mode zeroes each unit with probability `rate` and scales survivors by
// 1/(1-rate); eval mode is the identity (the same node is returned).
template <typename T>
NodePtr<T> dropout(Tape<T>& tape, const NodePtr<T>& x, double rate, bool train_mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
    }
    if (!train_mode || rate == 0.0) return x;

    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<std::uint8_t>>(x->value.size());
    Tensor<T> y(x->value.shape());
    const T* xd = x->value.data();
    T* yd = y.data();
    for (std::int64_t i = 0; i < y.size(); ++i) {
        bool keep = rng.uniform() >= rate;
        (*mask)[static_cast<std::size_t>(i)] = keep;
        yd[i] = keep ? xd[i] * keep_scale : T(0);
    }
    auto out = tape.output(std::move(y), x->needs_grad, "dropout");
    if (out->needs_grad) {
        tape.record([x, out, mask, keep_scale] {
            const T* g = out->grad.data();
            T* xg = x->grad.data();
            for (std::int64_t i = 0; i < out->grad.size(); ++i) {
                if ((*mask)[static_cast<std::size_t>(i)]) xg[i] += g[i] * keep_scale;
            }
        });
    }
    return out;
}

template <typename T>
NodePtr<T> add(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    if (!a->value.same_shape(b->value)) {
        throw ConfigError("add shape mismatch " + a->value.shape_string() + " vs " +
                          b->value.shape_string());
    }
    Tensor<T> y(a->value.shape());
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = a->value[i] + b->value[i];
    auto out = tape.output(std::move(y), a->needs_grad || b->needs_grad, "add");
    if (out->needs_grad) {
        tape.record([a, b, out] {
            for (std::int64_t i = 0; i < out->grad.size(); ++i) {
                if (a->needs_grad) a->grad[i] += out->grad[i];
                if (b->needs_grad) b->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

template <typename T>
NodePtr<T> sub(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    if (!a->value.same_shape(b->value)) {
        throw ConfigError("sub shape mismatch " + a->value.shape_string() + " vs " +
                          b->value.shape_string());
    }
    Tensor<T> y(a->value.shape());
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = a->value[i] - b->value[i];
    auto out = tape.output(std::move(y), a->needs_grad || b->needs_grad, "sub");
    if (out->needs_grad) {
        tape.record([a, b, out] {
            for (std::int64_t i = 0; i < out->grad.size(); ++i) {
                if (a->needs_grad) a->grad[i] += out->grad[i];
                if (b->needs_grad) b->grad[i] -= out->grad[i];
            }
        });
    }
    return out;
}

template <typename T>
NodePtr<T> mul(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    if (!a->value.same_shape(b->value)) {
        throw ConfigError("mul shape mismatch " + a->value.shape_string() + " vs " +
                          b->value.shape_string());
    }
    Tensor<T> y(a->value.shape());
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = a->value[i] * b->value[i];
    auto out = tape.output(std::move(y), a->needs_grad || b->needs_grad, "mul");
    if (out->needs_grad) {
        tape.record([a, b, out] {
            for (std::int64_t i = 0; i < out->grad.size(); ++i) {
                if (a->needs_grad) a->grad[i] += out->grad[i] * b->value[i];
                if (b->needs_grad) b->grad[i] += out->grad[i] * a->value[i];
            }
        });
    }
    return out;
}

template <typename T>
NodePtr<T> scale(Tape<T>& tape, const NodePtr<T>& a, T s) {
    Tensor<T> y(a->value.shape());
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = a->value[i] * s;
    auto out = tape.output(std::move(y), a->needs_grad, "scale");
    if (out->needs_grad) {
        tape.record([a, out, s] {
            for (std::int64_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * s;
        });
    }
    return out;
}

template <typename T>
NodePtr<T> reduce_sum(Tape<T>& tape, const NodePtr<T>& a) {
    T sum = T(0);
    for (std::int64_t i = 0; i < a->value.size(); ++i) sum += a->value[i];
    auto out = tape.output(Tensor<T>({1}, {sum}), a->needs_grad, "reduce_sum");
    if (out->needs_grad) {
        tape.record([a, out] {
            const T g = out->grad[0];
            for (std::int64_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
        });
    }
    return out;
}

template <typename T>
NodePtr<T> reshape(Tape<T>& tape, const NodePtr<T>& a, std::vector<int> shape) {
    Tensor<T> y(std::move(shape), a->value.vec());
    auto out = tape.output(std::move(y), a->needs_grad, "reshape");
    if (out->needs_grad) {
        tape.record([a, out] {
            for (std::int64_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
        });
    }
    return out;
}

template <typename T>
NodePtr<T> transpose2d(Tape<T>& tape, const NodePtr<T>& a) {
    if (a->value.ndim() != 2) throw ConfigError("transpose2d expects rank 2");
    const int r = a->value.dim(0), c = a->value.dim(1);
    Tensor<T> y({c, r});
    transpose(r, c, a->value.data(), y.data());
    auto out = tape.output(std::move(y), a->needs_grad, "transpose2d");
    if (out->needs_grad) {
        tape.record([a, out, r, c] {
            Tensor<T> back({r, c});
            transpose(c, r, out->grad.data(), back.data());
            for (std::int64_t i = 0; i < back.size(); ++i) a->grad[i] += back[i];
        });
    }
    return out;
}

// Stacks row matrices [N_i, D] into one [sum N_i, D] matrix.
template <typename T>
NodePtr<T> concat_rows(Tape<T>& tape, const std::vector<NodePtr<T>>& parts) {
    if (parts.empty()) throw ConfigError("concat_rows on empty list");
    const int d = parts[0]->value.dim(1);
    int total = 0;
    bool ng = false;
    for (const auto& p : parts) {
        if (p->value.ndim() != 2 || p->value.dim(1) != d) {
            throw ConfigError("concat_rows width mismatch");
        }
        total += p->value.dim(0);
        ng = ng || p->needs_grad;
    }
    Tensor<T> y({total, d});
    std::int64_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->value.data(), p->value.data() + p->value.size(), y.data() + off);
        off += p->value.size();
    }
    auto out = tape.output(std::move(y), ng, "concat_rows");
    if (out->needs_grad) {
        auto parts_copy = parts;
        tape.record([parts_copy, out] {
            std::int64_t off2 = 0;
            for (const auto& p : parts_copy) {
                if (p->needs_grad) {
                    const T* g = out->grad.data() + off2;
                    T* pg = p->grad.data();
                    for (std::int64_t i = 0; i < p->grad.size(); ++i) pg[i] += g[i];
                }
                off2 += p->value.size();
            }
        });
    }
    return out;
}

}  // namespace pixelnet
