#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pixelnet/matmul.hpp"
#include "pixelnet/ops.hpp"
#include "pixelnet/tape.hpp"

namespace pixelnet {

inline int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

// col[(ci*k+ky)*k+kx, oy*Wo+ox] = x[ci, oy*s+ky-pad, ox*s+kx-pad], zero outside.
template <typename T>
void im2col(const T* x, int ci, int h, int w, int k, int stride, int pad, int ho, int wo, T* col) {
    const std::int64_t plane = static_cast<std::int64_t>(ho) * wo;
    parallel_for(static_cast<std::int64_t>(ci) * k * k, [&](std::int64_t r0, std::int64_t r1) {
        for (std::int64_t r = r0; r < r1; ++r) {
            const int c = static_cast<int>(r / (k * k));
            const int ky = static_cast<int>((r / k) % k);
            const int kx = static_cast<int>(r % k);
            const T* src = x + static_cast<std::int64_t>(c) * h * w;
            T* dst = col + r * plane;
            for (int oy = 0; oy < ho; ++oy) {
                const int iy = oy * stride + ky - pad;
                T* row = dst + static_cast<std::int64_t>(oy) * wo;
                if (iy < 0 || iy >= h) {
                    for (int ox = 0; ox < wo; ++ox) row[ox] = T(0);
                    continue;
                }
                const T* srow = src + static_cast<std::int64_t>(iy) * w;
                for (int ox = 0; ox < wo; ++ox) {
                    const int ix = ox * stride + kx - pad;
                    row[ox] = (ix >= 0 && ix < w) ? srow[ix] : T(0);
                }
            }
        }
    });
}

template <typename T>
void col2im_accum(const T* col, int ci, int h, int w, int k, int stride, int pad, int ho, int wo,
                  T* dx) {
    const std::int64_t plane = static_cast<std::int64_t>(ho) * wo;
    // Rows of one input channel touch only that channel's plane, so channels
    // can be scattered independently.
    parallel_for(ci, [&](std::int64_t c0, std::int64_t c1) {
        for (std::int64_t c = c0; c < c1; ++c) {
            T* dst = dx + c * h * w;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const T* src = col + ((c * k + ky) * k + kx) * plane;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const T* srow = src + static_cast<std::int64_t>(oy) * wo;
                        T* drow = dst + static_cast<std::int64_t>(iy) * w;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride + kx - pad;
                            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
                        }
                    }
                }
            }
        }
    });
}

}  // namespace detail

// Cross-correlation of x[Cin,H,W] with w[Cout,Cin,k,k] plus bias, as an
// im2col + GEMM pair. The column matrix is cached for the backward GEMMs.
template <typename T>
NodePtr<T> conv2d(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b,
                  int stride, int pad) {
    const Tensor<T>& xv = x->value;
    const Tensor<T>& wv = w->value;
    if (xv.ndim() != 3 || wv.ndim() != 4) {
        throw ConfigError("conv2d expects x[C,H,W] and w[Co,Ci,k,k], got " + xv.shape_string() +
                          " and " + wv.shape_string());
    }
    const int ci = xv.dim(0), h = xv.dim(1), wid = xv.dim(2);
    const int co = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != ci) {
        throw ConfigError("conv2d channel mismatch: input has " + std::to_string(ci) +
                          ", weight expects " + std::to_string(wv.dim(1)));
    }
    if (wv.dim(3) != k) throw ConfigError("conv2d kernel must be square, got " + wv.shape_string());
    if (k % 2 == 0) throw ConfigError("conv2d kernel extent must be odd, got " + std::to_string(k));
    if (pad < 0 || stride < 1) throw ConfigError("conv2d needs pad >= 0 and stride >= 1");
    if (b->value.size() != co) {
        throw ConfigError("conv2d bias size " + std::to_string(b->value.size()) + " != " +
                          std::to_string(co));
    }
    const int ho = conv_out_extent(h, k, stride, pad);
    const int wo = conv_out_extent(wid, k, stride, pad);
    if (ho < 1 || wo < 1) {
        throw ConfigError("conv2d output would be empty for input " + xv.shape_string());
    }

    const int kk = ci * k * k;
    const std::int64_t plane = static_cast<std::int64_t>(ho) * wo;
    const bool unit = (k == 1 && stride == 1 && pad == 0);

    // 1x1 stride-1 convolutions skip im2col: the input already is the column
    // matrix.
    std::shared_ptr<Tensor<T>> col;
    const T* col_data = xv.data();
    if (!unit) {
        col = std::make_shared<Tensor<T>>(std::vector<int>{kk, static_cast<int>(plane)});
        detail::im2col(xv.data(), ci, h, wid, k, stride, pad, ho, wo, col->data());
        col_data = col->data();
    }

    Tensor<T> y({co, ho, wo});
    gemm_nn(co, static_cast<int>(plane), kk, wv.data(), col_data, y.data(), false);
    for (int oc = 0; oc < co; ++oc) {
        const T bias = b->value[oc];
        T* row = y.data() + oc * plane;
        for (std::int64_t i = 0; i < plane; ++i) row[i] += bias;
    }
    debug_check_finite(y, "conv2d");

    bool ng = x->needs_grad || w->needs_grad || b->needs_grad;
    auto out = tape.output(std::move(y), ng, "conv2d");
    if (out->needs_grad) {
        tape.record([x, w, b, out, col, ci, h, wid, k, stride, pad, ho, wo, co, kk, plane, unit] {
            const T* dy = out->grad.data();
            const T* col_d = unit ? x->value.data() : col->data();
            if (b->needs_grad) {
                T* bg = b->grad.data();
                for (int oc = 0; oc < co; ++oc) {
                    const T* row = dy + oc * plane;
                    T s = T(0);
                    for (std::int64_t i = 0; i < plane; ++i) s += row[i];
                    bg[oc] += s;
                }
            }
            if (w->needs_grad) {
                // dW[co,kk] = dY[co,plane] * col^T
                gemm_nt(co, kk, static_cast<int>(plane), dy, col_d, w->grad.data(), true);
            }
            if (x->needs_grad) {
                if (unit) {
                    gemm_tn(kk, static_cast<int>(plane), co, w->value.data(), dy, x->grad.data(),
                            true);
                } else {
                    Tensor<T> dcol({kk, static_cast<int>(plane)});
                    gemm_tn(kk, static_cast<int>(plane), co, w->value.data(), dy, dcol.data(),
                            false);
                    detail::col2im_accum(dcol.data(), ci, h, wid, k, stride, pad, ho, wo,
                                         x->grad.data());
                }
            }
        });
    }
    return out;
}

// 2x2 max pooling with stride 2. Odd extents are edge-replicated to even
// before pooling; ties pick the first candidate in row-major scan order.
template <typename T>
NodePtr<T> maxpool2(Tape<T>& tape, const NodePtr<T>& x) {
    const Tensor<T>& xv = x->value;
    if (xv.ndim() != 3) throw ConfigError("maxpool2 expects x[C,H,W]");
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    const int ho = (h + 1) / 2, wo = (w + 1) / 2;

    Tensor<T> y({c, ho, wo});
    auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(c) * ho * wo);
    const T* xd = xv.data();
    T* yd = y.data();
    for (int ch = 0; ch < c; ++ch) {
        const T* plane = xd + static_cast<std::int64_t>(ch) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                T best{};
                std::int32_t best_idx = -1;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const int iy = std::min(2 * oy + dy, h - 1);
                        const int ix = std::min(2 * ox + dx, w - 1);
                        const T v = plane[static_cast<std::int64_t>(iy) * w + ix];
                        if (best_idx < 0 || v > best) {
                            best = v;
                            best_idx = static_cast<std::int32_t>(iy * w + ix);
                        }
                    }
                }
                const std::int64_t o = (static_cast<std::int64_t>(ch) * ho + oy) * wo + ox;
                yd[o] = best;
                (*argmax)[static_cast<std::size_t>(o)] = best_idx;
            }
        }
    }
    auto out = tape.output(std::move(y), x->needs_grad, "maxpool2");
    if (out->needs_grad) {
        tape.record([x, out, argmax, c, h, w, ho, wo] {
            const T* g = out->grad.data();
            T* xg = x->grad.data();
            const std::int64_t per = static_cast<std::int64_t>(ho) * wo;
            for (int ch = 0; ch < c; ++ch) {
                T* gp = xg + static_cast<std::int64_t>(ch) * h * w;
                const T* go = g + ch * per;
                const std::int32_t* am = argmax->data() + ch * per;
                for (std::int64_t i = 0; i < per; ++i) gp[am[i]] += go[i];
            }
        });
    }
    return out;
}

}  // namespace pixelnet
