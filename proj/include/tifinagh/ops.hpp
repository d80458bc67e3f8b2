#pragma once

// Forward and backward kernels for the layers the recognizer uses, plus the
// optimizer step and a central finite-difference oracle. Every function is a
// pure function of its arguments and reduces in a fixed sequential order, so
// identical inputs give bit-identical outputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tifinagh/errors.hpp"
#include "tifinagh/tensor.hpp"

namespace tifinagh {

namespace detail {

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op, const char* what) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                             ", got shape " + shape_string(t.shape()));
    }
}

inline void require_axis(std::size_t got, std::size_t want, const char* op, const char* axis,
                         const char* what) {
    if (got != want) {
        throw DimensionError(std::string(op) + ": mismatch on axis " + axis + " of " + what + " (got " +
                             std::to_string(got) + ", expected " + std::to_string(want) + ")");
    }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " does not match " +
                             shape_string(b.shape()));
    }
}

// Output extent of a strided, padded window sweep along one axis.
inline std::size_t conv_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                               const char* axis) {
    const std::size_t padded = in + 2 * pad;
    if (padded < kernel) {
        throw DimensionError(std::string("conv2d: kernel larger than padded input on axis ") + axis);
    }
    if ((padded - kernel) % stride != 0) {
        throw DimensionError(std::string("conv2d: stride does not divide the sweep on axis ") + axis);
    }
    return (padded - kernel) / stride + 1;
}

// Range [lo, hi) of output positions whose tap (offset - pad + o*stride)
// lands inside [0, in).
inline void valid_range(std::size_t in, std::size_t out, std::size_t offset, std::size_t stride,
                        std::size_t pad, std::size_t& lo, std::size_t& hi) {
    lo = offset >= pad ? 0 : (pad - offset + stride - 1) / stride;
    // largest o with o*stride + offset - pad <= in - 1
    const std::size_t limit = in - 1 + pad;
    if (limit < offset) {
        lo = hi = 0;
        return;
    }
    hi = std::min(out, (limit - offset) / stride + 1);
    if (lo > hi) lo = hi;
}

}  // namespace detail

struct Conv2dParams {
    std::size_t stride = 1;
    std::size_t pad = 0;
};

/// Batched 2-D cross-correlation (no kernel flip).
///
/// input [N,C,H,W], weights [K,C,kh,kw], bias [K] -> [N,K,H',W'] with
/// H' = (H + 2*pad - kh) / stride + 1.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                         Conv2dParams p = {}) {
    constexpr const char* op = "conv2d_forward";
    detail::require_rank(input, 4, op, "input");
    detail::require_rank(weights, 4, op, "weights");
    detail::require_rank(bias, 1, op, "bias");
    if (p.stride == 0) throw ConfigError("conv2d_forward: stride must be positive");
    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t K = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
    detail::require_axis(weights.dim(1), C, op, "C", "weights");
    detail::require_axis(bias.dim(0), K, op, "K", "bias");
    const std::size_t OH = detail::conv_extent(H, kh, p.stride, p.pad, "H");
    const std::size_t OW = detail::conv_extent(W, kw, p.stride, p.pad, "W");

    Tensor<T> out({N, K, OH, OW});
    const T* in = input.raw();
    const T* wt = weights.raw();
    T* o = out.raw();
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t k = 0; k < K; ++k) {
            T* oplane = o + (n * K + k) * OH * OW;
            std::fill(oplane, oplane + OH * OW, bias[k]);
            for (std::size_t c = 0; c < C; ++c) {
                const T* iplane = in + (n * C + c) * H * W;
                const T* kern = wt + (k * C + c) * kh * kw;
                for (std::size_t ki = 0; ki < kh; ++ki) {
                    std::size_t oh_lo, oh_hi;
                    detail::valid_range(H, OH, ki, p.stride, p.pad, oh_lo, oh_hi);
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        std::size_t ow_lo, ow_hi;
                        detail::valid_range(W, OW, kj, p.stride, p.pad, ow_lo, ow_hi);
                        const T w = kern[ki * kw + kj];
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const T* irow = iplane + (oh * p.stride + ki - p.pad) * W;
                            T* orow = oplane + oh * OW;
                            if (p.stride == 1) {
                                const T* src = irow + kj - p.pad;
                                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += w * src[ow];
                            } else {
                                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                                    orow[ow] += w * irow[ow * p.stride + kj - p.pad];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
struct ConvGrads {
    Tensor<T> d_input;  // empty when not requested
    Tensor<T> d_weights;
    Tensor<T> d_bias;
};

/// Exact gradients of conv2d_forward with respect to input, weights and bias.
/// Pass want_input_grad = false for a first layer whose input gradient is
/// never consumed.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& d_output,
                             Conv2dParams p = {}, bool want_input_grad = true) {
    constexpr const char* op = "conv2d_backward";
    detail::require_rank(input, 4, op, "input");
    detail::require_rank(weights, 4, op, "weights");
    detail::require_rank(d_output, 4, op, "dOutput");
    if (p.stride == 0) throw ConfigError("conv2d_backward: stride must be positive");
    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t K = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
    detail::require_axis(weights.dim(1), C, op, "C", "weights");
    const std::size_t OH = detail::conv_extent(H, kh, p.stride, p.pad, "H");
    const std::size_t OW = detail::conv_extent(W, kw, p.stride, p.pad, "W");
    detail::require_axis(d_output.dim(0), N, op, "N", "dOutput");
    detail::require_axis(d_output.dim(1), K, op, "K", "dOutput");
    detail::require_axis(d_output.dim(2), OH, op, "H", "dOutput");
    detail::require_axis(d_output.dim(3), OW, op, "W", "dOutput");

    ConvGrads<T> g{want_input_grad ? Tensor<T>(input.shape()) : Tensor<T>{}, Tensor<T>(weights.shape()),
                   Tensor<T>({K})};
    const T* in = input.raw();
    const T* wt = weights.raw();
    const T* go = d_output.raw();
    T* gi = want_input_grad ? g.d_input.raw() : nullptr;
    T* gw = g.d_weights.raw();
    T* gb = g.d_bias.raw();

    for (std::size_t k = 0; k < K; ++k) {
        T acc = 0;
        for (std::size_t n = 0; n < N; ++n) {
            const T* plane = go + (n * K + k) * OH * OW;
            for (std::size_t i = 0; i < OH * OW; ++i) acc += plane[i];
        }
        gb[k] = acc;
    }

    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t k = 0; k < K; ++k) {
            const T* gplane = go + (n * K + k) * OH * OW;
            for (std::size_t c = 0; c < C; ++c) {
                const T* iplane = in + (n * C + c) * H * W;
                T* giplane = gi ? gi + (n * C + c) * H * W : nullptr;
                const T* kern = wt + (k * C + c) * kh * kw;
                T* gkern = gw + (k * C + c) * kh * kw;
                for (std::size_t ki = 0; ki < kh; ++ki) {
                    std::size_t oh_lo, oh_hi;
                    detail::valid_range(H, OH, ki, p.stride, p.pad, oh_lo, oh_hi);
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        std::size_t ow_lo, ow_hi;
                        detail::valid_range(W, OW, kj, p.stride, p.pad, ow_lo, ow_hi);
                        const T w = kern[ki * kw + kj];
                        T acc = 0;
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const std::size_t ih = oh * p.stride + ki - p.pad;
                            const T* irow = iplane + ih * W;
                            const T* grow = gplane + oh * OW;
                            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                                acc += grow[ow] * irow[ow * p.stride + kj - p.pad];
                            }
                            if (giplane) {
                                T* girow = giplane + ih * W;
                                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                                    girow[ow * p.stride + kj - p.pad] += w * grow[ow];
                                }
                            }
                        }
                        gkern[ki * kw + kj] += acc;
                    }
                }
            }
        }
    }
    return g;
}

/// Argmax bookkeeping from a 2x2 max-pool, consumed by maxpool2_backward.
struct PoolIndices {
    Shape input_shape;
    std::vector<std::size_t> argmax;  // linear index into the input, one per output element
};

template <typename T>
struct PoolResult {
    Tensor<T> output;
    PoolIndices indices;
};

/// 2x2 max-pool with stride 2 over [N,C,H,W]. Ties go to the first
/// element of the window in row-major order.
template <typename T>
PoolResult<T> maxpool2_forward(const Tensor<T>& input) {
    detail::require_rank(input, 4, "maxpool2_forward", "input");
    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (H % 2 != 0) throw DimensionError("maxpool2_forward: odd extent on axis H (" + std::to_string(H) + ")");
    if (W % 2 != 0) throw DimensionError("maxpool2_forward: odd extent on axis W (" + std::to_string(W) + ")");
    const std::size_t OH = H / 2, OW = W / 2;
    PoolResult<T> r{Tensor<T>({N, C, OH, OW}), PoolIndices{input.shape(), {}}};
    r.indices.argmax.resize(r.output.size());
    const T* in = input.raw();
    T* out = r.output.raw();
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < N * C; ++plane) {
        const std::size_t base = plane * H * W;
        for (std::size_t oh = 0; oh < OH; ++oh) {
            for (std::size_t ow = 0; ow < OW; ++ow, ++o) {
                const std::size_t top = base + 2 * oh * W + 2 * ow;
                const std::size_t cand[4] = {top, top + 1, top + W, top + W + 1};
                std::size_t best = cand[0];
                for (int i = 1; i < 4; ++i) {
                    if (in[cand[i]] > in[best]) best = cand[i];
                }
                out[o] = in[best];
                r.indices.argmax[o] = best;
            }
        }
    }
    return r;
}

/// Routes each output gradient to the input position that won its window.
template <typename T>
Tensor<T> maxpool2_backward(const PoolIndices& indices, const Tensor<T>& d_output) {
    constexpr const char* op = "maxpool2_backward";
    detail::require_rank(d_output, 4, op, "dOutput");
    if (indices.input_shape.size() != 4) throw InternalError("maxpool2_backward: indices carry no 4-d input shape");
    const Shape& is = indices.input_shape;
    detail::require_axis(d_output.dim(0), is[0], op, "N", "dOutput");
    detail::require_axis(d_output.dim(1), is[1], op, "C", "dOutput");
    detail::require_axis(d_output.dim(2), is[2] / 2, op, "H", "dOutput");
    detail::require_axis(d_output.dim(3), is[3] / 2, op, "W", "dOutput");
    if (indices.argmax.size() != d_output.size()) {
        throw InternalError("maxpool2_backward: " + std::to_string(indices.argmax.size()) +
                            " indices for " + std::to_string(d_output.size()) + " gradients");
    }
    Tensor<T> d_input(is);
    for (std::size_t i = 0; i < d_output.size(); ++i) {
        const std::size_t target = indices.argmax[i];
        if (target >= d_input.size()) {
            throw InternalError("maxpool2_backward: argmax " + std::to_string(target) + " out of range");
        }
        d_input[target] += d_output[i];
    }
    return d_input;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

/// Subgradient at exactly zero is taken as 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& d_y) {
    detail::require_same_shape(x, d_y, "relu_backward");
    Tensor<T> dx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? d_y[i] : T(0);
    return dx;
}

/// input [N,F], weights [O,F], bias [O] -> input * weights^T + bias.
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
    constexpr const char* op = "dense_forward";
    detail::require_rank(input, 2, op, "input");
    detail::require_rank(weights, 2, op, "weights");
    detail::require_rank(bias, 1, op, "bias");
    const std::size_t N = input.dim(0), F = input.dim(1), O = weights.dim(0);
    detail::require_axis(weights.dim(1), F, op, "F", "weights");
    detail::require_axis(bias.dim(0), O, op, "O", "bias");
    Tensor<T> out({N, O});
    for (std::size_t n = 0; n < N; ++n) {
        const T* x = input.raw() + n * F;
        for (std::size_t o = 0; o < O; ++o) {
            const T* w = weights.raw() + o * F;
            T acc = 0;
            for (std::size_t f = 0; f < F; ++f) acc += x[f] * w[f];
            out[n * O + o] = acc + bias[o];
        }
    }
    return out;
}

template <typename T>
struct DenseGrads {
    Tensor<T> d_input;
    Tensor<T> d_weights;
    Tensor<T> d_bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& d_output) {
    constexpr const char* op = "dense_backward";
    detail::require_rank(input, 2, op, "input");
    detail::require_rank(weights, 2, op, "weights");
    detail::require_rank(d_output, 2, op, "dOutput");
    const std::size_t N = input.dim(0), F = input.dim(1), O = weights.dim(0);
    detail::require_axis(weights.dim(1), F, op, "F", "weights");
    detail::require_axis(d_output.dim(0), N, op, "N", "dOutput");
    detail::require_axis(d_output.dim(1), O, op, "O", "dOutput");
    DenseGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), Tensor<T>({O})};
    for (std::size_t n = 0; n < N; ++n) {
        const T* x = input.raw() + n * F;
        const T* go = d_output.raw() + n * O;
        T* gx = g.d_input.raw() + n * F;
        for (std::size_t o = 0; o < O; ++o) {
            const T d = go[o];
            const T* w = weights.raw() + o * F;
            T* gw = g.d_weights.raw() + o * F;
            for (std::size_t f = 0; f < F; ++f) {
                gx[f] += d * w[f];
                gw[f] += d * x[f];
            }
            g.d_bias[o] += d;
        }
    }
    return g;
}

/// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
    detail::require_rank(logits, 2, "softmax", "logits");
    const std::size_t N = logits.dim(0), C = logits.dim(1);
    Tensor<T> p(logits.shape());
    for (std::size_t n = 0; n < N; ++n) {
        const T* z = logits.raw() + n * C;
        T* q = p.raw() + n * C;
        const T m = *std::max_element(z, z + C);
        T sum = 0;
        for (std::size_t c = 0; c < C; ++c) sum += (q[c] = std::exp(z[c] - m));
        for (std::size_t c = 0; c < C; ++c) q[c] /= sum;
    }
    return p;
}

/// -log softmax(row)[label] for a single row of logits.
template <typename T>
T row_cross_entropy(std::span<const T> row, std::size_t label) {
    const T m = *std::max_element(row.begin(), row.end());
    T sum = 0;
    for (T z : row) sum += std::exp(z - m);
    return std::log(sum) - (row[label] - m);
}

template <typename T>
struct LossResult {
    T loss;             // mean over the batch
    Tensor<T> d_logits; // (softmax - onehot) / N
};

template <typename T>
void check_labels(std::span<const int> labels, std::size_t n_rows, std::size_t n_classes) {
    if (labels.size() != n_rows) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(n_rows) + " rows (axis N)");
    }
    for (std::size_t n = 0; n < labels.size(); ++n) {
        if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= n_classes) {
            throw LabelError("label " + std::to_string(labels[n]) + " in row " + std::to_string(n) +
                             " is outside [0, " + std::to_string(n_classes) + ")");
        }
    }
}

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
    detail::require_rank(logits, 2, "softmax_cross_entropy", "logits");
    const std::size_t N = logits.dim(0), C = logits.dim(1);
    check_labels<T>(labels, N, C);
    LossResult<T> r{T(0), softmax_rows(logits)};
    const T inv_n = T(1) / static_cast<T>(N);
    T total = 0;
    for (std::size_t n = 0; n < N; ++n) {
        const auto label = static_cast<std::size_t>(labels[n]);
        total += row_cross_entropy<T>(logits.data().subspan(n * C, C), label);
        T* g = r.d_logits.raw() + n * C;
        g[label] -= T(1);
        for (std::size_t c = 0; c < C; ++c) g[c] *= inv_n;
    }
    r.loss = total * inv_n;
    return r;
}

/// Classical momentum: v <- momentum*v - lr*g; p <- p + v.
template <typename T>
class OptimState {
public:
    OptimState(T lr, T momentum) : lr_(lr), momentum_(momentum) {
        if (!(lr > T(0))) throw ConfigError("learning rate must be positive");
        if (!(momentum >= T(0) && momentum < T(1))) throw ConfigError("momentum must lie in [0, 1)");
    }

    T lr() const noexcept { return lr_; }
    T momentum() const noexcept { return momentum_; }
    const std::vector<Tensor<T>>& velocity() const noexcept { return velocity_; }

    void step(std::span<GradPair<T>> params) {
        if (velocity_.empty()) {
            velocity_.reserve(params.size());
            for (const auto& p : params) velocity_.emplace_back(p.value.shape());
        }
        if (velocity_.size() != params.size()) {
            throw DimensionError("sgd_momentum_step: optimizer tracks " + std::to_string(velocity_.size()) +
                                 " parameters, got " + std::to_string(params.size()));
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            auto& v = velocity_[i];
            if (p.grad.shape() != p.value.shape() || v.shape() != p.value.shape()) {
                throw DimensionError("sgd_momentum_step: shape mismatch for parameter '" + p.name + "'");
            }
            for (std::size_t j = 0; j < v.size(); ++j) {
                v[j] = momentum_ * v[j] - lr_ * p.grad[j];
                p.value[j] += v[j];
            }
        }
    }

private:
    T lr_;
    T momentum_;
    std::vector<Tensor<T>> velocity_;
};

template <typename T>
void sgd_momentum_step(std::span<GradPair<T>> params, OptimState<T>& state) {
    state.step(params);
}

/// Central-difference gradient of a scalar function:
/// (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps) for every element i.
template <typename T, typename F>
Tensor<T> finite_difference_grad(F&& f, const Tensor<T>& x, T eps) {
    Tensor<T> g(x.shape());
    Tensor<T> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T orig = probe[i];
        probe[i] = orig + eps;
        const T up = static_cast<T>(f(std::as_const(probe)));
        probe[i] = orig - eps;
        const T down = static_cast<T>(f(std::as_const(probe)));
        probe[i] = orig;
        g[i] = (up - down) / (T(2) * eps);
    }
    return g;
}

}  // namespace tifinagh
