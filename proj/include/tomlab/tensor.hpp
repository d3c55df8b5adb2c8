#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tomlab/common.hpp"

namespace tomlab {

// Dense row-major tensor. float is the training dtype; double is used by the
// gradient-check paths. Gradients are allocated lazily on first accumulation.
template <typename T>
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<T> data;
    bool requires_grad = false;
    std::vector<T> grad;  // empty until first accumulation; same length as data afterwards

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
    bool is_scalar() const { return numel() == 1; }
    int rank() const { return static_cast<int>(shape.size()); }
    std::int64_t rows() const { return rank() == 2 ? shape[0] : 1; }
    std::int64_t cols() const { return rank() == 0 ? 1 : shape.back(); }

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
    }
    T& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * cols() + j)]; }
    T at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * cols() + j)]; }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

namespace detail {

// dst[n x m] = src[m x n]^T
template <typename T>
void transpose_into(const T* src, T* dst, std::int64_t m, std::int64_t n) {
    constexpr std::int64_t kBlock = 32;
    for (std::int64_t ib = 0; ib < m; ib += kBlock)
        for (std::int64_t jb = 0; jb < n; jb += kBlock) {
            const std::int64_t ie = std::min(ib + kBlock, m);
            const std::int64_t je = std::min(jb + kBlock, n);
            for (std::int64_t i = ib; i < ie; ++i)
                for (std::int64_t j = jb; j < je; ++j) dst[j * m + i] = src[i * n + j];
        }
}

// c[m x n] += a[m x k] * b[k x n]
template <typename T>
void mm_nn(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        const T* ai = a + i * k;
        for (std::int64_t t = 0; t < k; ++t) {
            const T av = ai[t];
            if (av == T(0)) continue;
            const T* bt = b + t * n;
            for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

// c[m x n] += a[m x k] * b[n x k]^T
// Eight fixed-order partial sums per dot product so the reduction vectorizes
// while staying bit-reproducible run to run.
template <typename T>
void mm_nt(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        T* ci = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            const T* bj = b + j * k;
            T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
            const std::int64_t k8 = k - (k % 8);
            for (std::int64_t t = 0; t < k8; t += 8)
                for (int u = 0; u < 8; ++u) acc[u] += ai[t + u] * bj[t + u];
            T tail = T(0);
            for (std::int64_t t = k8; t < k; ++t) tail += ai[t] * bj[t];
            ci[j] += ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                     ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
        }
    }
}

// c[m x n] += a[k x m]^T * b[k x n]
template <typename T>
void mm_tn(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        for (std::int64_t t = 0; t < k; ++t) {
            const T av = a[t * m + i];
            if (av == T(0)) continue;
            const T* bt = b + t * n;
            for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

}  // namespace detail

// Dynamic tape. Operations record themselves in execution order, which is a
// valid topological order by construction; backward() replays in reverse.
// Node output gradients are cleared at the start of every backward pass so
// leaf gradients accumulate across repeated calls while intermediate values
// stay correct.
template <typename T>
class Tape {
public:
    bool enabled = true;

    static TensorPtr<T> leaf(std::vector<std::int64_t> shape, std::vector<T> data,
                             bool requires_grad = false) {
        auto t = std::make_shared<Tensor<T>>();
        t->shape = std::move(shape);
        t->data = std::move(data);
        t->requires_grad = requires_grad;
        std::int64_t n = 1;
        for (auto d : t->shape) n *= d;
        if (n != static_cast<std::int64_t>(t->data.size()))
            throw ShapeError("leaf: data length " + std::to_string(t->data.size()) +
                             " does not match shape " + shape_str(t->shape));
        return t;
    }

    static TensorPtr<T> zeros(std::vector<std::int64_t> shape, bool requires_grad = false) {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return leaf(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), T(0)), requires_grad);
    }

    static TensorPtr<T> full(std::vector<std::int64_t> shape, T v, bool requires_grad = false) {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return leaf(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), v), requires_grad);
    }

    static TensorPtr<T> scalar(T v, bool requires_grad = false) {
        return leaf({1}, {v}, requires_grad);
    }

    std::size_t size() const { return nodes_.size(); }

    // -- operations ---------------------------------------------------------

    TensorPtr<T> matmul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
        if (a->rank() != 2 || b->rank() != 2 || a->shape[1] != b->shape[0])
            throw ShapeError("matmul: incompatible shapes " + shape_str(a->shape) + " x " +
                             shape_str(b->shape));
        const std::int64_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
        auto out = zeros({m, n});
        detail::mm_nn(a->data.data(), b->data.data(), out->data.data(), m, k, n);
        if (track(out, {a, b})) {
            record(out, [a, b, out, m, k, n] {
                // Both grads go through mm_nn on an explicitly transposed
                // operand; the transpose is cheap next to the multiply.
                if (a->requires_grad) {
                    a->ensure_grad();
                    std::vector<T> bt(static_cast<std::size_t>(n * k));
                    detail::transpose_into(b->data.data(), bt.data(), k, n);
                    detail::mm_nn(out->grad.data(), bt.data(), a->grad.data(), m, n, k);
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    std::vector<T> at(static_cast<std::size_t>(m * k));
                    detail::transpose_into(a->data.data(), at.data(), m, k);
                    detail::mm_nn(at.data(), out->grad.data(), b->grad.data(), k, m, n);
                }
            });
        }
        return out;
    }

    TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
        if (a->shape != b->shape)
            throw ShapeError("add: shape mismatch " + shape_str(a->shape) + " vs " +
                             shape_str(b->shape));
        auto out = zeros(a->shape);
        const std::size_t n = a->data.size();
        for (std::size_t i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
        if (track(out, {a, b})) {
            record(out, [a, b, out] {
                const std::size_t n2 = out->grad.size();
                if (a->requires_grad) {
                    a->ensure_grad();
                    for (std::size_t i = 0; i < n2; ++i) a->grad[i] += out->grad[i];
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    for (std::size_t i = 0; i < n2; ++i) b->grad[i] += out->grad[i];
                }
            });
        }
        return out;
    }

    // [m,n] + [n] broadcast over rows.
    TensorPtr<T> add_rowvec(const TensorPtr<T>& a, const TensorPtr<T>& v) {
        if (a->rank() != 2 || v->rank() != 1 || a->shape[1] != v->shape[0])
            throw ShapeError("add_rowvec: shapes " + shape_str(a->shape) + " + " +
                             shape_str(v->shape));
        const std::int64_t m = a->shape[0], n = a->shape[1];
        auto out = zeros(a->shape);
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                out->at(i, j) = a->at(i, j) + v->data[static_cast<std::size_t>(j)];
        if (track(out, {a, v})) {
            record(out, [a, v, out, m, n] {
                if (a->requires_grad) {
                    a->ensure_grad();
                    for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
                }
                if (v->requires_grad) {
                    v->ensure_grad();
                    for (std::int64_t i = 0; i < m; ++i)
                        for (std::int64_t j = 0; j < n; ++j)
                            v->grad[static_cast<std::size_t>(j)] +=
                                out->grad[static_cast<std::size_t>(i * n + j)];
                }
            });
        }
        return out;
    }

    TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
        if (a->shape != b->shape)
            throw ShapeError("mul: shape mismatch " + shape_str(a->shape) + " vs " +
                             shape_str(b->shape));
        auto out = zeros(a->shape);
        for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
        if (track(out, {a, b})) {
            record(out, [a, b, out] {
                if (a->requires_grad) {
                    a->ensure_grad();
                    for (std::size_t i = 0; i < out->grad.size(); ++i)
                        a->grad[i] += out->grad[i] * b->data[i];
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    for (std::size_t i = 0; i < out->grad.size(); ++i)
                        b->grad[i] += out->grad[i] * a->data[i];
                }
            });
        }
        return out;
    }

    TensorPtr<T> scale(const TensorPtr<T>& a, T c) {
        auto out = zeros(a->shape);
        for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] * c;
        if (track(out, {a})) {
            record(out, [a, out, c] {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * c;
            });
        }
        return out;
    }

    TensorPtr<T> relu(const TensorPtr<T>& a) {
        auto out = zeros(a->shape);
        for (std::size_t i = 0; i < a->data.size(); ++i)
            out->data[i] = a->data[i] > T(0) ? a->data[i] : T(0);
        if (track(out, {a})) {
            record(out, [a, out] {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i)
                    if (a->data[i] > T(0)) a->grad[i] += out->grad[i];
            });
        }
        return out;
    }

    // GELU, tanh approximation (GPT-2 style).
    TensorPtr<T> gelu(const TensorPtr<T>& a) {
        auto out = zeros(a->shape);
        const T c0 = T(0.7978845608028654);  // sqrt(2/pi)
        const T c1 = T(0.044715);
        for (std::size_t i = 0; i < a->data.size(); ++i) {
            const T x = a->data[i];
            out->data[i] = T(0.5) * x * (T(1) + std::tanh(c0 * (x + c1 * x * x * x)));
        }
        if (track(out, {a})) {
            record(out, [a, out, c0, c1] {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) {
                    const T x = a->data[i];
                    const T u = c0 * (x + c1 * x * x * x);
                    const T th = std::tanh(u);
                    const T sech2 = T(1) - th * th;
                    const T du = c0 * (T(1) + T(3) * c1 * x * x);
                    const T dydx = T(0.5) * (T(1) + th) + T(0.5) * x * sech2 * du;
                    a->grad[i] += out->grad[i] * dydx;
                }
            });
        }
        return out;
    }

    // Softmax along `axis` with max-subtraction. Supports rank 1 and 2.
    TensorPtr<T> softmax(const TensorPtr<T>& a, int axis) {
        if (a->rank() != 1 && a->rank() != 2)
            throw ShapeError("softmax: rank must be 1 or 2, got shape " + shape_str(a->shape));
        if (axis < 0 || axis >= a->rank())
            throw RangeError("softmax: axis " + std::to_string(axis) + " out of range");
        const bool row_major_axis = (a->rank() == 1) || (axis == 1);
        const std::int64_t groups = row_major_axis ? (a->rank() == 1 ? 1 : a->shape[0])
                                                   : a->shape[1];
        const std::int64_t n = row_major_axis ? a->shape[axis] : a->shape[0];
        const std::int64_t stride = row_major_axis ? 1 : a->shape[1];
        const std::int64_t group_step = row_major_axis ? n : 1;

        auto out = zeros(a->shape);
        for (std::int64_t g = 0; g < groups; ++g) {
            const T* src = a->data.data() + g * group_step;
            T* dst = out->data.data() + g * group_step;
            T mx = src[0];
            for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, src[i * stride]);
            T sum = T(0);
            for (std::int64_t i = 0; i < n; ++i) {
                const T e = std::exp(src[i * stride] - mx);
                dst[i * stride] = e;
                sum += e;
            }
            for (std::int64_t i = 0; i < n; ++i) dst[i * stride] /= sum;
        }
        if (track(out, {a})) {
            record(out, [a, out, groups, n, stride, group_step] {
                a->ensure_grad();
                for (std::int64_t g = 0; g < groups; ++g) {
                    const T* y = out->data.data() + g * group_step;
                    const T* dy = out->grad.data() + g * group_step;
                    T dot = T(0);
                    for (std::int64_t i = 0; i < n; ++i) dot += dy[i * stride] * y[i * stride];
                    T* dx = a->grad.data() + g * group_step;
                    for (std::int64_t i = 0; i < n; ++i)
                        dx[i * stride] += (dy[i * stride] - dot) * y[i * stride];
                }
            });
        }
        return out;
    }

    // Row i of [n,n] scores is normalized over columns 0..i; the rest are
    // exactly zero. This keeps causal attention exact rather than relying on
    // additive -inf masks.
    TensorPtr<T> causal_softmax(const TensorPtr<T>& scores) {
        if (scores->rank() != 2 || scores->shape[0] != scores->shape[1])
            throw ShapeError("causal_softmax: expected square matrix, got " +
                             shape_str(scores->shape));
        const std::int64_t n = scores->shape[0];
        auto out = zeros(scores->shape);
        for (std::int64_t i = 0; i < n; ++i) {
            const T* src = scores->data.data() + i * n;
            T* dst = out->data.data() + i * n;
            T mx = src[0];
            for (std::int64_t j = 1; j <= i; ++j) mx = std::max(mx, src[j]);
            T sum = T(0);
            for (std::int64_t j = 0; j <= i; ++j) {
                const T e = std::exp(src[j] - mx);
                dst[j] = e;
                sum += e;
            }
            for (std::int64_t j = 0; j <= i; ++j) dst[j] /= sum;
        }
        if (track(out, {scores})) {
            record(out, [scores, out, n] {
                scores->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i) {
                    const T* y = out->data.data() + i * n;
                    const T* dy = out->grad.data() + i * n;
                    T dot = T(0);
                    for (std::int64_t j = 0; j <= i; ++j) dot += dy[j] * y[j];
                    T* dx = scores->grad.data() + i * n;
                    for (std::int64_t j = 0; j <= i; ++j) dx[j] += (dy[j] - dot) * y[j];
                }
            });
        }
        return out;
    }

    // Per-row layer norm over the last dimension of a rank-1/2 tensor.
    TensorPtr<T> layer_norm(const TensorPtr<T>& x, const TensorPtr<T>& gamma,
                            const TensorPtr<T>& beta, T eps) {
        if (eps <= T(0)) throw ContractError("layer_norm: eps must be > 0");
        const std::int64_t d = x->cols();
        if (gamma->rank() != 1 || beta->rank() != 1 || gamma->shape[0] != d || beta->shape[0] != d)
            throw ShapeError("layer_norm: gamma/beta must be [d], d=" + std::to_string(d));
        const std::int64_t m = x->numel() / d;
        auto out = zeros(x->shape);
        std::vector<T> means(static_cast<std::size_t>(m)), inv_stds(static_cast<std::size_t>(m));
        for (std::int64_t i = 0; i < m; ++i) {
            const T* row = x->data.data() + i * d;
            T mean = T(0);
            for (std::int64_t j = 0; j < d; ++j) mean += row[j];
            mean /= T(d);
            T var = T(0);
            for (std::int64_t j = 0; j < d; ++j) {
                const T c = row[j] - mean;
                var += c * c;
            }
            var /= T(d);
            const T inv = T(1) / std::sqrt(var + eps);
            means[static_cast<std::size_t>(i)] = mean;
            inv_stds[static_cast<std::size_t>(i)] = inv;
            T* dst = out->data.data() + i * d;
            for (std::int64_t j = 0; j < d; ++j)
                dst[j] = gamma->data[static_cast<std::size_t>(j)] * (row[j] - mean) * inv +
                         beta->data[static_cast<std::size_t>(j)];
        }
        if (track(out, {x, gamma, beta})) {
            record(out, [x, gamma, beta, out, m, d, means, inv_stds] {
                for (std::int64_t i = 0; i < m; ++i) {
                    const T* row = x->data.data() + i * d;
                    const T* dy = out->grad.data() + i * d;
                    const T mean = means[static_cast<std::size_t>(i)];
                    const T inv = inv_stds[static_cast<std::size_t>(i)];
                    if (gamma->requires_grad) {
                        gamma->ensure_grad();
                        for (std::int64_t j = 0; j < d; ++j)
                            gamma->grad[static_cast<std::size_t>(j)] +=
                                dy[j] * (row[j] - mean) * inv;
                    }
                    if (beta->requires_grad) {
                        beta->ensure_grad();
                        for (std::int64_t j = 0; j < d; ++j)
                            beta->grad[static_cast<std::size_t>(j)] += dy[j];
                    }
                    if (x->requires_grad) {
                        x->ensure_grad();
                        // dxhat_j = dy_j * gamma_j; dx follows the standard LN backward.
                        T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
                        for (std::int64_t j = 0; j < d; ++j) {
                            const T xhat = (row[j] - mean) * inv;
                            const T dxhat = dy[j] * gamma->data[static_cast<std::size_t>(j)];
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * xhat;
                        }
                        T* dx = x->grad.data() + i * d;
                        for (std::int64_t j = 0; j < d; ++j) {
                            const T xhat = (row[j] - mean) * inv;
                            const T dxhat = dy[j] * gamma->data[static_cast<std::size_t>(j)];
                            dx[j] += inv * (dxhat - sum_dxhat / T(d) - xhat * sum_dxhat_xhat / T(d));
                        }
                    }
                }
            });
        }
        return out;
    }

    // Mean negative log-softmax over unmasked (mask[i] == true) positions.
    TensorPtr<T> cross_entropy(const TensorPtr<T>& logits, const std::vector<int>& targets,
                               const std::vector<bool>& mask) {
        if (logits->rank() != 2)
            throw ShapeError("cross_entropy: logits must be [n, V], got " +
                             shape_str(logits->shape));
        const std::int64_t n = logits->shape[0], V = logits->shape[1];
        if (static_cast<std::int64_t>(targets.size()) != n ||
            static_cast<std::int64_t>(mask.size()) != n)
            throw ShapeError("cross_entropy: targets/mask length must equal rows");
        std::int64_t count = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            if (!mask[static_cast<std::size_t>(i)]) continue;
            ++count;
            const int t = targets[static_cast<std::size_t>(i)];
            if (t < 0 || t >= V)
                throw IndexError("cross_entropy: target index " + std::to_string(t) +
                                 " out of range at position " + std::to_string(i));
        }
        if (count == 0) throw ContractError("cross_entropy: no unmasked positions");
        // Per-row: lse(row) - row[target].
        std::vector<T> probs(logits->data.size(), T(0));
        T loss = T(0);
        for (std::int64_t i = 0; i < n; ++i) {
            if (!mask[static_cast<std::size_t>(i)]) continue;
            const T* row = logits->data.data() + i * V;
            T mx = row[0];
            for (std::int64_t j = 1; j < V; ++j) mx = std::max(mx, row[j]);
            T sum = T(0);
            for (std::int64_t j = 0; j < V; ++j) {
                const T e = std::exp(row[j] - mx);
                probs[static_cast<std::size_t>(i * V + j)] = e;
                sum += e;
            }
            for (std::int64_t j = 0; j < V; ++j)
                probs[static_cast<std::size_t>(i * V + j)] /= sum;
            const int t = targets[static_cast<std::size_t>(i)];
            loss += std::log(sum) + mx - row[t];
        }
        loss /= T(count);
        auto out = scalar(loss);
        if (track(out, {logits})) {
            record(out, [logits, out, targets, mask, probs = std::move(probs), n, V, count] {
                logits->ensure_grad();
                const T g = out->grad[0] / T(count);
                for (std::int64_t i = 0; i < n; ++i) {
                    if (!mask[static_cast<std::size_t>(i)]) continue;
                    const int t = targets[static_cast<std::size_t>(i)];
                    T* dst = logits->grad.data() + i * V;
                    const T* p = probs.data() + i * V;
                    for (std::int64_t j = 0; j < V; ++j) dst[j] += g * p[j];
                    dst[t] -= g;
                }
            });
        }
        return out;
    }

    TensorPtr<T> transpose(const TensorPtr<T>& a) {
        if (a->rank() != 2) throw ShapeError("transpose: expected rank 2");
        const std::int64_t m = a->shape[0], n = a->shape[1];
        auto out = zeros({n, m});
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) out->at(j, i) = a->at(i, j);
        if (track(out, {a})) {
            record(out, [a, out, m, n] {
                a->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t j = 0; j < n; ++j)
                        a->grad[static_cast<std::size_t>(i * n + j)] +=
                            out->grad[static_cast<std::size_t>(j * m + i)];
            });
        }
        return out;
    }

    TensorPtr<T> slice_cols(const TensorPtr<T>& a, std::int64_t start, std::int64_t len) {
        if (a->rank() != 2) throw ShapeError("slice_cols: expected rank 2");
        const std::int64_t m = a->shape[0], n = a->shape[1];
        if (start < 0 || len <= 0 || start + len > n)
            throw RangeError("slice_cols: [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") out of " + std::to_string(n));
        auto out = zeros({m, len});
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < len; ++j) out->at(i, j) = a->at(i, start + j);
        if (track(out, {a})) {
            record(out, [a, out, m, n, start, len] {
                a->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t j = 0; j < len; ++j)
                        a->grad[static_cast<std::size_t>(i * n + start + j)] +=
                            out->grad[static_cast<std::size_t>(i * len + j)];
            });
        }
        return out;
    }

    TensorPtr<T> slice_rows(const TensorPtr<T>& a, std::int64_t start, std::int64_t len) {
        if (a->rank() != 2) throw ShapeError("slice_rows: expected rank 2");
        const std::int64_t m = a->shape[0], n = a->shape[1];
        if (start < 0 || len <= 0 || start + len > m)
            throw RangeError("slice_rows: [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") out of " + std::to_string(m));
        auto out = zeros({len, n});
        std::copy(a->data.begin() + start * n, a->data.begin() + (start + len) * n,
                  out->data.begin());
        if (track(out, {a})) {
            record(out, [a, out, n, start, len] {
                a->ensure_grad();
                for (std::int64_t i = 0; i < len * n; ++i)
                    a->grad[static_cast<std::size_t>(start * n + i)] +=
                        out->grad[static_cast<std::size_t>(i)];
            });
        }
        return out;
    }

    TensorPtr<T> concat_cols(const std::vector<TensorPtr<T>>& parts) {
        if (parts.empty()) throw ShapeError("concat_cols: empty input");
        const std::int64_t m = parts[0]->shape[0];
        std::int64_t total = 0;
        for (const auto& p : parts) {
            if (p->rank() != 2 || p->shape[0] != m)
                throw ShapeError("concat_cols: row mismatch");
            total += p->shape[1];
        }
        auto out = zeros({m, total});
        std::int64_t off = 0;
        for (const auto& p : parts) {
            const std::int64_t w = p->shape[1];
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < w; ++j) out->at(i, off + j) = p->at(i, j);
            off += w;
        }
        bool any = false;
        for (const auto& p : parts) any = any || p->requires_grad;
        if (enabled && any) {
            out->requires_grad = true;
            record(out, [parts, out, m, total] {
                std::int64_t off2 = 0;
                for (const auto& p : parts) {
                    const std::int64_t w = p->shape[1];
                    if (p->requires_grad) {
                        p->ensure_grad();
                        for (std::int64_t i = 0; i < m; ++i)
                            for (std::int64_t j = 0; j < w; ++j)
                                p->grad[static_cast<std::size_t>(i * w + j)] +=
                                    out->grad[static_cast<std::size_t>(i * total + off2 + j)];
                    }
                    off2 += w;
                }
            });
        }
        return out;
    }

    // Gather rows of `weight` by token id.
    TensorPtr<T> embedding(const TensorPtr<T>& weight, const std::vector<int>& ids) {
        if (weight->rank() != 2) throw ShapeError("embedding: weight must be [V, d]");
        const std::int64_t V = weight->shape[0], d = weight->shape[1];
        const std::int64_t n = static_cast<std::int64_t>(ids.size());
        for (int id : ids)
            if (id < 0 || id >= V)
                throw IndexError("embedding: id " + std::to_string(id) + " out of vocab " +
                                 std::to_string(V));
        auto out = zeros({n, d});
        for (std::int64_t i = 0; i < n; ++i)
            std::copy(weight->data.begin() + ids[static_cast<std::size_t>(i)] * d,
                      weight->data.begin() + (ids[static_cast<std::size_t>(i)] + 1) * d,
                      out->data.begin() + i * d);
        if (track(out, {weight})) {
            record(out, [weight, out, ids, n, d] {
                weight->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i) {
                    T* dst = weight->grad.data() + ids[static_cast<std::size_t>(i)] * d;
                    const T* src = out->grad.data() + i * d;
                    for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
                }
            });
        }
        return out;
    }

    // Copy of `base` with rows [start, start + rows->shape[0]) replaced by `rows`.
    // Gradient flows to `rows` inside the span and to `base` outside it.
    TensorPtr<T> row_substitute(const TensorPtr<T>& base, const TensorPtr<T>& rows,
                                std::int64_t start) {
        if (base->rank() != 2 || rows->rank() != 2 || base->shape[1] != rows->shape[1])
            throw ShapeError("row_substitute: column mismatch " + shape_str(base->shape) +
                             " vs " + shape_str(rows->shape));
        const std::int64_t m = base->shape[0], d = base->shape[1], k = rows->shape[0];
        if (k <= 0 || start < 0 || start + k > m)
            throw PatchError("row_substitute: span [" + std::to_string(start) + ", " +
                             std::to_string(start + k) + ") out of " + std::to_string(m) +
                             " rows");
        auto out = zeros(base->shape);
        out->data = base->data;
        std::copy(rows->data.begin(), rows->data.end(), out->data.begin() + start * d);
        if (track(out, {base, rows})) {
            record(out, [base, rows, out, m, d, k, start] {
                if (base->requires_grad) {
                    base->ensure_grad();
                    for (std::int64_t i = 0; i < m; ++i) {
                        if (i >= start && i < start + k) continue;
                        for (std::int64_t j = 0; j < d; ++j)
                            base->grad[static_cast<std::size_t>(i * d + j)] +=
                                out->grad[static_cast<std::size_t>(i * d + j)];
                    }
                }
                if (rows->requires_grad) {
                    rows->ensure_grad();
                    for (std::int64_t i = 0; i < k * d; ++i)
                        rows->grad[static_cast<std::size_t>(i)] +=
                            out->grad[static_cast<std::size_t>(start * d + i)];
                }
            });
        }
        return out;
    }

    TensorPtr<T> sum(const TensorPtr<T>& a) {
        T s = T(0);
        for (const T v : a->data) s += v;
        auto out = scalar(s);
        if (track(out, {a})) {
            record(out, [a, out] {
                a->ensure_grad();
                const T g = out->grad[0];
                for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
            });
        }
        return out;
    }

    TensorPtr<T> mean(const TensorPtr<T>& a) {
        const T inv = T(1) / T(a->numel());
        T s = T(0);
        for (const T v : a->data) s += v;
        auto out = scalar(s * inv);
        if (track(out, {a})) {
            record(out, [a, out, inv] {
                a->ensure_grad();
                const T g = out->grad[0] * inv;
                for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
            });
        }
        return out;
    }

    // -- reverse pass -------------------------------------------------------

    // Accumulates d(root)/d(leaf) into every requires_grad leaf. Node output
    // gradients are reset first, so calling backward twice doubles leaf
    // gradients without corrupting intermediate ones.
    void backward(const TensorPtr<T>& root) {
        if (!root->is_scalar())
            throw ContractError("backward: root must be scalar, got shape " +
                                shape_str(root->shape));
        for (auto& node : nodes_) node.output->grad.assign(node.output->data.size(), T(0));
        root->ensure_grad();
        root->grad[0] += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            bool live = false;
            for (const T g : it->output->grad)
                if (g != T(0)) { live = true; break; }
            if (live) it->backprop();
        }
    }

private:
    struct Node {
        TensorPtr<T> output;
        std::function<void()> backprop;
    };
    std::vector<Node> nodes_;

    bool track(const TensorPtr<T>& out, std::initializer_list<TensorPtr<T>> inputs) {
        if (!enabled) return false;
        bool any = false;
        for (const auto& t : inputs) any = any || t->requires_grad;
        if (any) out->requires_grad = true;
        return any;
    }

    void record(const TensorPtr<T>& out, std::function<void()> fn) {
        nodes_.push_back(Node{out, std::move(fn)});
    }
};

// Max over coordinates of |analytic - central difference| / max(1, |central|),
// evaluated in the tensor dtype (use double for the real checks).
template <typename T>
double grad_check(const std::function<TensorPtr<T>(Tape<T>&, const TensorPtr<T>&)>& f,
                  const std::vector<T>& x0, std::vector<std::int64_t> shape, T h) {
    auto x = Tape<T>::leaf(shape, x0, true);
    Tape<T> tape;
    auto y = f(tape, x);
    tape.backward(y);
    std::vector<T> analytic = x->grad.empty() ? std::vector<T>(x0.size(), T(0)) : x->grad;

    double worst = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        auto eval = [&](T v) {
            auto xi = Tape<T>::leaf(shape, x0, false);
            xi->data[i] = v;
            Tape<T> t2;
            t2.enabled = false;
            return f(t2, xi)->data[0];
        };
        const double fp = static_cast<double>(eval(x0[i] + h));
        const double fm = static_cast<double>(eval(x0[i] - h));
        const double central = (fp - fm) / (2.0 * static_cast<double>(h));
        const double err = std::abs(static_cast<double>(analytic[i]) - central) /
                           std::max(1.0, std::abs(central));
        worst = std::max(worst, err);
    }
    return worst;
}

using TapeF = Tape<float>;
using TapeD = Tape<double>;
using TensorF = TensorPtr<float>;
using TensorD = TensorPtr<double>;

}  // namespace tomlab
