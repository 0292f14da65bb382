#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mtil/grad/fastmath.hpp"
#include "mtil/grad/kernels.hpp"
#include "mtil/grad/tensor.hpp"

namespace mtil::grad {

namespace detail {

template <typename S>
void accumulate(Tensor<S> t, const std::vector<S>& delta) {
    if (!t.requires_grad()) return;
    t.node()->ensure_grad();
    auto& g = t.node()->grad;
    for (size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

inline void check_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b)
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

// dfdx receives (x_i, y_i) so saturating functions can reuse the output.
template <typename S, typename F, typename DF>
Tensor<S> unary_op(const Tensor<S>& x, F f, DF dfdx) {
    std::vector<S> y(x.data().size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = f(x.data()[i]);
    auto out_shape = x.shape();
    return make_op<S>(
        std::move(out_shape), std::move(y), {x},
        [x, dfdx](TensorNode<S>& node) {
            if (!x.requires_grad()) return;
            x.node()->ensure_grad();
            auto& gx = x.node()->grad;
            for (size_t i = 0; i < gx.size(); ++i)
                gx[i] += node.grad[i] * dfdx(x.data()[i], node.value[i]);
        });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
    return unary_op(
        x,
        [](S v) {
            if (v >= S(0)) return S(1) / (S(1) + std::exp(-v));
            const S e = std::exp(v);
            return e / (S(1) + e);
        },
        [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Tensor<S> tanh(const Tensor<S>& x) {
    return unary_op(x, [](S v) { return std::tanh(v); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    return unary_op(
        x, [&](S v) { return S(0.5) * v * (S(1) + S(std::erf(double(v) * inv_sqrt2))); },
        [&](S v, S) {
            const double cdf = 0.5 * (1.0 + std::erf(double(v) * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * double(v) * double(v));
            return S(cdf + double(v) * pdf);
        });
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "add");
    std::vector<S> y(a.data().size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
    return make_op<S>(a.shape(), std::move(y), {a, b}, [a, b](TensorNode<S>& node) {
        detail::accumulate(a, node.grad);
        detail::accumulate(b, node.grad);
    });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "sub");
    std::vector<S> y(a.data().size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] - b.data()[i];
    return make_op<S>(a.shape(), std::move(y), {a, b}, [a, b](TensorNode<S>& node) {
        detail::accumulate(a, node.grad);
        if (b.requires_grad()) {
            b.node()->ensure_grad();
            auto& gb = b.node()->grad;
            for (size_t i = 0; i < gb.size(); ++i) gb[i] -= node.grad[i];
        }
    });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "mul");
    std::vector<S> y(a.data().size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * b.data()[i];
    return make_op<S>(a.shape(), std::move(y), {a, b}, [a, b](TensorNode<S>& node) {
        if (a.requires_grad()) {
            a.node()->ensure_grad();
            auto& ga = a.node()->grad;
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += node.grad[i] * b.data()[i];
        }
        if (b.requires_grad()) {
            b.node()->ensure_grad();
            auto& gb = b.node()->grad;
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += node.grad[i] * a.data()[i];
        }
    });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S c) {
    return unary_op(x, [c](S v) { return v * c; }, [c](S, S) { return c; });
}

template <typename S>
Tensor<S> add_scalar(const Tensor<S>& x, S c) {
    return unary_op(x, [c](S v) { return v + c; }, [](S, S) { return S(1); });
}

// y = x * s where s is a one-element tensor; both sides differentiable.
template <typename S>
Tensor<S> scale_by(const Tensor<S>& x, const Tensor<S>& s) {
    if (s.size() != 1) throw ShapeError("scale_by: scale must be one-element");
    const S sv = s.data()[0];
    std::vector<S> y(x.data().size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] * sv;
    return make_op<S>(x.shape(), std::move(y), {x, s}, [x, s](TensorNode<S>& node) {
        const S sv = s.data()[0];
        if (x.requires_grad()) {
            x.node()->ensure_grad();
            auto& gx = x.node()->grad;
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += node.grad[i] * sv;
        }
        if (s.requires_grad()) {
            s.node()->ensure_grad();
            S acc = S(0);
            for (size_t i = 0; i < node.grad.size(); ++i) acc += node.grad[i] * x.data()[i];
            s.node()->grad[0] += acc;
        }
    });
}

// x [..., n] + b [n], broadcast over leading dims.
template <typename S>
Tensor<S> add_bias(const Tensor<S>& x, const Tensor<S>& b) {
    if (b.rank() != 1 || x.rank() < 1 || x.shape().back() != b.dim(0))
        throw ShapeError("add_bias: incompatible shapes " + shape_str(x.shape()) + " + " +
                         shape_str(b.shape()));
    const int64_t n = b.dim(0);
    const int64_t rows = x.size() / n;
    std::vector<S> y(x.data().size());
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < n; ++j) y[r * n + j] = x.data()[r * n + j] + b.data()[j];
    return make_op<S>(x.shape(), std::move(y), {x, b}, [x, b, rows, n](TensorNode<S>& node) {
        detail::accumulate(x, node.grad);
        if (b.requires_grad()) {
            b.node()->ensure_grad();
            auto& gb = b.node()->grad;
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t j = 0; j < n; ++j) gb[j] += node.grad[r * n + j];
        }
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
    S acc = S(0);
    for (S v : x.data()) acc += v;
    return make_op<S>({1}, {acc}, {x}, [x](TensorNode<S>& node) {
        if (!x.requires_grad()) return;
        x.node()->ensure_grad();
        auto& gx = x.node()->grad;
        const S g = node.grad[0];
        for (auto& v : gx) v += g;
    });
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x) {
    const S inv = S(1) / S(x.size());
    return scale(sum(x), inv);
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
    if (shape_numel(shape) != x.size())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
    std::vector<S> y = x.data();
    return make_op<S>(std::move(shape), std::move(y), {x},
                      [x](TensorNode<S>& node) { detail::accumulate(x, node.grad); });
}

namespace detail {

inline std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
    return st;
}

// dst[i] = index into src for output linear index i under `perm`.
inline std::vector<int64_t> permute_index_map(const Shape& in_shape,
                                              const std::vector<int>& perm) {
    Shape out_shape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = in_shape[perm[i]];
    const auto in_st = row_major_strides(in_shape);
    const auto out_st = row_major_strides(out_shape);
    const int64_t n = shape_numel(in_shape);
    std::vector<int64_t> map(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        int64_t rem = i, src = 0;
        for (size_t d = 0; d < perm.size(); ++d) {
            const int64_t coord = rem / out_st[d];
            rem -= coord * out_st[d];
            src += coord * in_st[perm[d]];
        }
        map[i] = src;
    }
    return map;
}

}  // namespace detail

template <typename S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<int>& perm) {
    if (perm.size() != static_cast<size_t>(x.rank()))
        throw ShapeError("permute: axes count mismatch");
    Shape out_shape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = x.dim(perm[i]);
    const auto map = detail::permute_index_map(x.shape(), perm);
    std::vector<S> y(x.data().size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = x.data()[map[i]];
    return make_op<S>(std::move(out_shape), std::move(y), {x}, [x, map](TensorNode<S>& node) {
        if (!x.requires_grad()) return;
        x.node()->ensure_grad();
        auto& gx = x.node()->grad;
        for (size_t i = 0; i < map.size(); ++i) gx[map[i]] += node.grad[i];
    });
}

template <typename S>
Tensor<S> slice_rows(const Tensor<S>& x, int64_t start, int64_t len) {
    if (x.rank() != 2) throw ShapeError("slice_rows: expected 2-D input");
    const int64_t rows = x.dim(0), cols = x.dim(1);
    if (start < 0 || len < 0 || start + len > rows)
        throw ShapeError("slice_rows: range out of bounds");
    std::vector<S> y(static_cast<size_t>(len * cols));
    std::copy_n(x.data().begin() + start * cols, len * cols, y.begin());
    return make_op<S>({len, cols}, std::move(y), {x}, [x, start, cols](TensorNode<S>& node) {
        if (!x.requires_grad()) return;
        x.node()->ensure_grad();
        auto& gx = x.node()->grad;
        for (size_t i = 0; i < node.grad.size(); ++i)
            gx[static_cast<size_t>(start * cols) + i] += node.grad[i];
    });
}

// ---------------------------------------------------------------------------
// matrix products
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<S> y(static_cast<size_t>(m * n));
    mm_nn(a.data().data(), b.data().data(), y.data(), m, k, n, false);
    return make_op<S>({m, n}, std::move(y), {a, b}, [a, b, m, k, n](TensorNode<S>& node) {
        if (a.requires_grad()) {
            a.node()->ensure_grad();
            mm_nt(node.grad.data(), b.data().data(), a.node()->grad.data(), m, n, k, true);
        }
        if (b.requires_grad()) {
            b.node()->ensure_grad();
            mm_tn(a.data().data(), node.grad.data(), b.node()->grad.data(), k, m, n, true);
        }
    });
}

// a [m,k] * b^T with b stored [n,k]; used for weight-tied output projections.
template <typename S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    std::vector<S> y(static_cast<size_t>(m * n));
    mm_nt(a.data().data(), b.data().data(), y.data(), m, k, n, false);
    return make_op<S>({m, n}, std::move(y), {a, b}, [a, b, m, k, n](TensorNode<S>& node) {
        if (a.requires_grad()) {
            a.node()->ensure_grad();
            mm_nn(node.grad.data(), b.data().data(), a.node()->grad.data(), m, n, k, true);
        }
        if (b.requires_grad()) {
            b.node()->ensure_grad();
            mm_tn(node.grad.data(), a.data().data(), b.node()->grad.data(), n, m, k, true);
        }
    });
}

// Batched a [B,m,k] * b [B,k,n] (or b [B,n,k] when trans_b). Unlike the
// 2-D kernels the parallel loop here runs over (batch, row) pairs, since
// attention batches are many small matrices.
template <typename S>
Tensor<S> bmm(const Tensor<S>& a, const Tensor<S>& b, bool trans_b = false) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0))
        throw ShapeError("bmm: expected matching 3-D batches");
    const int64_t bs = a.dim(0), m = a.dim(1), k = a.dim(2);
    const int64_t n = trans_b ? b.dim(1) : b.dim(2);
    const int64_t bk = trans_b ? b.dim(2) : b.dim(1);
    if (bk != k)
        throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    std::vector<S> y(static_cast<size_t>(bs * m * n));
    {
        const S* ap = a.data().data();
        const S* bp = b.data().data();
        S* yp = y.data();
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < bs * m; ++r) {
            const int64_t batch = r / m;
            const S* arow = ap + r * k;
            const S* bmat = bp + batch * k * n;
            S* yrow = yp + r * n;
            if (trans_b) {
                for (int64_t j = 0; j < n; ++j) {
                    S acc = S(0);
                    for (int64_t l = 0; l < k; ++l) acc += arow[l] * bmat[j * k + l];
                    yrow[j] = acc;
                }
            } else {
                for (int64_t j = 0; j < n; ++j) yrow[j] = S(0);
                for (int64_t l = 0; l < k; ++l) {
                    const S av = arow[l];
                    if (av == S(0)) continue;
                    const S* brow = bmat + l * n;
                    for (int64_t j = 0; j < n; ++j) yrow[j] += av * brow[j];
                }
            }
        }
    }
    return make_op<S>(
        {bs, m, n}, std::move(y), {a, b}, [a, b, bs, m, k, n, trans_b](TensorNode<S>& node) {
            const S* gp = node.grad.data();
            const S* ap = a.data().data();
            const S* bp = b.data().data();
            if (a.requires_grad()) {
                a.node()->ensure_grad();
                S* gap = a.node()->grad.data();
                // dA rows are independent: dA[b,i,:] += dC[b,i,:] * B(^T)
#pragma omp parallel for schedule(static)
                for (int64_t r = 0; r < bs * m; ++r) {
                    const int64_t batch = r / m;
                    const S* grow = gp + r * n;
                    const S* bmat = bp + batch * k * n;
                    S* garow = gap + r * k;
                    if (trans_b) {
                        for (int64_t j = 0; j < n; ++j) {
                            const S gv = grow[j];
                            if (gv == S(0)) continue;
                            const S* brow = bmat + j * k;
                            for (int64_t l = 0; l < k; ++l) garow[l] += gv * brow[l];
                        }
                    } else {
                        for (int64_t l = 0; l < k; ++l) {
                            S acc = S(0);
                            const S* brow = bmat + l * n;
                            for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                            garow[l] += acc;
                        }
                    }
                }
            }
            if (b.requires_grad()) {
                b.node()->ensure_grad();
                S* gbp = b.node()->grad.data();
                const int64_t brows = trans_b ? n : k;
                const int64_t bcols = trans_b ? k : n;
                // dB rows are independent per (batch, row of B)
#pragma omp parallel for schedule(static)
                for (int64_t r = 0; r < bs * brows; ++r) {
                    const int64_t batch = r / brows;
                    const int64_t j = r % brows;
                    const S* amat = ap + batch * m * k;
                    const S* gmat = gp + batch * m * n;
                    S* gbrow = gbp + r * bcols;
                    if (trans_b) {
                        // dB[b,j,:] += sum_i dC[b,i,j] * A[b,i,:]
                        for (int64_t i = 0; i < m; ++i) {
                            const S gv = gmat[i * n + j];
                            if (gv == S(0)) continue;
                            const S* arow = amat + i * k;
                            for (int64_t l = 0; l < k; ++l) gbrow[l] += gv * arow[l];
                        }
                    } else {
                        // dB[b,l,:] += sum_i A[b,i,l] * dC[b,i,:]
                        for (int64_t i = 0; i < m; ++i) {
                            const S av = amat[i * k + j];
                            if (av == S(0)) continue;
                            const S* grow = gmat + i * n;
                            for (int64_t l = 0; l < bcols; ++l) gbrow[l] += av * grow[l];
                        }
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// softmax / normalization
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> softmax(const Tensor<S>& x, int axis = -1) {
    const int r = x.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("softmax: axis out of range");
    const auto& sh = x.shape();
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= sh[i];
    for (int i = axis + 1; i < r; ++i) inner *= sh[i];
    const int64_t len = sh[axis];

    std::vector<S> y(x.data().size());
    const S* xp = x.data().data();
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * len * inner + in;
            S mx = xp[base];
            for (int64_t i = 1; i < len; ++i) mx = std::max(mx, xp[base + i * inner]);
            S denom = S(0);
            for (int64_t i = 0; i < len; ++i) {
                const S e = std::exp(xp[base + i * inner] - mx);
                y[base + i * inner] = e;
                denom += e;
            }
            const S inv = S(1) / denom;
            for (int64_t i = 0; i < len; ++i) y[base + i * inner] *= inv;
        }
    }
    return make_op<S>(x.shape(), std::move(y), {x},
                      [x, outer, inner, len](TensorNode<S>& node) {
                          if (!x.requires_grad()) return;
                          x.node()->ensure_grad();
                          auto& gx = x.node()->grad;
                          const auto& yv = node.value;
                          const auto& gy = node.grad;
                          for (int64_t o = 0; o < outer; ++o) {
                              for (int64_t in = 0; in < inner; ++in) {
                                  const int64_t base = o * len * inner + in;
                                  S dot = S(0);
                                  for (int64_t i = 0; i < len; ++i)
                                      dot += gy[base + i * inner] * yv[base + i * inner];
                                  for (int64_t i = 0; i < len; ++i)
                                      gx[base + i * inner] += yv[base + i * inner] *
                                                              (gy[base + i * inner] - dot);
                              }
                          }
                      });
}

// Normalizes the last axis to zero mean / unit variance, then applies
// gain and bias.
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                     S eps = S(1e-5)) {
    if (x.rank() < 1 || gain.rank() != 1 || bias.rank() != 1)
        throw ShapeError("layer_norm: bad ranks");
    const int64_t n = x.shape().back();
    if (gain.dim(0) != n || bias.dim(0) != n)
        throw ShapeError("layer_norm: gain/bias must match last axis");
    const int64_t rows = x.size() / n;

    std::vector<S> y(x.data().size());
    std::vector<S> xhat(x.data().size());
    std::vector<S> inv_std(static_cast<size_t>(rows));
    const S* xp = x.data().data();
    for (int64_t r = 0; r < rows; ++r) {
        const S* row = xp + r * n;
        S mu = S(0);
        for (int64_t j = 0; j < n; ++j) mu += row[j];
        mu /= S(n);
        S var = S(0);
        for (int64_t j = 0; j < n; ++j) {
            const S d = row[j] - mu;
            var += d * d;
        }
        var /= S(n);
        const S is = S(1) / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int64_t j = 0; j < n; ++j) {
            const S xh = (row[j] - mu) * is;
            xhat[r * n + j] = xh;
            y[r * n + j] = xh * gain.data()[j] + bias.data()[j];
        }
    }
    return make_op<S>(
        x.shape(), std::move(y), {x, gain, bias},
        [x, gain, bias, rows, n, xhat = std::move(xhat),
         inv_std = std::move(inv_std)](TensorNode<S>& node) {
            const auto& gy = node.grad;
            if (gain.requires_grad()) {
                gain.node()->ensure_grad();
                auto& gg = gain.node()->grad;
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < n; ++j) gg[j] += gy[r * n + j] * xhat[r * n + j];
            }
            if (bias.requires_grad()) {
                bias.node()->ensure_grad();
                auto& gb = bias.node()->grad;
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < n; ++j) gb[j] += gy[r * n + j];
            }
            if (x.requires_grad()) {
                x.node()->ensure_grad();
                auto& gx = x.node()->grad;
                for (int64_t r = 0; r < rows; ++r) {
                    S mean_dxhat = S(0), mean_dxhat_xhat = S(0);
                    for (int64_t j = 0; j < n; ++j) {
                        const S dxh = gy[r * n + j] * gain.data()[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat[r * n + j];
                    }
                    mean_dxhat /= S(n);
                    mean_dxhat_xhat /= S(n);
                    for (int64_t j = 0; j < n; ++j) {
                        const S dxh = gy[r * n + j] * gain.data()[j];
                        gx[r * n + j] += inv_std[r] *
                                         (dxh - mean_dxhat - xhat[r * n + j] * mean_dxhat_xhat);
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// lookup / loss
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> embedding(const Tensor<S>& table, const std::vector<int32_t>& ids) {
    if (table.rank() != 2) throw ShapeError("embedding: table must be 2-D");
    const int64_t vocab = table.dim(0), d = table.dim(1);
    for (int32_t id : ids)
        if (id < 0 || id >= vocab)
            throw ShapeError("embedding: id " + std::to_string(id) + " out of range [0," +
                             std::to_string(vocab) + ")");
    const int64_t nrows = static_cast<int64_t>(ids.size());
    std::vector<S> y(static_cast<size_t>(nrows * d));
    for (int64_t i = 0; i < nrows; ++i)
        std::copy_n(table.data().begin() + int64_t(ids[i]) * d, d, y.begin() + i * d);
    return make_op<S>({nrows, d}, std::move(y), {table}, [table, ids, d](TensorNode<S>& node) {
        if (!table.requires_grad()) return;
        table.node()->ensure_grad();
        auto& gt = table.node()->grad;
        for (size_t i = 0; i < ids.size(); ++i) {
            S* dst = gt.data() + int64_t(ids[i]) * d;
            const S* src = node.grad.data() + int64_t(i) * d;
            for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
}

// Mean token-level cross entropy over rows whose target != ignore_index.
// logits are [N, V]; a fused log-softmax keeps it stable.
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int32_t>& targets,
                        int32_t ignore_index) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy: logits must be 2-D");
    const int64_t n = logits.dim(0), v = logits.dim(1);
    if (static_cast<int64_t>(targets.size()) != n)
        throw ShapeError("cross_entropy: targets length mismatch");

    int64_t kept = 0;
    for (int32_t t : targets) {
        if (t == ignore_index) continue;
        if (t < 0 || t >= v)
            throw ShapeError("cross_entropy: target id " + std::to_string(t) + " out of range");
        ++kept;
    }
    if (kept == 0) throw ContractError("cross_entropy: all positions ignored");

    // probs saved for the backward pass
    std::vector<S> probs(logits.data().size());
    const S* lp = logits.data().data();
    S loss = S(0);
    for (int64_t i = 0; i < n; ++i) {
        const S* row = lp + i * v;
        S mx = row[0];
        for (int64_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        S denom = S(0);
        for (int64_t j = 0; j < v; ++j) {
            const S e = softmax_exp(row[j] - mx);
            probs[i * v + j] = e;
            denom += e;
        }
        const S inv = S(1) / denom;
        for (int64_t j = 0; j < v; ++j) probs[i * v + j] *= inv;
        if (targets[i] != ignore_index)
            loss += std::log(denom) + mx - row[targets[i]];
    }
    loss /= S(kept);

    return make_op<S>(
        {1}, {loss}, {logits},
        [logits, targets, ignore_index, n, v, kept,
         probs = std::move(probs)](TensorNode<S>& node) {
            if (!logits.requires_grad()) return;
            logits.node()->ensure_grad();
            auto& gl = logits.node()->grad;
            const S g = node.grad[0] / S(kept);
            for (int64_t i = 0; i < n; ++i) {
                if (targets[i] == ignore_index) continue;
                const S* prow = probs.data() + i * v;
                S* grow = gl.data() + i * v;
                for (int64_t j = 0; j < v; ++j) grow[j] += g * prow[j];
                grow[targets[i]] -= g;
            }
        });
}

}  // namespace mtil::grad
