// SPDX-License-Identifier: Apache-2.0
//
// isrse - bistatic ISAC signal enhancement workbench
// Copyright (C) 2026 The isrse authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Differentiable operations on NCHW / NC tensors.

#include "tensor.hpp"

namespace isrse::nn {

namespace detail {

inline void require(bool ok, const std::string& what)
{
    if (!ok)
        throw std::invalid_argument(what);
}

inline void same_shape(const Shape& a, const Shape& b, const char* op)
{
    require(a == b, std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

inline void require_rank(const Shape& s, std::size_t r, const char* op)
{
    require(s.size() == r, std::string(op) + ": expected rank " + std::to_string(r) + ", got " + shape_str(s));
}

template <class T>
std::vector<T>* grad_of(const Tensor<T>& t)
{
    return t.requires_grad() ? &t.node()->grad_buffer() : nullptr;
}

} // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::same_shape(a.shape(), b.shape(), "add");
    auto out = make_result<T>(a.shape(), {a, b}, [a, b](Node<T>& self) {
        for (auto* g : {detail::grad_of(a), detail::grad_of(b)})
            if (g)
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    (*g)[i] += self.grad[i];
    });
    auto& o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = a.data()[i] + b.data()[i];
    return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::same_shape(a.shape(), b.shape(), "sub");
    auto out = make_result<T>(a.shape(), {a, b}, [a, b](Node<T>& self) {
        if (auto* g = detail::grad_of(a))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                (*g)[i] += self.grad[i];
        if (auto* g = detail::grad_of(b))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                (*g)[i] -= self.grad[i];
    });
    auto& o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = a.data()[i] - b.data()[i];
    return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::same_shape(a.shape(), b.shape(), "mul");
    auto out = make_result<T>(a.shape(), {a, b}, [a, b](Node<T>& self) {
        if (auto* g = detail::grad_of(a))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                (*g)[i] += self.grad[i] * b.data()[i];
        if (auto* g = detail::grad_of(b))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                (*g)[i] += self.grad[i] * a.data()[i];
    });
    auto& o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = a.data()[i] * b.data()[i];
    return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s)
{
    auto out = make_result<T>(a.shape(), {a}, [a, s](Node<T>& self) {
        auto& g = *detail::grad_of(a);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += s * self.grad[i];
    });
    auto& o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = s * a.data()[i];
    return out;
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T s)
{
    auto out = make_result<T>(a.shape(), {a}, [a](Node<T>& self) {
        auto& g = *detail::grad_of(a);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i];
    });
    auto& o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = a.data()[i] + s;
    return out;
}

namespace detail {

template <class T, class F, class D>
Tensor<T> unary(const Tensor<T>& a, F f, D df)
{
    auto out = make_result<T>(a.shape(), {a}, [a, df](Node<T>& self) {
        auto& g = *grad_of(a);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i] * df(a.data()[i], self.data[i]);
    });
    auto& o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = f(a.data()[i]);
    return out;
}

} // namespace detail

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a)
{
    return detail::unary(
        a, [](T x) { return T(1) / (T(1) + std::exp(-x)); }, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> silu(const Tensor<T>& a)
{
    return detail::unary(
        a, [](T x) { return x / (T(1) + std::exp(-x)); },
        [](T x, T) {
            const T s = T(1) / (T(1) + std::exp(-x));
            return s * (T(1) + x * (T(1) - s));
        });
}

template <class T>
Tensor<T> relu(const Tensor<T>& a)
{
    return detail::unary(
        a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a)
{
    auto out = make_result<T>({1}, {a}, [a](Node<T>& self) {
        auto& g = *detail::grad_of(a);
        for (auto& v : g)
            v += self.grad[0];
    });
    out.data()[0] = std::accumulate(a.data().begin(), a.data().end(), T(0));
    return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& a)
{
    return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

// x[B,C,H,W] + v[B,C] broadcast over the spatial dims.
template <class T>
Tensor<T> add_channel(const Tensor<T>& x, const Tensor<T>& v)
{
    detail::require_rank(x.shape(), 4, "add_channel");
    detail::require(v.shape() == Shape{x.dim(0), x.dim(1)},
                    "add_channel: bias shape " + shape_str(v.shape()) + " does not match " + shape_str(x.shape()));
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    auto out = make_result<T>(x.shape(), {x, v}, [x, v, hw](Node<T>& self) {
        if (auto* g = detail::grad_of(x))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                (*g)[i] += self.grad[i];
        if (auto* g = detail::grad_of(v))
            for (std::size_t bc = 0; bc < v.numel(); ++bc)
                for (std::size_t i = 0; i < hw; ++i)
                    (*g)[bc] += self.grad[bc * hw + i];
    });
    for (std::size_t bc = 0; bc < v.numel(); ++bc)
        for (std::size_t i = 0; i < hw; ++i)
            out.data()[bc * hw + i] = x.data()[bc * hw + i] + v.data()[bc];
    return out;
}

// x[B,C,H,W] * g[B,C] broadcast over the spatial dims.
template <class T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s)
{
    detail::require_rank(x.shape(), 4, "scale_channels");
    detail::require(s.shape() == Shape{x.dim(0), x.dim(1)},
                    "scale_channels: gate shape " + shape_str(s.shape()) + " does not match " + shape_str(x.shape()));
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    auto out = make_result<T>(x.shape(), {x, s}, [x, s, hw](Node<T>& self) {
        if (auto* g = detail::grad_of(x))
            for (std::size_t bc = 0; bc < s.numel(); ++bc)
                for (std::size_t i = 0; i < hw; ++i)
                    (*g)[bc * hw + i] += self.grad[bc * hw + i] * s.data()[bc];
        if (auto* g = detail::grad_of(s))
            for (std::size_t bc = 0; bc < s.numel(); ++bc) {
                T acc = 0;
                for (std::size_t i = 0; i < hw; ++i)
                    acc += self.grad[bc * hw + i] * x.data()[bc * hw + i];
                (*g)[bc] += acc;
            }
    });
    for (std::size_t bc = 0; bc < s.numel(); ++bc)
        for (std::size_t i = 0; i < hw; ++i)
            out.data()[bc * hw + i] = x.data()[bc * hw + i] * s.data()[bc];
    return out;
}

// [B,C,H,W] -> [B,C]
template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x)
{
    detail::require_rank(x.shape(), 4, "global_avg_pool");
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const std::size_t bcn = static_cast<std::size_t>(x.dim(0)) * x.dim(1);
    auto out = make_result<T>({x.dim(0), x.dim(1)}, {x}, [x, hw, bcn](Node<T>& self) {
        auto& g = *detail::grad_of(x);
        const T inv = T(1) / static_cast<T>(hw);
        for (std::size_t bc = 0; bc < bcn; ++bc)
            for (std::size_t i = 0; i < hw; ++i)
                g[bc * hw + i] += self.grad[bc] * inv;
    });
    for (std::size_t bc = 0; bc < bcn; ++bc) {
        T acc = 0;
        for (std::size_t i = 0; i < hw; ++i)
            acc += x.data()[bc * hw + i];
        out.data()[bc] = acc / static_cast<T>(hw);
    }
    return out;
}

// x[B,I], w[O,I], b[O] (b may be undefined) -> [B,O]
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b)
{
    detail::require_rank(x.shape(), 2, "linear");
    detail::require_rank(w.shape(), 2, "linear");
    detail::require(w.dim(1) == x.dim(1), "linear: weight " + shape_str(w.shape()) + " vs input " + shape_str(x.shape()));
    const int bn = x.dim(0), in = x.dim(1), on = w.dim(0);
    if (b.defined())
        detail::require(b.shape() == Shape{on}, "linear: bias shape " + shape_str(b.shape()));
    std::vector<Tensor<T>> inputs{x, w};
    if (b.defined())
        inputs.push_back(b);
    auto out = make_result<T>({bn, on}, inputs, [x, w, b, bn, in, on](Node<T>& self) {
        ConstMatMap<T> gy(self.grad.data(), bn, on);
        if (auto* g = detail::grad_of(x))
            MatMap<T>(g->data(), bn, in).noalias() += gy * ConstMatMap<T>(w.data().data(), on, in);
        if (auto* g = detail::grad_of(w))
            MatMap<T>(g->data(), on, in).noalias() += gy.transpose() * ConstMatMap<T>(x.data().data(), bn, in);
        if (b.defined())
            if (auto* g = detail::grad_of(b))
                for (int i = 0; i < bn; ++i)
                    for (int o = 0; o < on; ++o)
                        (*g)[o] += gy(i, o);
    });
    MatMap<T> y(out.data().data(), bn, on);
    y.noalias() = ConstMatMap<T>(x.data().data(), bn, in) * ConstMatMap<T>(w.data().data(), on, in).transpose();
    if (b.defined())
        for (int i = 0; i < bn; ++i)
            for (int o = 0; o < on; ++o)
                y(i, o) += b.data()[o];
    return out;
}

struct ConvGeometry {
    int batch, cin, h, w, cout, k, stride, pad, ho, wo;

    std::size_t col_rows() const { return static_cast<std::size_t>(cin) * k * k; }
    std::size_t col_cols() const { return static_cast<std::size_t>(ho) * wo; }
    bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

namespace detail {

template <class T>
void im2col(const T* x, const ConvGeometry& g, T* cols)
{
    const std::size_t ncol = g.col_cols();
    for (int c = 0; c < g.cin; ++c)
        for (int ki = 0; ki < g.k; ++ki)
            for (int kj = 0; kj < g.k; ++kj) {
                T* row = cols + ((static_cast<std::size_t>(c) * g.k + ki) * g.k + kj) * ncol;
                for (int oh = 0; oh < g.ho; ++oh) {
                    const int ih = oh * g.stride - g.pad + ki;
                    T* dst = row + static_cast<std::size_t>(oh) * g.wo;
                    if (ih < 0 || ih >= g.h) {
                        std::fill(dst, dst + g.wo, T(0));
                        continue;
                    }
                    const T* src = x + (static_cast<std::size_t>(c) * g.h + ih) * g.w;
                    for (int ow = 0; ow < g.wo; ++ow) {
                        const int iw = ow * g.stride - g.pad + kj;
                        dst[ow] = (iw >= 0 && iw < g.w) ? src[iw] : T(0);
                    }
                }
            }
}

template <class T>
void col2im_add(const T* cols, const ConvGeometry& g, T* x)
{
    const std::size_t ncol = g.col_cols();
    for (int c = 0; c < g.cin; ++c)
        for (int ki = 0; ki < g.k; ++ki)
            for (int kj = 0; kj < g.k; ++kj) {
                const T* row = cols + ((static_cast<std::size_t>(c) * g.k + ki) * g.k + kj) * ncol;
                for (int oh = 0; oh < g.ho; ++oh) {
                    const int ih = oh * g.stride - g.pad + ki;
                    if (ih < 0 || ih >= g.h)
                        continue;
                    const T* src = row + static_cast<std::size_t>(oh) * g.wo;
                    T* dst = x + (static_cast<std::size_t>(c) * g.h + ih) * g.w;
                    for (int ow = 0; ow < g.wo; ++ow) {
                        const int iw = ow * g.stride - g.pad + kj;
                        if (iw >= 0 && iw < g.w)
                            dst[iw] += src[ow];
                    }
                }
            }
}

} // namespace detail

// Cross-correlation. x[B,C,H,W], w[Co,C,k,k], b[Co] (may be undefined).
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 1, int pad = 0)
{
    detail::require_rank(x.shape(), 4, "conv2d");
    detail::require_rank(w.shape(), 4, "conv2d");
    detail::require(w.dim(1) == x.dim(1) && w.dim(2) == w.dim(3),
                    "conv2d: kernel " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()));
    detail::require(stride >= 1 && pad >= 0, "conv2d: invalid stride/padding");
    ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), stride, pad, 0, 0};
    g.ho = (g.h + 2 * pad - g.k) / stride + 1;
    g.wo = (g.w + 2 * pad - g.k) / stride + 1;
    detail::require(g.ho > 0 && g.wo > 0, "conv2d: kernel larger than padded input " + shape_str(x.shape()));
    if (b.defined())
        detail::require(b.shape() == Shape{g.cout}, "conv2d: bias shape " + shape_str(b.shape()));

    const std::size_t kr = g.col_rows(), kc = g.col_cols();
    const std::size_t xin = static_cast<std::size_t>(g.cin) * g.h * g.w;
    const std::size_t xout = static_cast<std::size_t>(g.cout) * kc;

    std::vector<Tensor<T>> inputs{x, w};
    if (b.defined())
        inputs.push_back(b);
    auto out = make_result<T>({g.batch, g.cout, g.ho, g.wo}, inputs, [x, w, b, g, kr, kc, xin, xout](Node<T>& self) {
        ConstMatMap<T> W(w.data().data(), g.cout, kr);
        auto* gx = detail::grad_of(x);
        auto* gw = detail::grad_of(w);
        auto* gb = b.defined() ? detail::grad_of(b) : nullptr;
        std::vector<T> cols(g.pointwise() ? 0 : kr * kc);
        std::vector<T> gcols(gx && !g.pointwise() ? kr * kc : 0);
        for (int bi = 0; bi < g.batch; ++bi) {
            ConstMatMap<T> gy(self.grad.data() + bi * xout, g.cout, kc);
            if (gw) {
                const T* cp = x.data().data() + bi * xin;
                if (!g.pointwise()) {
                    detail::im2col(cp, g, cols.data());
                    cp = cols.data();
                }
                MatMap<T>(gw->data(), g.cout, kr).noalias() += gy * ConstMatMap<T>(cp, kr, kc).transpose();
            }
            if (gx) {
                if (g.pointwise()) {
                    MatMap<T>(gx->data() + bi * xin, kr, kc).noalias() += W.transpose() * gy;
                } else {
                    MatMap<T>(gcols.data(), kr, kc).noalias() = W.transpose() * gy;
                    detail::col2im_add(gcols.data(), g, gx->data() + bi * xin);
                }
            }
            if (gb)
                for (int o = 0; o < g.cout; ++o)
                    (*gb)[o] += gy.row(o).sum();
        }
    });

    ConstMatMap<T> W(w.data().data(), g.cout, kr);
    std::vector<T> cols(g.pointwise() ? 0 : kr * kc);
    for (int bi = 0; bi < g.batch; ++bi) {
        const T* cp = x.data().data() + bi * xin;
        if (!g.pointwise()) {
            detail::im2col(cp, g, cols.data());
            cp = cols.data();
        }
        MatMap<T> y(out.data().data() + bi * xout, g.cout, kc);
        y.noalias() = W * ConstMatMap<T>(cp, kr, kc);
        if (b.defined())
            for (int o = 0; o < g.cout; ++o)
                y.row(o).array() += b.data()[o];
    }
    return out;
}

// Nearest-neighbour 2x upsampling of [B,C,H,W].
template <class T>
Tensor<T> upsample2x(const Tensor<T>& x)
{
    detail::require_rank(x.shape(), 4, "upsample2x");
    const int bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    auto out = make_result<T>({x.dim(0), x.dim(1), 2 * h, 2 * w}, {x}, [x, bc, h, w](Node<T>& self) {
        auto& g = *detail::grad_of(x);
        for (int p = 0; p < bc; ++p)
            for (int i = 0; i < 2 * h; ++i)
                for (int j = 0; j < 2 * w; ++j)
                    g[(static_cast<std::size_t>(p) * h + i / 2) * w + j / 2] +=
                        self.grad[(static_cast<std::size_t>(p) * 2 * h + i) * 2 * w + j];
    });
    for (int p = 0; p < bc; ++p)
        for (int i = 0; i < 2 * h; ++i)
            for (int j = 0; j < 2 * w; ++j)
                out.data()[(static_cast<std::size_t>(p) * 2 * h + i) * 2 * w + j] =
                    x.data()[(static_cast<std::size_t>(p) * h + i / 2) * w + j / 2];
    return out;
}

// Concatenation of [B,Ca,H,W] and [B,Cb,H,W] along channels.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::require_rank(a.shape(), 4, "concat_channels");
    detail::require_rank(b.shape(), 4, "concat_channels");
    detail::require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
                    "concat_channels: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::size_t hw = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
    const std::size_t sa = a.dim(1) * hw, sb = b.dim(1) * hw;
    const int bn = a.dim(0);
    auto out = make_result<T>({bn, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)}, {a, b}, [a, b, sa, sb, bn](Node<T>& self) {
        auto* ga = detail::grad_of(a);
        auto* gb = detail::grad_of(b);
        for (int i = 0; i < bn; ++i) {
            const T* src = self.grad.data() + i * (sa + sb);
            if (ga)
                for (std::size_t k = 0; k < sa; ++k)
                    (*ga)[i * sa + k] += src[k];
            if (gb)
                for (std::size_t k = 0; k < sb; ++k)
                    (*gb)[i * sb + k] += src[sa + k];
        }
    });
    for (int i = 0; i < bn; ++i) {
        T* dst = out.data().data() + i * (sa + sb);
        std::copy_n(a.data().data() + i * sa, sa, dst);
        std::copy_n(b.data().data() + i * sb, sb, dst + sa);
    }
    return out;
}

// Mean squared error, scalar.
template <class T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::same_shape(a.shape(), b.shape(), "mse");
    const T n = static_cast<T>(a.numel());
    auto out = make_result<T>({1}, {a, b}, [a, b, n](Node<T>& self) {
        auto* ga = detail::grad_of(a);
        auto* gb = detail::grad_of(b);
        const T s = T(2) * self.grad[0] / n;
        for (std::size_t i = 0; i < a.numel(); ++i) {
            const T d = s * (a.data()[i] - b.data()[i]);
            if (ga)
                (*ga)[i] += d;
            if (gb)
                (*gb)[i] -= d;
        }
    });
    T acc = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const T d = a.data()[i] - b.data()[i];
        acc += d * d;
    }
    out.data()[0] = acc / n;
    return out;
}

struct SsimConstants {
    double c1 = 1e-4; // (0.01 * D)^2 with D = 1
    double c2 = 9e-4; // (0.03 * D)^2
};

// Global-statistics SSIM per image plane, averaged over all B*C planes of a
// [B,C,H,W] pair.
template <class T>
Tensor<T> ssim_global(const Tensor<T>& x, const Tensor<T>& y, SsimConstants k = {})
{
    detail::same_shape(x.shape(), y.shape(), "ssim");
    detail::require_rank(x.shape(), 4, "ssim");
    const std::size_t planes = static_cast<std::size_t>(x.dim(0)) * x.dim(1);
    const std::size_t n = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    struct Stats {
        T mx, my, a1, a2, b1, b2, s;
    };
    std::vector<Stats> st(planes);
    const T c1 = static_cast<T>(k.c1), c2 = static_cast<T>(k.c2);
    T total = 0;
    for (std::size_t p = 0; p < planes; ++p) {
        const T* a = x.data().data() + p * n;
        const T* b = y.data().data() + p * n;
        T mx = 0, my = 0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += a[i];
            my += b[i];
        }
        mx /= static_cast<T>(n);
        my /= static_cast<T>(n);
        T vx = 0, vy = 0, cxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const T da = a[i] - mx, db = b[i] - my;
            vx += da * da;
            vy += db * db;
            cxy += da * db;
        }
        vx /= static_cast<T>(n);
        vy /= static_cast<T>(n);
        cxy /= static_cast<T>(n);
        Stats s{mx, my, T(2) * mx * my + c1, T(2) * cxy + c2, mx * mx + my * my + c1, vx + vy + c2, 0};
        s.s = s.a1 * s.a2 / (s.b1 * s.b2);
        st[p] = s;
        total += s.s;
    }
    auto out = make_result<T>({1}, {x, y}, [x, y, st, planes, n](Node<T>& self) {
        auto* gx = detail::grad_of(x);
        auto* gy = detail::grad_of(y);
        const T inv_n = T(1) / static_cast<T>(n);
        const T up = self.grad[0] / static_cast<T>(planes);
        for (std::size_t p = 0; p < planes; ++p) {
            const Stats& s = st[p];
            const T* a = x.data().data() + p * n;
            const T* b = y.data().data() + p * n;
            const T f = up * s.s * T(2) * inv_n;
            for (std::size_t i = 0; i < n; ++i) {
                if (gx)
                    (*gx)[p * n + i] += f * (s.my / s.a1 + (b[i] - s.my) / s.a2 - s.mx / s.b1 - (a[i] - s.mx) / s.b2);
                if (gy)
                    (*gy)[p * n + i] += f * (s.mx / s.a1 + (a[i] - s.mx) / s.a2 - s.my / s.b1 - (b[i] - s.my) / s.b2);
            }
        }
    });
    out.data()[0] = total / static_cast<T>(planes);
    return out;
}

} // namespace isrse::nn
