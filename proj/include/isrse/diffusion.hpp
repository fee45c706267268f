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

// Linear-beta DDPM: schedule, forward corruption, noise-prediction training
// step and the ancestral reverse sampler.

#include "nn/loss.hpp"
#include "nn/optim.hpp"
#include "rng.hpp"

#include <functional>
#include <limits>

namespace isrse {

struct Schedule {
    int T = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::vector<double> betas, alphas, alpha_bars, sigmas; // index t - 1

    double beta(int t) const { return betas.at(static_cast<std::size_t>(t - 1)); }
    double alpha(int t) const { return alphas.at(static_cast<std::size_t>(t - 1)); }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars.at(static_cast<std::size_t>(t - 1)); }
    double sigma(int t) const { return sigmas.at(static_cast<std::size_t>(t - 1)); }

    void check_t(int t, const char* op) const
    {
        if (t < 1 || t > T)
            throw std::invalid_argument(std::string(op) + ": timestep " + std::to_string(t) + " outside [1, " +
                                        std::to_string(T) + "]");
    }
};

inline Schedule make_schedule(int T, double beta_start, double beta_end)
{
    if (T < 1)
        throw std::invalid_argument("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("make_schedule: need 0 < beta_start <= beta_end < 1");
    Schedule s;
    s.T = T;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    double ab = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double b = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * (t - 1) / (T - 1);
        ab *= 1.0 - b;
        s.betas.push_back(b);
        s.alphas.push_back(1.0 - b);
        s.alpha_bars.push_back(ab);
        s.sigmas.push_back(std::sqrt(b));
    }
    return s;
}

inline Schedule schedule_default() { return make_schedule(500, 1e-4, 0.02); }
// Short chain for desk runs; the betas are scaled up so that alpha_bar_T
// still ends near zero.
inline Schedule schedule_desk() { return make_schedule(50, 1e-3, 0.2); }

template <class T>
using Image = nn::Tensor<T>;

template <class T>
Image<T> gaussian_like(const Image<T>& x, Rng& rng)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Image<T> e(x.shape());
    for (auto& v : e.data())
        v = static_cast<T>(nd(rng));
    return e;
}

// x_t ~ N(sqrt(1 - beta_t) x_{t-1}, beta_t I)
template <class T>
Image<T> forward_step(const Image<T>& x_prev, int t, const Schedule& s, Rng& rng)
{
    s.check_t(t, "forward_step");
    const Image<T> e = gaussian_like(x_prev, rng);
    Image<T> out(x_prev.shape());
    const double a = std::sqrt(1.0 - s.beta(t)), b = std::sqrt(s.beta(t));
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data()[i] = static_cast<T>(a * x_prev.data()[i] + b * e.data()[i]);
    return out;
}

template <class T>
struct Noised {
    Image<T> x_t;
    Image<T> eps;
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
template <class T>
Noised<T> forward_marginal(const Image<T>& x0, int t, const Schedule& s, Rng& rng)
{
    s.check_t(t, "forward_marginal");
    Noised<T> r{Image<T>(x0.shape()), gaussian_like(x0, rng)};
    const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1.0 - s.alpha_bar(t));
    for (std::size_t i = 0; i < x0.numel(); ++i)
        r.x_t.data()[i] = static_cast<T>(a * x0.data()[i] + b * r.eps.data()[i]);
    return r;
}

// x0 estimate from x_t and a noise prediction.
template <class T>
Image<T> predict_x0(const Image<T>& x_t, const Image<T>& eps, int t, const Schedule& s)
{
    const double ab = s.alpha_bar(t);
    Image<T> out(x_t.shape());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data()[i] = static_cast<T>((x_t.data()[i] - std::sqrt(1.0 - ab) * eps.data()[i]) / std::sqrt(ab));
    return out;
}

template <class T>
using NoisePredictor = std::function<Image<T>(const Image<T>& x_t, int t)>;

template <class T>
using StepObserver = std::function<void(int t, const Image<T>& x_t, const Image<T>& eps_hat)>;

template <class T>
void check_finite(const Image<T>& x, const std::string& where)
{
    for (std::size_t i = 0; i < x.numel(); ++i)
        if (!std::isfinite(static_cast<double>(x.data()[i])))
            throw std::runtime_error(where + ": non-finite value at flat index " + std::to_string(i));
}

// Ancestral sampling from t_start down to 1:
// x_{t-1} = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t) + sigma_t z, z = 0 at t = 1.
template <class T>
Image<T> reverse_sample(const Image<T>& x_start, int t_start, const NoisePredictor<T>& model, const Schedule& s,
                        Rng& rng, const StepObserver<T>& observe = {})
{
    s.check_t(t_start, "reverse_sample");
    Image<T> x(x_start.shape(), x_start.data());
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int t = t_start; t >= 1; --t) {
        const Image<T> eps = model(x, t);
        if (eps.shape() != x.shape())
            throw std::invalid_argument("reverse_sample: predictor returned shape " + nn::shape_str(eps.shape()));
        if (observe)
            observe(t, x, eps);
        const double c = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
        const double inv = 1.0 / std::sqrt(s.alpha(t));
        const double sig = t > 1 ? s.sigma(t) : 0.0;
        Image<T> next(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) {
            double v = inv * (x.data()[i] - c * eps.data()[i]);
            if (sig > 0.0)
                v += sig * nd(rng);
            next.data()[i] = static_cast<T>(v);
        }
        check_finite(next, "reverse_sample at t=" + std::to_string(t));
        x = next;
    }
    return x;
}

// Timestep whose cumulative noise-to-signal ratio (1 - abar_t) / abar_t is
// closest to noise_power / signal_power, clamped to [1, T].
inline int match_injection_timestep(double noise_power, double signal_power, const Schedule& s)
{
    if (!(noise_power >= 0.0 && signal_power > 0.0))
        throw std::invalid_argument("match_injection_timestep: powers must be positive");
    const double r = noise_power / signal_power;
    int best = 1;
    double best_err = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= s.T; ++t) {
        const double e = std::abs((1.0 - s.alpha_bar(t)) / s.alpha_bar(t) - r);
        if (e < best_err) {
            best_err = e;
            best = t;
        }
    }
    return best;
}

template <class T>
Image<T> constant_like(const Image<T>& x, const std::vector<double>& per_item)
{
    Image<T> c(x.shape());
    const std::size_t per = x.numel() / per_item.size();
    for (std::size_t b = 0; b < per_item.size(); ++b)
        std::fill_n(c.data().begin() + static_cast<std::ptrdiff_t>(b * per), per, static_cast<T>(per_item[b]));
    return c;
}

// One optimisation step on a batch of clean images x0 [B,C,H,W]. The SSIM
// term compares x0 with the x0 reconstruction implied by the predicted noise.
template <class T>
double train_step(const Image<T>& x0, nn::UNet<T>& model, const Schedule& s, const nn::LossWeights& w,
                  nn::AdamState<T>& opt, const nn::AdamConfig& adam, Rng& rng)
{
    nn::detail::require_rank(x0.shape(), 4, "train_step");
    const int bn = x0.dim(0);
    std::uniform_int_distribution<int> ut(1, s.T);
    std::vector<int> ts(bn);
    for (auto& t : ts)
        t = ut(rng);
    const std::size_t per = x0.numel() / bn;
    Image<T> eps = gaussian_like(x0, rng);
    Image<T> xt(x0.shape());
    std::vector<double> inv_sqrt_ab(bn), ratio(bn);
    for (int b = 0; b < bn; ++b) {
        const double ab = s.alpha_bar(ts[b]);
        inv_sqrt_ab[b] = 1.0 / std::sqrt(ab);
        ratio[b] = std::sqrt(1.0 - ab) / std::sqrt(ab);
        for (std::size_t i = b * per; i < (b + 1) * per; ++i)
            xt.data()[i] = static_cast<T>(std::sqrt(ab) * x0.data()[i] + std::sqrt(1.0 - ab) * eps.data()[i]);
    }
    auto params = nn::param_tensors(model.parameters());
    nn::zero_grad(params);
    const Image<T> z_hat = model.forward(xt, ts);
    const Image<T> xt_scaled = nn::mul(xt, constant_like(xt, inv_sqrt_ab));
    const Image<T> x0_hat = nn::sub(xt_scaled, nn::mul(z_hat, constant_like(xt, ratio)));
    const Image<T> loss = nn::composite_loss(eps, z_hat, x0, x0_hat, w);
    const double lv = static_cast<double>(loss.item());
    if (!std::isfinite(lv))
        throw std::runtime_error("train_step: non-finite loss (batch " + std::to_string(bn) + ", first t " +
                                 std::to_string(ts[0]) + ")");
    loss.backward();
    nn::adam_step(params, opt, adam);
    return lv;
}

} // namespace isrse
