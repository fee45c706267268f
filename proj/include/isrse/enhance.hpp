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

// Signal enhancers behind one interface: the diffusion pipeline (STFT ->
// RGB -> reverse diffusion -> ISTFT), the identity baseline, an LMS
// predictor and a single-pass image denoiser.

#include "channel.hpp"
#include "model.hpp"

#include <memory>

namespace isrse {

enum class EnhancerKind { isr_se, tsp, lms, cnn };

inline std::string to_string(EnhancerKind k)
{
    switch (k) {
    case EnhancerKind::isr_se:
        return "isrse";
    case EnhancerKind::tsp:
        return "tsp";
    case EnhancerKind::lms:
        return "lms";
    case EnhancerKind::cnn:
        return "cnn";
    }
    return "?";
}

inline EnhancerKind enhancer_kind_from(const std::string& s)
{
    if (s == "isrse" || s == "isr_se" || s == "ISR-SE")
        return EnhancerKind::isr_se;
    if (s == "tsp" || s == "TSP")
        return EnhancerKind::tsp;
    if (s == "lms" || s == "LMS")
        return EnhancerKind::lms;
    if (s == "cnn" || s == "CNN")
        return EnhancerKind::cnn;
    throw std::invalid_argument("unknown enhancement method '" + s + "'");
}

struct LmsConfig {
    int filter_len = 32;
    double step_size = -1.0; // < 0: half the stability bound of the input
};

inline double lms_stability_bound(int filter_len, double input_power)
{
    return 2.0 / (filter_len * input_power);
}

// One-step-ahead complex LMS predictor: y[n] = w^T u[n] with
// u[n] = (x[n-1], ..., x[n-L]), w <- w + mu e[n] conj(u[n]), e = x - y.
// The prediction y is the output.
inline ComplexSignal lms_filter(const ComplexSignal& sig, const LmsConfig& cfg)
{
    if (cfg.filter_len < 1)
        throw std::invalid_argument("lms_filter: filter_len must be >= 1");
    if (!(cfg.step_size >= 0.0))
        throw std::invalid_argument("lms_filter: step size must be >= 0");
    const std::size_t len = sig.size();
    const int l = cfg.filter_len;
    ComplexSignal out{CVec(len), sig.sample_rate_hz};
    CVec w(l, cplx{});
    for (std::size_t n = 0; n < len; ++n) {
        cplx y{};
        for (int k = 0; k < l && static_cast<std::size_t>(k) < n; ++k)
            y += w[k] * sig.samples[n - 1 - k];
        out.samples[n] = y;
        const cplx e = sig.samples[n] - y;
        double norm2 = 0.0;
        for (int k = 0; k < l && static_cast<std::size_t>(k) < n; ++k) {
            w[k] += cfg.step_size * e * std::conj(sig.samples[n - 1 - k]);
            norm2 += std::norm(w[k]);
        }
        if (!(norm2 <= 1e12)) {
            std::ostringstream os;
            os << "lms_filter: diverged at sample " << n << " (weight norm " << std::sqrt(norm2) << ", step "
               << cfg.step_size << ", bound " << lms_stability_bound(l, mean_power(sig.samples)) << ")";
            throw std::runtime_error(os.str());
        }
    }
    return out;
}

struct GainReport {
    double snr_in_db;
    double snr_out_db;
    double gain_db() const { return snr_out_db - snr_in_db; }
};

inline double snr_db_capped(double sig, double err)
{
    if (!(err > 0.0))
        return 200.0;
    return std::min(200.0, linear_to_db(sig / err));
}

inline GainReport enhancement_gain(const ComplexSignal& clean, const ComplexSignal& noisy, const ComplexSignal& enhanced)
{
    if (clean.size() != noisy.size() || clean.size() != enhanced.size())
        throw std::invalid_argument("enhancement_gain: signal lengths differ");
    double ps = 0.0, en = 0.0, ee = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        ps += std::norm(clean.samples[i]);
        en += std::norm(noisy.samples[i] - clean.samples[i]);
        ee += std::norm(enhanced.samples[i] - clean.samples[i]);
    }
    if (!(ps > 0.0))
        throw std::invalid_argument("enhancement_gain: clean signal has zero power");
    return {snr_db_capped(ps, en), snr_db_capped(ps, ee)};
}

// Mean |(noisy - enhanced) - noise|^2: error of the implied noise estimate.
inline double noise_estimation_mse(const ComplexSignal& noisy, const ComplexSignal& enhanced, const CVec& noise)
{
    if (noisy.size() != enhanced.size() || noisy.size() != noise.size())
        throw std::invalid_argument("noise_estimation_mse: lengths differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < noise.size(); ++i)
        acc += std::norm(noisy.samples[i] - enhanced.samples[i] - noise[i]);
    return noise.empty() ? 0.0 : acc / static_cast<double>(noise.size());
}

// Side information for the learned enhancers.
struct EnhanceContext {
    double noise_power = 0.0;
    double signal_power = 0.0; // <= 0: estimated as input power minus noise power
    std::uint64_t seed = 0;
};

struct Enhancer {
    EnhancerKind kind = EnhancerKind::tsp;
    std::shared_ptr<const DenoiserModel> model;
    LmsConfig lms;
    bool literal_alg2 = false; // inject the noisy image as x_T instead of at the matched step
    int tile_batch = 8;
};

namespace detail {

inline double clean_power_estimate(const ComplexSignal& sig, const EnhanceContext& ctx)
{
    if (ctx.signal_power > 0.0)
        return ctx.signal_power;
    const double p = mean_power(sig.samples);
    return std::max(p - ctx.noise_power, 1e-3 * p);
}

// Runs `fn` on batches of tiles and returns the processed tiles.
template <class F>
std::vector<RgbTile> map_tiles(const std::vector<RgbTile>& tiles, int batch, F fn)
{
    std::vector<RgbTile> out;
    out.reserve(tiles.size());
    for (std::size_t s = 0; s < tiles.size(); s += static_cast<std::size_t>(batch)) {
        std::vector<const RgbTile*> ptr;
        for (std::size_t k = s; k < std::min(tiles.size(), s + static_cast<std::size_t>(batch)); ++k)
            ptr.push_back(&tiles[k]);
        const nn::Tensor<float> y = fn(tiles_to_tensor(ptr), s);
        for (int b = 0; b < static_cast<int>(ptr.size()); ++b)
            out.push_back(tensor_to_tile(y, b));
    }
    return out;
}

// Per-pixel variance, in network input units, that the signal-domain noise
// leaves on the red and blue channels. Measured by encoding the input once
// more with an independent noise draw of the same power added. The codec is
// nonlinear, so the signal-domain noise-to-signal ratio says little about
// what the network sees.
inline double pixel_noise_variance(const ComplexSignal& x, const Spectrogram& sx, double noise_power,
                                   const RgbCodecMeta& meta, std::uint64_t seed)
{
    ComplexSignal p = x;
    Rng rng = make_rng(seed, 0, Stage::enhance);
    apply_awgn(p.samples, noise_power, rng);
    const Spectrogram sp = stft(p, sx.cfg);
    auto red = [&meta](cplx v) { return std::clamp(red_level(std::abs(v), meta), 0.0, 255.0) / 255.0; };
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sx.bins.size(); ++i) {
        const cplx a = sx.bins.data()[i], b = sp.bins.data()[i];
        const double dr = red(b) - red(a);
        const double db = std::arg(b * std::conj(a)) / (2.0 * kPi);
        acc += dr * dr + db * db;
    }
    return sx.bins.size() == 0 ? 0.0 : acc / (2.0 * static_cast<double>(sx.bins.size()));
}

} // namespace detail

// Image-domain pipeline shared by the two learned enhancers.
inline ComplexSignal enhance_image_domain(const Enhancer& e, const ComplexSignal& sig, const EnhanceContext& ctx)
{
    if (!e.model)
        throw std::invalid_argument("enhance: method '" + to_string(e.kind) + "' requires a model");
    const DenoiserModel& m = *e.model;
    if ((e.kind == EnhancerKind::isr_se) != (m.kind == ModelKind::diffusion))
        throw std::invalid_argument("enhance: model kind does not match method '" + to_string(e.kind) + "'");
    if (sig.size() < static_cast<std::size_t>(m.stft.window_length))
        throw std::invalid_argument("enhance: signal shorter than one STFT window");
    const double ps = detail::clean_power_estimate(sig, ctx);
    const double a = m.reference_rms / std::sqrt(ps);
    ComplexSignal x = sig;
    for (auto& v : x.samples)
        v *= a;
    const Spectrogram sx = stft(x, m.stft);
    RgbImage img = rgb_encode(sx, m.codec, sig.sample_rate_hz);
    nn::NoGradGuard ng;
    if (e.kind == EnhancerKind::isr_se) {
        const Schedule& s = m.schedule;
        // Forward noise is unit variance on unscaled pixels: match the raw pixel variance.
        const double v = detail::pixel_noise_variance(x, sx, a * a * ctx.noise_power, m.codec, ctx.seed);
        const int t0 = e.literal_alg2 ? s.T : match_injection_timestep(v, 1.0, s);
        // The clean image (t = 0) is a candidate level too; when it is the
        // nearest one there is nothing for the reverse chain to remove.
        const double r1 = (1.0 - s.alpha_bar(1)) / s.alpha_bar(1);
        if (!e.literal_alg2 && v < 0.5 * r1) {
            ComplexSignal y = istft(rgb_decode(img), sig.sample_rate_hz);
            for (auto& u : y.samples)
                u /= a;
            return y;
        }
        const double gain = e.literal_alg2 ? 1.0 : std::sqrt(s.alpha_bar(t0));
        NoisePredictor<float> pred = [&m](const Image<float>& xt, int t) { return m.net.forward(xt, t); };
        img.tiles = detail::map_tiles(img.tiles, e.tile_batch, [&](nn::Tensor<float> xb, std::size_t first) {
            for (auto& p : xb.data())
                p = static_cast<float>(gain * p);
            Rng rng = make_rng(ctx.seed, first, Stage::enhance);
            return reverse_sample(xb, t0, pred, s, rng);
        });
    } else {
        img.tiles = detail::map_tiles(img.tiles, e.tile_batch, [&](const nn::Tensor<float>& xb, std::size_t) {
            return nn::sub(xb, m.net.forward(xb, 0));
        });
    }
    ComplexSignal y = istft(rgb_decode(img), sig.sample_rate_hz);
    for (auto& v : y.samples)
        v /= a;
    return y;
}

inline ComplexSignal enhance(const Enhancer& e, const ComplexSignal& sig, const EnhanceContext& ctx = {})
{
    switch (e.kind) {
    case EnhancerKind::tsp:
        return sig;
    case EnhancerKind::lms: {
        LmsConfig c = e.lms;
        if (c.step_size < 0.0) {
            const double p = mean_power(sig.samples);
            c.step_size = p > 0.0 ? 0.5 * lms_stability_bound(c.filter_len, p) : 0.0;
        }
        return lms_filter(sig, c);
    }
    case EnhancerKind::isr_se:
    case EnhancerKind::cnn:
        return enhance_image_domain(e, sig, ctx);
    }
    throw std::invalid_argument("enhance: unknown method");
}

} // namespace isrse
