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

#include <isrse/channel.hpp>
#include <isrse/enhance.hpp>

#include <catch_amalgamated.hpp>

using namespace isrse;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kFs = 100e6;

ComplexSignal tones(std::size_t n, Rng& rng, double amp = 1.0)
{
    ComplexSignal s{CVec(n), kFs};
    const double f[3] = {uniform(rng, -0.4, -0.1), uniform(rng, -0.05, 0.05), uniform(rng, 0.1, 0.4)};
    const double ph[3] = {uniform(rng, 0, 2 * kPi), uniform(rng, 0, 2 * kPi), uniform(rng, 0, 2 * kPi)};
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k)
            s.samples[i] += std::polar(amp / (k + 1), 2 * kPi * f[k] * i + ph[k]);
    return s;
}

ComplexSignal with_noise(const ComplexSignal& s, double np, Rng& rng)
{
    ComplexSignal y = s;
    apply_awgn(y.samples, np, rng);
    return y;
}

double snr_db(const CVec& clean, const CVec& x, std::size_t from = 0)
{
    double ps = 0, pe = 0;
    for (std::size_t i = from; i < clean.size(); ++i) {
        ps += std::norm(clean[i]);
        pe += std::norm(x[i] - clean[i]);
    }
    return linear_to_db(ps / pe);
}

std::shared_ptr<DenoiserModel> small_model(ModelKind k)
{
    nn::UNetConfig cfg = nn::unet_desk();
    cfg.base_channels = 4;
    cfg.depth = 1;
    cfg.time_embed_dim = 8;
    if (k == ModelKind::direct)
        cfg.use_time = false;
    auto m = std::make_shared<DenoiserModel>(k, cfg, 3, schedule_desk());
    m->codec = default_codec_meta(5000.0, kFs);
    m->sample_rate_hz = kFs;
    return m;
}

} // namespace

TEST_CASE("TSP is the identity", "[enhance]")
{
    Rng rng(1);
    const ComplexSignal x = with_noise(tones(500, rng), 0.3, rng);
    const ComplexSignal y = enhance(Enhancer{}, x);
    CHECK(y.samples == x.samples);
    CHECK(y.sample_rate_hz == x.sample_rate_hz);
}

TEST_CASE("oracle diffusion pipeline recovers the clean spectrogram image", "[enhance]")
{
    Rng rng(2);
    // The log-magnitude codec clips bins below unit magnitude, so the test
    // signal sits at the dataset level.
    const ComplexSignal clean = tones(1144, rng, 600.0);
    const StftConfig sc;
    const Spectrogram spec = stft(clean, sc);
    const RgbCodecMeta meta = default_codec_meta(magnitude_quantile({spec}, 1.0) * 1.01, kFs);
    RgbImage img = rgb_encode(spec, meta, kFs);
    const ComplexSignal coded = istft(rgb_decode(img), kFs);
    const Schedule s = schedule_desk();
    const int t = match_injection_timestep(0.1, 1.0, s);
    REQUIRE(t > 1);

    const nn::Tensor<float> x0 = tiles_to_tensor({&img.tiles[0]});
    const auto noised = forward_marginal(x0, t, s, rng);
    const NoisePredictor<float> oracle = [&](const Image<float>& xt, int step) {
        Image<float> e(xt.shape());
        const double a = std::sqrt(s.alpha_bar(step)), b = std::sqrt(1 - s.alpha_bar(step));
        for (std::size_t i = 0; i < e.numel(); ++i)
            e.data()[i] = static_cast<float>((xt.data()[i] - a * x0.data()[i]) / b);
        return e;
    };
    const auto restored = reverse_sample(noised.x_t, t, oracle, s, rng);

    RgbImage noisy_img = img, out_img = img;
    nn::Tensor<float> scaled(noised.x_t.shape());
    for (std::size_t i = 0; i < scaled.numel(); ++i)
        scaled.data()[i] = static_cast<float>(noised.x_t.data()[i] / std::sqrt(s.alpha_bar(t)));
    noisy_img.tiles[0] = tensor_to_tile(scaled, 0);
    out_img.tiles[0] = tensor_to_tile(restored, 0);
    const double snr_in = snr_db(coded.samples, istft(rgb_decode(noisy_img), kFs).samples);
    const double snr_out = snr_db(coded.samples, istft(rgb_decode(out_img), kFs).samples);
    INFO("in " << snr_in << " dB, out " << snr_out << " dB");
    CHECK(snr_out >= snr_in + 20.0);
    // 8-bit quantization of magnitude and phase leaves about 38 dB for tones.
    CHECK(snr_db(clean.samples, istft(rgb_decode(out_img), kFs).samples, 128) > 30.0);
}

TEST_CASE("LMS predictor", "[enhance]")
{
    SECTION("zero input")
    {
        const ComplexSignal z{CVec(300), kFs};
        const ComplexSignal y = lms_filter(z, {16, 0.01});
        for (const auto& v : y.samples)
            CHECK(v == cplx{});
    }
    SECTION("zero step keeps the initial prediction")
    {
        Rng rng(3);
        const ComplexSignal y = lms_filter(tones(200, rng), {8, 0.0});
        for (const auto& v : y.samples)
            CHECK(v == cplx{});
    }
    SECTION("tone in white noise at 0 dB")
    {
        Rng rng(4);
        const std::size_t n = 20000;
        ComplexSignal clean{CVec(n), kFs};
        for (std::size_t i = 0; i < n; ++i)
            clean.samples[i] = std::polar(1.0, 2 * kPi * 0.0371 * i);
        const ComplexSignal noisy = with_noise(clean, 1.0, rng);
        const LmsConfig cfg{32, 0.05 * lms_stability_bound(32, mean_power(noisy.samples))};
        const ComplexSignal y = lms_filter(noisy, cfg);
        const double before = snr_db(clean.samples, noisy.samples, 3 * n / 4);
        const double after = snr_db(clean.samples, y.samples, 3 * n / 4);
        INFO("before " << before << " after " << after);
        CHECK(after >= before + 6.0);
    }
    SECTION("step above the bound diverges")
    {
        Rng rng(5);
        const ComplexSignal noise = with_noise(ComplexSignal{CVec(5000), kFs}, 1.0, rng);
        const LmsConfig cfg{16, 4.0 * lms_stability_bound(16, 1.0)};
        CHECK_THROWS_AS(lms_filter(noise, cfg), std::runtime_error);
    }
    SECTION("invalid configuration")
    {
        const ComplexSignal z{CVec(10), kFs};
        CHECK_THROWS_AS(lms_filter(z, {0, 0.1}), std::invalid_argument);
        CHECK_THROWS_AS(lms_filter(z, {4, -0.1}), std::invalid_argument);
    }
}

TEST_CASE("enhancement gain", "[enhance]")
{
    Rng rng(6);
    const ComplexSignal clean = tones(400, rng);
    const ComplexSignal noisy = with_noise(clean, 0.5, rng);
    CHECK(enhancement_gain(clean, noisy, clean).snr_out_db == 200.0);
    CHECK(enhancement_gain(clean, noisy, noisy).gain_db() == 0.0);
    ComplexSignal half = noisy;
    for (std::size_t i = 0; i < half.size(); ++i)
        half.samples[i] = clean.samples[i] + 0.5 * (noisy.samples[i] - clean.samples[i]);
    CHECK_THAT(enhancement_gain(clean, noisy, half).gain_db(), WithinAbs(20 * std::log10(2.0), 1e-9));
    CHECK_THROWS_AS(enhancement_gain(clean, noisy, tones(10, rng)), std::invalid_argument);
    CHECK_THROWS_AS(enhancement_gain(ComplexSignal{CVec(400), kFs}, noisy, noisy), std::invalid_argument);
}

TEST_CASE("noise estimate of the identity enhancer is the noise power", "[enhance]")
{
    Rng rng(7);
    const ComplexSignal clean = tones(1000, rng);
    ComplexSignal noisy = clean;
    CVec noise(1000);
    for (auto& z : noise)
        z = complex_normal(rng, 0.8);
    for (std::size_t i = 0; i < noise.size(); ++i)
        noisy.samples[i] += noise[i];
    CHECK_THAT(noise_estimation_mse(noisy, enhance(Enhancer{}, noisy), noise), WithinRel(mean_power(noise), 1e-12));
    CHECK(noise_estimation_mse(noisy, clean, noise) < 1e-25);
}

TEST_CASE("learned enhancers", "[enhance]")
{
    Rng rng(8);
    const ComplexSignal x = with_noise(tones(1500, rng), 0.1, rng);
    const EnhanceContext ctx{0.1 * 1000.0 * 1000.0, 0.0, 11};
    ComplexSignal scaled = x;
    for (auto& v : scaled.samples)
        v *= 1000.0;
    for (ModelKind k : {ModelKind::diffusion, ModelKind::direct}) {
        Enhancer e;
        e.kind = k == ModelKind::diffusion ? EnhancerKind::isr_se : EnhancerKind::cnn;
        e.model = small_model(k);
        const ComplexSignal y1 = enhance(e, scaled, ctx), y2 = enhance(e, scaled, ctx);
        CHECK(y1.size() == scaled.size());
        CHECK(y1.sample_rate_hz == scaled.sample_rate_hz);
        CHECK(y1.samples == y2.samples);
        for (const auto& v : y1.samples)
            CHECK(std::isfinite(std::abs(v)));
        CHECK_THROWS_AS(enhance(e, ComplexSignal{CVec(100), kFs}, ctx), std::invalid_argument);
        Enhancer wrong = e;
        wrong.kind = k == ModelKind::diffusion ? EnhancerKind::cnn : EnhancerKind::isr_se;
        CHECK_THROWS_AS(enhance(wrong, scaled, ctx), std::invalid_argument);
        wrong = e;
        wrong.model.reset();
        CHECK_THROWS_AS(enhance(wrong, scaled, ctx), std::invalid_argument);
    }
    Enhancer lms;
    lms.kind = EnhancerKind::lms;
    CHECK(enhance(lms, scaled, ctx).size() == scaled.size());
}

TEST_CASE("injection level is measured on the pixels", "[enhance]")
{
    Rng rng(12);
    const ComplexSignal x = tones(1500, rng, 600.0);
    const StftConfig sc;
    const Spectrogram sx = stft(x, sc);
    const RgbCodecMeta meta = default_codec_meta(5000.0, kFs);
    CHECK_THAT(detail::pixel_noise_variance(x, sx, 0.0, meta, 1), WithinAbs(0.0, 1e-24));
    // Small perturbations of log magnitude and phase are linear in the noise amplitude.
    const double v1 = detail::pixel_noise_variance(x, sx, 1e-4, meta, 1);
    const double v4 = detail::pixel_noise_variance(x, sx, 4e-4, meta, 1);
    CHECK(v1 > 0.0);
    CHECK_THAT(v4 / v1, WithinRel(4.0, 0.05));

    SECTION("below the first step the reverse chain is skipped")
    {
        Enhancer e;
        e.kind = EnhancerKind::isr_se;
        e.model = small_model(ModelKind::diffusion);
        const double a = e.model->reference_rms / std::sqrt(mean_power(x.samples));
        ComplexSignal xs = x;
        for (auto& v : xs.samples)
            v *= a;
        ComplexSignal ref = istft(rgb_decode(rgb_encode(stft(xs, e.model->stft), e.model->codec, kFs)), kFs);
        for (auto& v : ref.samples)
            v /= a;
        const ComplexSignal y = enhance(e, x, {0.0, 0.0, 3});
        REQUIRE(y.size() == ref.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(std::abs(y.samples[i] - ref.samples[i]) <= 1e-12 * std::abs(ref.samples[i]) + 1e-12);
    }
}

TEST_CASE("method names", "[enhance]")
{
    for (EnhancerKind k : {EnhancerKind::isr_se, EnhancerKind::tsp, EnhancerKind::lms, EnhancerKind::cnn})
        CHECK(enhancer_kind_from(to_string(k)) == k);
    CHECK_THROWS_AS(enhancer_kind_from("rls"), std::invalid_argument);
}
