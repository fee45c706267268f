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
#include <isrse/tfr.hpp>

#include <catch_amalgamated.hpp>

using namespace isrse;
using Catch::Matchers::WithinAbs;

namespace {

ComplexSignal random_signal(Rng& rng, std::size_t n)
{
    ComplexSignal s{CVec(n), 1.0};
    for (auto& v : s.samples)
        v = complex_normal(rng, 1.0);
    return s;
}

// Sum of a few tones inside +-fs/4, scaled to the given peak STFT magnitude.
ComplexSignal bandlimited_signal(Rng& rng, std::size_t n, double fs, double peak)
{
    ComplexSignal s{CVec(n, cplx{}), fs};
    for (int k = 0; k < 6; ++k) {
        const double f = uniform(rng, -0.25, 0.25);
        const cplx a = std::polar(uniform(rng, 0.3, 1.0), uniform(rng, -kPi, kPi));
        for (std::size_t i = 0; i < n; ++i)
            s.samples[i] += a * std::polar(1.0, 2.0 * kPi * f * static_cast<double>(i));
    }
    const double m = stft(s).bins.cwiseAbs().maxCoeff();
    for (auto& v : s.samples)
        v *= peak / m;
    return s;
}

double snr_db(const CVec& ref, const CVec& x, std::size_t from, std::size_t to)
{
    double sp = 0.0, ep = 0.0;
    for (std::size_t i = from; i < to; ++i) {
        sp += std::norm(ref[i]);
        ep += std::norm(x[i] - ref[i]);
    }
    return 10.0 * std::log10(sp / ep);
}

} // namespace

TEST_CASE("STFT frame geometry and window", "[tfr]")
{
    const StftConfig c;
    CHECK(stft_frame_count(127, c) == 0);
    CHECK(stft_frame_count(128, c) == 1);
    CHECK(stft_frame_count(4096, c) == 497);
    const auto w = c.window();
    CHECK_THAT(w[0], WithinAbs(0.08, 1e-15));
    CHECK_THAT(w[127], WithinAbs(0.08, 1e-15));
    // COLA denominator stays well above zero.
    const auto d = wola_denominator_period(c);
    const double mx = *std::max_element(d.begin(), d.end());
    for (double v : d)
        CHECK(v > 0.9 * mx);
    CHECK(row_to_dft_index(0, 128) == 64);
    for (int k = 0; k < 128; ++k)
        CHECK(row_to_dft_index(dft_index_to_row(k, 128), 128) == k);
}

TEST_CASE("STFT against a direct DFT oracle", "[tfr]")
{
    SECTION("zero signal")
    {
        const Spectrogram s = stft({CVec(512, cplx{}), 1.0});
        CHECK(s.bins.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("integer tone peaks at its bin in every frame")
    {
        for (int k : {0, 5, 64, 100}) {
            ComplexSignal x{CVec(600), 1.0};
            for (std::size_t n = 0; n < x.size(); ++n)
                x.samples[n] = std::polar(1.0, 2.0 * kPi * k * static_cast<double>(n) / 128.0);
            const Spectrogram s = stft(x);
            for (int t = 0; t < s.frames(); ++t) {
                Eigen::Index r = 0;
                s.bins.col(t).cwiseAbs().maxCoeff(&r);
                CHECK(row_to_dft_index(static_cast<int>(r), 128) == k);
            }
        }
    }
    SECTION("bins equal the absolute-time windowed DFT; Parseval per frame")
    {
        Rng rng(3);
        const ComplexSignal x = random_signal(rng, 300);
        const StftConfig c;
        const Spectrogram s = stft(x, c);
        const auto w = c.window();
        for (int t = 0; t < s.frames(); ++t) {
            double e = 0.0;
            for (int n = 0; n < 128; ++n)
                e += std::norm(w[n] * x.samples[t * 8 + n]);
            CHECK_THAT(s.bins.col(t).squaredNorm(), WithinAbs(e, 1e-10 * e));
            for (int k : {0, 17, 90}) {
                cplx want{};
                for (int n = 0; n < 128; ++n) {
                    const double abs_n = t * 8 + n;
                    want += x.samples[t * 8 + n] * w[n] * std::polar(1.0, -2.0 * kPi * k * abs_n / 128.0);
                }
                want /= std::sqrt(128.0);
                CHECK(std::abs(s.bins(dft_index_to_row(k, 128), t) - want) < 1e-11);
            }
        }
    }
    SECTION("too short")
    {
        CHECK_THROWS_AS(stft({CVec(100), 1.0}), std::invalid_argument);
    }
}

TEST_CASE("ISTFT reconstruction", "[tfr]")
{
    Rng rng(11);
    SECTION("random signals, interior")
    {
        for (int k = 0; k < 5; ++k) {
            const ComplexSignal x = random_signal(rng, 1000 + 37 * k);
            const ComplexSignal y = istft(stft(x), 1.0);
            REQUIRE(y.size() == x.size());
            const std::size_t covered = static_cast<std::size_t>(stft_frame_count(x.size(), {}) - 1) * 8 + 128;
            for (std::size_t i = 0; i < covered; ++i)
                CHECK(std::abs(y.samples[i] - x.samples[i]) < 1e-10);
            for (std::size_t i = covered; i < x.size(); ++i)
                CHECK(y.samples[i] == cplx{});
        }
    }
    SECTION("zero spectrogram gives zero signal")
    {
        Spectrogram s = stft({CVec(400, cplx(1, 1)), 1.0});
        s.bins.setZero();
        for (const auto& v : istft(s).samples)
            CHECK(v == cplx{});
    }
    SECTION("delayed impulse")
    {
        ComplexSignal x{CVec(512, cplx{}), 1.0};
        x.samples[201] = 1.0;
        const ComplexSignal y = istft(stft(x));
        for (std::size_t i = 0; i < 504; ++i)
            CHECK(std::abs(y.samples[i] - x.samples[i]) < 1e-12);
    }
    SECTION("inconsistent metadata")
    {
        Spectrogram s = stft(random_signal(rng, 400));
        s.origin_len = 1000;
        CHECK_THROWS_AS(istft(s), std::invalid_argument);
    }
}

TEST_CASE("RGB level endpoints", "[tfr]")
{
    const RgbCodecMeta m = default_codec_meta(1000.0, 100e6);
    CHECK(quantize_level(red_level(1000.0, m)) == 255);
    CHECK(quantize_level(blue_level(-kPi)) == 0);
    CHECK(quantize_level(blue_level(kPi)) == 255);
    CHECK(quantize_level(green_level(-50e6, m)) == 0);
    CHECK(quantize_level(green_level(50e6, m)) == 255);
    CHECK(quantize_level(-3.0) == 0);
    CHECK(quantize_level(1e9) == 255);
    CHECK(quantize_level(std::nan("")) == 0);
    CHECK(quantize_level(127.5) == 128);
    CHECK_THAT(magnitude_from_red(0.0, m), WithinAbs(1.0 - m.epsilon, 1e-15));
    CHECK_THAT(phase_from_blue(0.0), WithinAbs(-kPi, 1e-15));
    CHECK_THROWS_AS((RgbCodecMeta{0.0, 1e-8, -1, 1}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((RgbCodecMeta{1.0, 1e-8, 1, 1}.validate()), std::invalid_argument);
}

TEST_CASE("RGB codec", "[tfr]")
{
    Rng rng(5);
    const double fs = 100e6;
    const double m_max = 1000.0;
    const RgbCodecMeta meta = default_codec_meta(m_max, fs);
    const ComplexSignal x = bandlimited_signal(rng, 4000, fs, m_max);
    const Spectrogram s = stft(x);
    const RgbImage img = rgb_encode(s, meta, fs);

    SECTION("tiling")
    {
        CHECK(img.tiles.size() == static_cast<std::size_t>((s.frames() + 127) / 128));
        CHECK(img.pad_frames == static_cast<int>(img.tiles.size()) * 128 - s.frames());
        for (int r = 0; r < 128; ++r)
            CHECK(img.tiles[0].at(1, r, 5) == quantize_level(green_level(bin_frequency(r, 128, fs), meta)));
        const RgbTile& last = img.tiles.back();
        for (int col = 128 - img.pad_frames; col < 128; ++col)
            CHECK(last.at(0, 3, col) == 0);
    }
    SECTION("per-pixel magnitude and phase bounds")
    {
        const Spectrogram d = rgb_decode(img);
        const double bound = std::pow(m_max + meta.epsilon, 1.0 / 510.0) - 1.0;
        const double floor = m_max * 1e-3; // -60 dB in magnitude
        int checked = 0;
        for (Eigen::Index i = 0; i < s.bins.size(); ++i) {
            const cplx a = s.bins.data()[i], b = d.bins.data()[i];
            if (std::abs(a) < floor)
                continue;
            ++checked;
            CHECK(std::abs(std::abs(b) - std::abs(a)) / std::abs(a) <= bound * (1 + 1e-9));
            double dphi = std::abs(std::arg(b) - std::arg(a));
            dphi = std::min(dphi, 2 * kPi - dphi);
            CHECK(dphi <= kPi / 255 + 1e-12);
        }
        CHECK(checked > 1000);
    }
    SECTION("re-encoding is idempotent")
    {
        const RgbImage again = rgb_encode(rgb_decode(img), meta, fs);
        REQUIRE(again.tiles.size() == img.tiles.size());
        for (std::size_t t = 0; t < img.tiles.size(); ++t)
            CHECK(again.tiles[t] == img.tiles[t]);
    }
    SECTION("end-to-end signal path")
    {
        for (int k = 0; k < 5; ++k) {
            const ComplexSignal y = bandlimited_signal(rng, 3000, fs, m_max * uniform(rng, 0.3, 1.0));
            const ComplexSignal r = istft(rgb_decode(rgb_encode(stft(y), meta, fs)), fs);
            CHECK(snr_db(y.samples, r.samples, 128, 2800) >= 40.0);
        }
    }
    SECTION("all-black image")
    {
        RgbImage black = img;
        for (auto& t : black.tiles)
            std::fill(t.pixels.begin(), t.pixels.end(), 0);
        const Spectrogram d = rgb_decode(black);
        CHECK_THAT(std::abs(d.bins(0, 0)), WithinAbs(1.0 - meta.epsilon, 1e-12));
        CHECK_THAT(std::abs(std::arg(d.bins(0, 0))), WithinAbs(kPi, 1e-12));
    }
    SECTION("inconsistent tiles")
    {
        RgbImage bad = img;
        bad.tiles.pop_back();
        CHECK_THROWS_AS(rgb_decode(bad), std::invalid_argument);
    }
}

TEST_CASE("magnitude quantile", "[tfr]")
{
    Spectrogram s;
    s.bins.resize(10, 10);
    for (int i = 0; i < 100; ++i)
        s.bins.data()[i] = cplx(i + 1, 0);
    CHECK(magnitude_quantile({s}, 1.0) == 100.0);
    CHECK(magnitude_quantile({s}, 0.0) == 1.0);
    CHECK(magnitude_quantile({s}, 0.5) == 50.0);
    CHECK_THROWS_AS(magnitude_quantile({}, 0.5), std::invalid_argument);
}
