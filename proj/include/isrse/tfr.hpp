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

// Hamming-windowed STFT / weighted overlap-add ISTFT and the RGB
// spectrogram codec (R: log magnitude, G: frequency, B: phase).

#include "fft.hpp"

#include <array>
#include <cstdint>

namespace isrse {

struct StftConfig {
    int window_length = 128;
    int hop = 8;
    int fft_size = 128;
    bool two_sided = true;

    std::vector<double> window() const
    {
        std::vector<double> w(window_length);
        for (int n = 0; n < window_length; ++n)
            w[n] = 0.54 - 0.46 * std::cos(2.0 * kPi * n / (window_length - 1));
        return w;
    }
};

inline int stft_frame_count(std::size_t len, const StftConfig& c)
{
    if (len < static_cast<std::size_t>(c.window_length))
        return 0;
    return static_cast<int>((len - c.window_length) / c.hop) + 1;
}

// Steady-state sum of squared shifted windows, one period of length hop.
inline std::vector<double> wola_denominator_period(const StftConfig& c)
{
    const auto w = c.window();
    std::vector<double> d(c.hop, 0.0);
    for (int n = 0; n < c.window_length; ++n)
        d[n % c.hop] += w[n] * w[n];
    return d;
}

struct Spectrogram {
    Eigen::MatrixXcd bins; // fft_size x frames, rows ordered from -fs/2 upwards
    std::size_t origin_len = 0;
    StftConfig cfg;

    int frames() const { return static_cast<int>(bins.cols()); }
};

// Row r of the two-sided spectrogram holds DFT index (r + fft/2) mod fft.
inline int row_to_dft_index(int row, int fft) { return (row + fft / 2) % fft; }
inline int dft_index_to_row(int k, int fft) { return (k + fft / 2) % fft; }

// Y(t, f) = sum_n y(n) w(n - t) e^{-j 2 pi f n}: the phase is referenced to
// absolute sample time, so a stationary tone keeps a constant phase across
// frames. Unitary scaling: sum_f |Y|^2 = sum |w y|^2 per frame.
inline Spectrogram stft(const ComplexSignal& sig, const StftConfig& c = {})
{
    if (c.hop < 1 || c.hop > c.window_length || c.fft_size != c.window_length)
        throw std::invalid_argument("stft: unsupported configuration");
    if (sig.samples.size() < static_cast<std::size_t>(c.window_length))
        throw std::invalid_argument("stft: signal shorter than one window");
    const int frames = stft_frame_count(sig.samples.size(), c);
    const auto w = c.window();
    const int nfft = c.fft_size;
    Spectrogram s;
    s.cfg = c;
    s.origin_len = sig.samples.size();
    s.bins.resize(nfft, frames);
    CVec seg(nfft), spec(nfft);
    for (int t = 0; t < frames; ++t) {
        const std::size_t start = static_cast<std::size_t>(t) * c.hop;
        for (int n = 0; n < nfft; ++n)
            seg[n] = sig.samples[start + n] * w[n];
        dft_unitary(std::span<const cplx>(seg), std::span<cplx>(spec));
        for (int k = 0; k < nfft; ++k) {
            const double ph = -2.0 * kPi * static_cast<double>(k) * static_cast<double>(start % nfft) / nfft;
            s.bins(dft_index_to_row(k, nfft), t) = spec[k] * std::polar(1.0, ph);
        }
    }
    return s;
}

// Weighted overlap-add with squared-window normalization. Samples beyond the
// last full frame are not covered by any window and come out as zero.
inline ComplexSignal istft(const Spectrogram& s, double sample_rate_hz = 1.0)
{
    const StftConfig& c = s.cfg;
    const int nfft = c.fft_size;
    if (s.bins.rows() != nfft || s.frames() != stft_frame_count(s.origin_len, c))
        throw std::invalid_argument("istft: spectrogram metadata is inconsistent");
    const auto w = c.window();
    ComplexSignal out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.assign(s.origin_len, cplx{});
    std::vector<double> den(s.origin_len, 0.0);
    CVec spec(nfft), seg(nfft);
    for (int t = 0; t < s.frames(); ++t) {
        const std::size_t start = static_cast<std::size_t>(t) * c.hop;
        for (int k = 0; k < nfft; ++k) {
            const double ph = 2.0 * kPi * static_cast<double>(k) * static_cast<double>(start % nfft) / nfft;
            spec[k] = s.bins(dft_index_to_row(k, nfft), t) * std::polar(1.0, ph);
        }
        idft_unitary(std::span<const cplx>(spec), std::span<cplx>(seg));
        for (int n = 0; n < nfft; ++n) {
            out.samples[start + n] += w[n] * seg[n];
            den[start + n] += w[n] * w[n];
        }
    }
    const std::size_t covered = s.frames() == 0 ? 0 : static_cast<std::size_t>(s.frames() - 1) * c.hop + nfft;
    for (std::size_t i = 0; i < covered; ++i) {
        if (den[i] < 1e-12)
            throw std::invalid_argument("istft: degenerate overlap-add normalization");
        out.samples[i] /= den[i];
    }
    return out;
}

struct RgbCodecMeta {
    double m_max = 1.0;
    double epsilon = 1e-8;
    double f_min = -0.5;
    double f_max = 0.5;

    void validate() const
    {
        if (!(m_max > 0.0))
            throw std::invalid_argument("RgbCodecMeta: m_max must be > 0");
        if (!(f_min < f_max))
            throw std::invalid_argument("RgbCodecMeta: f_min must be < f_max");
        if (!(epsilon > 0.0))
            throw std::invalid_argument("RgbCodecMeta: epsilon must be > 0");
    }
};

// Two-sided band [-fs/2, fs/2].
inline RgbCodecMeta default_codec_meta(double m_max, double sample_rate_hz)
{
    return {m_max, 1e-8, -sample_rate_hz / 2.0, sample_rate_hz / 2.0};
}

inline double red_level(double magnitude, const RgbCodecMeta& m)
{
    return std::log(magnitude + m.epsilon) / std::log(m.m_max + m.epsilon) * 255.0;
}
inline double green_level(double f, const RgbCodecMeta& m) { return (f - m.f_min) / (m.f_max - m.f_min) * 255.0; }
inline double blue_level(double phase) { return (phase + kPi) / (2.0 * kPi) * 255.0; }

inline std::uint8_t quantize_level(double v)
{
    if (!(v > 0.0))
        return 0; // also maps NaN to 0
    if (v >= 255.0)
        return 255;
    return static_cast<std::uint8_t>(std::lround(v));
}

inline double magnitude_from_red(double r, const RgbCodecMeta& m)
{
    return std::exp(r / 255.0 * std::log(m.m_max + m.epsilon)) - m.epsilon;
}
inline double phase_from_blue(double b) { return b / 255.0 * 2.0 * kPi - kPi; }

// 8-bit, 3 x size x size tile stored channel-planar (R, G, B), row-major.
struct RgbTile {
    static constexpr int kChannels = 3;
    int size = 128;
    std::vector<std::uint8_t> pixels;

    explicit RgbTile(int n = 128) : size(n), pixels(static_cast<std::size_t>(kChannels) * n * n, 0) {}

    std::uint8_t& at(int ch, int row, int col) { return pixels[(static_cast<std::size_t>(ch) * size + row) * size + col]; }
    std::uint8_t at(int ch, int row, int col) const
    {
        return pixels[(static_cast<std::size_t>(ch) * size + row) * size + col];
    }
    bool operator==(const RgbTile&) const = default;
};

struct RgbImage {
    std::vector<RgbTile> tiles;
    RgbCodecMeta meta;
    int pad_frames = 0;
    std::size_t origin_len = 0;
    StftConfig cfg;
    double sample_rate_hz = 1.0;
};

inline double bin_frequency(int row, int fft, double fs) { return (row - fft / 2) * fs / fft; }

// Tiles are fft_size rows (frequency) by fft_size columns (frames); the last
// tile is zero-padded in time.
inline RgbImage rgb_encode(const Spectrogram& s, const RgbCodecMeta& meta, double sample_rate_hz)
{
    meta.validate();
    const int n = s.cfg.fft_size;
    const int frames = s.frames();
    const int n_tiles = (frames + n - 1) / n;
    RgbImage img;
    img.meta = meta;
    img.cfg = s.cfg;
    img.origin_len = s.origin_len;
    img.sample_rate_hz = sample_rate_hz;
    img.pad_frames = n_tiles * n - frames;
    img.tiles.assign(n_tiles, RgbTile(n));
    std::vector<std::uint8_t> green(n);
    for (int r = 0; r < n; ++r)
        green[r] = quantize_level(green_level(bin_frequency(r, n, sample_rate_hz), meta));
    for (int ti = 0; ti < n_tiles; ++ti) {
        RgbTile& tile = img.tiles[ti];
        for (int col = 0; col < n; ++col) {
            const int t = ti * n + col;
            for (int r = 0; r < n; ++r) {
                const cplx y = t < frames ? s.bins(r, t) : cplx{};
                tile.at(0, r, col) = quantize_level(red_level(std::abs(y), meta));
                tile.at(1, r, col) = green[r];
                tile.at(2, r, col) = quantize_level(blue_level(std::arg(y)));
            }
        }
    }
    return img;
}

// G is positional only and is not read back.
inline Spectrogram rgb_decode(const RgbImage& img)
{
    img.meta.validate();
    if (img.origin_len == 0)
        throw std::invalid_argument("rgb_decode: missing origin length");
    const int n = img.cfg.fft_size;
    const int frames = stft_frame_count(img.origin_len, img.cfg);
    if (static_cast<int>(img.tiles.size()) * n - img.pad_frames != frames)
        throw std::invalid_argument("rgb_decode: tile count / padding inconsistent with origin length");
    Spectrogram s;
    s.cfg = img.cfg;
    s.origin_len = img.origin_len;
    s.bins.resize(n, frames);
    std::array<double, 256> mag{}, ph{};
    for (int v = 0; v < 256; ++v) {
        mag[v] = magnitude_from_red(v, img.meta);
        ph[v] = phase_from_blue(v);
    }
    for (int t = 0; t < frames; ++t) {
        const RgbTile& tile = img.tiles[t / n];
        const int col = t % n;
        for (int r = 0; r < n; ++r)
            s.bins(r, t) = std::polar(mag[tile.at(0, r, col)], ph[tile.at(2, r, col)]);
    }
    return s;
}

// q-quantile of all STFT magnitudes over a set of spectrograms.
inline double magnitude_quantile(const std::vector<Spectrogram>& specs, double q)
{
    std::vector<double> mags;
    for (const auto& s : specs)
        for (Eigen::Index i = 0; i < s.bins.size(); ++i)
            mags.push_back(std::abs(s.bins.data()[i]));
    if (mags.empty())
        throw std::invalid_argument("magnitude_quantile: no data");
    const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(mags.size() - 1));
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
    return mags[k];
}

} // namespace isrse
