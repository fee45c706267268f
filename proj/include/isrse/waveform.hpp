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

// OFDM symbol grids, time-domain frames and the communication back end.

#include "fft.hpp"
#include "rng.hpp"
#include "scenario.hpp"

#include <cstdint>
#include <span>

namespace isrse {

enum class Modulation { QPSK, QAM16 };

inline int bits_per_symbol(Modulation m) { return m == Modulation::QPSK ? 2 : 4; }

using Bits = std::vector<std::uint8_t>;

namespace detail {
// Gray-coded PAM level for two bits, first bit selects the sign.
inline double pam4_level(std::uint8_t b0, std::uint8_t b1)
{
    const double mag = b1 ? 1.0 : 3.0;
    return b0 ? -mag : mag;
}
} // namespace detail

// Gray-mapped, unit mean energy. QPSK: bit 0 -> I sign, bit 1 -> Q sign,
// 0 meaning positive, so 00 -> (1+j)/sqrt2.
inline CVec modulate_bits(std::span<const std::uint8_t> bits, Modulation m)
{
    const auto bps = static_cast<std::size_t>(bits_per_symbol(m));
    if (bits.size() % bps != 0)
        throw std::invalid_argument("modulate_bits: bit count not divisible by bits per symbol");
    CVec out(bits.size() / bps);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto* b = &bits[i * bps];
        if (m == Modulation::QPSK) {
            const double s = 1.0 / std::sqrt(2.0);
            out[i] = {b[0] ? -s : s, b[1] ? -s : s};
        } else {
            const double s = 1.0 / std::sqrt(10.0);
            out[i] = {detail::pam4_level(b[0], b[1]) * s, detail::pam4_level(b[2], b[3]) * s};
        }
    }
    return out;
}

// Hard nearest-point decisions (the Gray maps are separable per axis).
inline void demap_symbol(cplx z, Modulation m, std::uint8_t* out)
{
    if (m == Modulation::QPSK) {
        out[0] = z.real() < 0.0;
        out[1] = z.imag() < 0.0;
        return;
    }
    const double s = std::sqrt(10.0);
    auto axis = [](double v, std::uint8_t* b) {
        b[0] = v < 0.0;
        b[1] = std::abs(v) < 2.0;
    };
    axis(z.real() * s, out);
    axis(z.imag() * s, out + 2);
}

inline Bits random_bits(Rng& rng, std::size_t n)
{
    Bits b(n);
    std::uniform_int_distribution<int> d(0, 1);
    for (auto& v : b)
        v = static_cast<std::uint8_t>(d(rng));
    return b;
}

struct SymbolGrid {
    Eigen::MatrixXcd data;                                      // N x M
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> pilot_mask; // N x M
    Modulation modulation = Modulation::QPSK;

    int n_subcarriers() const { return static_cast<int>(data.rows()); }
    int n_symbols() const { return static_cast<int>(data.cols()); }
};

inline bool is_pilot_symbol(int symbol, const SystemConfig& c) { return symbol % c.symbols_per_packet == 0; }

// A full ISAC frame: one full-band QPSK pilot symbol at the head of every
// packet, data on the rest.
struct IsacFrame {
    SymbolGrid grid;
    Eigen::MatrixXcd pilots; // N x M_s, the pilot symbol of every packet
    Bits data_bits;
};

inline IsacFrame make_isac_frame(const SystemConfig& c, Rng& data_rng, Rng& pilot_rng,
                                 Modulation data_mod = Modulation::QPSK)
{
    const int n = c.n_subcarriers;
    const int m = c.n_symbols();
    IsacFrame f;
    f.grid.data.resize(n, m);
    f.grid.pilot_mask.resize(n, m);
    f.grid.modulation = data_mod;
    f.pilots.resize(n, c.n_packets);
    const int n_data_symbols = m - c.n_packets;
    f.data_bits = random_bits(data_rng, static_cast<std::size_t>(n_data_symbols) * n * bits_per_symbol(data_mod));
    const CVec data = modulate_bits(f.data_bits, data_mod);
    const Bits pbits = random_bits(pilot_rng, static_cast<std::size_t>(c.n_packets) * n * 2);
    const CVec pilots = modulate_bits(pbits, Modulation::QPSK);
    std::size_t di = 0, pi = 0;
    for (int s = 0; s < m; ++s) {
        const bool pilot = is_pilot_symbol(s, c);
        for (int k = 0; k < n; ++k) {
            f.grid.pilot_mask(k, s) = pilot;
            if (pilot) {
                f.grid.data(k, s) = pilots[pi];
                f.pilots(k, s / c.symbols_per_packet) = pilots[pi];
                ++pi;
            } else {
                f.grid.data(k, s) = data[di++];
            }
        }
    }
    return f;
}

// Per symbol: unitary IDFT over the N subcarriers, cyclic prefix of
// round(T_g * B) samples, symbols concatenated. Sample rate = B.
inline ComplexSignal build_frame(const SymbolGrid& grid, const SystemConfig& c)
{
    const int n = c.n_subcarriers;
    if (grid.n_subcarriers() != n)
        throw std::invalid_argument("build_frame: grid rows do not match n_subcarriers");
    const int cp = c.cp_samples();
    const int len = n + cp;
    ComplexSignal sig;
    sig.sample_rate_hz = c.bandwidth_hz;
    sig.samples.resize(static_cast<std::size_t>(grid.n_symbols()) * len);
    CVec col(n), body(n);
    for (int s = 0; s < grid.n_symbols(); ++s) {
        for (int k = 0; k < n; ++k)
            col[k] = grid.data(k, s);
        idft_unitary(std::span<const cplx>(col), std::span<cplx>(body));
        cplx* out = &sig.samples[static_cast<std::size_t>(s) * len];
        for (int i = 0; i < cp; ++i)
            out[i] = body[n - cp + i];
        for (int i = 0; i < n; ++i)
            out[cp + i] = body[i];
    }
    return sig;
}

// CP removal and unitary DFT per symbol; raw (unequalized) observations,
// N x n_symbols.
inline Eigen::MatrixXcd demodulate_frame(const ComplexSignal& sig, const SystemConfig& c)
{
    const int n = c.n_subcarriers;
    const int cp = c.cp_samples();
    const std::size_t len = static_cast<std::size_t>(n + cp);
    if (sig.samples.empty() || sig.samples.size() % len != 0)
        throw std::invalid_argument("demodulate_frame: signal length is not a whole number of symbols");
    const int m = static_cast<int>(sig.samples.size() / len);
    Eigen::MatrixXcd obs(n, m);
    CVec spec(n);
    for (int s = 0; s < m; ++s) {
        std::span<const cplx> body(&sig.samples[s * len + cp], static_cast<std::size_t>(n));
        dft_unitary(body, std::span<cplx>(spec));
        for (int k = 0; k < n; ++k)
            obs(k, s) = spec[k];
    }
    return obs;
}

struct Detection {
    Bits bits;
    std::size_t erasures = 0; // tones with a zero channel coefficient
};

// One-tap equalizer followed by nearest-constellation decisions. Tones with
// a zero channel estimate are erasures and decode to zero bits.
inline Detection equalize_and_detect(const Eigen::MatrixXcd& obs, const Eigen::MatrixXcd& channel_est,
                                     Modulation m)
{
    if (obs.rows() != channel_est.rows() || obs.cols() != channel_est.cols())
        throw std::invalid_argument("equalize_and_detect: shape mismatch");
    const int bps = bits_per_symbol(m);
    Detection d;
    d.bits.assign(static_cast<std::size_t>(obs.size()) * bps, 0);
    std::size_t idx = 0;
    for (Eigen::Index s = 0; s < obs.cols(); ++s) {
        for (Eigen::Index k = 0; k < obs.rows(); ++k, idx += bps) {
            const cplx h = channel_est(k, s);
            if (h == cplx{0.0, 0.0}) {
                ++d.erasures;
                continue;
            }
            demap_symbol(obs(k, s) / h, m, &d.bits[idx]);
        }
    }
    return d;
}

inline double bit_error_rate(std::span<const std::uint8_t> tx, std::span<const std::uint8_t> rx)
{
    if (tx.size() != rx.size())
        throw std::invalid_argument("bit_error_rate: length mismatch");
    if (tx.empty())
        return 0.0;
    std::size_t errors = 0;
    for (std::size_t i = 0; i < tx.size(); ++i)
        errors += (tx[i] != 0) != (rx[i] != 0);
    return static_cast<double>(errors) / static_cast<double>(tx.size());
}

} // namespace isrse
