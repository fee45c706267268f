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

// Rician multipath channel, per-subcarrier/per-packet response and the
// time-domain received stream.

#include "beamform.hpp"
#include "waveform.hpp"

namespace isrse {

struct RicianWeights {
    double los;
    double nlos;
};

inline RicianWeights rician_weights(double k)
{
    return {std::sqrt(k / (k + 1.0)), std::sqrt(1.0 / (k + 1.0))};
}

// h_{n,m} for every antenna, subcarrier n < N and packet m < M_s.
struct ChannelRealization {
    std::vector<PathTruth> paths;
    int n_antennas = 0;
    int n_subcarriers = 0;
    int n_packets = 0;
    CVec response; // antenna fastest, then subcarrier, then packet

    cplx& at(int a, int n, int m) { return response[index(a, n, m)]; }
    const cplx& at(int a, int n, int m) const { return response[index(a, n, m)]; }

    Eigen::Map<const Eigen::VectorXcd> snapshot(int n, int m) const
    {
        return {&response[index(0, n, m)], n_antennas};
    }

    std::size_t index(int a, int n, int m) const
    {
        return (static_cast<std::size_t>(m) * n_subcarriers + n) * n_antennas + a;
    }
};

// Sum over paths of w_R * beta_l * chi_{t,l} * e^{-j2pi n df tau_l}
// * e^{j2pi f_l m T_p} * alpha(q_{r,l}).
inline ChannelRealization channel_response(const std::vector<PathTruth>& paths, const SystemConfig& c,
                                           const BeamVector& tx_beam)
{
    if (tx_beam.weights.size() != c.tx_array.size())
        throw std::invalid_argument("channel_response: tx beam length does not match the tx array");
    ChannelRealization r;
    r.paths = paths;
    r.n_antennas = c.rx_array.size();
    r.n_subcarriers = c.n_subcarriers;
    r.n_packets = c.n_packets;
    r.response.assign(static_cast<std::size_t>(r.n_antennas) * r.n_subcarriers * r.n_packets, cplx{});
    const RicianWeights rw = rician_weights(c.rician_k);
    const double tp = derive_ofdm_timing(c).csi_interval_s;
    CVec delay_phase(c.n_subcarriers);
    for (const auto& p : paths) {
        const double w = p.kind == PathKind::LoS ? rw.los : rw.nlos;
        const cplx amp = w * p.gain * tx_gain(p.aod, tx_beam, c.tx_array);
        const Eigen::VectorXcd ar = steering_vector(c.rx_array, p.aoa);
        for (int n = 0; n < c.n_subcarriers; ++n)
            delay_phase[n] = std::polar(1.0, -2.0 * kPi * n * c.subcarrier_spacing_hz * p.delay_s);
        for (int m = 0; m < c.n_packets; ++m) {
            const cplx pm = amp * std::polar(1.0, 2.0 * kPi * p.doppler_hz * m * tp);
            for (int n = 0; n < c.n_subcarriers; ++n) {
                const cplx g = pm * delay_phase[n];
                cplx* h = &r.at(0, n, m);
                for (int a = 0; a < r.n_antennas; ++a)
                    h[a] += g * ar(a);
            }
        }
    }
    return r;
}

// Adds circularly-symmetric complex Gaussian noise with E|z|^2 = noise_power.
template <class Container>
void apply_awgn(Container& x, double noise_power, Rng& rng)
{
    if (!(noise_power >= 0.0))
        throw std::invalid_argument("apply_awgn: noise power must be >= 0");
    if (noise_power == 0.0)
        return;
    std::normal_distribution<double> nd(0.0, std::sqrt(noise_power / 2.0));
    for (auto& v : x) {
        const double re = nd(rng);
        const double im = nd(rng);
        v += cplx{re, im};
    }
}

inline void apply_awgn(Eigen::MatrixXcd& x, double noise_power, Rng& rng)
{
    std::span<cplx> s(x.data(), static_cast<std::size_t>(x.size()));
    apply_awgn(s, noise_power, rng);
}

namespace detail {

inline void check_time_signal(const ComplexSignal& tx, const ChannelRealization& real, const SystemConfig& c)
{
    if (static_cast<std::size_t>(c.frame_samples()) != tx.samples.size())
        throw std::invalid_argument("received_time_signal: transmit stream does not match the frame structure");
    const double frame_s = static_cast<double>(tx.samples.size()) / c.bandwidth_hz;
    for (const auto& p : real.paths)
        if (p.delay_s >= frame_s)
            throw std::invalid_argument("received_time_signal: path delay exceeds the frame duration");
}

} // namespace detail

// Noiseless per-antenna streams. Each path's delay is applied as a
// frequency-domain phase ramp per OFDM symbol and its Doppler as a constant
// phase per packet, i.e. each received symbol carries H_{n,m} * s_{n,m}
// with a cyclic prefix regenerated from the delayed body.
inline std::vector<ComplexSignal> received_array_signals(const ComplexSignal& tx, const ChannelRealization& real,
                                                         const SystemConfig& c)
{
    detail::check_time_signal(tx, real, c);
    const Eigen::MatrixXcd x = demodulate_frame(tx, c);
    std::vector<ComplexSignal> out(real.n_antennas);
    SymbolGrid g;
    g.data.resize(x.rows(), x.cols());
    for (int a = 0; a < real.n_antennas; ++a) {
        for (Eigen::Index s = 0; s < x.cols(); ++s) {
            const int packet = static_cast<int>(s) / c.symbols_per_packet;
            for (Eigen::Index n = 0; n < x.rows(); ++n)
                g.data(n, s) = real.at(a, static_cast<int>(n), packet) * x(n, s);
        }
        out[a] = build_frame(g, c);
    }
    return out;
}

inline ComplexSignal received_time_signal(const ComplexSignal& tx, const ChannelRealization& real, int rx_antenna,
                                          const SystemConfig& c, Rng& rng, double noise_power)
{
    if (rx_antenna < 0 || rx_antenna >= real.n_antennas)
        throw std::invalid_argument("received_time_signal: antenna index out of range");
    detail::check_time_signal(tx, real, c);
    const Eigen::MatrixXcd x = demodulate_frame(tx, c);
    SymbolGrid g;
    g.data.resize(x.rows(), x.cols());
    for (Eigen::Index s = 0; s < x.cols(); ++s) {
        const int packet = static_cast<int>(s) / c.symbols_per_packet;
        for (Eigen::Index n = 0; n < x.rows(); ++n)
            g.data(n, s) = real.at(rx_antenna, static_cast<int>(n), packet) * x(n, s);
    }
    ComplexSignal y = build_frame(g, c);
    apply_awgn(y.samples, noise_power, rng);
    return y;
}

} // namespace isrse
