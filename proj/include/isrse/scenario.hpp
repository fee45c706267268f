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

// Physical and waveform configuration, bistatic geometry and per-path
// ground truth.

#include "common.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <type_traits>

namespace isrse {

struct ArrayGeometry {
    int mx = 4;
    int my = 4;
    double spacing_wavelengths = 0.5;

    int size() const { return mx * my; }
};

struct SystemConfig {
    double total_power_dbm = 30.0;
    double carrier_freq_hz = 28e9;
    double bandwidth_hz = 100e6;
    int n_subcarriers = 1024;
    double subcarrier_spacing_hz = 100e6 / 1024.0;
    double cp_duration_s = 3.34e-6;
    int n_packets = 64;
    int symbols_per_packet = 14;
    int n_paths = 3;
    double rician_k = 10.0;
    double speed_of_light = 3e8;
    double noise_psd_dbm_hz = -174.0;
    double beam_power_factor = 0.5;
    double beam_phase = 0.0;
    ArrayGeometry tx_array{8, 8, 0.5};
    ArrayGeometry rx_array{8, 8, 0.5};
    std::uint64_t seed = 1;

    double wavelength() const { return speed_of_light / carrier_freq_hz; }
    double total_power_w() const { return 1e-3 * db_to_linear(total_power_dbm); }
    // Noise variance per complex sample over the full band.
    double noise_power_w() const { return 1e-3 * db_to_linear(noise_psd_dbm_hz + linear_to_db(bandwidth_hz)); }
    int cp_samples() const { return static_cast<int>(std::lround(cp_duration_s * bandwidth_hz)); }
    int n_symbols() const { return n_packets * symbols_per_packet; }
    int frame_samples() const { return n_symbols() * (n_subcarriers + cp_samples()); }
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline void validate(const SystemConfig& c)
{
    auto fail = [](const std::string& key, const std::string& why) {
        throw std::invalid_argument("config key '" + key + "': " + why);
    };
    if (!is_power_of_two(c.n_subcarriers))
        fail("n_subcarriers", "must be a positive power of two");
    if (!(c.beam_power_factor >= 0.0 && c.beam_power_factor <= 1.0))
        fail("beam_power_factor", "beta_R must lie in [0, 1]");
    if (!(c.rician_k >= 0.0))
        fail("rician_k", "must be >= 0");
    if (c.n_paths < 0)
        fail("n_paths", "must be >= 0");
    if (!(c.bandwidth_hz > 0.0))
        fail("bandwidth_hz", "must be > 0");
    if (!(c.carrier_freq_hz > 0.0))
        fail("carrier_freq_hz", "must be > 0");
    if (!(c.cp_duration_s >= 0.0))
        fail("cp_duration_s", "must be >= 0");
    if (c.n_packets < 1)
        fail("n_packets", "must be >= 1");
    if (c.symbols_per_packet < 1)
        fail("symbols_per_packet", "must be >= 1");
    if (!(c.speed_of_light > 0.0))
        fail("speed_of_light", "must be > 0");
    const double df = c.bandwidth_hz / c.n_subcarriers;
    if (std::abs(c.subcarrier_spacing_hz - df) > 1e-9 * df)
        fail("subcarrier_spacing_hz", "must equal bandwidth_hz / n_subcarriers");
    for (const auto& [name, a] : {std::pair{"tx_array", c.tx_array}, std::pair{"rx_array", c.rx_array}}) {
        if (a.mx < 1 || a.my < 1)
            fail(std::string(name) + ".mx/my", "array dimensions must be >= 1");
        if (std::abs(a.spacing_wavelengths - 0.5) > 1e-12)
            fail(std::string(name) + ".spacing_wavelengths", "only half-wavelength spacing is supported");
    }
}

// Full-scale reference profile; equal to the SystemConfig defaults.
inline SystemConfig paper_profile() { return SystemConfig{}; }

// Desk-scale profile used by tests, CI and the acceptance suite.
inline SystemConfig desk_profile()
{
    SystemConfig c;
    c.n_subcarriers = 256;
    c.subcarrier_spacing_hz = c.bandwidth_hz / c.n_subcarriers;
    c.cp_duration_s = 0.32e-6; // 32 samples at 100 MHz
    c.n_packets = 32;
    c.symbols_per_packet = 2;
    c.rician_k = 1.0;
    c.tx_array = {4, 4, 0.5};
    c.rx_array = {4, 4, 0.5};
    return c;
}

inline std::optional<SystemConfig> profile_by_name(const std::string& name)
{
    if (name == "paper")
        return paper_profile();
    if (name == "desk")
        return desk_profile();
    return std::nullopt;
}

namespace detail {

template <class T>
void read_key(const boost::property_tree::ptree& pt, const std::string& key, T& out)
{
    for (const std::string& path : {"system." + key, key}) {
        if (auto v = pt.get_optional<std::string>(path)) {
            std::istringstream is(*v);
            T parsed{};
            if (!(is >> parsed) || !(is >> std::ws).eof())
                throw std::invalid_argument("config key '" + key + "': cannot parse value '" + *v + "'");
            out = parsed;
            return;
        }
    }
}

inline void read_array(const boost::property_tree::ptree& pt, const std::string& section, ArrayGeometry& a)
{
    auto get = [&](const std::string& key, auto& out) {
        if (auto v = pt.get_optional<std::string>(section + "." + key)) {
            std::istringstream is(*v);
            std::remove_reference_t<decltype(out)> parsed{};
            if (!(is >> parsed) || !(is >> std::ws).eof())
                throw std::invalid_argument("config key '" + section + "." + key + "': cannot parse value '" + *v + "'");
            out = parsed;
        }
    };
    get("mx", a.mx);
    get("my", a.my);
    get("spacing_wavelengths", a.spacing_wavelengths);
}

} // namespace detail

// Parses INI-style text ("key = value" lines grouped under [system],
// [tx_array] and [rx_array]); omitted keys keep the values in `base`.
inline SystemConfig parse_config(std::istream& in, SystemConfig base = paper_profile())
{
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::ini_parser::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    SystemConfig c = base;
    std::optional<double> spacing;
    detail::read_key(pt, "total_power_dbm", c.total_power_dbm);
    detail::read_key(pt, "carrier_freq_hz", c.carrier_freq_hz);
    detail::read_key(pt, "bandwidth_hz", c.bandwidth_hz);
    detail::read_key(pt, "n_subcarriers", c.n_subcarriers);
    detail::read_key(pt, "cp_duration_s", c.cp_duration_s);
    detail::read_key(pt, "n_packets", c.n_packets);
    detail::read_key(pt, "symbols_per_packet", c.symbols_per_packet);
    detail::read_key(pt, "n_paths", c.n_paths);
    detail::read_key(pt, "rician_k", c.rician_k);
    detail::read_key(pt, "speed_of_light", c.speed_of_light);
    detail::read_key(pt, "noise_psd_dbm_hz", c.noise_psd_dbm_hz);
    detail::read_key(pt, "beam_power_factor", c.beam_power_factor);
    detail::read_key(pt, "beam_phase", c.beam_phase);
    detail::read_key(pt, "seed", c.seed);
    double s = 0.0;
    bool has_spacing = false;
    for (const char* path : {"system.subcarrier_spacing_hz", "subcarrier_spacing_hz"})
        if (pt.get_optional<std::string>(path))
            has_spacing = true;
    if (has_spacing) {
        detail::read_key(pt, "subcarrier_spacing_hz", s);
        spacing = s;
    }
    detail::read_array(pt, "tx_array", c.tx_array);
    detail::read_array(pt, "rx_array", c.rx_array);
    c.subcarrier_spacing_hz = spacing ? *spacing : c.bandwidth_hz / c.n_subcarriers;
    validate(c);
    return c;
}

inline SystemConfig load_config(const std::filesystem::path& path, SystemConfig base = paper_profile())
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open config file " + path.string());
    return parse_config(in, base);
}

struct OfdmTiming {
    double symbol_duration_s; // T_s = 1/df + T_g
    double csi_interval_s;    // T_p = P_s * T_s
};

inline OfdmTiming derive_ofdm_timing(const SystemConfig& c)
{
    const double ts = 1.0 / c.subcarrier_spacing_hz + c.cp_duration_s;
    return {ts, c.symbols_per_packet * ts};
}

struct Target {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    cplx reflect_coeff{1.0, 0.0};
};

enum class PathKind { LoS, NLoS };

struct PathTruth {
    PathKind kind = PathKind::LoS;
    cplx gain{0.0, 0.0};
    double delay_s = 0.0;
    double doppler_hz = 0.0;
    AnglePair aoa; // at the receiver, pointing towards the source
    AnglePair aod; // at the transmitter, pointing towards the next hop
};

// Total Tx->target->Rx path length and its rate of change.
inline double bistatic_range_m(const PathTruth& p, const SystemConfig& c) { return p.delay_s * c.speed_of_light; }
inline double bistatic_velocity_mps(const PathTruth& p, const SystemConfig& c) { return p.doppler_hz * c.wavelength(); }

// One LoS path plus one single-bounce NLoS path per target. Endpoints are
// static; Doppler is (d/dt)(d1 + d2) / lambda.
inline std::vector<PathTruth> ground_truth_paths(const SystemConfig& c, const Vec3& tx_pos, const Vec3& rx_pos,
                                                 const std::vector<Target>& targets)
{
    const double eps = 1e-9;
    const double d_los = (rx_pos - tx_pos).norm();
    if (d_los < eps)
        throw std::invalid_argument("ground_truth_paths: transmitter and receiver coincide");
    const double lambda = c.wavelength();
    std::vector<PathTruth> out;
    out.reserve(targets.size() + 1);

    PathTruth los;
    los.kind = PathKind::LoS;
    los.gain = lambda / (4.0 * kPi * d_los);
    los.delay_s = d_los / c.speed_of_light;
    los.doppler_hz = 0.0;
    los.aoa = angles_of(tx_pos - rx_pos);
    los.aod = angles_of(rx_pos - tx_pos);
    out.push_back(los);

    const double four_pi_15 = std::pow(4.0 * kPi, 1.5);
    for (const auto& t : targets) {
        if (std::abs(t.reflect_coeff) > 1.0 + 1e-12)
            throw std::invalid_argument("ground_truth_paths: |reflect_coeff| must be <= 1");
        const Vec3 a = t.position - tx_pos;
        const Vec3 b = rx_pos - t.position;
        const double d1 = a.norm();
        const double d2 = b.norm();
        if (d1 < eps || d2 < eps)
            throw std::invalid_argument("ground_truth_paths: target coincides with an endpoint");
        PathTruth p;
        p.kind = PathKind::NLoS;
        p.gain = lambda / (four_pi_15 * d1 * d2) * t.reflect_coeff;
        p.delay_s = (d1 + d2) / c.speed_of_light;
        const double rate = t.velocity.dot(a / d1) - t.velocity.dot(b / d2);
        p.doppler_hz = rate / lambda;
        p.aoa = angles_of(t.position - rx_pos);
        p.aod = angles_of(a);
        out.push_back(p);
    }
    return out;
}

} // namespace isrse
