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

// Pilot-based CSI, spatially smoothed MUSIC, LS path separation and the
// delay-Doppler (range-velocity) map with peak extraction.

#include "channel.hpp"
#include "fft.hpp"

#include <Eigen/Eigenvalues>

#include <optional>

namespace isrse {

// h_hat for every antenna, pilot subcarrier and packet; same layout as
// ChannelRealization::response.
struct CsiStack {
    int n_antennas = 0;
    int n_subcarriers = 0;
    int n_packets = 0;
    CVec estimates;
    double noise_var = 0.0;

    std::size_t index(int a, int n, int m) const
    {
        return (static_cast<std::size_t>(m) * n_subcarriers + n) * n_antennas + a;
    }
    cplx at(int a, int n, int m) const { return estimates[index(a, n, m)]; }
    Eigen::Map<const Eigen::VectorXcd> snapshot(std::size_t k) const
    {
        return {&estimates[k * static_cast<std::size_t>(n_antennas)], n_antennas};
    }
    std::size_t n_snapshots() const { return static_cast<std::size_t>(n_subcarriers) * n_packets; }
};

// Frequency-domain observations on the pilot symbol of every packet,
// one N x M_s matrix per antenna.
inline std::vector<Eigen::MatrixXcd> pilot_observations(const std::vector<ComplexSignal>& streams, const SystemConfig& c)
{
    std::vector<Eigen::MatrixXcd> out;
    out.reserve(streams.size());
    for (const auto& s : streams) {
        const Eigen::MatrixXcd y = demodulate_frame(s, c);
        Eigen::MatrixXcd p(c.n_subcarriers, c.n_packets);
        for (int m = 0; m < c.n_packets; ++m)
            p.col(m) = y.col(static_cast<Eigen::Index>(m) * c.symbols_per_packet);
        out.push_back(std::move(p));
    }
    return out;
}

// h_hat = y / s on every pilot tone.
inline CsiStack estimate_channel(const std::vector<Eigen::MatrixXcd>& obs, const Eigen::MatrixXcd& pilots,
                                 double noise_var = 0.0)
{
    if (obs.empty())
        throw std::invalid_argument("estimate_channel: no antenna observations");
    CsiStack st;
    st.n_antennas = static_cast<int>(obs.size());
    st.n_subcarriers = static_cast<int>(pilots.rows());
    st.n_packets = static_cast<int>(pilots.cols());
    for (Eigen::Index i = 0; i < pilots.size(); ++i)
        if (std::abs(pilots.data()[i]) == 0.0)
            throw std::invalid_argument("estimate_channel: zero pilot symbol at flat index " + std::to_string(i));
    st.estimates.resize(static_cast<std::size_t>(st.n_antennas) * pilots.size());
    double mod2 = 0.0;
    for (int a = 0; a < st.n_antennas; ++a) {
        if (obs[a].rows() != pilots.rows() || obs[a].cols() != pilots.cols())
            throw std::invalid_argument("estimate_channel: observation shape does not match the pilot grid");
        for (int m = 0; m < st.n_packets; ++m)
            for (int n = 0; n < st.n_subcarriers; ++n)
                st.estimates[st.index(a, n, m)] = obs[a](n, m) / pilots(n, m);
    }
    for (Eigen::Index i = 0; i < pilots.size(); ++i)
        mod2 += std::norm(pilots.data()[i]);
    st.noise_var = noise_var * static_cast<double>(pilots.size()) / mod2;
    return st;
}

// R = sum h h^H / (M_s N)
inline Eigen::MatrixXcd covariance(const CsiStack& st)
{
    const auto k = static_cast<Eigen::Index>(st.n_snapshots());
    Eigen::Map<const Eigen::MatrixXcd> h(st.estimates.data(), st.n_antennas, k);
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(st.n_antennas, st.n_antennas);
    r.selfadjointView<Eigen::Lower>().rankUpdate(h, 1.0 / static_cast<double>(k));
    Eigen::MatrixXcd full = r.selfadjointView<Eigen::Lower>();
    return full;
}

struct Subarray {
    int sx = 0;
    int sy = 0;
};

inline Subarray default_subarray(const ArrayGeometry& g) { return {std::max(1, g.mx - 1), std::max(1, g.my - 1)}; }

// Forward spatial smoothing: average of all overlapping sx x sy subarray
// covariances taken from the full-array covariance.
inline Eigen::MatrixXcd spatial_smooth(const Eigen::MatrixXcd& r_full, const ArrayGeometry& g, Subarray sub)
{
    if (sub.sx < 1 || sub.sy < 1 || sub.sx > g.mx || sub.sy > g.my)
        throw std::invalid_argument("spatial_smooth: subarray " + std::to_string(sub.sx) + "x" + std::to_string(sub.sy) +
                                    " does not fit a " + std::to_string(g.mx) + "x" + std::to_string(g.my) + " array");
    if (r_full.rows() != g.size())
        throw std::invalid_argument("spatial_smooth: covariance size does not match the array");
    const int d = sub.sx * sub.sy;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
    std::vector<int> idx(d);
    int blocks = 0;
    for (int oy = 0; oy + sub.sy <= g.my; ++oy)
        for (int ox = 0; ox + sub.sx <= g.mx; ++ox) {
            for (int q = 0; q < sub.sy; ++q)
                for (int p = 0; p < sub.sx; ++p)
                    idx[q * sub.sx + p] = (oy + q) * g.mx + ox + p;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    out(i, j) += r_full(idx[i], idx[j]);
            ++blocks;
        }
    return out / static_cast<double>(blocks);
}

inline Eigen::MatrixXcd spatial_smooth(const CsiStack& st, const ArrayGeometry& g, Subarray sub)
{
    return spatial_smooth(covariance(st), g, sub);
}

// Angle grid in degrees: azimuth phi, elevation theta.
struct AngleGrid {
    double phi_min = -90.0, phi_max = 90.0;
    double theta_min = 0.0, theta_max = 90.0;
    double step = 0.5;

    int n_phi() const { return static_cast<int>(std::lround((phi_max - phi_min) / step)) + 1; }
    int n_theta() const { return static_cast<int>(std::lround((theta_max - theta_min) / step)) + 1; }
    double phi(int i) const { return phi_min + i * step; }
    double theta(int j) const { return theta_min + j * step; }
    AnglePair at(int i, int j) const { return {deg2rad(phi(i)), deg2rad(theta(j))}; }
};

struct MusicPeak {
    AnglePair grid;    // grid point
    AnglePair refined; // after per-axis quadratic refinement
    double value = 0.0;
};

struct MusicResult {
    AngleGrid grid;
    Eigen::MatrixXd spectrum; // n_phi x n_theta
    std::vector<MusicPeak> peaks;
    int assumed_sources = 0;
    bool low_confidence = false;
};

namespace detail {

// Vertex offset of the parabola through (-1, a), (0, b), (1, c), in [-0.5, 0.5].
inline double parabolic_offset(double a, double b, double c)
{
    const double den = a - 2.0 * b + c;
    if (!(std::abs(den) > 0.0))
        return 0.0;
    return std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
}

} // namespace detail

// P(q) = 1 / ||E_n^H alpha(q)||^2 over the grid, E_n spanning the eigenvectors
// beyond the K_s largest eigenvalues. `geom` is the (sub)array R belongs to.
// Reported peaks are at least `min_separation_deg` apart (never closer than
// 1.5 grid steps).
inline MusicResult music_spectrum(const Eigen::MatrixXcd& r, int k_s, const ArrayGeometry& geom,
                                  const AngleGrid& grid = {}, double min_separation_deg = 0.0)
{
    const int dim = static_cast<int>(r.rows());
    if (r.cols() != dim || dim != geom.size())
        throw std::invalid_argument("music_spectrum: covariance does not match the array");
    if (k_s < 0 || k_s >= dim)
        throw std::invalid_argument("music_spectrum: K_s = " + std::to_string(k_s) + " must be < " + std::to_string(dim));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
    // Ascending eigenvalues: the first dim - K_s vectors span the noise subspace.
    const Eigen::MatrixXcd en = es.eigenvectors().leftCols(dim - k_s);
    const Eigen::MatrixXcd enh = en.adjoint();

    MusicResult res;
    res.grid = grid;
    res.assumed_sources = k_s;
    const int np = grid.n_phi(), nt = grid.n_theta();
    res.spectrum.resize(np, nt);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < nt; ++j) {
            const Eigen::VectorXcd a = steering_vector(geom, grid.at(i, j));
            const double d = (enh * a).squaredNorm();
            res.spectrum(i, j) = 1.0 / std::max(d, 1e-300);
        }
    const double mx = res.spectrum.maxCoeff(), mn = res.spectrum.minCoeff();
    res.low_confidence = mx < 10.0 * mn;

    // Local maxima over the 8-neighbourhood (azimuth is not wrapped).
    struct Cand {
        int i, j;
        double v;
    };
    std::vector<Cand> cands;
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < nt; ++j) {
            const double v = res.spectrum(i, j);
            bool peak = true;
            for (int di = -1; di <= 1 && peak; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (!di && !dj)
                        continue;
                    const int a = i + di, b = j + dj;
                    if (a < 0 || a >= np || b < 0 || b >= nt)
                        continue;
                    if (res.spectrum(a, b) > v) {
                        peak = false;
                        break;
                    }
                }
            if (peak)
                cands.push_back({i, j, v});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.v > b.v; });
    const double min_sep = deg2rad(std::max(1.5 * grid.step, min_separation_deg));
    for (const auto& c : cands) {
        if (static_cast<int>(res.peaks.size()) >= k_s)
            break;
        const AnglePair q = grid.at(c.i, c.j);
        bool dup = false;
        for (const auto& p : res.peaks)
            dup = dup || angular_distance(p.grid, q) < min_sep;
        if (dup)
            continue;
        MusicPeak pk;
        pk.grid = q;
        pk.value = c.v;
        double di = 0.0, dj = 0.0;
        if (c.i > 0 && c.i + 1 < np)
            di = detail::parabolic_offset(std::log(res.spectrum(c.i - 1, c.j)), std::log(c.v),
                                          std::log(res.spectrum(c.i + 1, c.j)));
        if (c.j > 0 && c.j + 1 < nt)
            dj = detail::parabolic_offset(std::log(res.spectrum(c.i, c.j - 1)), std::log(c.v),
                                          std::log(res.spectrum(c.i, c.j + 1)));
        pk.refined = {deg2rad(grid.phi(c.i) + di * grid.step), deg2rad(grid.theta(c.j) + dj * grid.step)};
        res.peaks.push_back(pk);
    }
    return res;
}

// Eigen-gap rule: among k with lambda_k > 10 lambda_min (descending order),
// the largest k maximizing lambda_k / lambda_{k+1}. Returns `fallback` when
// the spectrum is degenerate (zero or non-finite trace).
inline int estimate_num_sources(const Eigen::MatrixXcd& r, int fallback = 0)
{
    const int dim = static_cast<int>(r.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r, Eigen::EigenvaluesOnly);
    Eigen::VectorXd lam = es.eigenvalues().reverse();
    const double top = lam(0);
    if (!(top > 0.0) || !std::isfinite(top))
        return fallback;
    for (auto& v : lam)
        v = std::max(v, 1e-15 * top);
    const double lmin = lam(dim - 1);
    int best = 0;
    double best_ratio = 0.0;
    for (int k = 1; k < dim; ++k) {
        if (!(lam(k - 1) > 10.0 * lmin))
            continue;
        const double ratio = lam(k - 1) / lam(k);
        if (ratio >= best_ratio) {
            best_ratio = ratio;
            best = k;
        }
    }
    return best;
}

// Scalar projection w^H h per (n, m), arranged packets x subcarriers.
inline Eigen::MatrixXcd separate_path(const CsiStack& st, const BeamVector& w)
{
    if (w.weights.size() != st.n_antennas)
        throw std::invalid_argument("separate_path: beamformer length does not match the antenna count");
    Eigen::MatrixXcd h(st.n_packets, st.n_subcarriers);
    for (int m = 0; m < st.n_packets; ++m)
        for (int n = 0; n < st.n_subcarriers; ++n)
            h(m, n) = w.weights.dot(st.snapshot(st.index(0, n, m) / st.n_antennas));
    return h;
}

struct RangeVelocityMap {
    Eigen::MatrixXd grid; // |S|, rows: Doppler (zero velocity at row M_s/2), cols: delay
    Eigen::MatrixXcd csi; // phase history behind the grid; empty: refine on the grid only
    double range_per_bin = 0.0;    // m of total path length
    double velocity_per_bin = 0.0; // m/s of range rate

    int doppler_bins() const { return static_cast<int>(grid.rows()); }
    int range_bins() const { return static_cast<int>(grid.cols()); }
    double bin_to_range(double p) const { return p * range_per_bin; }
    double bin_to_velocity(double row) const { return (row - doppler_bins() / 2) * velocity_per_bin; }
    double range_to_bin(double r) const { return r / range_per_bin; }
    double velocity_to_bin(double v) const { return v / velocity_per_bin + doppler_bins() / 2; }
    double unambiguous_range() const { return range_bins() * range_per_bin; }
    double unambiguous_velocity_span() const { return doppler_bins() * velocity_per_bin; }
};

struct MapScaling {
    double range_per_bin;
    double velocity_per_bin;
};

inline MapScaling map_scaling(const SystemConfig& c)
{
    const double tp = derive_ofdm_timing(c).csi_interval_s;
    return {c.speed_of_light / (c.n_subcarriers * c.subcarrier_spacing_hz), c.wavelength() / (c.n_packets * tp)};
}

// S = F_col H F_row^{-1}: unnormalized DFT down each column (packets), 1/N
// IDFT along each row (subcarriers), Doppler axis shifted so that zero
// velocity sits at row M_s/2. ||S||_F = sqrt(M_s / N) ||H||_F.
inline Eigen::MatrixXcd delay_doppler_transform(const Eigen::MatrixXcd& h)
{
    const Eigen::Index ms = h.rows(), n = h.cols();
    Eigen::MatrixXcd tmp(ms, n);
    CVec row(n), col(ms);
    for (Eigen::Index m = 0; m < ms; ++m) {
        for (Eigen::Index k = 0; k < n; ++k)
            row[k] = h(m, k);
        const CVec r = idft_plain(row);
        for (Eigen::Index k = 0; k < n; ++k)
            tmp(m, k) = r[k];
    }
    Eigen::MatrixXcd s(ms, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index m = 0; m < ms; ++m)
            col[m] = tmp(m, k);
        const CVec cc = dft_plain(col);
        for (Eigen::Index m = 0; m < ms; ++m)
            s((m + ms / 2) % ms, k) = cc[m];
    }
    return s;
}

inline RangeVelocityMap range_velocity_map(const Eigen::MatrixXcd& h, const MapScaling& sc)
{
    RangeVelocityMap m;
    m.grid = delay_doppler_transform(h).cwiseAbs();
    m.csi = h;
    m.range_per_bin = sc.range_per_bin;
    m.velocity_per_bin = sc.velocity_per_bin;
    return m;
}

namespace detail {

// |S| at a fractional (row, col) of the grid, by direct evaluation of the
// transform above.
inline double map_value_at(const Eigen::MatrixXcd& h, double row, double col)
{
    const Eigen::Index ms = h.rows(), n = h.cols();
    const double q = row - static_cast<double>(ms / 2);
    CVec ramp(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k)
        ramp[k] = std::polar(1.0, 2.0 * kPi * static_cast<double>(k) * col / static_cast<double>(n));
    cplx acc{};
    for (Eigen::Index m = 0; m < ms; ++m) {
        cplx r{};
        for (Eigen::Index k = 0; k < n; ++k)
            r += h(m, k) * ramp[k];
        acc += r * std::polar(1.0, -2.0 * kPi * static_cast<double>(m) * q / static_cast<double>(ms));
    }
    return std::abs(acc) / static_cast<double>(n);
}

// On whole-bin samples of the rectangular-window response the parabola
// vertex is pulled towards the bin centre by up to ~0.17 bin. Fit on
// half-bin samples around the best of three half-bin candidates, then once
// more at quarter-bin spacing.
template <class F>
double refine_axis(F value, double start)
{
    const double v0 = value(start);
    double c = start, vc = v0;
    for (double u : {start - 0.5, start + 0.5}) {
        const double v = value(u);
        if (v > vc) {
            c = u;
            vc = v;
        }
    }
    auto lg = [&vc](double x) { return std::log(std::max(x, 1e-12 * vc)); };
    for (double h : {0.5, 0.25}) {
        const double b = value(c);
        c += h * parabolic_offset(lg(value(c - h)), lg(b), lg(value(c + h)));
    }
    return c;
}

} // namespace detail

struct TargetEstimate {
    AnglePair aoa;
    double range_m = 0.0;
    double velocity_mps = 0.0;
    double peak_power = 0.0;
    double range_bin = 0.0;
    double doppler_row = 0.0;
};

// Local maxima (circular neighbourhood on both axes) whose power exceeds the
// median power by threshold_db, strongest first, at most max_targets. Bin
// positions are refined with a 3-point parabola on log magnitude, on
// half-bin samples of the underlying transform when the map carries it.
inline std::vector<TargetEstimate> extract_peaks(const RangeVelocityMap& map, double threshold_db,
                                                 const AnglePair& aoa = {}, int max_targets = 16)
{
    const int rows = map.doppler_bins(), cols = map.range_bins();
    std::vector<double> pw(map.grid.data(), map.grid.data() + map.grid.size());
    for (auto& v : pw)
        v *= v;
    std::nth_element(pw.begin(), pw.begin() + static_cast<std::ptrdiff_t>(pw.size() / 2), pw.end());
    const double med = pw[pw.size() / 2];
    const double thr = med * db_to_linear(threshold_db);
    auto at = [&](int r, int c) { return map.grid((r + rows) % rows, (c + cols) % cols); };
    std::vector<TargetEstimate> out;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double v = map.grid(r, c);
            if (!(v * v > thr))
                continue;
            bool peak = true;
            for (int dr = -1; dr <= 1 && peak; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    if (!dr && !dc)
                        continue;
                    const double u = at(r + dr, c + dc);
                    // Ties are broken towards the lower flat index.
                    if (u > v || (u == v && ((r + dr + rows) % rows) * cols + (c + dc + cols) % cols < r * cols + c)) {
                        peak = false;
                        break;
                    }
                }
            if (!peak)
                continue;
            TargetEstimate t;
            t.aoa = aoa;
            if (map.csi.rows() == rows && map.csi.cols() == cols) {
                t.range_bin = detail::refine_axis([&](double x) { return detail::map_value_at(map.csi, r, x); }, c);
                t.doppler_row = detail::refine_axis(
                    [&](double y) { return detail::map_value_at(map.csi, y, t.range_bin); }, r);
            } else {
                // Neighbours at rounding level carry no position information.
                auto lg = [v](double x) { return std::log(std::max(x, 1e-12 * v)); };
                t.doppler_row =
                    r + (rows >= 3 ? detail::parabolic_offset(lg(at(r - 1, c)), lg(v), lg(at(r + 1, c))) : 0.0);
                t.range_bin = c + (cols >= 3 ? detail::parabolic_offset(lg(at(r, c - 1)), lg(v), lg(at(r, c + 1))) : 0.0);
            }
            t.range_m = map.bin_to_range(t.range_bin);
            t.velocity_mps = map.bin_to_velocity(t.doppler_row);
            t.peak_power = v * v;
            out.push_back(t);
        }
    std::stable_sort(out.begin(), out.end(),
                     [](const TargetEstimate& a, const TargetEstimate& b) { return a.peak_power > b.peak_power; });
    if (static_cast<int>(out.size()) > max_targets)
        out.resize(static_cast<std::size_t>(max_targets));
    return out;
}

struct TruthTarget {
    PathKind kind = PathKind::NLoS;
    AnglePair aoa;
    double range_m = 0.0;
    double velocity_mps = 0.0;
};

inline std::vector<TruthTarget> truth_targets(const std::vector<PathTruth>& paths, const SystemConfig& c)
{
    std::vector<TruthTarget> out;
    for (const auto& p : paths)
        out.push_back({p.kind, p.aoa, bistatic_range_m(p, c), bistatic_velocity_mps(p, c)});
    return out;
}

struct ErrorCaps {
    double aoa_deg = 45.0;
    double range_m = 0.0;
    double velocity_mps = 0.0;
};

// Capped errors: half the unambiguous range / velocity span.
inline ErrorCaps error_caps(const MapScaling& sc, const SystemConfig& c)
{
    return {45.0, 0.5 * sc.range_per_bin * c.n_subcarriers, 0.5 * sc.velocity_per_bin * c.n_packets};
}

struct TargetMatch {
    int truth = -1;
    int estimate = -1; // -1: missed
    double aoa_err_deg = 0.0;
    double range_err_m = 0.0;
    double velocity_err_mps = 0.0;
};

struct SensingReport {
    std::vector<TargetEstimate> estimates;
    std::vector<TargetMatch> matches; // one per NLoS truth target
};

// Greedy injective association by distance in (range / range_res,
// velocity / velocity_res). LoS truths take part in the association so that
// the direct path cannot be mistaken for a target, but only NLoS truths are
// scored. Unmatched truths receive the capped error.
inline SensingReport associate(std::vector<TargetEstimate> est, const std::vector<TruthTarget>& truth,
                               const MapScaling& sc, const ErrorCaps& caps)
{
    SensingReport rep;
    rep.estimates = std::move(est);
    struct Pair {
        double d;
        int t, e;
    };
    std::vector<Pair> pairs;
    for (int t = 0; t < static_cast<int>(truth.size()); ++t)
        for (int e = 0; e < static_cast<int>(rep.estimates.size()); ++e) {
            const double dr = (rep.estimates[e].range_m - truth[t].range_m) / sc.range_per_bin;
            const double dv = (rep.estimates[e].velocity_mps - truth[t].velocity_mps) / sc.velocity_per_bin;
            pairs.push_back({std::hypot(dr, dv), t, e});
        }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
    std::vector<int> t2e(truth.size(), -1), e_used(rep.estimates.size(), 0);
    for (const auto& p : pairs)
        if (t2e[p.t] < 0 && !e_used[p.e]) {
            t2e[p.t] = p.e;
            e_used[p.e] = 1;
        }
    for (int t = 0; t < static_cast<int>(truth.size()); ++t) {
        if (truth[t].kind != PathKind::NLoS)
            continue;
        TargetMatch m;
        m.truth = t;
        m.estimate = t2e[t];
        if (m.estimate < 0) {
            m.aoa_err_deg = caps.aoa_deg;
            m.range_err_m = caps.range_m;
            m.velocity_err_mps = caps.velocity_mps;
        } else {
            const auto& e = rep.estimates[m.estimate];
            m.aoa_err_deg = std::min(caps.aoa_deg, rad2deg(angular_distance(e.aoa, truth[t].aoa)));
            m.range_err_m = std::min(caps.range_m, std::abs(e.range_m - truth[t].range_m));
            m.velocity_err_mps = std::min(caps.velocity_mps, std::abs(e.velocity_mps - truth[t].velocity_mps));
        }
        rep.matches.push_back(m);
    }
    return rep;
}

struct SensingConfig {
    std::optional<Subarray> subarray; // default (mx-1) x (my-1)
    AngleGrid grid;
    int num_sources = 0; // 0: eigen-gap estimate
    double threshold_db = 12.0;
    int peaks_per_direction = 1;
    std::optional<AnglePair> known_los_aoa;
    double los_snap_deg = 5.0;
    double min_separation_deg = 10.0; // between MUSIC peaks, and of targets from the LoS
};

struct SensingOutput {
    MusicResult music;
    std::vector<AnglePair> directions; // AoAs used for separation
    std::vector<int> is_los;
    std::vector<TargetEstimate> estimates;
};

// MUSIC on the smoothed covariance, one LS receive beam per resolved AoA
// (unit response there, nulls at the others), a range-velocity map per
// separated component and its strongest peaks. The direction matched to the
// known LoS AoA, if any, is snapped to it and not reported as a target.
inline SensingOutput sense(const CsiStack& st, const SystemConfig& c, const SensingConfig& sc = {})
{
    const ArrayGeometry& g = c.rx_array;
    if (st.n_antennas != g.size())
        throw std::invalid_argument("sense: CSI antenna count does not match rx_array");
    const Subarray sub = sc.subarray.value_or(default_subarray(g));
    const Eigen::MatrixXcd r = spatial_smooth(st, g, sub);
    const ArrayGeometry sg{sub.sx, sub.sy, g.spacing_wavelengths};
    int k = sc.num_sources > 0 ? sc.num_sources : estimate_num_sources(r, 1);
    k = std::clamp(k, 1, sg.size() - 1);
    SensingOutput out;
    out.music = music_spectrum(r, k, sg, sc.grid, sc.min_separation_deg);
    for (const auto& p : out.music.peaks)
        if (!sc.known_los_aoa || angular_distance(p.refined, *sc.known_los_aoa) < deg2rad(sc.los_snap_deg) ||
            angular_distance(p.refined, *sc.known_los_aoa) >= deg2rad(sc.min_separation_deg))
            out.directions.push_back(p.refined);
    out.is_los.assign(out.directions.size(), 0);
    if (sc.known_los_aoa) {
        int best = -1;
        double bd = deg2rad(sc.los_snap_deg);
        for (int i = 0; i < static_cast<int>(out.directions.size()); ++i) {
            const double d = angular_distance(out.directions[i], *sc.known_los_aoa);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        if (best < 0) {
            out.directions.push_back(*sc.known_los_aoa);
            out.is_los.push_back(1);
        } else {
            out.directions[best] = *sc.known_los_aoa;
            out.is_los[best] = 1;
        }
    }
    // Drop directions that the LS synthesis cannot separate, weakest first.
    std::vector<AnglePair> dirs;
    std::vector<int> los;
    for (std::size_t i = 0; i < out.directions.size(); ++i) {
        bool ok = true;
        for (const auto& d : dirs) {
            const double corr = std::abs(steering_vector(g, d).dot(steering_vector(g, out.directions[i]))) / g.size();
            ok = ok && corr <= 1.0 - 1e-4;
        }
        if (ok && static_cast<int>(dirs.size()) < g.size()) {
            dirs.push_back(out.directions[i]);
            los.push_back(out.is_los[i]);
        }
    }
    out.directions = dirs;
    out.is_los = los;
    const MapScaling ms = map_scaling(c);
    const auto kd = static_cast<Eigen::Index>(dirs.size());
    for (Eigen::Index l = 0; l < kd; ++l) {
        if (los[l])
            continue;
        const BeamVector w = ls_receive_beam(g, dirs, Eigen::VectorXcd::Unit(kd, l));
        const RangeVelocityMap map = range_velocity_map(separate_path(st, w), ms);
        for (auto& e : extract_peaks(map, sc.threshold_db, dirs[l], sc.peaks_per_direction))
            out.estimates.push_back(e);
    }
    return out;
}

} // namespace isrse
