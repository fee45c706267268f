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

// Scene generation, trial simulation, datasets, training, SNR / beta_R
// sweeps and metric tables.

#include "enhance.hpp"
#include "sensing.hpp"

#include <json.hpp>

#include <iomanip>
#include <set>

namespace isrse {

// ---------------------------------------------------------------- scenes

struct SceneLimits {
    double rx_distance_min_m = 20.0;
    double rx_distance_max_m = 60.0;
    double azimuth_min_deg = -60.0;
    double azimuth_max_deg = 80.0;
    double elevation_min_deg = 30.0;
    double elevation_max_deg = 80.0;
    double speed_min_mps = 5.0;
    double speed_max_mps = 30.0;
    double min_separation_deg = 25.0; // between any two AoAs at the receiver, LoS included
    double min_range_separation_bins = 2.0; // between bistatic ranges, in units of c / B
    // Between each target AoD and the LoS AoD at the transmitter. Keeps the
    // targets outside the main lobe of the communication beam.
    double min_tx_separation_deg = 30.0;
    int max_tries = 10000;
};

inline const Vec3 kDefaultTxPos{40.0, 40.0, 40.0};

struct Scene {
    Vec3 tx_pos = kDefaultTxPos;
    Vec3 rx_pos{0.0, 0.0, 0.0};
    std::vector<Target> targets;
    std::vector<PathTruth> paths; // LoS first
};

inline Scene make_scene(const SystemConfig& c, std::vector<Target> targets, Vec3 tx = kDefaultTxPos,
                        Vec3 rx = {0.0, 0.0, 0.0})
{
    Scene s;
    s.tx_pos = tx;
    s.rx_pos = rx;
    s.targets = std::move(targets);
    s.paths = ground_truth_paths(c, tx, rx, s.targets);
    return s;
}

// n_paths targets around the receiver with unit-magnitude random-phase
// reflection, random heading, well separated arrival angles and departure
// angles away from the LoS.
inline Scene random_scene(const SystemConfig& c, Rng& rng, const SceneLimits& lim = {})
{
    Scene s;
    const AnglePair los = angles_of(s.tx_pos - s.rx_pos);
    const AnglePair los_aod = angles_of(s.rx_pos - s.tx_pos);
    std::vector<AnglePair> taken{los};
    std::vector<double> ranges{(s.tx_pos - s.rx_pos).norm()};
    const double min_dr = lim.min_range_separation_bins * c.speed_of_light / c.bandwidth_hz;
    for (int k = 0; k < c.n_paths; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < lim.max_tries && !placed; ++attempt) {
            const AnglePair q{deg2rad(uniform(rng, lim.azimuth_min_deg, lim.azimuth_max_deg)),
                              deg2rad(uniform(rng, lim.elevation_min_deg, lim.elevation_max_deg))};
            const double d = uniform(rng, lim.rx_distance_min_m, lim.rx_distance_max_m);
            bool ok = true;
            for (const auto& t : taken)
                ok = ok && rad2deg(angular_distance(t, q)) >= lim.min_separation_deg;
            const Vec3 pos = s.rx_pos + d * unit_vector(q);
            ok = ok && rad2deg(angular_distance(angles_of(pos - s.tx_pos), los_aod)) >= lim.min_tx_separation_deg;
            const double range = (pos - s.tx_pos).norm() + d;
            for (double r : ranges)
                ok = ok && std::abs(r - range) >= min_dr;
            if (!ok)
                continue;
            Target t;
            t.position = pos;
            const AnglePair heading{uniform(rng, -kPi, kPi), std::acos(uniform(rng, -1.0, 1.0))};
            t.velocity = uniform(rng, lim.speed_min_mps, lim.speed_max_mps) * unit_vector(heading);
            t.reflect_coeff = std::polar(1.0, uniform(rng, -kPi, kPi));
            s.targets.push_back(t);
            taken.push_back(q);
            ranges.push_back(range);
            placed = true;
        }
        if (!placed)
            throw std::runtime_error("random_scene: could not place target " + std::to_string(k) +
                                     " with the requested angular separation");
    }
    s.paths = ground_truth_paths(c, s.tx_pos, s.rx_pos, s.targets);
    return s;
}

struct BeamPlan {
    BeamVector scan, comm, combined;
};

// Scan beam: unit-norm LS beam with equal gain towards every target AoD
// (matched beam to the first target if the directions are not separable).
// Comm beam: matched to the LoS AoD.
inline BeamPlan plan_tx_beams(const SystemConfig& c, const Scene& s, double beta_r)
{
    BeamPlan b;
    b.comm = matched_beam(c.tx_array, s.paths.at(0).aod, BeamKind::tx_comm);
    std::vector<AnglePair> aods;
    for (std::size_t i = 1; i < s.paths.size(); ++i)
        aods.push_back(s.paths[i].aod);
    if (aods.empty()) {
        b.scan = b.comm;
        b.scan.kind = BeamKind::tx_scan;
    } else {
        try {
            b.scan = ls_beam(c.tx_array, aods, Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(aods.size())));
            b.scan.weights.normalize();
        } catch (const std::invalid_argument&) {
            b.scan = matched_beam(c.tx_array, aods[0], BeamKind::tx_scan);
        }
    }
    b.combined = combine_multibeam(b.scan, b.comm, beta_r, c.beam_phase);
    return b;
}

// ---------------------------------------------------------------- trials

struct TrialSetup {
    Scene scene;
    BeamPlan beams;
    IsacFrame frame;
    Modulation modulation = Modulation::QPSK;
    std::vector<ComplexSignal> clean; // per receive antenna
    double echo_power = 0.0;          // mean per-sample power of the NLoS part, per antenna
    double total_power = 0.0;         // mean per-sample power of the full clean stream, per antenna
};

inline double mean_stream_power(const std::vector<ComplexSignal>& s)
{
    double p = 0.0;
    for (const auto& x : s)
        p += mean_power(x.samples);
    return s.empty() ? 0.0 : p / static_cast<double>(s.size());
}

inline TrialSetup setup_trial(const SystemConfig& c, const Scene& scene, double beta_r, std::uint64_t seed,
                              std::uint64_t trial, Modulation mod = Modulation::QPSK)
{
    TrialSetup t;
    t.scene = scene;
    t.modulation = mod;
    t.beams = plan_tx_beams(c, scene, beta_r);
    Rng data_rng = make_rng(seed, trial, Stage::data);
    Rng pilot_rng = make_rng(seed, trial, Stage::pilot);
    t.frame = make_isac_frame(c, data_rng, pilot_rng, mod);
    const ComplexSignal tx = build_frame(t.frame.grid, c);
    const ChannelRealization ch = channel_response(scene.paths, c, t.beams.combined);
    t.clean = received_array_signals(tx, ch, c);
    t.total_power = mean_stream_power(t.clean);
    std::vector<PathTruth> nlos(scene.paths.begin() + 1, scene.paths.end());
    if (!nlos.empty())
        t.echo_power = mean_stream_power(received_array_signals(tx, channel_response(nlos, c, t.beams.combined), c));
    return t;
}

struct NoisyTrial {
    std::vector<ComplexSignal> noisy;
    std::vector<CVec> noise;
    double noise_power = 0.0;
};

inline NoisyTrial add_noise(const TrialSetup& t, double noise_power, Rng& rng)
{
    NoisyTrial n;
    n.noise_power = noise_power;
    for (const auto& s : t.clean) {
        CVec z(s.size(), cplx{});
        apply_awgn(z, noise_power, rng);
        ComplexSignal y = s;
        for (std::size_t i = 0; i < z.size(); ++i)
            y.samples[i] += z[i];
        n.noisy.push_back(std::move(y));
        n.noise.push_back(std::move(z));
    }
    return n;
}

// SNR is defined per receive-antenna sample against the power of the
// sensing (NLoS) component, or against the whole clean stream.
enum class SnrReference { echo, total };

inline double noise_power_for_snr(const TrialSetup& t, double snr_db, SnrReference ref)
{
    const double p = ref == SnrReference::echo ? t.echo_power : t.total_power;
    if (!(p > 0.0))
        throw std::invalid_argument("noise_power_for_snr: reference power is zero");
    return p / db_to_linear(snr_db);
}

struct EvalOptions {
    SensingConfig sensing;
    bool sensing_enabled = true;
    bool ber_enabled = true;
};

struct MethodResult {
    double noise_mse = 0.0;
    std::vector<TargetMatch> matches;
    double ber = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

// Maximum-ratio combining towards the known LoS AoA, one channel estimate
// per packet from its pilot symbol, one-tap equalization of the data symbols.
inline double communication_ber(const std::vector<ComplexSignal>& streams, const TrialSetup& t, const SystemConfig& c)
{
    if (c.symbols_per_packet < 2)
        return std::numeric_limits<double>::quiet_NaN();
    const Eigen::VectorXcd a = steering_vector(c.rx_array, t.scene.paths.at(0).aoa);
    const Eigen::VectorXcd w = a / a.norm();
    Eigen::MatrixXcd comb = Eigen::MatrixXcd::Zero(c.n_subcarriers, c.n_symbols());
    for (std::size_t k = 0; k < streams.size(); ++k)
        comb += std::conj(w(static_cast<Eigen::Index>(k))) * demodulate_frame(streams[k], c);
    const int n_data = c.n_symbols() - c.n_packets;
    Eigen::MatrixXcd obs(c.n_subcarriers, n_data), est(c.n_subcarriers, n_data);
    int col = 0;
    for (int s = 0; s < c.n_symbols(); ++s) {
        if (is_pilot_symbol(s, c))
            continue;
        const int m = s / c.symbols_per_packet;
        obs.col(col) = comb.col(s);
        est.col(col) = comb.col(static_cast<Eigen::Index>(m) * c.symbols_per_packet).cwiseQuotient(t.frame.pilots.col(m));
        ++col;
    }
    const Detection d = equalize_and_detect(obs, est, t.modulation);
    return bit_error_rate(t.frame.data_bits, d.bits);
}

inline SensingConfig default_sensing(const SystemConfig& c, const Scene& s)
{
    SensingConfig sc;
    sc.num_sources = c.n_paths + 1;
    sc.known_los_aoa = s.paths.at(0).aoa;
    return sc;
}

inline MethodResult run_method(const Enhancer& e, const TrialSetup& t, const NoisyTrial& n, const SystemConfig& c,
                               const EvalOptions& opt, std::uint64_t seed)
{
    MethodResult r;
    const MapScaling ms = map_scaling(c);
    const ErrorCaps caps = error_caps(ms, c);
    try {
        std::vector<ComplexSignal> enh;
        double acc = 0.0;
        for (std::size_t a = 0; a < n.noisy.size(); ++a) {
            EnhanceContext ctx{n.noise_power, 0.0, derive_seed(seed, a, static_cast<std::uint64_t>(Stage::enhance))};
            enh.push_back(enhance(e, n.noisy[a], ctx));
            acc += noise_estimation_mse(n.noisy[a], enh.back(), n.noise[a]);
        }
        r.noise_mse = acc / static_cast<double>(n.noisy.size());
        if (opt.sensing_enabled) {
            const CsiStack st = estimate_channel(pilot_observations(enh, c), t.frame.pilots, n.noise_power);
            SensingConfig sc = opt.sensing;
            if (!sc.known_los_aoa)
                sc.known_los_aoa = t.scene.paths.at(0).aoa;
            if (sc.num_sources <= 0)
                sc.num_sources = c.n_paths + 1;
            const SensingOutput so = sense(st, c, sc);
            r.matches = associate(so.estimates, truth_targets(t.scene.paths, c), ms, caps).matches;
        }
        if (opt.ber_enabled)
            r.ber = communication_ber(enh, t, c);
    } catch (const std::exception& ex) {
        r.error = ex.what();
        r.matches.clear();
        for (std::size_t k = 1; k < t.scene.paths.size(); ++k)
            r.matches.push_back({static_cast<int>(k), -1, caps.aoa_deg, caps.range_m, caps.velocity_mps});
        r.ber = 0.5;
    }
    return r;
}

// ---------------------------------------------------------------- metric tables

struct MetricRow {
    std::string method;
    std::string axis; // "snr_db", "beta_r" or "summary"
    double x = 0.0;
    std::string metric;
    double value = 0.0;
    int trials = 0;
    std::uint64_t seed = 0;

    bool operator==(const MetricRow&) const = default;
};

using MetricTable = std::vector<MetricRow>;

inline const char* kMetricCsvHeader = "method,axis,x,metric,value,trials,seed";

inline std::string format_double(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::vector<std::string> table_metrics(const MetricTable& t)
{
    std::vector<std::string> m;
    for (const auto& r : t)
        if (std::find(m.begin(), m.end(), r.metric) == m.end())
            m.push_back(r.metric);
    return m;
}

inline void write_metric_csv(const std::filesystem::path& path, const MetricTable& rows)
{
    std::ofstream o(path);
    if (!o)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    o << kMetricCsvHeader << '\n';
    for (const auto& r : rows)
        o << r.method << ',' << r.axis << ',' << format_double(r.x) << ',' << r.metric << ',' << format_double(r.value)
          << ',' << r.trials << ',' << r.seed << '\n';
    if (!o)
        throw std::runtime_error("write failure on '" + path.string() + "'");
}

inline MetricTable read_metric_csv(const std::filesystem::path& path)
{
    std::ifstream i(path);
    if (!i)
        throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string line;
    std::getline(i, line);
    if (line != kMetricCsvHeader)
        throw std::runtime_error("'" + path.string() + "': unexpected CSV header");
    MetricTable t;
    while (std::getline(i, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 7)
            throw std::runtime_error("'" + path.string() + "': malformed row '" + line + "'");
        t.push_back({f[0], f[1], std::stod(f[2]), f[3], std::stod(f[4]), std::stoi(f[5]), std::stoull(f[6])});
    }
    return t;
}

// One CSV per metric, named <metric>.csv. An empty table produces a single
// header-only file, metrics.csv.
inline std::vector<std::filesystem::path> write_outputs(const MetricTable& t, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> files;
    const auto metrics = table_metrics(t);
    if (metrics.empty()) {
        files.push_back(dir / "metrics.csv");
        write_metric_csv(files.back(), {});
        return files;
    }
    for (const auto& m : metrics) {
        MetricTable part;
        for (const auto& r : t)
            if (r.metric == m)
                part.push_back(r);
        files.push_back(dir / (m + ".csv"));
        write_metric_csv(files.back(), part);
    }
    return files;
}

inline std::optional<double> lookup(const MetricTable& t, const std::string& method, const std::string& metric, double x)
{
    for (const auto& r : t)
        if (r.method == method && r.metric == metric && std::abs(r.x - x) < 1e-9)
            return r.value;
    return std::nullopt;
}

// ---------------------------------------------------------------- sweeps

struct MethodEntry {
    std::string label;
    Enhancer enhancer;
};

struct ExperimentSpec {
    SystemConfig scenario = desk_profile();
    std::vector<double> snr_grid_db{-20.0, -15.0, -10.0, -5.0, 0.0};
    int trials_per_point = 4;
    std::vector<MethodEntry> methods{{"tsp", Enhancer{}}};
    std::set<std::string> metrics{"noise_mse", "rmse_aoa", "rmse_range", "rmse_velocity", "ber"};
    SnrReference snr_reference = SnrReference::echo;
    std::vector<double> beta_r_grid;
    double beta_r_reference = 0.5; // fixes the noise powers of the beta_R sweep
    double beta_r_snr_db = -10.0;  // sensing, against snr_reference
    double beta_r_comm_snr_db = 0.0; // BER, against the whole clean stream
    EvalOptions eval;
    SceneLimits scene_limits;
    std::uint64_t seed = 1;
    std::function<void(const std::string&)> progress;
    // Called by run_sweep with (method index, SNR, trial, result).
    std::function<void(std::size_t, double, int, const MethodResult&)> on_trial;

    void validate() const
    {
        validate_config();
        if (trials_per_point < 1)
            throw std::invalid_argument("ExperimentSpec: trials_per_point must be >= 1");
        if (methods.empty())
            throw std::invalid_argument("ExperimentSpec: no methods");
    }
    void validate_config() const { isrse::validate(scenario); }
};

struct Accumulator {
    double noise_mse = 0.0, aoa2 = 0.0, range2 = 0.0, vel2 = 0.0, ber = 0.0;
    std::size_t targets = 0, ber_trials = 0;
    int trials = 0, failures = 0;
    std::vector<double> ber_per_trial, range_rmse_per_trial;

    void add(const MethodResult& r)
    {
        ++trials;
        failures += r.error.empty() ? 0 : 1;
        noise_mse += r.noise_mse;
        double tr = 0.0;
        for (const auto& m : r.matches) {
            aoa2 += m.aoa_err_deg * m.aoa_err_deg;
            range2 += m.range_err_m * m.range_err_m;
            vel2 += m.velocity_err_mps * m.velocity_err_mps;
            tr += m.range_err_m * m.range_err_m;
            ++targets;
        }
        if (!r.matches.empty())
            range_rmse_per_trial.push_back(std::sqrt(tr / static_cast<double>(r.matches.size())));
        if (std::isfinite(r.ber)) {
            ber += r.ber;
            ++ber_trials;
            ber_per_trial.push_back(r.ber);
        }
    }
};

inline double median(std::vector<double> v)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline void emit(MetricTable& t, const ExperimentSpec& s, const std::string& method, const std::string& axis, double x,
                 const Accumulator& a)
{
    auto row = [&](const std::string& metric, double v) {
        if (s.metrics.count(metric) || metric == "failures" || metric.ends_with("_median"))
            t.push_back({method, axis, x, metric, v, a.trials, s.seed});
    };
    const double nt = std::max<std::size_t>(a.targets, 1);
    if (s.metrics.count("noise_mse"))
        row("noise_mse", a.noise_mse / a.trials);
    if (s.eval.sensing_enabled) {
        row("rmse_aoa", std::sqrt(a.aoa2 / nt));
        row("rmse_range", std::sqrt(a.range2 / nt));
        row("rmse_velocity", std::sqrt(a.vel2 / nt));
    }
    if (s.eval.ber_enabled && a.ber_trials > 0)
        row("ber", a.ber / static_cast<double>(a.ber_trials));
    row("failures", a.failures);
}

// Per SNR point, method and trial: simulate -> enhance -> sense/demodulate.
// Trial k uses the same scene, data and unit noise realization at every SNR
// point and for every method (paired comparison).
inline MetricTable run_sweep(const ExperimentSpec& spec)
{
    spec.validate();
    const SystemConfig& c = spec.scenario;
    std::vector<TrialSetup> setups;
    for (int k = 0; k < spec.trials_per_point; ++k) {
        Rng srng = make_rng(spec.seed, static_cast<std::uint64_t>(k), Stage::scene);
        const Scene sc = random_scene(c, srng, spec.scene_limits);
        setups.push_back(setup_trial(c, sc, c.beam_power_factor, spec.seed, static_cast<std::uint64_t>(k)));
    }
    MetricTable table;
    for (double snr : spec.snr_grid_db) {
        std::vector<Accumulator> acc(spec.methods.size());
        for (int k = 0; k < spec.trials_per_point; ++k) {
            const TrialSetup& t = setups[k];
            Rng nrng = make_rng(spec.seed, static_cast<std::uint64_t>(k), Stage::noise);
            const NoisyTrial n = add_noise(t, noise_power_for_snr(t, snr, spec.snr_reference), nrng);
            for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
                const auto r = run_method(spec.methods[mi].enhancer, t, n, c, spec.eval,
                                          derive_seed(spec.seed, static_cast<std::uint64_t>(k), 100 + mi));
                acc[mi].add(r);
                if (spec.on_trial)
                    spec.on_trial(mi, snr, k, r);
                if (spec.progress)
                    spec.progress("snr " + format_double(snr) + " dB, trial " + std::to_string(k) + ", " +
                                  spec.methods[mi].label + (r.error.empty() ? "" : " (failed: " + r.error + ")"));
            }
        }
        for (std::size_t mi = 0; mi < spec.methods.size(); ++mi)
            emit(table, spec, spec.methods[mi].label, "snr_db", snr, acc[mi]);
    }
    return table;
}

// Per beta_R: range RMSE and BER with the noise powers held at the levels
// that give beta_r_snr_db and beta_r_comm_snr_db for the reference split.
// The echo sits tens of dB below the LoS, so one shared noise level leaves
// either the BER at zero or the sensing at its failure cap; sensing and
// demodulation therefore see separate noise draws. Appends per-trial
// medians and two monotonicity summary rows per method.
inline MetricTable beta_r_sweep(const ExperimentSpec& spec)
{
    spec.validate();
    if (spec.beta_r_grid.empty())
        throw std::invalid_argument("beta_r_sweep: beta_r_grid is empty");
    const SystemConfig& c = spec.scenario;
    MetricTable table;
    std::vector<Scene> scenes;
    std::vector<double> noise, comm_noise;
    for (int k = 0; k < spec.trials_per_point; ++k) {
        Rng srng = make_rng(spec.seed, static_cast<std::uint64_t>(k), Stage::scene);
        scenes.push_back(random_scene(c, srng, spec.scene_limits));
        const TrialSetup ref =
            setup_trial(c, scenes.back(), spec.beta_r_reference, spec.seed, static_cast<std::uint64_t>(k));
        noise.push_back(noise_power_for_snr(ref, spec.beta_r_snr_db, spec.snr_reference));
        comm_noise.push_back(noise_power_for_snr(ref, spec.beta_r_comm_snr_db, SnrReference::total));
    }
    EvalOptions sense_only = spec.eval, comm_only = spec.eval;
    sense_only.ber_enabled = false;
    comm_only.sensing_enabled = false;
    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        std::vector<double> ber_med, rng_med;
        for (double beta : spec.beta_r_grid) {
            Accumulator acc;
            for (int k = 0; k < spec.trials_per_point; ++k) {
                const TrialSetup t = setup_trial(c, scenes[k], beta, spec.seed, static_cast<std::uint64_t>(k));
                const auto kk = static_cast<std::uint64_t>(k);
                Rng nrng = make_rng(spec.seed, kk, Stage::noise), crng = make_rng(spec.seed, kk, Stage::comm_noise);
                const std::uint64_t ms = derive_seed(spec.seed, kk, 100 + mi);
                MethodResult r = run_method(spec.methods[mi].enhancer, t, add_noise(t, noise[k], nrng), c, sense_only, ms);
                const MethodResult rc =
                    run_method(spec.methods[mi].enhancer, t, add_noise(t, comm_noise[k], crng), c, comm_only, ms);
                if (spec.eval.ber_enabled)
                    r.ber = rc.ber;
                if (r.error.empty())
                    r.error = rc.error;
                acc.add(r);
                if (spec.progress)
                    spec.progress("beta_R " + format_double(beta) + ", trial " + std::to_string(k));
            }
            emit(table, spec, spec.methods[mi].label, "beta_r", beta, acc);
            ber_med.push_back(median(acc.ber_per_trial));
            rng_med.push_back(median(acc.range_rmse_per_trial));
            table.push_back({spec.methods[mi].label, "beta_r", beta, "ber_median", ber_med.back(), acc.trials, spec.seed});
            table.push_back(
                {spec.methods[mi].label, "beta_r", beta, "rmse_range_median", rng_med.back(), acc.trials, spec.seed});
        }
        bool ber_up = true, rng_down = true;
        for (std::size_t i = 1; i < ber_med.size(); ++i) {
            ber_up = ber_up && ber_med[i] >= ber_med[i - 1];
            rng_down = rng_down && rng_med[i] <= rng_med[i - 1];
        }
        const int n = spec.trials_per_point;
        table.push_back({spec.methods[mi].label, "summary", 0.0, "ber_nondecreasing", ber_up ? 1.0 : 0.0, n, spec.seed});
        table.push_back(
            {spec.methods[mi].label, "summary", 0.0, "rmse_range_nonincreasing", rng_down ? 1.0 : 0.0, n, spec.seed});
    }
    return table;
}

// ---------------------------------------------------------------- datasets

struct DatasetSample {
    RgbTile clean_tile, noisy_tile;
    CVec clean, noisy; // normalized windows
    double snr_db = 0.0;
    double noise_power = 0.0; // after normalization
    int antenna = 0;
    std::size_t offset = 0;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::vector<DatasetSample> samples;
    RgbCodecMeta codec;
    StftConfig stft;
    double reference_rms = 600.0;
    double sample_rate_hz = 0.0;
    std::size_t window_len = 0;
    std::uint64_t seed = 0;
};

// Samples spanning exactly one tile (tile-size frames).
inline std::size_t tile_window_length(const StftConfig& s)
{
    return static_cast<std::size_t>(s.fft_size - 1) * s.hop + s.window_length;
}

// Per sample: random scene -> clean received streams -> one tile-length
// window of a random antenna, scaled so the stream has reference RMS ->
// paired noisy copy at an SNR drawn uniformly from [snr_lo, snr_hi] (total
// stream power reference). The codec M_max is the 99.9th percentile of the
// clean STFT magnitudes.
inline Dataset generate_dataset(const SystemConfig& c, int n_samples, double snr_lo_db, double snr_hi_db,
                                std::uint64_t seed, double reference_rms = 600.0, const SceneLimits& lim = {})
{
    if (n_samples < 1)
        throw std::invalid_argument("generate_dataset: n_samples must be >= 1");
    if (!(snr_lo_db <= snr_hi_db))
        throw std::invalid_argument("generate_dataset: empty SNR range");
    validate(c);
    Dataset d;
    d.reference_rms = reference_rms;
    d.sample_rate_hz = c.bandwidth_hz;
    d.window_len = tile_window_length(d.stft);
    d.seed = seed;
    if (static_cast<std::size_t>(c.frame_samples()) < d.window_len)
        throw std::invalid_argument("generate_dataset: frame shorter than one tile window");
    std::vector<Spectrogram> clean_specs, noisy_specs;
    for (int i = 0; i < n_samples; ++i) {
        const auto trial = static_cast<std::uint64_t>(i);
        Rng srng = make_rng(seed, trial, Stage::scene);
        const Scene sc = random_scene(c, srng, lim);
        const TrialSetup t = setup_trial(c, sc, c.beam_power_factor, seed, trial);
        Rng rng = make_rng(seed, trial, Stage::dataset);
        DatasetSample s;
        s.seed = derive_seed(seed, trial, static_cast<std::uint64_t>(Stage::dataset));
        s.antenna = std::uniform_int_distribution<int>(0, static_cast<int>(t.clean.size()) - 1)(rng);
        s.offset = std::uniform_int_distribution<std::size_t>(0, t.clean[s.antenna].size() - d.window_len)(rng);
        s.snr_db = uniform(rng, snr_lo_db, snr_hi_db);
        const double p = mean_power(t.clean[s.antenna].samples);
        const double a = reference_rms / std::sqrt(p);
        s.noise_power = reference_rms * reference_rms / db_to_linear(s.snr_db);
        s.clean.assign(t.clean[s.antenna].samples.begin() + static_cast<std::ptrdiff_t>(s.offset),
                       t.clean[s.antenna].samples.begin() + static_cast<std::ptrdiff_t>(s.offset + d.window_len));
        for (auto& v : s.clean)
            v *= a;
        s.noisy = s.clean;
        Rng nrng = make_rng(seed, trial, Stage::noise);
        apply_awgn(s.noisy, s.noise_power, nrng);
        clean_specs.push_back(stft({s.clean, d.sample_rate_hz}, d.stft));
        noisy_specs.push_back(stft({s.noisy, d.sample_rate_hz}, d.stft));
        d.samples.push_back(std::move(s));
    }
    d.codec = default_codec_meta(magnitude_quantile(clean_specs, 0.999), d.sample_rate_hz);
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        d.samples[i].clean_tile = rgb_encode(clean_specs[i], d.codec, d.sample_rate_hz).tiles.at(0);
        d.samples[i].noisy_tile = rgb_encode(noisy_specs[i], d.codec, d.sample_rate_hz).tiles.at(0);
    }
    return d;
}

inline std::string sample_name(const char* prefix, std::size_t i, const char* ext)
{
    std::ostringstream os;
    os << prefix << '_' << std::setw(4) << std::setfill('0') << i << ext;
    return os.str();
}

// manifest.json + clean/noisy PNG tiles + per-pair signal tensors.
inline nlohmann::json write_dataset(const Dataset& d, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    nlohmann::json m;
    m["format"] = "isrse-dataset";
    m["version"] = 1;
    m["seed"] = d.seed;
    m["codec"] = {{"m_max", d.codec.m_max},          {"epsilon", d.codec.epsilon},
                  {"f_min", d.codec.f_min},          {"f_max", d.codec.f_max},
                  {"hop", d.stft.hop},               {"window", d.stft.window_length},
                  {"fft_size", d.stft.fft_size},     {"origin_len", d.window_len},
                  {"pad_frames", 0},                 {"reference_rms", d.reference_rms},
                  {"sample_rate_hz", d.sample_rate_hz}};
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        const auto& s = d.samples[i];
        const std::string cp = sample_name("clean", i, ".png"), np = sample_name("noisy", i, ".png"),
                          sp = sample_name("pair", i, ".tns");
        write_png(dir / cp, s.clean_tile);
        write_png(dir / np, s.noisy_tile);
        CVec both = s.clean;
        both.insert(both.end(), s.noisy.begin(), s.noisy.end());
        TensorFile tf = make_tensor_file(DType::c128, {2, static_cast<std::uint64_t>(s.clean.size())}, both.data(), both.size());
        tf.attrs["sample_rate_hz"] = d.sample_rate_hz;
        tf.attrs["snr_db"] = s.snr_db;
        tf.attrs["noise_power"] = s.noise_power;
        write_tensor_file(dir / sp, tf);
        arr.push_back({{"index", i},
                       {"clean_png", cp},
                       {"noisy_png", np},
                       {"signals", sp},
                       {"snr_db", s.snr_db},
                       {"noise_power", s.noise_power},
                       {"antenna", s.antenna},
                       {"offset", s.offset},
                       {"seed", s.seed}});
    }
    m["samples"] = arr;
    std::ofstream o(dir / "manifest.json");
    o << m.dump(2) << '\n';
    if (!o)
        throw std::runtime_error("write failure on manifest in '" + dir.string() + "'");
    return m;
}

inline Dataset load_dataset(const std::filesystem::path& dir)
{
    std::ifstream i(dir / "manifest.json");
    if (!i)
        throw std::runtime_error("no manifest.json in '" + dir.string() + "'");
    const nlohmann::json m = nlohmann::json::parse(i);
    if (m.value("format", "") != "isrse-dataset")
        throw std::runtime_error("'" + dir.string() + "/manifest.json' is not a dataset manifest");
    Dataset d;
    const auto& c = m.at("codec");
    d.codec = {c.at("m_max").get<double>(), c.at("epsilon").get<double>(), c.at("f_min").get<double>(),
               c.at("f_max").get<double>()};
    d.stft.hop = c.at("hop").get<int>();
    d.stft.window_length = c.at("window").get<int>();
    d.stft.fft_size = c.at("fft_size").get<int>();
    d.window_len = c.at("origin_len").get<std::size_t>();
    d.reference_rms = c.at("reference_rms").get<double>();
    d.sample_rate_hz = c.at("sample_rate_hz").get<double>();
    d.seed = m.at("seed").get<std::uint64_t>();
    for (const auto& e : m.at("samples")) {
        DatasetSample s;
        s.clean_tile = read_png(dir / e.at("clean_png").get<std::string>());
        s.noisy_tile = read_png(dir / e.at("noisy_png").get<std::string>());
        const auto sig = tensor_to_signals(read_tensor_file(dir / e.at("signals").get<std::string>()));
        if (sig.size() != 2)
            throw std::runtime_error("dataset pair file must hold two streams");
        s.clean = sig[0].samples;
        s.noisy = sig[1].samples;
        s.snr_db = e.at("snr_db").get<double>();
        s.noise_power = e.at("noise_power").get<double>();
        s.antenna = e.at("antenna").get<int>();
        s.offset = e.at("offset").get<std::size_t>();
        s.seed = e.at("seed").get<std::uint64_t>();
        d.samples.push_back(std::move(s));
    }
    if (d.samples.empty())
        throw std::runtime_error("dataset in '" + dir.string() + "' is empty");
    return d;
}

// ---------------------------------------------------------------- training

struct TrainConfig {
    ModelKind kind = ModelKind::diffusion;
    nn::UNetConfig unet = nn::unet_desk();
    Schedule schedule = schedule_desk();
    int epochs = 30;
    nn::AdamConfig adam;
    int batch = 4;
    int crop = 64;
    nn::LossWeights loss;
    std::uint64_t seed = 1;
};

struct TrainResult {
    DenoiserModel model;
    std::vector<double> epoch_loss;
};

// Single-pass residual denoiser step: the network predicts the image-domain
// noise (noisy - clean); the SSIM term compares clean with noisy - prediction.
inline double direct_train_step(const nn::Tensor<float>& noisy, const nn::Tensor<float>& clean, nn::UNet<float>& net,
                                const nn::LossWeights& w, nn::AdamState<float>& opt, const nn::AdamConfig& adam)
{
    auto params = nn::param_tensors(net.parameters());
    nn::zero_grad(params);
    const nn::Tensor<float> z = nn::sub(noisy, clean);
    const nn::Tensor<float> z_hat = net.forward(noisy, 0);
    const nn::Tensor<float> x_hat = nn::sub(noisy, z_hat);
    const nn::Tensor<float> loss = nn::composite_loss(z, z_hat, clean, x_hat, w);
    const double lv = loss.item();
    if (!std::isfinite(lv))
        throw std::runtime_error("direct_train_step: non-finite loss");
    loss.backward();
    nn::adam_step(params, opt, adam);
    return lv;
}

namespace detail {

inline void copy_crop(const RgbTile& t, int r0, int c0, int crop, float* dst)
{
    for (int ch = 0; ch < 3; ++ch)
        for (int r = 0; r < crop; ++r)
            for (int c = 0; c < crop; ++c)
                *dst++ = t.at(ch, r0 + r, c0 + c) / 255.0f;
}

} // namespace detail

inline TrainResult train(const Dataset& d, const TrainConfig& tc, const std::function<void(int, double)>& log = {})
{
    if (d.samples.empty())
        throw std::invalid_argument("train: dataset is empty");
    if (tc.epochs < 1 || tc.batch < 1)
        throw std::invalid_argument("train: epochs and batch must be >= 1");
    const int tile = d.samples[0].clean_tile.size;
    if (tc.crop < 1 || tc.crop > tile || tc.crop % (1 << tc.unet.depth) != 0)
        throw std::invalid_argument("train: crop must fit the tile and be divisible by 2^depth");
    tc.loss.validate();
    nn::UNetConfig ucfg = tc.unet;
    if (tc.kind == ModelKind::direct)
        ucfg.use_time = false;
    ucfg.max_timestep = std::max(ucfg.max_timestep, tc.schedule.T);
    TrainResult res{DenoiserModel(tc.kind, ucfg, derive_seed(tc.seed, 0, static_cast<std::uint64_t>(Stage::init)),
                                  tc.schedule),
                    {}};
    DenoiserModel& m = res.model;
    m.codec = d.codec;
    m.stft = d.stft;
    m.reference_rms = d.reference_rms;
    m.sample_rate_hz = d.sample_rate_hz;
    nn::AdamState<float> opt;
    Rng shuffle = make_rng(tc.seed, 0, Stage::shuffle);
    Rng crop_rng = make_rng(tc.seed, 0, Stage::crop);
    Rng diff_rng = make_rng(tc.seed, 0, Stage::diffusion);
    std::vector<std::size_t> order(d.samples.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t per = static_cast<std::size_t>(3) * tc.crop * tc.crop;
    std::uniform_int_distribution<int> pos(0, tile - tc.crop);
    for (int ep = 0; ep < tc.epochs; ++ep) {
        std::shuffle(order.begin(), order.end(), shuffle);
        double sum = 0.0;
        int steps = 0;
        for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(tc.batch)) {
            const int bn = static_cast<int>(std::min(order.size() - s, static_cast<std::size_t>(tc.batch)));
            nn::Tensor<float> clean({bn, 3, tc.crop, tc.crop}), noisy({bn, 3, tc.crop, tc.crop});
            for (int b = 0; b < bn; ++b) {
                const auto& smp = d.samples[order[s + b]];
                const int r0 = pos(crop_rng), c0 = pos(crop_rng);
                detail::copy_crop(smp.clean_tile, r0, c0, tc.crop, clean.data().data() + b * per);
                detail::copy_crop(smp.noisy_tile, r0, c0, tc.crop, noisy.data().data() + b * per);
            }
            sum += tc.kind == ModelKind::diffusion
                       ? train_step(clean, m.net, m.schedule, tc.loss, opt, tc.adam, diff_rng)
                       : direct_train_step(noisy, clean, m.net, tc.loss, opt, tc.adam);
            ++steps;
        }
        res.epoch_loss.push_back(sum / steps);
        if (log)
            log(ep, res.epoch_loss.back());
    }
    return res;
}

} // namespace isrse
