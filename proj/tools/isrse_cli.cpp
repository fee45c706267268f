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

// Command-line front end: simulation, datasets, training, enhancement,
// sensing and sweeps. Every output is a pure function of the flags and the
// seed.

#include <isrse/harness.hpp>
#include <isrse/io.hpp>
#include <isrse/model.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace isrse;

namespace {

struct Common {
    std::string profile = "desk";
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

SystemConfig resolve(const Common& o)
{
    const auto base = profile_by_name(o.profile);
    if (!base)
        throw std::invalid_argument("unknown profile '" + o.profile + "' (expected desk or paper)");
    SystemConfig c = o.config.empty() ? *base : load_config(o.config, *base);
    if (o.seed)
        c.seed = *o.seed;
    validate(c);
    return c;
}

void add_common(CLI::App* app, Common& o, bool out_required = true)
{
    app->add_option("--profile", o.profile, "Base profile: desk or paper")->capture_default_str();
    app->add_option("--config", o.config, "Config file overriding the profile");
    app->add_option("--seed", o.seed, "Master seed (overrides the config)");
    auto* out = app->add_option("--out", o.out, "Output path");
    if (out_required)
        out->required();
}

void ensure_parent(const fs::path& p)
{
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
}

nlohmann::json angles_json(const AnglePair& a) { return {rad2deg(a.azimuth), rad2deg(a.elevation)}; }

nlohmann::json scene_json(const Scene& s, const SystemConfig& c)
{
    nlohmann::json j;
    j["tx_pos"] = {s.tx_pos.x(), s.tx_pos.y(), s.tx_pos.z()};
    j["rx_pos"] = {s.rx_pos.x(), s.rx_pos.y(), s.rx_pos.z()};
    for (const auto& p : s.paths)
        j["paths"].push_back({{"kind", p.kind == PathKind::LoS ? "los" : "nlos"},
                              {"gain", {p.gain.real(), p.gain.imag()}},
                              {"delay_s", p.delay_s},
                              {"doppler_hz", p.doppler_hz},
                              {"range_m", bistatic_range_m(p, c)},
                              {"velocity_mps", bistatic_velocity_mps(p, c)},
                              {"aoa_deg", angles_json(p.aoa)},
                              {"aod_deg", angles_json(p.aod)}});
    return j;
}

void write_json(const fs::path& p, const nlohmann::json& j)
{
    ensure_parent(p);
    std::ofstream f(p, std::ios::binary);
    f << j.dump(2) << '\n';
    if (!f)
        throw std::runtime_error("cannot write " + p.string());
}

TrialSetup regenerate_trial(const SystemConfig& c, std::uint64_t trial)
{
    Rng srng = make_rng(c.seed, trial, Stage::scene);
    return setup_trial(c, random_scene(c, srng), c.beam_power_factor, c.seed, trial);
}

std::shared_ptr<const DenoiserModel> load_model(const std::string& path)
{
    if (path.empty())
        return nullptr;
    return std::make_shared<const DenoiserModel>(load_checkpoint(path));
}

Enhancer make_enhancer(const std::string& method, const std::string& model_path, bool literal)
{
    Enhancer e;
    e.kind = enhancer_kind_from(method);
    e.literal_alg2 = literal;
    if (e.kind == EnhancerKind::isr_se || e.kind == EnhancerKind::cnn) {
        if (model_path.empty())
            throw std::invalid_argument("method '" + method + "' needs --model");
        e.model = load_model(model_path);
    }
    return e;
}

// -------------------------------------------------------------- subcommands

struct SimulateOpts {
    double snr_db = 0.0;
    std::string reference = "echo";
    std::uint64_t trial = 0;
};

int cmd_simulate(const Common& o, const SimulateOpts& s)
{
    const SystemConfig c = resolve(o);
    const TrialSetup t = regenerate_trial(c, s.trial);
    const SnrReference ref = s.reference == "total" ? SnrReference::total : SnrReference::echo;
    const double np = noise_power_for_snr(t, s.snr_db, ref);
    Rng nrng = make_rng(c.seed, s.trial, Stage::noise);
    const NoisyTrial n = add_noise(t, np, nrng);

    const fs::path dir(o.out);
    fs::create_directories(dir);
    TensorFile clean = signals_to_tensor(t.clean), noisy = signals_to_tensor(n.noisy);
    for (TensorFile* f : {&clean, &noisy}) {
        f->attrs["noise_power"] = np;
        f->attrs["snr_db"] = s.snr_db;
        f->attrs["seed"] = static_cast<double>(c.seed);
        f->attrs["trial"] = static_cast<double>(s.trial);
    }
    write_tensor_file(dir / "clean.tns", clean);
    write_tensor_file(dir / "noisy.tns", noisy);
    nlohmann::json j = scene_json(t.scene, c);
    j["seed"] = c.seed;
    j["trial"] = s.trial;
    j["snr_db"] = s.snr_db;
    j["snr_reference"] = s.reference;
    j["noise_power"] = np;
    j["echo_power"] = t.echo_power;
    j["total_power"] = t.total_power;
    j["beta_r"] = c.beam_power_factor;
    write_json(dir / "scene.json", j);
    std::cout << "wrote " << (dir / "clean.tns").string() << ", " << (dir / "noisy.tns").string() << '\n';
    return 0;
}

struct DatasetOpts {
    int n = 64;
    double snr_lo = 10.0, snr_hi = 40.0;
};

int cmd_make_dataset(const Common& o, const DatasetOpts& d)
{
    const SystemConfig c = resolve(o);
    const Dataset ds = generate_dataset(c, d.n, d.snr_lo, d.snr_hi, c.seed);
    write_dataset(ds, o.out);
    std::cout << "wrote " << ds.samples.size() << " pairs to " << o.out << '\n';
    return 0;
}

struct TrainOpts {
    std::string data;
    std::string kind = "diffusion";
    int epochs = 30;
    int batch = 4;
    double lr = 1e-4;
    bool plain = false;
};

int cmd_train(const Common& o, const TrainOpts& t)
{
    const SystemConfig c = resolve(o);
    const Dataset ds = load_dataset(t.data);
    TrainConfig tc;
    if (t.kind == "diffusion")
        tc.kind = ModelKind::diffusion;
    else if (t.kind == "direct" || t.kind == "cnn")
        tc.kind = ModelKind::direct;
    else
        throw std::invalid_argument("unknown model kind '" + t.kind + "'");
    if (o.profile == "paper") {
        tc.unet = nn::unet_default();
        tc.schedule = schedule_default();
    }
    if (t.plain)
        tc.unet = nn::unet_plain(tc.unet);
    tc.epochs = t.epochs;
    tc.batch = t.batch;
    tc.adam.lr = t.lr;
    tc.seed = c.seed;
    const TrainResult r = train(ds, tc, [](int epoch, double loss) {
        std::cout << "epoch " << epoch + 1 << " loss " << format_double(loss) << '\n';
    });
    ensure_parent(o.out);
    save_checkpoint(o.out, r.model);
    std::ofstream log(o.out + ".loss.csv", std::ios::binary);
    log << "epoch,loss\n";
    for (std::size_t i = 0; i < r.epoch_loss.size(); ++i)
        log << i + 1 << ',' << format_double(r.epoch_loss[i]) << '\n';
    return 0;
}

struct EnhanceOpts {
    std::string method = "isrse";
    std::string model;
    std::string in;
    std::optional<double> noise_power;
    bool literal = false;
};

int cmd_enhance(const Common& o, const EnhanceOpts& e)
{
    const SystemConfig c = resolve(o);
    const TensorFile in = read_tensor_file(e.in);
    double np = 0.0;
    if (e.noise_power)
        np = *e.noise_power;
    else if (in.attrs.count("noise_power"))
        np = in.attrs.at("noise_power");
    const Enhancer enh = make_enhancer(e.method, e.model, e.literal);
    const auto sigs = tensor_to_signals(in);
    std::vector<ComplexSignal> out;
    for (std::size_t a = 0; a < sigs.size(); ++a)
        out.push_back(
            enhance(enh, sigs[a], {np, 0.0, derive_seed(c.seed, a, static_cast<std::uint64_t>(Stage::enhance))}));
    TensorFile t = signals_to_tensor(out);
    t.attrs = in.attrs;
    ensure_parent(o.out);
    write_tensor_file(o.out, t);
    std::cout << "enhanced " << out.size() << " streams with " << e.method << '\n';
    return 0;
}

struct SenseOpts {
    std::string in;
    std::uint64_t trial = 0;
    std::optional<double> noise_power;
};

int cmd_sense(const Common& o, const SenseOpts& s)
{
    const SystemConfig c = resolve(o);
    const TensorFile in = read_tensor_file(s.in);
    const auto trial = in.attrs.count("trial") ? static_cast<std::uint64_t>(in.attrs.at("trial")) : s.trial;
    double np = s.noise_power.value_or(in.attrs.count("noise_power") ? in.attrs.at("noise_power") : 0.0);
    const TrialSetup t = regenerate_trial(c, trial);
    const auto streams = tensor_to_signals(in);
    const CsiStack st = estimate_channel(pilot_observations(streams, c), t.frame.pilots, np);
    const SensingOutput so = sense(st, c, default_sensing(c, t.scene));
    const MapScaling ms = map_scaling(c);
    const SensingReport rep = associate(so.estimates, truth_targets(t.scene.paths, c), ms, error_caps(ms, c));

    ensure_parent(o.out);
    std::ofstream f(o.out, std::ios::binary);
    f << "kind,index,azimuth_deg,elevation_deg,range_m,velocity_mps,aoa_err_deg,range_err_m,velocity_err_mps\n";
    for (std::size_t i = 0; i < so.estimates.size(); ++i) {
        const auto& e = so.estimates[i];
        f << "estimate," << i << ',' << format_double(rad2deg(e.aoa.azimuth)) << ','
          << format_double(rad2deg(e.aoa.elevation)) << ',' << format_double(e.range_m) << ','
          << format_double(e.velocity_mps) << ",,,\n";
    }
    for (const auto& m : rep.matches)
        f << "match," << m.truth << ",,,,," << format_double(m.aoa_err_deg) << ',' << format_double(m.range_err_m)
          << ',' << format_double(m.velocity_err_mps) << '\n';
    if (!f)
        throw std::runtime_error("cannot write " + o.out);
    std::cout << so.estimates.size() << " estimates, " << rep.matches.size() << " scored targets\n";
    return 0;
}

struct EvaluateOpts {
    std::string clean, noisy, enhanced;
};

int cmd_evaluate(const Common& o, const EvaluateOpts& e)
{
    resolve(o);
    const auto clean = tensor_to_signals(read_tensor_file(e.clean));
    const auto noisy = tensor_to_signals(read_tensor_file(e.noisy));
    const auto enh = tensor_to_signals(read_tensor_file(e.enhanced));
    if (clean.size() != noisy.size() || clean.size() != enh.size())
        throw std::invalid_argument("evaluate: stream counts differ");
    ensure_parent(o.out);
    std::ofstream f(o.out, std::ios::binary);
    f << "stream,snr_in_db,snr_out_db,gain_db,noise_mse\n";
    for (std::size_t a = 0; a < clean.size(); ++a) {
        const GainReport g = enhancement_gain(clean[a], noisy[a], enh[a]);
        CVec noise(clean[a].size());
        for (std::size_t i = 0; i < noise.size(); ++i)
            noise[i] = noisy[a].samples[i] - clean[a].samples[i];
        f << a << ',' << format_double(g.snr_in_db) << ',' << format_double(g.snr_out_db) << ','
          << format_double(g.gain_db()) << ',' << format_double(noise_estimation_mse(noisy[a], enh[a], noise)) << '\n';
    }
    if (!f)
        throw std::runtime_error("cannot write " + o.out);
    return 0;
}

struct SweepOpts {
    std::string axis = "snr";
    std::vector<std::string> methods{"tsp"};
    std::string model, cnn_model;
    std::vector<double> grid;
    int trials = 4;
    double snr_db = -10.0;
    bool literal = false;
};

int cmd_sweep(const Common& o, const SweepOpts& s)
{
    ExperimentSpec spec;
    spec.scenario = resolve(o);
    spec.seed = spec.scenario.seed;
    spec.trials_per_point = s.trials;
    spec.methods.clear();
    for (const auto& m : s.methods) {
        const auto kind = enhancer_kind_from(m);
        const std::string& path = kind == EnhancerKind::cnn ? s.cnn_model : s.model;
        spec.methods.push_back({m, make_enhancer(m, path, s.literal)});
    }
    MetricTable table;
    if (s.axis == "snr") {
        if (!s.grid.empty())
            spec.snr_grid_db = s.grid;
        table = run_sweep(spec);
    } else if (s.axis == "beta_r") {
        spec.beta_r_grid = s.grid.empty() ? std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0} : s.grid;
        spec.beta_r_snr_db = s.snr_db;
        table = beta_r_sweep(spec);
    } else {
        throw std::invalid_argument("unknown sweep axis '" + s.axis + "' (expected snr or beta_r)");
    }
    fs::create_directories(o.out);
    write_metric_csv(fs::path(o.out) / "metrics.csv", table);
    write_outputs(table, o.out);
    std::cout << table.size() << " rows written to " << o.out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Integrated sensing signal enhancement toolkit"};
    app.require_subcommand(1);

    Common c_sim, c_ds, c_train, c_enh, c_sense, c_eval, c_sweep;
    SimulateOpts so;
    DatasetOpts dso;
    TrainOpts to;
    EnhanceOpts eo;
    SenseOpts seo;
    EvaluateOpts evo;
    SweepOpts swo;

    auto* sim = app.add_subcommand("simulate", "Simulate one noisy trial; writes clean/noisy streams and the scene");
    add_common(sim, c_sim);
    sim->add_option("--snr-db", so.snr_db, "Receive SNR")->capture_default_str();
    sim->add_option("--snr-reference", so.reference, "echo or total")
        ->check(CLI::IsMember({"echo", "total"}))
        ->capture_default_str();
    sim->add_option("--trial", so.trial, "Trial index")->capture_default_str();

    auto* ds = app.add_subcommand("make-dataset", "Generate paired clean/noisy training tiles");
    add_common(ds, c_ds);
    ds->add_option("--n", dso.n, "Number of pairs")->capture_default_str();
    ds->add_option("--snr-lo", dso.snr_lo, "Lowest SNR in dB")->capture_default_str();
    ds->add_option("--snr-hi", dso.snr_hi, "Highest SNR in dB")->capture_default_str();

    auto* tr = app.add_subcommand("train", "Train a denoiser and write a checkpoint");
    add_common(tr, c_train);
    tr->add_option("--data", to.data, "Dataset directory")->required();
    tr->add_option("--kind", to.kind, "diffusion or direct")
        ->check(CLI::IsMember({"diffusion", "direct", "cnn"}))
        ->capture_default_str();
    tr->add_option("--epochs", to.epochs)->capture_default_str();
    tr->add_option("--batch", to.batch)->capture_default_str();
    tr->add_option("--lr", to.lr)->capture_default_str();
    tr->add_flag("--plain", to.plain, "Disable attention and residual blocks");

    auto* en = app.add_subcommand("enhance", "Enhance every stream of a tensor file");
    add_common(en, c_enh);
    en->add_option("--method", eo.method)->check(CLI::IsMember({"isrse", "tsp", "lms", "cnn"}))->capture_default_str();
    en->add_option("--model", eo.model, "Checkpoint for isrse/cnn");
    en->add_option("--in", eo.in)->required();
    en->add_option("--noise-power", eo.noise_power, "Per-sample noise power (default: file attribute)");
    en->add_flag("--literal-alg2", eo.literal, "Inject the noisy image at the last timestep");

    auto* se = app.add_subcommand("sense", "Estimate AoA, range and velocity from simulated streams");
    add_common(se, c_sense);
    se->add_option("--in", seo.in)->required();
    se->add_option("--trial", seo.trial, "Trial index when the file does not record it");
    se->add_option("--noise-power", seo.noise_power);

    auto* ev = app.add_subcommand("evaluate", "Per-stream SNR gain and noise-estimation MSE");
    add_common(ev, c_eval);
    ev->add_option("--clean", evo.clean)->required();
    ev->add_option("--noisy", evo.noisy)->required();
    ev->add_option("--enhanced", evo.enhanced)->required();

    auto* sw = app.add_subcommand("sweep", "SNR or beta_R sweep over seeded trials");
    add_common(sw, c_sweep);
    sw->add_option("--axis", swo.axis)->check(CLI::IsMember({"snr", "beta_r"}))->capture_default_str();
    sw->add_option("--methods", swo.methods)->check(CLI::IsMember({"isrse", "tsp", "lms", "cnn"}));
    sw->add_option("--model", swo.model, "Diffusion checkpoint");
    sw->add_option("--cnn-model", swo.cnn_model, "Direct-denoiser checkpoint");
    sw->add_option("--grid", swo.grid, "SNR (dB) or beta_R values");
    sw->add_option("--trials", swo.trials)->capture_default_str();
    sw->add_option("--snr-db", swo.snr_db, "Sensing SNR of the beta_R sweep")->capture_default_str();
    sw->add_flag("--literal-alg2", swo.literal);

    CLI11_PARSE(app, argc, argv);
    try {
        if (sim->parsed())
            return cmd_simulate(c_sim, so);
        if (ds->parsed())
            return cmd_make_dataset(c_ds, dso);
        if (tr->parsed())
            return cmd_train(c_train, to);
        if (en->parsed())
            return cmd_enhance(c_enh, eo);
        if (se->parsed())
            return cmd_sense(c_sense, seo);
        if (ev->parsed())
            return cmd_evaluate(c_eval, evo);
        if (sw->parsed())
            return cmd_sweep(c_sweep, swo);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
