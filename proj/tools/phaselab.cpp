// phaselab: command-line front end. Each subcommand resolves one JSON config
// (defaults or a repro recipe, then --config, then flags, then --set), does its
// work through the library, and leaves run.json next to its artifacts.
#include "phaselab/approximant.hpp"
#include "phaselab/calibrate.hpp"
#include "phaselab/config.hpp"
#include "phaselab/csv.hpp"
#include "phaselab/error.hpp"
#include "phaselab/experiments.hpp"
#include "phaselab/metrics.hpp"
#include "phaselab/plt.hpp"
#include "phaselab/preview.hpp"
#include "phaselab/rng.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace phaselab;

namespace {

constexpr const char* version = "0.1.0";

struct Options {
  std::string config_file;
  std::vector<std::string> sets;
  std::string out;
  std::string model;
  std::string calibration;
  std::string images;
  std::vector<std::string> inputs;
  std::string output_file;
};

// Resolved config, output directory and the provenance record being built.
class Run {
 public:
  Run(std::string command, const json& base, const Options& o, std::vector<std::string> flag_overrides)
      : command_(std::move(command)) {
    doc_ = o.config_file.empty() ? base : merge_config(read_config_file(o.config_file), base);
    if (!o.out.empty()) flag_overrides.push_back("output=" + o.out);
    for (const auto& s : flag_overrides) apply_override(doc_, s);
    for (const auto& s : o.sets) apply_override(doc_, s);
    cfg_ = parse_config(doc_);
    fs::create_directories(cfg_.output);
    inputs_ = json::object();
    summary_ = json::object();
    artifacts_ = json::array();
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  fs::path path(const fs::path& name) {
    const fs::path p = cfg_.output / name;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    artifacts_.push_back(name.generic_string());
    return p;
  }
  // Preview stems produce two files.
  fs::path preview(const fs::path& stem, const RealGrid& x) {
    const fs::path p = cfg_.output / stem;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_preview(p, x);
    artifacts_.push_back(stem.generic_string() + ".pgm");
    artifacts_.push_back(stem.generic_string() + ".plt");
    return p;
  }
  void input(const std::string& key, const std::string& value) { inputs_[key] = value; }
  json& summary() { return summary_; }

  const WeightBundle& weights() {
    if (weights_.layers().empty()) {
      weights_ = load_weights(cfg_, PHASELAB_DEFAULT_WEIGHTS);
      const auto manifest = weights_.manifest();
      json crcs = json::object();
      for (const auto& e : manifest) crcs[e.name] = e.crc32;
      inputs_["weights"] = cfg_.weights.empty() ? std::string("bundled") : cfg_.weights.string();
      inputs_["weights_crc32"] = crcs;
    }
    return weights_;
  }

  void finish() const {
    json rec;
    rec["command"] = command_;
    rec["config_hash"] = config_hash(doc_);
    rec["seed"] = cfg_.seed;
    rec["config"] = doc_;
    rec["inputs"] = inputs_;
    rec["artifacts"] = artifacts_;
    rec["summary"] = summary_;
    rec["versions"] = {{"phaselab", version},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                       {"cli11", CLI11_VERSION},
                       {"compiler", __VERSION__},
                       {"config_schema", config_schema}};
    std::ofstream out(cfg_.output / "run.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (cfg_.output / "run.json").string());
    out << rec.dump(2) << '\n';
    std::cerr << "phaselab: wrote " << (cfg_.output / "run.json").string() << '\n';
  }

 private:
  std::string command_;
  json doc_;
  ExperimentConfig cfg_;
  json inputs_, summary_, artifacts_;
  WeightBundle weights_;
};

void log(const std::string& msg) { std::cerr << "phaselab: " << msg << '\n'; }

std::string level_name(double level) { return "photons_" + format_double(level); }

std::string index_name(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

Phenn<float> load_model(Run& run, const std::string& path) {
  if (path.empty()) throw ConfigError("--model is required");
  run.input("model", path);
  return Phenn<float>::from_bundle(read_pwb(path));
}

std::optional<CalibrationModel> load_optional_calibration(Run& run, const std::string& path) {
  if (path.empty()) return std::nullopt;
  run.input("calibration", path);
  return load_calibration(path);
}

json scores_json(const ExampleScores& s) { return {{"pcc", s.pcc}, {"mse", s.mse}, {"perceptual", s.perceptual}}; }

// ---- subcommands ----------------------------------------------------------

void cmd_dataset(Run& run) {
  const DatasetSplits data = resolve_dataset(run.cfg());
  save_dataset(run.path("dataset"), data);
  const Triplet& t = data.test.front();
  run.preview("preview/test0_f", t.f);
  run.preview("preview/test0_g", t.g);
  run.preview("preview/test0_fapprox", t.fapprox);
  run.summary() = {{"train", data.train.size()}, {"val", data.val.size()}, {"test", data.test.size()},
                   {"source", data.manifest.source}};
}

void cmd_simulate(Run& run) {
  ExperimentConfig cfg = run.cfg();
  if (!cfg.dataset_dir.empty()) throw ConfigError("simulate generates its own objects; unset dataset.path");
  const auto images = cfg.images.empty() ? std::vector<RealGrid>{} : ingest_directory(cfg.images, cfg.manifest);
  json levels = json::array();
  for (double level : cfg.photon_levels) {
    DatasetManifest m = cfg.manifest;
    m.photon_level = level;
    const DatasetSplits data = make_dataset(m, cfg.optics, cfg.measurement.read_sigma, images);
    save_dataset(run.path(level_name(level)), data);
    run.preview("preview/" + level_name(level) + "_test0_g", data.test.front().g);
    double pcc_sum = 0.0;
    for (const auto& t : data.test) pcc_sum += pcc(t.fapprox, t.f);
    levels.push_back({{"photon_level", level}, {"mean_pcc_approximant", pcc_sum / data.test.size()}});
    log("simulated " + level_name(level));
  }
  run.summary()["levels"] = levels;
}

void cmd_approximant(Run& run) {
  const auto& cfg = run.cfg();
  const DatasetSplits data = resolve_dataset(cfg);
  const ComplexGrid inc = plane_wave(cfg.optics.grid);
  CsvWriter csv(run.path("approximant.csv"), {"example", "pcc", "mse"});
  double sum = 0.0;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const Triplet& t = data.test[i];
    const RealGrid fa = cfg.approximant_iterations == 1 ? t.fapprox : gs_iterate(t.g, inc, cfg.optics, cfg.approximant_iterations);
    run.preview("approximant/" + index_name(i), fa);
    csv << i << pcc(fa, t.f) << mse(zero_mean(fa), zero_mean(t.f));
    csv.end_row();
    sum += pcc(fa, t.f);
  }
  run.summary() = {{"iterations", cfg.approximant_iterations}, {"mean_pcc", sum / data.test.size()}};
}

void cmd_train(Run& run) {
  const auto& cfg = run.cfg();
  const DatasetSplits data = resolve_dataset(cfg);
  const TrainResult r = train(data.train, data.val, run.weights(), cfg.training, [](const EpochRecord& e) {
    log("epoch " + std::to_string(e.epoch) + " train " + format_double(e.train_loss) + " val " +
        format_double(e.val_loss));
  });
  write_pwb(run.path("model.pwb"), r.best.to_bundle());
  write_history_csv(run.path("history.csv"), r.history);
  run.summary() = {{"best_epoch", r.best_epoch},
                   {"best_val_loss", r.history[static_cast<std::size_t>(r.best_epoch - 1)].val_loss},
                   {"parameters", r.best.parameter_count()}};
}

void cmd_reconstruct(Run& run, const Options& o) {
  const Phenn<float> net = load_model(run, o.model);
  const DatasetSplits data = resolve_dataset(run.cfg());
  for (std::size_t i = 0; i < data.test.size(); ++i)
    run.preview("reconstruct/" + index_name(i), net.forward(phenn_input(data.test[i])));
  run.summary() = {{"examples", data.test.size()}};
}

void cmd_evaluate(Run& run, const Options& o) {
  const Phenn<float> net = load_model(run, o.model);
  const auto cal = load_optional_calibration(run, o.calibration);
  const DatasetSplits data = resolve_dataset(run.cfg());
  const EvalReport r = evaluate(net, data.test, run.weights(), cal);
  write_eval_csv(run.path("eval.csv"), r);
  std::vector<RealGrid> approx, truth;
  for (const auto& t : data.test) {
    approx.push_back(t.fapprox);
    truth.push_back(t.f);
  }
  const EvalReport a = evaluate(approx, truth, run.weights());
  run.summary() = {{"reconstruction", scores_json(r.mean)}, {"approximant", scores_json(a.mean)}};
  if (cal) run.summary()["calibrated"] = scores_json(r.calibrated_mean);
}

void cmd_calibrate_fit(Run& run, const Options& o) {
  const Phenn<float> net = load_model(run, o.model);
  const DatasetSplits data = resolve_dataset(run.cfg());
  std::vector<RealGrid> raw, truth;
  for (const auto& t : data.val) {
    raw.push_back(net.forward(phenn_input(t)));
    truth.push_back(t.f);
  }
  const CalibrationModel m = fit_calibration(raw, truth, run.cfg().calibration_degree);
  save_calibration(run.path("calibration.json"), m);
  run.summary() = {{"coefficients", m.coefficients}, {"residual_rms", m.residual_rms}, {"samples", m.samples}};
}

void cmd_calibrate_apply(Run& run, const Options& o) {
  const auto cal = load_optional_calibration(run, o.calibration);
  if (!cal) throw ConfigError("--calibration is required");
  if (o.inputs.empty()) throw ConfigError("--input is required");
  json outs = json::array();
  for (const auto& in : o.inputs) {
    run.input("input:" + in, in);
    const fs::path stem = "calibrated/" + fs::path(in).stem().string();
    run.preview(stem, apply_calibration(read_real_grid(in), *cal));
    outs.push_back(stem.generic_string() + ".plt");
  }
  run.summary() = {{"outputs", outs}};
}

void write_profiles(CsvWriter& csv, const std::string& set, const RealGrid& centered) {
  for (Direction d : {Direction::Horizontal, Direction::Vertical, Direction::Diagonal})
    for (const auto& p : spectrum_profile(centered, d)) {
      csv << set << to_string(d) << p.nu << p.value;
      csv.end_row();
    }
}

void cmd_psd(Run& run, const Options& o) {
  CsvWriter csv(run.path("psd_profiles.csv"), {"set", "direction", "nu", "log10_power"});
  json sets = json::array();
  const auto emit = [&](const std::string& name, const std::vector<RealGrid>& grids) {
    const RealGrid m = mean_psd_log(grids, 1e-12, run.cfg().psd_averaging);
    run.preview("psd_" + name, m);
    write_profiles(csv, name, m);
    sets.push_back({{"set", name}, {"images", grids.size()}});
  };
  if (!o.inputs.empty()) {
    std::vector<RealGrid> grids;
    for (const auto& in : o.inputs) {
      run.input("input:" + in, in);
      grids.push_back(read_real_grid(in));
    }
    emit("input", grids);
  } else {
    const DatasetSplits data = resolve_dataset(run.cfg());
    std::vector<RealGrid> truth, approx;
    for (const auto& t : data.test) {
      truth.push_back(t.f);
      approx.push_back(t.fapprox);
    }
    emit("truth", truth);
    emit("approximant", approx);
    if (!o.model.empty()) {
      const Phenn<float> net = load_model(run, o.model);
      std::vector<RealGrid> recon;
      for (const auto& t : data.test) recon.push_back(net.forward(phenn_input(t)));
      emit("reconstruction", recon);
    }
  }
  run.summary() = {{"sets", sets}, {"averaging", to_string(run.cfg().psd_averaging)}};
}

void cmd_scan(Run& run) {
  const auto& cfg = run.cfg();
  const auto objects = test_objects(cfg, cfg.scan_examples);
  std::vector<ScanRecord> records;
  json peaks = json::object();
  for (Direction d : cfg.scan_directions) {
    ScanConfig sc = cfg.scan;
    sc.direction = d;
    log("scanning " + to_string(d) + " over " + std::to_string(objects.size()) + " examples");
    records.push_back(scan_losses(objects, run.weights(), sc));
    const auto& r = records.back();
    const double step = 1.0 / static_cast<double>(cfg.optics.grid);
    const auto peak = local_maximum_near(r.nu, r.dloss_abs_mean, 0.25, step);
    json spikes = json::array();
    for (const auto& f : detect_nonsmooth(r)) spikes.push_back({f.nu_x, f.nu_y});
    peaks[to_string(d)] = {{"peak_nu_near_quarter", peak ? json(r.nu[*peak]) : json(nullptr)}, {"spikes", spikes}};
  }
  write_scan_csv(run.path("scan.csv"), records);
  write_scan_long_csv(run.path("scan_long.csv"), records);
  run.summary() = {{"examples", objects.size()}, {"directions", peaks}};
}

void cmd_map(Run& run) {
  const auto& cfg = run.cfg();
  const Index n = cfg.optics.grid;
  StreamRng rng(derive_seed(cfg.seed, "map"));
  Tensor3<float> init(3, n, n);
  for (Index i = 0; i < init.size(); ++i) init.matrix().data()[i] = static_cast<float>(rng.uniform());
  OptimizerOpts opts;
  opts.step = cfg.map.step;
  opts.max_iters = cfg.map.iterations;
  opts.tolerance = cfg.map.tolerance;
  const MapResult r = map_ascend(run.weights(), init, opts);
  write_tensor(run.path("map.plt"), r.pattern);
  RealGrid mean = RealGrid::Zero(n, n);
  for (Index c = 0; c < 3; ++c) {
    RealGrid ch(n, n);
    for (Index i = 0; i < ch.size(); ++i) ch.data()[i] = r.pattern.matrix()(c, i);
    run.preview("map_c" + std::to_string(c), ch);
    mean += ch / 3.0;
  }
  const RealGrid psd = psd_log(zero_mean(mean));
  run.preview("map_psd", psd);
  CsvWriter psd_csv(run.path("map_psd_profiles.csv"), {"set", "direction", "nu", "log10_power"});
  write_profiles(psd_csv, "map", psd);
  CsvWriter csv(run.path("trace.csv"), {"iteration", "objective"});
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    csv << i << r.trace[i];
    csv.end_row();
  }
  run.summary() = {{"iterations", r.iterations}, {"converged", r.converged}, {"objective", r.trace.back()}};
}

void cmd_minimize(Run& run) {
  const auto& cfg = run.cfg();
  const auto objects = test_objects(cfg, 1);
  const RealGrid& f = objects.front();
  const SuppressionConfig& p = cfg.probe;
  const NoiseSpec spec =
      draw_noise(impulse_amplitude(p.amplitude, p.convention, f.rows(), f.cols()), along(p.direction, cfg.probe_nu),
                 p.seed, 0, 0, p.phase_mode);
  const MinimizeResult r = loss_minimize(f, spec, run.weights(), p.opts);
  const RealGrid noisy = inject(f, spec);
  run.preview("truth", f);
  run.preview("noisy", noisy);
  run.preview("minimized", r.fhat);
  run.preview("psd_noisy", psd_log(noisy));
  run.preview("psd_minimized", psd_log(r.fhat));
  CsvWriter csv(run.path("trace.csv"), {"iteration", "loss"});
  for (std::size_t i = 0; i < r.report.trace.size(); ++i) {
    csv << i << r.report.trace[i];
    csv.end_row();
  }
  run.summary() = {{"nu", cfg.probe_nu},
                   {"direction", to_string(p.direction)},
                   {"delta", r.report.delta},
                   {"iterations", r.report.iterations},
                   {"converged", r.report.converged}};
}

void cmd_fig7(Run& run) {
  const auto& cfg = run.cfg();
  const auto objects = test_objects(cfg, cfg.probe_examples);
  log("suppression scan over " + std::to_string(objects.size()) + " examples");
  const SuppressionSeries s = suppression_scan(objects, run.weights(), cfg.probe);
  write_suppression_csv(run.path("suppression.csv"), s);
  write_suppression_long_csv(run.path("suppression_long.csv"), s);
  const auto best = static_cast<std::size_t>(std::max_element(s.delta_mean.begin(), s.delta_mean.end()) -
                                             s.delta_mean.begin());
  run.summary() = {{"examples", objects.size()},
                   {"direction", to_string(s.direction)},
                   {"argmax_nu", s.nu[best]},
                   {"max_delta", s.delta_mean[best]}};
}

void cmd_photon_sweep(Run& run) {
  CsvWriter csv(run.path("sweep.csv"), {"photon_level", "pcc_approximant", "pcc_reconstruction", "loss_approximant",
                                        "loss_reconstruction", "best_epoch"});
  json levels = json::array();
  photon_sweep(run.cfg(), run.weights(), [&](const PhotonLevelResult& r) {
    const std::string name = level_name(r.photon_level);
    csv << r.photon_level << r.pcc_approximant << r.pcc_reconstruction << r.loss_approximant << r.loss_reconstruction
        << r.best_epoch;
    csv.end_row();
    write_history_csv(run.path(name + "/history.csv"), r.history);
    write_pwb(run.path(name + "/model.pwb"), r.net.to_bundle());
    run.preview(name + "/test0_f", r.sample.f);
    run.preview(name + "/test0_g", r.sample.g);
    run.preview(name + "/test0_fapprox", r.sample.fapprox);
    run.preview(name + "/test0_fhat", r.sample_reconstruction);
    levels.push_back({{"photon_level", r.photon_level},
                      {"pcc_approximant", r.pcc_approximant},
                      {"pcc_reconstruction", r.pcc_reconstruction}});
    log(name + ": PCC approximant " + format_double(r.pcc_approximant) + ", reconstruction " +
        format_double(r.pcc_reconstruction));
  });
  run.summary() = {{"levels", levels}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phaselab: photon-starved phase retrieval experiments"};
  app.set_version_flag("--version", version);
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("-c,--config", o.config_file, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--set", o.sets, "Override a config field, e.g. --set optics.distance=0.01");
  app.add_option("-o,--out", o.out, "Output directory (config key 'output')");

  std::string command;
  std::function<void()> action;
  const auto sub = [&](CLI::App* parent, const std::string& name, const std::string& help, const json& base,
                       std::function<void(Run&)> body, std::function<std::vector<std::string>()> flags = {}) {
    CLI::App* s = parent->add_subcommand(name, help);
    s->callback([&, parent, s, base, body, flags] {
      command = (parent == &app ? "" : parent->get_name() + " ") + s->get_name();
      action = [&, base, body, flags] {
        Run run(command, base, o, flags ? flags() : std::vector<std::string>{});
        body(run);
        run.finish();
      };
    });
    return s;
  };
  const json defaults = default_config_json();

  CLI::App* dataset = app.add_subcommand("dataset", "Build and save a train/val/test dataset");
  dataset->require_subcommand(1);
  sub(dataset, "gen", "Synthetic textures", defaults, cmd_dataset);
  sub(dataset, "ingest", "Grayscale images from a directory", defaults, cmd_dataset, [&] {
        return std::vector<std::string>{"dataset.images=" + json(o.images).dump()};
      })->add_option("--images", o.images, "Image directory")->required()->check(CLI::ExistingDirectory);
  sub(&app, "simulate", "Measurement sets at every sweep.photon_levels entry", defaults, cmd_simulate);
  sub(&app, "approximant", "Gerchberg-Saxton approximants of the test split", defaults, cmd_approximant);
  sub(&app, "train", "Train the reconstruction network with the perceptual loss", defaults, cmd_train);
  sub(&app, "reconstruct", "Run a trained network on the test split", defaults,
      [&](Run& r) { cmd_reconstruct(r, o); })
      ->add_option("--model", o.model, "Trained model (PWB1)")->required()->check(CLI::ExistingFile);
  CLI::App* ev = sub(&app, "evaluate", "Score a trained network on the test split", defaults,
                     [&](Run& r) { cmd_evaluate(r, o); });
  ev->add_option("--model", o.model, "Trained model (PWB1)")->required()->check(CLI::ExistingFile);
  ev->add_option("--calibration", o.calibration, "Calibration model (JSON)")->check(CLI::ExistingFile);
  CLI::App* cal = app.add_subcommand("calibrate", "Polynomial value calibration");
  cal->require_subcommand(1);
  sub(cal, "fit", "Fit on the validation split", defaults, [&](Run& r) { cmd_calibrate_fit(r, o); })
      ->add_option("--model", o.model, "Trained model (PWB1)")->required()->check(CLI::ExistingFile);
  CLI::App* apply = sub(cal, "apply", "Apply to PLT1 grids", defaults, [&](Run& r) { cmd_calibrate_apply(r, o); });
  apply->add_option("--calibration", o.calibration, "Calibration model (JSON)")->required()->check(CLI::ExistingFile);
  apply->add_option("--input", o.inputs, "PLT1 grids")->required()->check(CLI::ExistingFile);
  CLI::App* psd = sub(&app, "psd", "Mean log power spectra and directional profiles", defaults,
                      [&](Run& r) { cmd_psd(r, o); });
  psd->add_option("--input", o.inputs, "PLT1 grids (default: the test split)")->check(CLI::ExistingFile);
  psd->add_option("--model", o.model, "Also analyse this network's reconstructions")->check(CLI::ExistingFile);
  sub(&app, "scan", "Perceptual loss versus noise frequency", defaults, cmd_scan);
  sub(&app, "map", "Maximally activated pattern of the feature extractor", defaults, cmd_map);
  sub(&app, "minimize", "Loss minimization from one noisy start", defaults, cmd_minimize);
  CLI::App* repro = app.add_subcommand("repro", "Canned recipes");
  repro->require_subcommand(1);
  sub(repro, "fig5", "Loss scans in three directions on 50 test objects", fig5_recipe(), cmd_scan);
  sub(repro, "fig7", "Diagonal suppression scan on 50 test objects", fig7_recipe(), cmd_fig7);
  sub(repro, "photon-sweep", "Train and score at every photon level", photon_sweep_recipe(), cmd_photon_sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc != 0) std::cerr << app.help();
    return rc == 0 ? 0 : 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "phaselab: config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "phaselab: config error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "phaselab: I/O error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "phaselab: I/O error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "phaselab: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "phaselab: error: " << e.what() << '\n';
    return 1;
  }
}
