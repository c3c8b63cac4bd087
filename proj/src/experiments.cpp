#include "phaselab/experiments.hpp"

#include "phaselab/error.hpp"
#include "phaselab/metrics.hpp"

namespace phaselab {

using nlohmann::json;

WeightBundle load_weights(const ExperimentConfig& cfg, const std::filesystem::path& bundled) {
  const auto path = cfg.weights.empty() ? bundled : cfg.weights;
  WeightBundle b = read_pwb(path);
  b.require_vgg_prefix();
  return b;
}

namespace {

std::vector<RealGrid> source_objects(const ExperimentConfig& cfg) {
  if (cfg.images.empty()) return synth_dataset(cfg.manifest);
  return ingest_directory(cfg.images, cfg.manifest);
}

}  // namespace

DatasetSplits resolve_dataset(const ExperimentConfig& cfg) {
  if (!cfg.dataset_dir.empty()) {
    DatasetSplits d = load_dataset(cfg.dataset_dir);
    if (d.manifest.grid != cfg.optics.grid) throw ConfigError("saved dataset grid differs from optics.grid");
    return d;
  }
  return make_dataset(cfg.manifest, cfg.optics, cfg.measurement.read_sigma,
                      cfg.images.empty() ? std::vector<RealGrid>{} : ingest_directory(cfg.images, cfg.manifest));
}

std::vector<RealGrid> test_objects(const ExperimentConfig& cfg, std::size_t limit) {
  std::vector<RealGrid> out;
  if (!cfg.dataset_dir.empty()) {
    for (auto& t : resolve_dataset(cfg).test) {
      if (out.size() == limit) break;
      out.push_back(std::move(t.f));
    }
    return out;
  }
  const auto objects = source_objects(cfg);
  const Split split = split_indices(cfg.manifest.counts, cfg.manifest.seed);
  for (std::size_t i : split.test) {
    if (out.size() == limit) break;
    out.push_back(objects[i]);
  }
  return out;
}

std::vector<PhotonLevelResult> photon_sweep(const ExperimentConfig& cfg, const WeightBundle& vgg,
                                            const std::function<void(const PhotonLevelResult&)>& on_level) {
  if (!cfg.dataset_dir.empty()) throw ConfigError("photon sweep simulates its own data; unset dataset.path");
  const auto images = cfg.images.empty() ? std::vector<RealGrid>{} : ingest_directory(cfg.images, cfg.manifest);
  std::vector<PhotonLevelResult> out;
  for (double level : cfg.photon_levels) {
    DatasetManifest m = cfg.manifest;
    m.photon_level = level;
    const DatasetSplits data = make_dataset(m, cfg.optics, cfg.measurement.read_sigma, images);

    PhotonLevelResult r;
    r.photon_level = level;
    TrainResult trained = train(data.train, data.val, vgg, cfg.training);
    r.best_epoch = trained.best_epoch;
    r.history = std::move(trained.history);
    r.net = std::move(trained.best);

    std::vector<RealGrid> approx, truth;
    for (const auto& t : data.test) {
      approx.push_back(t.fapprox);
      truth.push_back(t.f);
    }
    const EvalReport a = evaluate(approx, truth, vgg);
    const EvalReport n = evaluate(r.net, data.test, vgg);
    r.pcc_approximant = a.mean.pcc;
    r.loss_approximant = a.mean.perceptual;
    r.pcc_reconstruction = n.mean.pcc;
    r.loss_reconstruction = n.mean.perceptual;
    r.sample = data.test.front();
    r.sample_reconstruction = r.net.forward(phenn_input(r.sample));
    if (on_level) on_level(r);
    out.push_back(std::move(r));
  }
  return out;
}

json photon_sweep_recipe() {
  return merge_config({{"output", "runs/photon-sweep"},
                       {"optics", {{"grid", 32}, {"distance", 5e-3}}},
                       {"dataset", {{"train", 64}, {"val", 16}, {"test", 32}}},
                       {"training", {{"epochs", 20}, {"width", 8}}}});
}

json fig5_recipe() {
  return merge_config({{"output", "runs/fig5"},
                       {"optics", {{"grid", 64}}},
                       {"dataset", {{"train", 10}, {"val", 5}, {"test", 50}}},
                       {"scan", {{"examples", 50}}}});
}

json fig7_recipe() {
  return merge_config({{"output", "runs/fig7"},
                       {"optics", {{"grid", 64}}},
                       {"dataset", {{"train", 10}, {"val", 5}, {"test", 50}}},
                       {"probe", {{"examples", 50}, {"direction", "diagonal"}, {"step", 3.0}, {"max_iters", 20}}}});
}

std::optional<std::size_t> local_maximum_near(std::span<const double> x, std::span<const double> curve, double target,
                                              double tolerance) {
  if (x.size() != curve.size()) throw std::invalid_argument("local_maximum_near: size mismatch");
  std::optional<std::size_t> best;
  for (std::size_t i : local_maxima(curve)) {
    if (std::abs(x[i] - target) > tolerance) continue;
    if (!best || curve[i] > curve[*best]) best = i;
  }
  return best;
}

}  // namespace phaselab
