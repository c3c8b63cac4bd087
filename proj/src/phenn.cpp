#include "phaselab/phenn.hpp"

#include "phaselab/approximant.hpp"
#include "phaselab/csv.hpp"
#include "phaselab/error.hpp"
#include "phaselab/metrics.hpp"
#include "phaselab/parallel.hpp"
#include "phaselab/rng.hpp"

#include <limits>

namespace phaselab {

void PhennArch::validate() const {
  if (depth < 1 || depth > 6) throw ConfigError("phenn depth must lie in [1, 6]");
  if (width < 1 || width > 256) throw ConfigError("phenn width must lie in [1, 256]");
}

std::vector<LayerManifestEntry> PhennArch::layout() const {
  validate();
  std::vector<LayerManifestEntry> out;
  for (int d = 0; d < depth; ++d)
    out.push_back({"enc" + std::to_string(d), d == 0 ? 1 : channels(d - 1), channels(d), 0, 0});
  out.push_back({"bottleneck", channels(depth - 1), channels(depth), 0, 0});
  for (int d = depth - 1; d >= 0; --d)
    out.push_back({"dec" + std::to_string(d), channels(d + 1) + channels(d), channels(d), 0, 0});
  out.push_back({"out", channels(0), 1, 0, 0});
  return out;
}

template <typename Scalar>
Phenn<Scalar> Phenn<Scalar>::initialized(const PhennArch& arch, std::uint64_t seed) {
  Phenn net(arch);
  StreamRng rng(derive_seed(seed, "phenn/init"));
  for (std::size_t i = 0; i < net.layers_.size(); ++i) {
    auto& l = net.layers_[i];
    const double gain = i + 1 == net.layers_.size() ? 1.0 : 2.0;
    const double sd = std::sqrt(gain / static_cast<double>(l.kernel.cols()));
    for (Eigen::Index k = 0; k < l.kernel.size(); ++k) l.kernel.data()[k] = static_cast<Scalar>(sd * rng.normal());
  }
  return net;
}

template <typename Scalar>
Phenn<Scalar> Phenn<Scalar>::from_bundle(const WeightBundle& bundle) {
  const auto arch_name = bundle.meta_value("arch");
  if (!arch_name || *arch_name != "phenn") throw ConfigError("weight bundle is not a phenn checkpoint (meta arch)");
  PhennArch arch;
  try {
    arch.depth = std::stoi(bundle.meta_value("depth").value_or(""));
    arch.width = std::stoi(bundle.meta_value("width").value_or(""));
    arch.residual = bundle.meta_value("residual").value_or("1") != "0";
  } catch (const std::exception&) {
    throw ConfigError("phenn checkpoint lacks integer depth/width metadata");
  }
  Phenn net(arch);
  if (bundle.layers().size() != net.layers_.size())
    throw ConfigError("phenn checkpoint has " + std::to_string(bundle.layers().size()) + " layers, expected " +
                      std::to_string(net.layers_.size()));
  for (std::size_t i = 0; i < net.layers_.size(); ++i) {
    const auto& src = bundle.layers()[i];
    const auto& dst = net.layers_[i];
    if (src.name != dst.name || src.in_channels() != dst.in_channels() || src.out_channels() != dst.out_channels())
      throw ConfigError("phenn checkpoint layer " + std::to_string(i) + " (" + src.name + ") does not match " +
                        dst.name);
    net.layers_[i] = src.template cast<Scalar>();
  }
  return net;
}

template <typename Scalar>
WeightBundle Phenn<Scalar>::to_bundle() const {
  std::vector<ConvLayer<float>> layers;
  for (const auto& l : layers_) layers.push_back(l.template cast<float>());
  return WeightBundle(std::move(layers), {{"arch", "phenn"},
                                          {"depth", std::to_string(arch_.depth)},
                                          {"width", std::to_string(arch_.width)},
                                          {"residual", arch_.residual ? "1" : "0"}});
}

template class Phenn<float>;
template class Phenn<double>;

RealGrid phenn_input(const Triplet& t) { return zero_mean(t.fapprox); }

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  arch.validate();
}

namespace {

Tensor3<float> to_tensor(const RealGrid& x) {
  Tensor3<float> t(1, x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) t.matrix()(0, i) = static_cast<float>(x.data()[i]);
  return t;
}

RealGrid to_grid(const Tensor3<float>& t) {
  RealGrid out(t.height(), t.width());
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = static_cast<double>(t.matrix()(0, i));
  return out;
}

struct ExampleGrad {
  double loss = 0.0;
  std::vector<ConvLayer<float>> grads;
};

ExampleGrad example_gradient(const Phenn<float>& net, const Triplet& t, const PerceptualLoss<float>& loss) {
  Phenn<float>::Tape tape;
  const Tensor3<float> y = net.forward(to_tensor(phenn_input(t)), &tape);
  ExampleGrad out{std::numeric_limits<double>::quiet_NaN(), net.zero_grads()};
  if (!y.matrix().allFinite()) return out;  // diverged; reported with the batch index
  RealGrid gy;
  out.loss = loss(t.f, to_grid(y), &gy);
  if (std::isfinite(out.loss)) net.backward(tape, to_tensor(gy), out.grads);
  return out;
}

class Adam {
 public:
  Adam(const Phenn<float>& net, const TrainConfig& cfg) : cfg_(cfg), m_(net.zero_grads()), v_(net.zero_grads()) {}

  void step(Phenn<float>& net, const std::vector<ConvLayer<float>>& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_), c2 = 1.0 - std::pow(cfg_.beta2, t_);
    const auto update = [&](auto& p, const auto& gr, auto& m, auto& v) {
      for (Index i = 0; i < p.size(); ++i) {
        const double gi = gr.data()[i];
        const double mi = cfg_.beta1 * m.data()[i] + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * v.data()[i] + (1.0 - cfg_.beta2) * gi * gi;
        m.data()[i] = static_cast<float>(mi);
        v.data()[i] = static_cast<float>(vi);
        p.data()[i] -= static_cast<float>(cfg_.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg_.epsilon));
      }
    };
    for (std::size_t l = 0; l < g.size(); ++l) {
      update(net.layers()[l].kernel, g[l].kernel, m_[l].kernel, v_[l].kernel);
      update(net.layers()[l].bias, g[l].bias, m_[l].bias, v_[l].bias);
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<ConvLayer<float>> m_, v_;
  int t_ = 0;
};

}  // namespace

double mean_loss(const Phenn<float>& net, std::span<const Triplet> set, const PerceptualLoss<float>& loss) {
  if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> losses(set.size());
  parallel_for(set.size(), [&](std::size_t i) {
    const RealGrid y = net.forward(phenn_input(set[i]));
    losses[i] = y.allFinite() ? loss(set[i].f, y) : std::numeric_limits<double>::quiet_NaN();
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(set.size());
}

TrainResult train(std::span<const Triplet> train_set, std::span<const Triplet> val_set, const WeightBundle& vgg,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  return train(Phenn<float>::initialized(cfg.arch, cfg.seed), train_set, val_set, vgg, cfg, on_epoch);
}

TrainResult train(Phenn<float> net, std::span<const Triplet> train_set, std::span<const Triplet> val_set,
                  const WeightBundle& vgg, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (net.arch().depth != cfg.arch.depth || net.arch().width != cfg.arch.width || net.arch().residual != cfg.arch.residual)
    throw ConfigError("train: initial parameters do not match the configured architecture");
  vgg.require_vgg_prefix();
  const PerceptualLoss<float> loss(vgg, cfg.normalization);
  Adam adam(net, cfg);

  TrainResult res;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t batch_index = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(train_set.size(), derive_seed(derive_seed(cfg.seed, "phenn/epoch"),
                                                                      static_cast<std::uint64_t>(epoch)));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index, ++batches) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      std::vector<ExampleGrad> slots(n);
      parallel_for(n, [&](std::size_t j) { slots[j] = example_gradient(net, train_set[order[start + j]], loss); });
      double batch_loss = 0.0;
      auto total = net.zero_grads();
      for (const auto& s : slots) {
        batch_loss += s.loss;
        for (std::size_t l = 0; l < total.size(); ++l) {
          total[l].kernel += s.grads[l].kernel;
          total[l].bias += s.grads[l].bias;
        }
      }
      batch_loss /= static_cast<double>(n);
      if (!std::isfinite(batch_loss))
        throw NumericalError("train: non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
      const float inv = 1.0f / static_cast<float>(n);
      for (auto& g : total) {
        g.kernel *= inv;
        g.bias *= inv;
      }
      adam.step(net, total);
      epoch_loss += batch_loss;
    }
    EpochRecord rec{epoch, epoch_loss / static_cast<double>(batches), mean_loss(net, val_set, loss)};
    res.history.push_back(rec);
    const double score = val_set.empty() ? -static_cast<double>(epoch) : rec.val_loss;
    if (!std::isfinite(score) && !val_set.empty())
      throw NumericalError("train: non-finite validation loss after epoch " + std::to_string(epoch));
    if (score < best_val) {
      best_val = score;
      res.best = net;
      res.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(rec);
  }
  return res;
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  CsvWriter csv(path, {"epoch", "train_loss", "val_loss"});
  for (const auto& r : history) {
    csv << r.epoch << r.train_loss << r.val_loss;
    csv.end_row();
  }
}

namespace {
ExampleScores mean_of(const std::vector<ExampleScores>& v) {
  ExampleScores m;
  for (const auto& s : v) {
    m.pcc += s.pcc;
    m.mse += s.mse;
    m.perceptual += s.perceptual;
  }
  const auto n = static_cast<double>(std::max<std::size_t>(v.size(), 1));
  return {m.pcc / n, m.mse / n, m.perceptual / n};
}
}  // namespace

EvalReport evaluate(std::span<const RealGrid> estimates, std::span<const RealGrid> truths, const WeightBundle& vgg,
                    const std::optional<CalibrationModel>& calibration) {
  if (estimates.size() != truths.size()) throw std::invalid_argument("evaluate: estimate and truth counts differ");
  if (estimates.empty()) throw std::invalid_argument("evaluate: empty test set");
  const PerceptualLoss<float> loss(vgg);
  EvalReport r;
  r.examples.resize(estimates.size());
  if (calibration) r.calibrated.resize(estimates.size());
  parallel_for(estimates.size(), [&](std::size_t i) {
    const auto ref = loss.reference(truths[i]);
    r.examples[i] = {pcc(estimates[i], truths[i]), mse(estimates[i], truths[i]), loss(ref, estimates[i])};
    if (calibration) {
      const RealGrid c = apply_calibration(estimates[i], *calibration);
      r.calibrated[i] = {pcc(c, truths[i]), mse(c, truths[i]), loss(ref, c)};
    }
  });
  r.mean = mean_of(r.examples);
  if (calibration) r.calibrated_mean = mean_of(r.calibrated);
  return r;
}

EvalReport evaluate(const Phenn<float>& net, std::span<const Triplet> test_set, const WeightBundle& vgg,
                    const std::optional<CalibrationModel>& calibration) {
  std::vector<RealGrid> est(test_set.size()), truth(test_set.size());
  parallel_for(test_set.size(), [&](std::size_t i) {
    est[i] = net.forward(phenn_input(test_set[i]));
    truth[i] = test_set[i].f;
  });
  return evaluate(est, truth, vgg, calibration);
}

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::vector<std::string> header{"example", "pcc", "mse", "perceptual"};
  const bool cal = !report.calibrated.empty();
  if (cal) header.insert(header.end(), {"pcc_cal", "mse_cal", "perceptual_cal"});
  CsvWriter csv(path, header);
  for (std::size_t i = 0; i < report.examples.size(); ++i) {
    const auto& e = report.examples[i];
    csv << i << e.pcc << e.mse << e.perceptual;
    if (cal) csv << report.calibrated[i].pcc << report.calibrated[i].mse << report.calibrated[i].perceptual;
    csv.end_row();
  }
}

}  // namespace phaselab
