#include "phaselab/probe.hpp"

#include "phaselab/csv.hpp"
#include "phaselab/error.hpp"
#include "phaselab/parallel.hpp"

#include <cmath>

namespace phaselab {

void OptimizerOpts::validate() const {
  if (!(step > 0.0)) throw ConfigError("optimizer step must be positive");
  if (max_iters < 1) throw ConfigError("optimizer iteration budget must be at least 1");
  if (!(tolerance >= 0.0)) throw ConfigError("optimizer tolerance must be non-negative");
  if (!(lower < upper)) throw ConfigError("optimizer bounds must satisfy lower < upper");
  if (!(armijo > 0.0 && armijo < 1.0)) throw ConfigError("armijo constant must lie in (0, 1)");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("backtracking factor must lie in (0, 1)");
  if (max_backtracks < 1) throw ConfigError("max_backtracks must be at least 1");
}

double map_objective(const FeatureExtractor<float>& net, const Tensor3<float>& eta, Tensor3<float>* grad) {
  Tensor3<float> x(((eta.matrix().array() * 2.0f) - 1.0f).matrix(), eta.height(), eta.width());
  FeatureExtractor<float>::Tape tape;
  const Tensor3<float> feats = net.forward(x, grad ? &tape : nullptr);
  double sum = 0.0;
  for (Index i = 0; i < feats.size(); ++i) sum += static_cast<double>(feats.matrix().data()[i]) * feats.matrix().data()[i];
  const double norm = std::sqrt(sum);
  if (grad) {
    if (norm == 0.0) {
      *grad = Tensor3<float>(eta.channels(), eta.height(), eta.width());
    } else {
      const Tensor3<float> gf((feats.matrix() * static_cast<float>(1.0 / norm)).eval(), feats.height(), feats.width());
      Tensor3<float> gx = net.backward(tape, gf);
      gx.matrix() *= 2.0f;
      *grad = std::move(gx);
    }
  }
  return norm;
}

MapResult map_ascend(const WeightBundle& bundle, const Tensor3<float>& init, const OptimizerOpts& opts) {
  opts.validate();
  const FeatureExtractor<float> net(bundle);
  if (init.matrix().minCoeff() < opts.lower || init.matrix().maxCoeff() > opts.upper)
    throw std::invalid_argument("map_ascend: initial pattern lies outside the projection bounds");

  MapResult res{init, {}, 0, false};
  Tensor3<float> g;
  double J = map_objective(net, res.pattern, &g);
  res.trace.push_back(J);
  for (int it = 0; it < opts.max_iters; ++it) {
    const double gmax = g.matrix().cwiseAbs().maxCoeff();
    if (!std::isfinite(gmax)) throw NumericalError("map_ascend: non-finite gradient at iteration " + std::to_string(it));
    if (gmax == 0.0) {
      res.converged = true;
      break;
    }
    double t = opts.step / gmax;
    bool accepted = false;
    for (int b = 0; b < opts.max_backtracks && !accepted; ++b, t *= opts.shrink) {
      Tensor3<float> cand = res.pattern;
      cand.matrix() += static_cast<float>(t) * g.matrix();
      cand = project_box(std::move(cand), opts.lower, opts.upper);
      const auto d = (cand.matrix() - res.pattern.matrix()).template cast<double>();
      const double slope = (d.array() * g.matrix().template cast<double>().array()).sum();
      if (slope <= 0.0) break;  // projected direction is stationary
      const double Jc = map_objective(net, cand);
      if (Jc >= J + opts.armijo * slope) {
        const double rel = std::abs(Jc - J) / std::max(std::abs(J), 1e-300);
        res.pattern = std::move(cand);
        J = map_objective(net, res.pattern, &g);
        res.trace.push_back(J);
        res.iterations = it + 1;
        accepted = true;
        if (rel < opts.tolerance) res.converged = true;
      }
    }
    if (!accepted) {
      // No ascent direction within the backtracking budget: a (numerical) stationary point.
      res.converged = true;
      break;
    }
    if (res.converged) break;
  }
  return res;
}

double suppression_delta(const RealGrid& noisy, const RealGrid& fhat, const NoiseSpec& spec) {
  const auto bins = noise_impulses(spec, noisy.rows(), noisy.cols());
  const ComplexGrid a = fft2(noisy), b = fft2(fhat);
  double sum = 0.0;
  for (const auto& imp : bins) sum += std::abs(a(imp.row, imp.col)) - std::abs(b(imp.row, imp.col));
  return sum / static_cast<double>(bins.size());
}

MinimizeResult loss_minimize(const RealGrid& f, const NoiseSpec& spec, const PerceptualLoss<float>& loss,
                             const OptimizerOpts& opts) {
  opts.validate();
  const auto ref = loss.reference(f);
  const RealGrid noisy = inject(f, spec);
  MinimizeResult res{noisy, {}};
  auto& rep = res.report;

  RealGrid g;
  double L = loss(ref, res.fhat, &g);
  rep.trace.push_back(L);
  for (int it = 0; it < opts.max_iters; ++it) {
    if (!g.allFinite()) throw NumericalError("loss_minimize: non-finite gradient at iteration " + std::to_string(it));
    const double gn2 = g.squaredNorm();
    if (L == 0.0 || gn2 == 0.0) {
      rep.converged = true;
      break;
    }
    double t = opts.step;
    bool accepted = false;
    for (int b = 0; b < opts.max_backtracks && !accepted; ++b, t *= opts.shrink) {
      RealGrid cand = res.fhat - t * g;
      RealGrid gc;
      const double Lc = loss(ref, cand, &gc);
      if (!std::isfinite(Lc)) throw NumericalError("loss_minimize: non-finite loss at iteration " + std::to_string(it));
      if (Lc <= L - opts.armijo * t * gn2) {
        const double rel = (L - Lc) / L;
        res.fhat = std::move(cand);
        g = std::move(gc);
        L = Lc;
        rep.trace.push_back(L);
        rep.iterations = it + 1;
        accepted = true;
        if (rel < opts.tolerance) rep.converged = true;
      }
    }
    if (!accepted) {
      rep.converged = true;
      break;
    }
    if (rep.converged) break;
  }
  rep.delta = suppression_delta(noisy, res.fhat, spec);
  return res;
}

MinimizeResult loss_minimize(const RealGrid& f, const NoiseSpec& spec, const WeightBundle& bundle,
                             const OptimizerOpts& opts) {
  return loss_minimize(f, spec, PerceptualLoss<float>(bundle), opts);
}

SuppressionSeries suppression_scan(std::span<const RealGrid> images, const WeightBundle& bundle,
                                   const SuppressionConfig& cfg) {
  if (images.empty()) throw std::invalid_argument("suppression_scan: empty image set");
  cfg.opts.validate();
  const Index rows = images.front().rows(), cols = images.front().cols();
  SuppressionSeries s;
  s.direction = cfg.direction;
  s.nu = cfg.nus;
  if (s.nu.empty())
    for (Index k = 1; k < rows / 2; ++k) s.nu.push_back(static_cast<double>(k) / static_cast<double>(rows));
  const auto n_ex = static_cast<Index>(images.size()), n_nu = static_cast<Index>(s.nu.size());
  s.delta = Eigen::MatrixXd::Zero(n_ex, n_nu);
  s.iterations = Eigen::MatrixXd::Zero(n_ex, n_nu);
  const PerceptualLoss<float> loss(bundle);
  const double amplitude = impulse_amplitude(cfg.amplitude, cfg.convention, rows, cols);
  parallel_for(images.size() * s.nu.size(), [&](std::size_t cell) {
    const std::size_t i = cell / s.nu.size(), k = cell % s.nu.size();
    const NoiseSpec spec = draw_noise(amplitude, along(cfg.direction, s.nu[k]), cfg.seed, i, k, cfg.phase_mode);
    const auto r = loss_minimize(images[i], spec, loss, cfg.opts);
    s.delta(static_cast<Index>(i), static_cast<Index>(k)) = r.report.delta;
    s.iterations(static_cast<Index>(i), static_cast<Index>(k)) = r.report.iterations;
  });
  for (Index k = 0; k < n_nu; ++k) {
    const double mean = s.delta.col(k).mean();
    s.delta_mean.push_back(mean);
    s.delta_std.push_back(std::sqrt((s.delta.col(k).array() - mean).square().mean()));
    s.iters_mean.push_back(s.iterations.col(k).mean());
  }
  return s;
}

void write_suppression_csv(const std::filesystem::path& path, const SuppressionSeries& s) {
  CsvWriter csv(path, {"nu", "delta_mean", "delta_std", "iters_mean"});
  for (std::size_t k = 0; k < s.nu.size(); ++k) {
    csv << s.nu[k] << s.delta_mean[k] << s.delta_std[k] << s.iters_mean[k];
    csv.end_row();
  }
}

void write_suppression_long_csv(const std::filesystem::path& path, const SuppressionSeries& s) {
  CsvWriter csv(path, {"example", "nu", "delta", "iterations"});
  for (Index i = 0; i < s.delta.rows(); ++i)
    for (std::size_t k = 0; k < s.nu.size(); ++k) {
      csv << static_cast<long long>(i) << s.nu[k] << s.delta(i, static_cast<Index>(k))
          << static_cast<long long>(s.iterations(i, static_cast<Index>(k)));
      csv.end_row();
    }
}

}  // namespace phaselab
