#pragma once

// Optimisation probes of the perceptual loss: maximally activated patterns of
// the feature extractor and loss minimisation from noise-corrupted starts.

#include "phaselab/diffnet.hpp"
#include "phaselab/spectral.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace phaselab {

struct OptimizerOpts {
  double step = 1.0;         ///< initial trial step (see map_ascend / loss_minimize)
  int max_iters = 500;
  double tolerance = 1e-6;   ///< stop when |dJ| / |J| falls below this
  double lower = 0.0;        ///< projection bounds (MAP only)
  double upper = 1.0;
  double armijo = 1e-4;      ///< sufficient-decrease constant
  double shrink = 0.5;       ///< backtracking factor
  int max_backtracks = 40;

  void validate() const;
};

/// Clamp onto [lower, upper].
template <typename Scalar>
Tensor3<Scalar> project_box(Tensor3<Scalar> x, double lower, double upper) {
  x.matrix() = x.matrix().cwiseMax(static_cast<Scalar>(lower)).cwiseMin(static_cast<Scalar>(upper));
  return x;
}

struct MapResult {
  Tensor3<float> pattern;
  std::vector<double> trace;  ///< objective after each accepted step, trace[0] at init
  int iterations = 0;
  bool converged = false;
};

/// ||features||_F of the image eta, fed to the extractor as 2 eta - 1 (the
/// fixed affine map of [0, 1] onto the extractor's [-1, 1] input range).
double map_objective(const FeatureExtractor<float>& net, const Tensor3<float>& eta, Tensor3<float>* grad = nullptr);

/// Projected gradient ascent on map_objective over eta in [lower, upper] with
/// Armijo backtracking. Trial steps are step * g / max|g|, so `step` is the
/// largest per-pixel move of the first trial.
MapResult map_ascend(const WeightBundle& bundle, const Tensor3<float>& init, const OptimizerOpts& opts);

struct SuppressionReport {
  double delta = 0.0;         ///< mean over the noise bins of |F(f_noisy)| - |F(fhat)|
  std::vector<double> trace;  ///< loss after each accepted step, trace[0] at the start
  int iterations = 0;
  bool converged = false;
};

struct MinimizeResult {
  RealGrid fhat;
  SuppressionReport report;
};

/// Gradient descent with Armijo backtracking on eta -> L(f, eta) from
/// eta0 = f + xi(spec). Every iteration first tries eta - step * g and shrinks
/// by `shrink` until the Armijo condition holds. The trial step is the same at
/// every noise frequency, so the amount of suppression tracks the loss curvature.
MinimizeResult loss_minimize(const RealGrid& f, const NoiseSpec& spec, const PerceptualLoss<float>& loss,
                             const OptimizerOpts& opts);
MinimizeResult loss_minimize(const RealGrid& f, const NoiseSpec& spec, const WeightBundle& bundle,
                             const OptimizerOpts& opts);

/// Spectral magnitude change at the noise bins, averaged over the distinct bins.
double suppression_delta(const RealGrid& noisy, const RealGrid& fhat, const NoiseSpec& spec);

struct SuppressionConfig {
  Direction direction = Direction::Diagonal;
  std::vector<double> nus;  ///< empty means {k/N : k = 1..N/2 - 1}, i.e. nu in (0, 0.5)
  double amplitude = 0.1;
  AmplitudeConvention convention = AmplitudeConvention::Pixel;
  std::uint64_t seed = 0;
  PhaseMode phase_mode = PhaseMode::PerExample;
  OptimizerOpts opts;
};

struct SuppressionSeries {
  Direction direction = Direction::Diagonal;
  std::vector<double> nu;
  Eigen::MatrixXd delta;       ///< examples x frequencies
  Eigen::MatrixXd iterations;  ///< examples x frequencies
  std::vector<double> delta_mean, delta_std, iters_mean;
};

SuppressionSeries suppression_scan(std::span<const RealGrid> images, const WeightBundle& bundle,
                                   const SuppressionConfig& cfg);

/// `nu, delta_mean, delta_std, iters_mean`.
void write_suppression_csv(const std::filesystem::path& path, const SuppressionSeries& s);
/// Per-example rows `example, nu, delta, iterations`.
void write_suppression_long_csv(const std::filesystem::path& path, const SuppressionSeries& s);

}  // namespace phaselab
