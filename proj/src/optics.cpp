#include "phaselab/optics.hpp"

#include "phaselab/error.hpp"
#include "phaselab/rng.hpp"

#include <cmath>
#include <numbers>

namespace phaselab {

double OpticalConfig::fresnel_ratio() const {
  return wavelength * distance / (static_cast<double>(grid) * pitch * pitch);
}

void OpticalConfig::validate() const {
  if (!(wavelength > 0.0) || !(distance > 0.0) || !(pitch > 0.0))
    throw std::invalid_argument("optical config: wavelength, distance and pitch must be positive");
  if (!is_power_of_two(grid)) throw std::invalid_argument("optical config: grid must be a power of two");
  if (fresnel_ratio() > 1.0)
    warn("lambda*z/(N*pitch^2) = " + std::to_string(fresnel_ratio()) + " exceeds 1; Fresnel chirp is undersampled");
}

ComplexGrid plane_wave(Index n) { return ComplexGrid::Constant(n, n, {1.0, 0.0}); }

ComplexGrid fresnel_propagate_distance(const ComplexGrid& u, const OpticalConfig& cfg, double distance) {
  if (u.rows() != cfg.grid || u.cols() != cfg.grid)
    throw std::invalid_argument("fresnel_propagate: field is " + std::to_string(u.rows()) + "x" +
                                std::to_string(u.cols()) + ", config grid is " + std::to_string(cfg.grid));
  ComplexGrid spectrum = fft2(u);
  const Index n = cfg.grid;
  const double scale = -std::numbers::pi * cfg.wavelength * distance / (cfg.pitch * cfg.pitch);
  for (Index ky = 0; ky < n; ++ky) {
    const double ny = bin_frequency(ky, n);
    for (Index kx = 0; kx < n; ++kx) {
      const double nx = bin_frequency(kx, n);
      spectrum(ky, kx) *= std::polar(1.0, scale * (nx * nx + ny * ny));
    }
  }
  return ifft2(spectrum);
}

ComplexGrid fresnel_propagate(const ComplexGrid& u, const OpticalConfig& cfg, Propagation dir) {
  return fresnel_propagate_distance(u, cfg, dir == Propagation::Forward ? cfg.distance : -cfg.distance);
}

RealGrid forward_intensity(const RealGrid& phase, const ComplexGrid& incident, const OpticalConfig& cfg) {
  if (phase.rows() != incident.rows() || phase.cols() != incident.cols())
    throw std::invalid_argument("forward_intensity: phase and incident field sizes differ");
  require_finite(phase, "forward_intensity phase");
  const ComplexGrid object = incident.array() * phase.array().unaryExpr([](double p) { return std::polar(1.0, p); });
  return fresnel_propagate(object, cfg).cwiseAbs2();
}

double poisson_sample(double lambda, double u, double z) {
  if (lambda <= 0.0) return 0.0;
  if (lambda < 30.0) {
    double p = std::exp(-lambda);
    double cdf = p;
    double k = 0.0;
    while (u > cdf && p > 0.0) {
      k += 1.0;
      p *= lambda / k;
      cdf += p;
    }
    return k;
  }
  return std::max(0.0, std::floor(lambda + std::sqrt(lambda) * z + 0.5));
}

RealGrid measure(const RealGrid& intensity, const MeasurementSpec& spec) {
  if (!(spec.photon_level >= 0.0) || !(spec.read_sigma >= 0.0))
    throw std::invalid_argument("measure: photon_level and read_sigma must be non-negative");
  require_finite(intensity, "measure intensity");
  if ((intensity.array() < 0.0).any()) throw std::invalid_argument("measure: intensity must be non-negative");
  const double mean = intensity.mean();
  if (!(mean > 0.0)) throw std::invalid_argument("measure: mean intensity is zero (no light)");

  const CounterRng rng(spec.seed);
  const double gain = spec.photon_level / mean;
  RealGrid g(intensity.rows(), intensity.cols());
  for (Index i = 0; i < g.size(); ++i) {
    const auto pixel = static_cast<std::uint64_t>(i);
    // lanes: 0 Poisson uniform, 1 Poisson normal (lanes 2,3), 2 read noise (lanes 4,5)
    const double lambda = gain * intensity.data()[i];
    double v = poisson_sample(lambda, rng.uniform(pixel, 0), rng.normal(pixel, 1));
    if (spec.read_sigma > 0.0) v += spec.read_sigma * rng.normal(pixel, 2);
    if (spec.clamp) v = std::max(v, 0.0);
    g.data()[i] = v;
  }
  return g;
}

}  // namespace phaselab
