#include "phaselab/approximant.hpp"

#include "phaselab/error.hpp"

#include <cmath>
#include <numbers>

namespace phaselab {
namespace {

double wrapped_arg(std::complex<double> z) {
  const double a = std::arg(z);
  return a <= -std::numbers::pi ? std::numbers::pi : a;
}

RealGrid detector_amplitude(const RealGrid& g, const ComplexGrid& incident, const OpticalConfig& cfg) {
  if (g.rows() != cfg.grid || g.cols() != cfg.grid || incident.rows() != cfg.grid || incident.cols() != cfg.grid)
    throw std::invalid_argument("approximant: measurement, incident field and config grid must match");
  require_finite(g, "approximant measurement");
  return g.cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

RealGrid gs_single_step(const RealGrid& measurement, const ComplexGrid& incident, const OpticalConfig& cfg) {
  return gs_iterate(measurement, incident, cfg, 1);
}

RealGrid gs_iterate(const RealGrid& measurement, const ComplexGrid& incident, const OpticalConfig& cfg, int iters) {
  if (iters < 1) throw std::invalid_argument("gs_iterate: iters must be >= 1");
  const RealGrid amplitude = detector_amplitude(measurement, incident, cfg);
  if ((amplitude.array() == 0.0).all()) {
    warn("approximant: all-zero measurement, returning zero phase");
    return RealGrid::Zero(measurement.rows(), measurement.cols());
  }
  const RealGrid object_modulus = incident.cwiseAbs();
  ComplexGrid object = incident;
  ComplexGrid back;
  for (int it = 0; it < iters; ++it) {
    const ComplexGrid detector = fresnel_propagate(object, cfg, Propagation::Forward);
    ComplexGrid constrained(detector.rows(), detector.cols());
    for (Index i = 0; i < detector.size(); ++i)
      constrained.data()[i] = std::polar(amplitude.data()[i], std::arg(detector.data()[i]));
    back = fresnel_propagate(constrained, cfg, Propagation::Backward);
    if (it + 1 < iters) {
      for (Index i = 0; i < back.size(); ++i)
        object.data()[i] = std::polar(object_modulus.data()[i], std::arg(back.data()[i]));
    }
  }
  return back.unaryExpr([](std::complex<double> z) { return wrapped_arg(z); });
}

RealGrid zero_mean(const RealGrid& x) { return (x.array() - x.mean()).matrix(); }

}  // namespace phaselab
