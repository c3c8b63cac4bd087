#pragma once

#include "phaselab/grid.hpp"

#include <cstdint>

namespace phaselab {

/// Paraxial free-space geometry between the object and detector planes.
struct OpticalConfig {
  double wavelength = 632.8e-9;  ///< meters
  double distance = 10e-3;       ///< propagation distance z, meters
  double pitch = 10e-6;          ///< detector/object sampling, meters per pixel
  Index grid = 64;               ///< pixels per side

  /// lambda z / (N pitch^2); values above 1 mean the chirp is undersampled.
  double fresnel_ratio() const;

  /// Throws on non-positive fields or a non power-of-two grid; warns when
  /// fresnel_ratio() > 1.
  void validate() const;
};

enum class Propagation { Forward, Backward };

/// Unit-amplitude, zero-phase plane wave.
ComplexGrid plane_wave(Index n);

/// Transfer-function Fresnel propagation:
/// u -> ifft2( fft2(u) * exp(-i pi lambda z (fx^2 + fy^2)) ), fx = nu_x / pitch.
/// Backward propagation uses -z. |H| = 1, so energy is conserved.
ComplexGrid fresnel_propagate(const ComplexGrid& u, const OpticalConfig& cfg, Propagation dir = Propagation::Forward);

/// Same as fresnel_propagate but for an explicit (possibly negative or zero) distance.
ComplexGrid fresnel_propagate_distance(const ComplexGrid& u, const OpticalConfig& cfg, double distance);

/// Noiseless detector intensity |F(u_inc e^{i f})|^2 of a pure-phase object.
RealGrid forward_intensity(const RealGrid& phase, const ComplexGrid& incident, const OpticalConfig& cfg);

struct MeasurementSpec {
  double photon_level = 1.0;  ///< mean photons per pixel
  double read_sigma = 0.0;    ///< Gaussian detection noise, photons RMS
  std::uint64_t seed = 0;
  bool clamp = false;         ///< clamp negative counts to zero after read noise
};

/// Photon-limited measurement: Poisson(photon_level * I / mean(I)) + N(0, read_sigma^2),
/// drawn per pixel from a counter-based stream keyed by (seed, pixel index).
RealGrid measure(const RealGrid& intensity, const MeasurementSpec& spec);

/// One Poisson draw from uniform u (inversion below lambda = 30, continuity-corrected
/// normal approximation above using the standard normal z).
double poisson_sample(double lambda, double u, double z);

}  // namespace phaselab
