#pragma once

#include "phaselab/optics.hpp"

namespace phaselab {

/// Single Gerchberg-Saxton step:
///   f~ = arg{ F^-1( sqrt(g) * exp(i arg F(u_inc)) ) }
/// Negative counts are clamped to zero before the square root. Output lies in (-pi, pi].
RealGrid gs_single_step(const RealGrid& measurement, const ComplexGrid& incident, const OpticalConfig& cfg);

/// Alternating projections: detector amplitude sqrt(g), object modulus |u_inc|.
/// iters == 1 reproduces gs_single_step exactly.
RealGrid gs_iterate(const RealGrid& measurement, const ComplexGrid& incident, const OpticalConfig& cfg, int iters);

/// Subtracts the spatial mean (removes the propagation's global phase offset).
RealGrid zero_mean(const RealGrid& x);

}  // namespace phaselab
