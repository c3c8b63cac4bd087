#pragma once

#include "phaselab/grid.hpp"

namespace phaselab {

/// Pearson correlation over all pixels; 0 when either input is constant.
double pcc(const RealGrid& a, const RealGrid& b);

double mse(const RealGrid& a, const RealGrid& b);

}  // namespace phaselab
