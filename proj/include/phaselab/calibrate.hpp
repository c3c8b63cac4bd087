#pragma once

// Global polynomial map from raw reconstruction values to ground truth,
// fitted over pooled pixels of a validation set.

#include "phaselab/grid.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace phaselab {

struct CalibrationModel {
  int degree = 3;
  std::vector<double> coefficients;  ///< ascending powers, degree + 1 entries
  double residual_rms = 0.0;
  std::size_t samples = 0;

  void validate() const;
};

/// Least-squares fit of truth = P(raw) over all pixel pairs. The design matrix
/// is built on standardized raw values and solved by Householder QR; the
/// coefficients are mapped back to the raw variable. Throws ConfigError when
/// the design is rank deficient (e.g. fewer distinct raw values than degree + 1).
CalibrationModel fit_calibration(std::span<const RealGrid> raw, std::span<const RealGrid> truth, int degree = 3);

/// P(x) by Horner's scheme.
double evaluate_polynomial(std::span<const double> coefficients, double x);

RealGrid apply_calibration(const RealGrid& x, const CalibrationModel& m);

void save_calibration(const std::filesystem::path& path, const CalibrationModel& m);
CalibrationModel load_calibration(const std::filesystem::path& path);

}  // namespace phaselab
