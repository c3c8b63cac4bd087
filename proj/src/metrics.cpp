#include "phaselab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace phaselab {

namespace {
void require_same(const RealGrid& a, const RealGrid& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument(std::string(what) + ": sizes differ");
}
}  // namespace

double pcc(const RealGrid& a, const RealGrid& b) {
  require_same(a, b, "pcc");
  const auto da = (a.array() - a.mean()).eval();
  const auto db = (b.array() - b.mean()).eval();
  const double saa = (da * da).sum(), sbb = (db * db).sum();
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp((da * db).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
}

double mse(const RealGrid& a, const RealGrid& b) {
  require_same(a, b, "mse");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace phaselab
