#include "phaselab/calibrate.hpp"

#include "phaselab/error.hpp"

#include "json.hpp"

#include <Eigen/QR>

#include <cmath>
#include <fstream>

namespace phaselab {

void CalibrationModel::validate() const {
  if (degree < 1 || degree > 10) throw ConfigError("calibration degree must lie in [1, 10]");
  if (coefficients.size() != static_cast<std::size_t>(degree) + 1)
    throw ConfigError("calibration needs degree + 1 coefficients");
  for (double c : coefficients)
    if (!std::isfinite(c)) throw ConfigError("calibration coefficients must be finite");
}

double evaluate_polynomial(std::span<const double> coefficients, double x) {
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

CalibrationModel fit_calibration(std::span<const RealGrid> raw, std::span<const RealGrid> truth, int degree) {
  if (degree < 1 || degree > 10) throw ConfigError("calibration degree must lie in [1, 10]");
  if (raw.size() != truth.size()) throw std::invalid_argument("fit_calibration: raw and truth counts differ");
  if (raw.empty()) throw std::invalid_argument("fit_calibration: no samples");
  Index n = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].rows() != truth[i].rows() || raw[i].cols() != truth[i].cols())
      throw std::invalid_argument("fit_calibration: pair " + std::to_string(i) + " has mismatched shapes");
    n += raw[i].size();
  }
  const Index p = degree + 1;
  if (n <= p) throw std::invalid_argument("fit_calibration: need more pixels than coefficients");

  Eigen::VectorXd x(n), y(n);
  Index at = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    x.segment(at, raw[i].size()) = raw[i].reshaped<Eigen::RowMajor>();
    y.segment(at, raw[i].size()) = truth[i].reshaped<Eigen::RowMajor>();
    at += raw[i].size();
  }
  if (!x.allFinite() || !y.allFinite()) throw NumericalError("fit_calibration: non-finite pixel values");

  const double mu = x.mean();
  const double sigma = std::sqrt((x.array() - mu).square().mean());
  if (!(sigma > 0.0)) throw ConfigError("fit_calibration: degenerate design, raw values are constant");
  const Eigen::ArrayXd z = (x.array() - mu) / sigma;

  Eigen::MatrixXd V(n, p);
  V.col(0).setOnes();
  for (Index j = 1; j < p; ++j) V.col(j) = V.col(j - 1).array() * z;

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
  if (qr.rank() < p)
    throw ConfigError("fit_calibration: degenerate design (rank " + std::to_string(qr.rank()) + " < " +
                      std::to_string(p) + "); too few distinct raw values for degree " + std::to_string(degree));
  const Eigen::VectorXd c = qr.solve(y);

  // P(x) = sum_j c_j ((x - mu) / sigma)^j, expanded in powers of x.
  std::vector<double> a(static_cast<std::size_t>(p), 0.0);
  std::vector<double> binom(static_cast<std::size_t>(p), 0.0);
  binom[0] = 1.0;  // coefficients of (x - mu)^j, multiplied by (x - mu) each round
  for (Index j = 0; j < p; ++j) {
    if (j > 0) {
      const auto u = static_cast<std::size_t>(j);
      binom[u] = binom[u - 1];
      for (std::size_t k = u - 1; k > 0; --k) binom[k] = binom[k - 1] - mu * binom[k];
      binom[0] *= -mu;
    }
    const double scale = c(j) / std::pow(sigma, static_cast<double>(j));
    for (Index k = 0; k <= j; ++k) a[static_cast<std::size_t>(k)] += scale * binom[static_cast<std::size_t>(k)];
  }

  CalibrationModel m;
  m.degree = degree;
  m.coefficients = std::move(a);
  m.samples = static_cast<std::size_t>(n);
  m.residual_rms = std::sqrt((V * c - y).squaredNorm() / static_cast<double>(n));
  m.validate();
  return m;
}

RealGrid apply_calibration(const RealGrid& x, const CalibrationModel& m) {
  m.validate();
  return x.unaryExpr([&](double v) { return evaluate_polynomial(m.coefficients, v); });
}

void save_calibration(const std::filesystem::path& path, const CalibrationModel& m) {
  m.validate();
  const nlohmann::json j = {{"format", "phaselab-calibration/1"},
                            {"degree", m.degree},
                            {"coefficients", m.coefficients},
                            {"residual_rms", m.residual_rms},
                            {"samples", m.samples}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write calibration model " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing calibration model " + path.string());
}

CalibrationModel load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read calibration model " + path.string());
  CalibrationModel m;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "phaselab-calibration/1") throw IoError(path.string() + ": unknown calibration format");
    m.degree = j.at("degree").get<int>();
    m.coefficients = j.at("coefficients").get<std::vector<double>>();
    m.residual_rms = j.value("residual_rms", 0.0);
    m.samples = j.value("samples", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed calibration model (" + e.what() + ")");
  }
  m.validate();
  return m;
}

}  // namespace phaselab
