#include "phaselab/grid.hpp"

#include <cmath>

namespace phaselab {

std::string to_string(Direction d) {
  switch (d) {
    case Direction::Horizontal: return "horizontal";
    case Direction::Vertical: return "vertical";
    case Direction::Diagonal: return "diagonal";
  }
  return "unknown";
}

Direction parse_direction(const std::string& s) {
  if (s == "horizontal" || s == "h") return Direction::Horizontal;
  if (s == "vertical" || s == "v") return Direction::Vertical;
  if (s == "diagonal" || s == "d") return Direction::Diagonal;
  throw std::invalid_argument("unknown direction '" + s + "'");
}

std::string to_string(PsdAveraging m) { return m == PsdAveraging::Power ? "power" : "amplitude"; }

PsdAveraging parse_psd_averaging(const std::string& s) {
  if (s == "power") return PsdAveraging::Power;
  if (s == "amplitude") return PsdAveraging::Amplitude;
  throw std::invalid_argument("unknown PSD averaging '" + s + "'");
}

FreqCoord along(Direction d, double nu) {
  switch (d) {
    case Direction::Horizontal: return {nu, 0.0};
    case Direction::Vertical: return {0.0, nu};
    case Direction::Diagonal: return {nu, nu};
  }
  return {};
}

Index frequency_bin(double nu, Index n) {
  const double scaled = nu * static_cast<double>(n);
  const double k = std::round(scaled);
  if (std::abs(scaled - k) > 1e-9)
    throw std::invalid_argument("frequency " + std::to_string(nu) + " is not representable on a " +
                                std::to_string(n) + "-point grid");
  const auto ki = static_cast<Index>(k);
  return ((ki % n) + n) % n;
}

void require_fft_shape(Index rows, Index cols) {
  if (!is_power_of_two(rows) || !is_power_of_two(cols))
    throw std::invalid_argument("fft2 requires power-of-two dimensions, got " + std::to_string(rows) +
                                "x" + std::to_string(cols));
}

RealGrid power_spectrum(const RealGrid& x) { return fft2(x).cwiseAbs2(); }

RealGrid psd_log(const RealGrid& x, double floor) {
  if (!(floor > 0.0)) throw std::invalid_argument("psd_log: floor must be positive");
  RealGrid p = power_spectrum(x);
  p = (p.array() + floor).log10().matrix();
  return fftshift(p);
}

RealGrid mean_psd_log(std::span<const RealGrid> images, double floor, PsdAveraging mode) {
  if (images.empty()) throw std::invalid_argument("mean_psd_log: empty image set");
  if (!(floor > 0.0)) throw std::invalid_argument("mean_psd_log: floor must be positive");
  const Index rows = images.front().rows();
  const Index cols = images.front().cols();
  RealGrid acc = RealGrid::Zero(rows, cols);
  for (const auto& img : images) {
    if (img.rows() != rows || img.cols() != cols)
      throw std::invalid_argument("mean_psd_log: image sizes differ");
    if (mode == PsdAveraging::Power)
      acc += power_spectrum(img);
    else
      acc += psd_log(img, floor);
  }
  acc /= static_cast<double>(images.size());
  if (mode == PsdAveraging::Power) return fftshift(RealGrid((acc.array() + floor).log10().matrix()));
  return acc;
}

std::vector<ProfilePoint> spectrum_profile(const RealGrid& centered, Direction d) {
  const Index rows = centered.rows();
  const Index cols = centered.cols();
  const Index n = (d == Direction::Horizontal) ? cols : (d == Direction::Vertical ? rows : std::min(rows, cols));
  std::vector<ProfilePoint> out;
  out.reserve(static_cast<std::size_t>(n / 2 + 1));
  for (Index k = 0; k <= n / 2; ++k) {
    const double nu = static_cast<double>(k) / static_cast<double>(n);
    const FreqCoord f = along(d, nu);
    const Index col = (cols / 2 + static_cast<Index>(std::lround(f.nu_x * cols))) % cols;
    const Index row = (rows / 2 + static_cast<Index>(std::lround(f.nu_y * rows))) % rows;
    out.push_back({nu, centered(row, col)});
  }
  return out;
}

}  // namespace phaselab
