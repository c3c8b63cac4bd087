#include "phaselab/preview.hpp"

#include "phaselab/error.hpp"
#include "phaselab/plt.hpp"

#include <cmath>
#include <fstream>

namespace phaselab {

std::vector<std::uint8_t> window_8bit(const RealGrid& x) {
  require_finite(x, "preview");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(x.size()), 128);
  if (x.size() == 0) return out;
  const double lo = x.minCoeff(), hi = x.maxCoeff();
  if (!(hi > lo)) return out;
  for (Index i = 0; i < x.size(); ++i)
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(255.0 * (x.data()[i] - lo) / (hi - lo)));
  return out;
}

void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels, Index rows, Index cols) {
  if (static_cast<Index>(pixels.size()) != rows * cols) throw std::invalid_argument("write_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_preview(const std::filesystem::path& stem, const RealGrid& x) {
  auto pgm = stem, plt = stem;
  pgm += ".pgm";
  plt += ".plt";
  write_grid(plt, x);
  write_pgm(pgm, window_8bit(x), x.rows(), x.cols());
}

}  // namespace phaselab
