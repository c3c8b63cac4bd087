#pragma once
// 8-bit PGM previews with a lossless PLT1 companion.
#include "phaselab/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace phaselab {

/// Min/max window onto 0..255, rounded to nearest; a constant grid maps to 128.
std::vector<std::uint8_t> window_8bit(const RealGrid& x);

/// Binary P5 PGM, row-major.
void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels, Index rows, Index cols);

/// Writes <stem>.pgm (windowed) and <stem>.plt (f64, exact).
void write_preview(const std::filesystem::path& stem, const RealGrid& x);

}  // namespace phaselab
