#pragma once

// PLT1 tensor files: one ASCII header line
//   PLT1 <f32|f64|c64|c128> <ndim> <dim0> ... <dimN-1>\n
// followed by little-endian row-major values; complex values interleave (re, im).

#include "phaselab/grid.hpp"
#include "phaselab/tensor3.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace phaselab {

enum class PltDtype { F32, F64, C64, C128 };

struct PltArray {
  PltDtype dtype = PltDtype::F64;
  std::vector<std::int64_t> shape;
  /// Values widened to double; complex entries stored as interleaved (re, im).
  std::vector<double> values;

  bool is_complex() const { return dtype == PltDtype::C64 || dtype == PltDtype::C128; }
  std::int64_t element_count() const;
};

void write_plt(const std::filesystem::path& path, const PltArray& array);
PltArray read_plt(const std::filesystem::path& path);

void write_grid(const std::filesystem::path& path, const RealGrid& grid, PltDtype dtype = PltDtype::F64);
void write_grid(const std::filesystem::path& path, const ComplexGrid& grid, PltDtype dtype = PltDtype::C128);
RealGrid read_real_grid(const std::filesystem::path& path);
ComplexGrid read_complex_grid(const std::filesystem::path& path);

void write_tensor(const std::filesystem::path& path, const Tensor3<float>& t);
Tensor3<float> read_tensor(const std::filesystem::path& path);

}  // namespace phaselab
