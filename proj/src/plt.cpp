#include "phaselab/plt.hpp"

#include "phaselab/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace phaselab {
namespace {

const char* dtype_name(PltDtype d) {
  switch (d) {
    case PltDtype::F32: return "f32";
    case PltDtype::F64: return "f64";
    case PltDtype::C64: return "c64";
    case PltDtype::C128: return "c128";
  }
  return "?";
}

PltDtype parse_dtype(const std::string& s, const std::filesystem::path& path) {
  if (s == "f32") return PltDtype::F32;
  if (s == "f64") return PltDtype::F64;
  if (s == "c64") return PltDtype::C64;
  if (s == "c128") return PltDtype::C128;
  throw IoError(path.string() + ": unknown PLT1 dtype '" + s + "'");
}

bool single_precision(PltDtype d) { return d == PltDtype::F32 || d == PltDtype::C64; }

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

}  // namespace

std::int64_t PltArray::element_count() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void write_plt(const std::filesystem::path& path, const PltArray& array) {
  const std::int64_t scalars = array.element_count() * (array.is_complex() ? 2 : 1);
  if (static_cast<std::int64_t>(array.values.size()) != scalars)
    throw std::invalid_argument("write_plt: value count does not match shape");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "PLT1 " << dtype_name(array.dtype) << ' ' << array.shape.size();
  for (auto d : array.shape) out << ' ' << d;
  out << '\n';
  if (single_precision(array.dtype)) {
    std::vector<float> buf(array.values.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_little(static_cast<float>(array.values[i]));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    std::vector<double> buf(array.values.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_little(array.values[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

PltArray read_plt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw IoError(path.string() + ": missing PLT1 header");
  std::istringstream hs(header);
  std::string magic, dtype;
  std::size_t ndim = 0;
  hs >> magic >> dtype >> ndim;
  if (magic != "PLT1" || !hs) throw IoError(path.string() + ": not a PLT1 file");
  PltArray a;
  a.dtype = parse_dtype(dtype, path);
  for (std::size_t i = 0; i < ndim; ++i) {
    std::int64_t d = 0;
    if (!(hs >> d) || d <= 0) throw IoError(path.string() + ": bad PLT1 dimensions");
    a.shape.push_back(d);
  }
  const auto scalars = static_cast<std::size_t>(a.element_count() * (a.is_complex() ? 2 : 1));
  a.values.resize(scalars);
  if (single_precision(a.dtype)) {
    std::vector<float> buf(scalars);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(scalars * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(scalars * sizeof(float)))
      throw IoError(path.string() + ": truncated PLT1 payload");
    for (std::size_t i = 0; i < scalars; ++i) a.values[i] = to_little(buf[i]);
  } else {
    in.read(reinterpret_cast<char*>(a.values.data()), static_cast<std::streamsize>(scalars * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(scalars * sizeof(double)))
      throw IoError(path.string() + ": truncated PLT1 payload");
    for (auto& v : a.values) v = to_little(v);
  }
  return a;
}

void write_grid(const std::filesystem::path& path, const RealGrid& grid, PltDtype dtype) {
  if (dtype != PltDtype::F32 && dtype != PltDtype::F64)
    throw std::invalid_argument("write_grid: real grid needs a real dtype");
  PltArray a{dtype, {grid.rows(), grid.cols()}, std::vector<double>(grid.data(), grid.data() + grid.size())};
  write_plt(path, a);
}

void write_grid(const std::filesystem::path& path, const ComplexGrid& grid, PltDtype dtype) {
  if (dtype != PltDtype::C64 && dtype != PltDtype::C128)
    throw std::invalid_argument("write_grid: complex grid needs a complex dtype");
  PltArray a{dtype, {grid.rows(), grid.cols()}, {}};
  a.values.reserve(static_cast<std::size_t>(grid.size() * 2));
  for (Index i = 0; i < grid.size(); ++i) {
    a.values.push_back(grid.data()[i].real());
    a.values.push_back(grid.data()[i].imag());
  }
  write_plt(path, a);
}

RealGrid read_real_grid(const std::filesystem::path& path) {
  const PltArray a = read_plt(path);
  if (a.is_complex() || a.shape.size() != 2) throw IoError(path.string() + ": expected a real 2D PLT1 grid");
  RealGrid g(a.shape[0], a.shape[1]);
  std::memcpy(g.data(), a.values.data(), a.values.size() * sizeof(double));
  return g;
}

ComplexGrid read_complex_grid(const std::filesystem::path& path) {
  const PltArray a = read_plt(path);
  if (a.shape.size() != 2) throw IoError(path.string() + ": expected a 2D PLT1 grid");
  ComplexGrid g(a.shape[0], a.shape[1]);
  for (Index i = 0; i < g.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    g.data()[i] = a.is_complex() ? std::complex<double>(a.values[2 * k], a.values[2 * k + 1])
                                 : std::complex<double>(a.values[k], 0.0);
  }
  return g;
}

void write_tensor(const std::filesystem::path& path, const Tensor3<float>& t) {
  PltArray a{PltDtype::F32, {t.channels(), t.height(), t.width()}, {}};
  a.values.assign(t.matrix().data(), t.matrix().data() + t.size());
  write_plt(path, a);
}

Tensor3<float> read_tensor(const std::filesystem::path& path) {
  const PltArray a = read_plt(path);
  if (a.is_complex() || a.shape.size() != 3) throw IoError(path.string() + ": expected a real 3D PLT1 tensor");
  Tensor3<float> t(a.shape[0], a.shape[1], a.shape[2]);
  for (Index i = 0; i < t.size(); ++i) t.matrix().data()[i] = static_cast<float>(a.values[static_cast<std::size_t>(i)]);
  return t;
}

}  // namespace phaselab
