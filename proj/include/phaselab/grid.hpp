#pragma once

#include "phaselab/error.hpp"

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace phaselab {

using Index = Eigen::Index;

/// Dense 2D grid, row-major, rows = y and columns = x.
template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RealGrid = Grid<double>;
using ComplexGrid = Grid<std::complex<double>>;

/// Spatial frequency in cycles per pixel.
struct FreqCoord {
  double nu_x = 0.0;
  double nu_y = 0.0;

  friend bool operator==(const FreqCoord&, const FreqCoord&) = default;
};

enum class Direction { Horizontal, Vertical, Diagonal };

std::string to_string(Direction d);
Direction parse_direction(const std::string& s);

/// Frequency coordinate visited by a scan along `d` at radial position `nu`.
FreqCoord along(Direction d, double nu);

constexpr bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

/// Signed frequency (cycles/pixel) of FFT bin k on an n-point axis, in [-0.5, 0.5).
constexpr double bin_frequency(Index k, Index n) {
  return static_cast<double>(k < n / 2 ? k : k - n) / static_cast<double>(n);
}

/// FFT bin holding frequency `nu` on an n-point axis; throws unless nu*n is integral.
Index frequency_bin(double nu, Index n);

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
  if (!x.allFinite()) throw NumericalError(std::string(what) + ": non-finite values");
}

void require_fft_shape(Index rows, Index cols);

namespace detail {

// In-place iterative radix-2 transform over n elements spaced by `stride`.
// `sign` is -1 for forward, +1 for inverse; no scaling applied.
template <typename Real>
void fft_radix2(std::complex<Real>* data, Index n, Index stride, int sign) {
  for (Index i = 1, j = 0; i < n; ++i) {
    Index bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i * stride], data[j * stride]);
  }
  for (Index len = 2; len <= n; len <<= 1) {
    const Index half = len / 2;
    for (Index k = 0; k < half; ++k) {
      // Twiddles computed directly (not by recurrence) to keep 1e-15 accuracy.
      const Real angle = static_cast<Real>(sign) * Real(2) * std::numbers::pi_v<Real> *
                         static_cast<Real>(k) / static_cast<Real>(len);
      const std::complex<Real> w(std::cos(angle), std::sin(angle));
      for (Index start = 0; start < n; start += len) {
        auto& a = data[(start + k) * stride];
        auto& b = data[(start + k + half) * stride];
        const std::complex<Real> t = w * b;
        b = a - t;
        a = a + t;
      }
    }
  }
}

template <typename Real>
Grid<std::complex<Real>> fft2_impl(Grid<std::complex<Real>> x, int sign) {
  require_fft_shape(x.rows(), x.cols());
  const Index rows = x.rows();
  const Index cols = x.cols();
  std::complex<Real>* base = x.data();
  for (Index r = 0; r < rows; ++r) fft_radix2(base + r * cols, cols, 1, sign);
  for (Index c = 0; c < cols; ++c) fft_radix2(base + c, rows, cols, sign);
  x *= Real(1) / std::sqrt(static_cast<Real>(rows * cols));
  return x;
}

}  // namespace detail

/// Unitary 2D DFT: X[k] = (1/sqrt(N)) sum_n x[n] exp(-2 pi i k.n / N).
template <typename Derived>
auto fft2(const Eigen::MatrixBase<Derived>& x) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  return detail::fft2_impl<Real>(x.template cast<std::complex<Real>>(), -1);
}

/// Inverse of fft2 under the same unitary normalization.
template <typename Derived>
auto ifft2(const Eigen::MatrixBase<Derived>& x) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  return detail::fft2_impl<Real>(x.template cast<std::complex<Real>>(), +1);
}

/// Quadrant swap moving the DC bin to (rows/2, cols/2).
template <typename Scalar>
Grid<Scalar> fftshift(const Grid<Scalar>& x) {
  Grid<Scalar> out(x.rows(), x.cols());
  const Index hr = x.rows() / 2;
  const Index hc = x.cols() / 2;
  for (Index r = 0; r < x.rows(); ++r)
    for (Index c = 0; c < x.cols(); ++c) out((r + hr) % x.rows(), (c + hc) % x.cols()) = x(r, c);
  return out;
}

/// Power spectrum |fft2(x)|^2 in natural (uncentered) bin order.
RealGrid power_spectrum(const RealGrid& x);

/// log10(|fft2(x)|^2 + floor), DC-centered.
RealGrid psd_log(const RealGrid& x, double floor = 1e-12);

enum class PsdAveraging {
  Power,      ///< log10 of the mean power spectrum
  Amplitude,  ///< mean of per-image log10 power spectra
};

std::string to_string(PsdAveraging m);
PsdAveraging parse_psd_averaging(const std::string& s);

/// Set-averaged, DC-centered log PSD.
RealGrid mean_psd_log(std::span<const RealGrid> images, double floor = 1e-12,
                      PsdAveraging mode = PsdAveraging::Power);

struct ProfilePoint {
  double nu;
  double value;
};

/// Cross-section through DC of a DC-centered spectrum for nu in [0, 0.5].
/// The nu = 0.5 sample wraps to the -0.5 bin, which holds the same Nyquist content.
std::vector<ProfilePoint> spectrum_profile(const RealGrid& centered, Direction d);

}  // namespace phaselab
