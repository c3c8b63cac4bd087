#include "doctest.h"

#include "phaselab/grid.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <numbers>

using namespace phaselab;
using namespace phaselab::testing;

TEST_CASE("fft2 of a centered delta is the constant 1/N") {
  ComplexGrid x = ComplexGrid::Zero(8, 8);
  x(0, 0) = 1.0;
  const ComplexGrid X = fft2(x);
  for (Index i = 0; i < X.size(); ++i) CHECK(std::abs(X.data()[i] - std::complex<double>(0.125, 0.0)) < 1e-15);
}

TEST_CASE("fft2/ifft2 agree with direct-summation DFT on every power-of-two size up to 8") {
  for (Index r : {1, 2, 4, 8})
    for (Index c : {1, 2, 4, 8}) {
      const ComplexGrid x = random_complex(r, c, static_cast<std::uint64_t>(10 * r + c));
      CHECK(relative_error(fft2(x), direct_dft(x, -1)) < 1e-12);
      CHECK(relative_error(ifft2(x), direct_dft(x, +1)) < 1e-12);
    }
}

TEST_CASE("unitary fft2 preserves energy and inverts") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ComplexGrid x = random_complex(16, 32, seed);
    const ComplexGrid X = fft2(x);
    CHECK(std::abs(X.squaredNorm() - x.squaredNorm()) / x.squaredNorm() < 1e-12);
    CHECK(relative_error(ifft2(X), x) < 1e-12);
  }
}

TEST_CASE("ifft2 of a constant is a scaled delta") {
  const double c = 2.5;
  const ComplexGrid x = ComplexGrid::Constant(8, 8, c);
  ComplexGrid X = ifft2(x);
  CHECK(std::abs(X(0, 0) - std::complex<double>(8.0 * c, 0.0)) < 1e-12);
  X(0, 0) = 0.0;
  CHECK(X.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fft2 of real input is Hermitian") {
  const RealGrid x = random_real(16, 16, 3);
  const ComplexGrid X = fft2(x);
  for (Index r = 0; r < 16; ++r)
    for (Index c = 0; c < 16; ++c) CHECK(std::abs(X(r, c) - std::conj(X((16 - r) % 16, (16 - c) % 16))) < 1e-12);
}

TEST_CASE("fft2 is linear") {
  const ComplexGrid x = random_complex(8, 16, 1), y = random_complex(8, 16, 2);
  const std::complex<double> a(0.3, -1.2), b(2.0, 0.5);
  const ComplexGrid lhs = fft2(ComplexGrid(a * x + b * y));
  const ComplexGrid rhs = a * fft2(x) + b * fft2(y);
  CHECK(relative_error(lhs, rhs) < 1e-12);
}

TEST_CASE("non-power-of-two sizes are rejected") {
  CHECK_THROWS_AS(fft2(ComplexGrid::Zero(6, 8)), std::invalid_argument);
  CHECK_THROWS_AS(ifft2(ComplexGrid::Zero(8, 12)), std::invalid_argument);
}

TEST_CASE("psd_log of zeros is log10 of the floor") {
  const RealGrid p = psd_log(RealGrid::Zero(16, 16), 1e-12);
  CHECK(p.maxCoeff() == doctest::Approx(-12.0));
  CHECK(p.minCoeff() == doctest::Approx(-12.0));
  CHECK_THROWS_AS(psd_log(RealGrid::Zero(4, 4), 0.0), std::invalid_argument);
}

TEST_CASE("psd_log of a pure cosine peaks at +-nu") {
  const Index n = 64;
  RealGrid x(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) x(r, c) = std::cos(2.0 * std::numbers::pi * 0.25 * static_cast<double>(c));
  const RealGrid p = psd_log(x);
  std::vector<double> values(p.data(), p.data() + p.size());
  std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
  const double median = values[values.size() / 2];
  // centered: DC at (32, 32); nu_x = +-0.25 -> columns 48 and 16
  CHECK(p(32, 48) >= median + 6.0);
  CHECK(p(32, 16) >= median + 6.0);
  CHECK(p(32, 48) == doctest::Approx(p.maxCoeff()));
}

TEST_CASE("set-averaged PSD equals the per-image loop") {
  std::vector<RealGrid> set;
  for (std::uint64_t s = 0; s < 50; ++s) set.push_back(random_real(16, 16, 100 + s));
  // Oracle: explicit per-image direct DFT power, then average.
  RealGrid power = RealGrid::Zero(16, 16);
  RealGrid logs = RealGrid::Zero(16, 16);
  for (const auto& img : set) {
    const RealGrid pw = direct_dft(img.cast<std::complex<double>>(), -1).cwiseAbs2();
    power += pw;
    logs += fftshift(RealGrid((pw.array() + 1e-12).log10().matrix()));
  }
  power /= 50.0;
  logs /= 50.0;
  const RealGrid want_power = fftshift(RealGrid((power.array() + 1e-12).log10().matrix()));
  CHECK((mean_psd_log(set, 1e-12, PsdAveraging::Power) - want_power).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((mean_psd_log(set, 1e-12, PsdAveraging::Amplitude) - logs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("spectrum_profile geometry") {
  const RealGrid flat = RealGrid::Constant(16, 16, 3.0);
  for (auto d : {Direction::Horizontal, Direction::Vertical, Direction::Diagonal}) {
    const auto prof = spectrum_profile(flat, d);
    REQUIRE(prof.size() == 9);
    CHECK(prof.front().nu == 0.0);
    CHECK(prof.back().nu == 0.5);
    for (const auto& p : prof) CHECK(p.value == 3.0);
  }

  RealGrid peaked = RealGrid::Zero(16, 16);
  peaked(8 + 4, 8 + 4) = 7.0;  // (nu_x, nu_y) = (0.25, 0.25)
  const auto diag = spectrum_profile(peaked, Direction::Diagonal);
  const auto best = std::max_element(diag.begin(), diag.end(), [](auto a, auto b) { return a.value < b.value; });
  CHECK(best->nu == 0.25);
  for (const auto& p : spectrum_profile(peaked, Direction::Horizontal)) CHECK(p.value == 0.0);
}

TEST_CASE("spectrum_profile of a two-tone PSD matches manual bin lookup") {
  const Index n = 32;
  RealGrid x(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c)
      x(r, c) = std::cos(2.0 * std::numbers::pi * 0.125 * static_cast<double>(c)) +
                0.5 * std::cos(2.0 * std::numbers::pi * 0.375 * static_cast<double>(r));
  const RealGrid p = psd_log(x);
  const auto h = spectrum_profile(p, Direction::Horizontal);
  const auto v = spectrum_profile(p, Direction::Vertical);
  for (Index k = 0; k <= n / 2; ++k) {
    CHECK(h[static_cast<std::size_t>(k)].value == p(n / 2, (n / 2 + k) % n));
    CHECK(v[static_cast<std::size_t>(k)].value == p((n / 2 + k) % n, n / 2));
  }
  CHECK(h[4].value > 0.0);   // nu = 0.125 tone
  CHECK(v[12].value > -1.0);  // nu = 0.375 tone
  CHECK(h[5].value < -10.0);
}
