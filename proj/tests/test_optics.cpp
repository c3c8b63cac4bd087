#include "doctest.h"

#include "phaselab/optics.hpp"
#include "test_support.hpp"

#include <numbers>

using namespace phaselab;
using namespace phaselab::testing;

namespace {

OpticalConfig small_config(Index n) {
  OpticalConfig cfg;
  cfg.grid = n;
  return cfg;
}

// Band-limited Fresnel kernel along one axis by direct summation of the
// transfer function: h(x) = 1/N sum_k exp(-i pi lambda z (nu_k/p)^2) exp(2 pi i k x / N).
std::vector<std::complex<double>> axis_kernel(const OpticalConfig& cfg) {
  const Index n = cfg.grid;
  std::vector<std::complex<double>> h(static_cast<std::size_t>(n));
  for (Index x = 0; x < n; ++x) {
    std::complex<double> acc = 0.0;
    for (Index k = 0; k < n; ++k) {
      const double nu = static_cast<double>(k < n / 2 ? k : k - n) / static_cast<double>(n) / cfg.pitch;
      const double chirp = -std::numbers::pi * cfg.wavelength * cfg.distance * nu * nu;
      acc += std::polar(1.0, chirp + 2.0 * std::numbers::pi * static_cast<double>(k * x) / static_cast<double>(n));
    }
    h[static_cast<std::size_t>(x)] = acc / static_cast<double>(n);
  }
  return h;
}

// Circular spatial-domain convolution with the separable kernel h(y) h(x).
ComplexGrid chirp_convolve(const ComplexGrid& u, const OpticalConfig& cfg) {
  const auto h = axis_kernel(cfg);
  const Index n = cfg.grid;
  ComplexGrid out = ComplexGrid::Zero(n, n);
  for (Index sy = 0; sy < n; ++sy)
    for (Index sx = 0; sx < n; ++sx) {
      if (u(sy, sx) == 0.0) continue;
      for (Index y = 0; y < n; ++y)
        for (Index x = 0; x < n; ++x)
          out(y, x) += u(sy, sx) * h[static_cast<std::size_t>((y - sy + n) % n)] *
                       h[static_cast<std::size_t>((x - sx + n) % n)];
    }
  return out;
}

}  // namespace

TEST_CASE("zero-distance propagation is the identity") {
  const auto cfg = small_config(32);
  const ComplexGrid u = random_complex(32, 32, 7);
  CHECK(relative_error(fresnel_propagate_distance(u, cfg, 0.0), u) < 1e-12);
}

TEST_CASE("a plane wave stays a plane wave") {
  for (double z : {1e-3, 10e-3, 0.2}) {
    const auto cfg = small_config(64);
    const ComplexGrid out = fresnel_propagate_distance(plane_wave(64), cfg, z);
    const RealGrid intensity = out.cwiseAbs2();
    CHECK((intensity.array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("backward propagation inverts forward propagation") {
  const auto cfg = small_config(64);
  const ComplexGrid u = random_complex(64, 64, 11);
  const ComplexGrid v = fresnel_propagate(fresnel_propagate(u, cfg, Propagation::Forward), cfg, Propagation::Backward);
  CHECK(relative_error(v, u) < 1e-10);
}

TEST_CASE("propagation conserves energy and composes additively in z") {
  const auto cfg = small_config(64);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const ComplexGrid u = random_complex(64, 64, 20 + seed);
    const double z1 = 1e-3 * static_cast<double>(seed + 1), z2 = 7e-3 - 2e-3 * static_cast<double>(seed);
    const ComplexGrid a = fresnel_propagate_distance(u, cfg, z1);
    CHECK(std::abs(a.squaredNorm() - u.squaredNorm()) / u.squaredNorm() < 1e-12);
    const ComplexGrid ab = fresnel_propagate_distance(a, cfg, z2);
    CHECK(relative_error(ab, fresnel_propagate_distance(u, cfg, z1 + z2)) < 1e-10);
  }
}

TEST_CASE("transfer-function propagation matches spatial chirp convolution") {
  OpticalConfig cfg;
  cfg.grid = 64;
  cfg.wavelength = 0.5e-6;
  cfg.pitch = 10e-6;
  cfg.distance = 5e-3;
  ComplexGrid point = ComplexGrid::Zero(64, 64);
  point(20, 37) = 1.0;
  CHECK(relative_error(fresnel_propagate(point, cfg), chirp_convolve(point, cfg)) < 1e-6);

  ComplexGrid pair = ComplexGrid::Zero(64, 64);
  pair(3, 5) = {0.5, -1.0};
  pair(40, 61) = {2.0, 0.25};
  CHECK(relative_error(fresnel_propagate(pair, cfg), chirp_convolve(pair, cfg)) < 1e-6);
}

TEST_CASE("mismatched grid size is rejected") {
  CHECK_THROWS_AS(fresnel_propagate(ComplexGrid::Zero(32, 32), small_config(64)), std::invalid_argument);
  CHECK_THROWS_AS(forward_intensity(RealGrid::Zero(32, 32), plane_wave(16), small_config(32)), std::invalid_argument);
}

TEST_CASE("forward_intensity basics") {
  const auto cfg = small_config(32);
  const RealGrid flat = forward_intensity(RealGrid::Zero(32, 32), plane_wave(32), cfg);
  CHECK((flat.array() - 1.0).abs().maxCoeff() < 1e-12);

  const RealGrid f = random_real(32, 32, 5, 0.0, std::numbers::pi);
  RealGrid wrapped = f;
  StreamRng rng(9);
  for (Index i = 0; i < wrapped.size(); ++i)
    wrapped.data()[i] += 2.0 * std::numbers::pi * (static_cast<double>(rng.below(5)) - 2.0);
  const RealGrid a = forward_intensity(f, plane_wave(32), cfg);
  const RealGrid b = forward_intensity(wrapped, plane_wave(32), cfg);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.minCoeff() >= 0.0);

  const ComplexGrid inc = random_complex(32, 32, 6);
  const RealGrid c = forward_intensity(f, inc, cfg);
  CHECK(std::abs(c.sum() - inc.squaredNorm()) / inc.squaredNorm() < 1e-10);
}

TEST_CASE("forward_intensity matches the direct-DFT propagation oracle") {
  const auto cfg = small_config(16);
  const RealGrid f = random_real(16, 16, 8, -2.0, 2.0);
  const ComplexGrid inc = random_complex(16, 16, 9);
  ComplexGrid object(16, 16);
  for (Index i = 0; i < f.size(); ++i) object.data()[i] = inc.data()[i] * std::polar(1.0, f.data()[i]);
  ComplexGrid spectrum = direct_dft(object, -1);
  for (Index ky = 0; ky < 16; ++ky)
    for (Index kx = 0; kx < 16; ++kx) {
      const double nx = static_cast<double>(kx < 8 ? kx : kx - 16) / 16.0 / cfg.pitch;
      const double ny = static_cast<double>(ky < 8 ? ky : ky - 16) / 16.0 / cfg.pitch;
      spectrum(ky, kx) *= std::polar(1.0, -std::numbers::pi * cfg.wavelength * cfg.distance * (nx * nx + ny * ny));
    }
  const RealGrid want = direct_dft(spectrum, +1).cwiseAbs2();
  CHECK(relative_error(forward_intensity(f, inc, cfg), want) < 1e-10);
}

TEST_CASE("optical config validation") {
  OpticalConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.grid = 48;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.grid = 64;
  cfg.pitch = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("photon-limited measurement statistics") {
  const RealGrid uniform = RealGrid::Constant(64, 64, 0.37);
  for (double level : {1.0, 10.0, 100.0, 1000.0}) {
    MeasurementSpec spec;
    spec.photon_level = level;
    spec.seed = 1234;
    const RealGrid g = measure(uniform, spec);
    const double mean = g.mean();
    const double var = (g.array() - mean).square().sum() / static_cast<double>(g.size() - 1);
    CAPTURE(level);
    CHECK(std::abs(mean - level) <= 3.0 * std::sqrt(level / 4096.0));
    CHECK(var / mean >= 0.9);
    CHECK(var / mean <= 1.1);
    CHECK((g.array() == g.array().round()).all());
  }
}

TEST_CASE("measurement is deterministic per seed and honours read noise") {
  const RealGrid I = forward_intensity(random_real(32, 32, 1, 0.0, 3.0), plane_wave(32), small_config(32));
  MeasurementSpec spec{10.0, 0.5, 77, false};
  const RealGrid a = measure(I, spec), b = measure(I, spec);
  CHECK((a.array() == b.array()).all());
  spec.seed = 78;
  CHECK((measure(I, spec).array() != a.array()).any());

  MeasurementSpec dark{0.0, 1.0, 3, false};
  const RealGrid n = measure(I, dark);
  CHECK(std::abs(n.mean()) < 0.1);
  CHECK((n.array() < 0.0).any());
  dark.clamp = true;
  CHECK(measure(I, dark).minCoeff() == 0.0);

  MeasurementSpec zero{0.0, 0.0, 3, false};
  CHECK(measure(I, zero).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("measurement preconditions") {
  MeasurementSpec spec;
  CHECK_THROWS_AS(measure(RealGrid::Zero(8, 8), spec), std::invalid_argument);
  RealGrid neg = RealGrid::Constant(8, 8, 1.0);
  neg(2, 2) = -0.1;
  CHECK_THROWS_AS(measure(neg, spec), std::invalid_argument);
  spec.photon_level = -1.0;
  CHECK_THROWS_AS(measure(RealGrid::Constant(8, 8, 1.0), spec), std::invalid_argument);
}

TEST_CASE("poisson_sample moments on both sides of the inversion threshold") {
  for (double lambda : {0.5, 3.0, 29.0, 31.0, 200.0}) {
    const CounterRng rng(42);
    const int n = 40000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double k = poisson_sample(lambda, rng.uniform(static_cast<std::uint64_t>(i), 0),
                                      rng.normal(static_cast<std::uint64_t>(i), 1));
      s += k;
      s2 += k * k;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    CAPTURE(lambda);
    CHECK(std::abs(mean - lambda) < 4.0 * std::sqrt(lambda / n));
    CHECK(var / lambda == doctest::Approx(1.0).epsilon(0.05));
  }
}
