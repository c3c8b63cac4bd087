#include "doctest.h"

#include "phaselab/approximant.hpp"
#include "phaselab/dataset.hpp"
#include "phaselab/metrics.hpp"
#include "test_support.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>

using namespace phaselab;
using namespace phaselab::testing;

namespace {

const double pi = std::numbers::pi;

OpticalConfig optics64() {
  OpticalConfig c;
  c.grid = 64;
  return c;
}

// Weak phase texture with max |f| = 0.2 rad.
RealGrid weak_object(std::uint64_t seed) { return synth_object(64, 0.2, seed); }

double spatial_std(const RealGrid& x) { return std::sqrt((x.array() - x.mean()).square().mean()); }

double wrap(double a) { return std::remainder(a, 2.0 * pi); }

}  // namespace

TEST_CASE("flat object gives a flat approximant") {
  const auto cfg = optics64();
  const ComplexGrid inc = plane_wave(64);
  const RealGrid g = forward_intensity(RealGrid::Zero(64, 64), inc, cfg);
  CHECK(spatial_std(zero_mean(gs_single_step(g, inc, cfg))) <= 1e-8);
  for (int iters : {1, 5, 20}) CHECK(spatial_std(gs_iterate(g, inc, cfg, iters)) <= 1e-8);
}

TEST_CASE("weak object approximant correlates with the object (golden)") {
  const auto cfg = optics64();
  const ComplexGrid inc = plane_wave(64);
  const RealGrid f = weak_object(5);
  CHECK(f.cwiseAbs().maxCoeff() == doctest::Approx(0.2));
  const RealGrid g = forward_intensity(f, inc, cfg);
  const double one = pcc(gs_single_step(g, inc, cfg), f);
  const double fifty = pcc(gs_iterate(g, inc, cfg, 50), f);
  MESSAGE(std::setprecision(17) << "PCC single step " << one << ", 50 iterations " << fifty);
  CHECK(one == doctest::Approx(0.45231260195318546).epsilon(1e-9));
  CHECK(fifty == doctest::Approx(0.79003889603624988).epsilon(1e-9));
  CHECK(fifty >= one);
}

TEST_CASE("iterating beats a single step on a fixed seed set") {
  const auto cfg = optics64();
  const ComplexGrid inc = plane_wave(64);
  for (std::uint64_t s = 10; s < 14; ++s) {
    const RealGrid f = weak_object(s);
    const RealGrid g = forward_intensity(f, inc, cfg);
    CHECK(pcc(gs_iterate(g, inc, cfg, 50), f) >= pcc(gs_single_step(g, inc, cfg), f));
  }
}

TEST_CASE("negative counts behave exactly like pre-clamped counts") {
  const auto cfg = optics64();
  const ComplexGrid inc = plane_wave(64);
  const RealGrid I = forward_intensity(weak_object(6), inc, cfg);
  const RealGrid noisy = measure(I, MeasurementSpec{5.0, 2.0, 7, false});
  REQUIRE(noisy.minCoeff() < 0.0);
  const RealGrid clamped = noisy.cwiseMax(0.0);
  CHECK((gs_single_step(noisy, inc, cfg).array() == gs_single_step(clamped, inc, cfg).array()).all());
  CHECK((gs_iterate(noisy, inc, cfg, 4).array() == gs_iterate(clamped, inc, cfg, 4).array()).all());
}

TEST_CASE("one iteration is the single step, bit for bit") {
  const auto cfg = optics64();
  const ComplexGrid inc = plane_wave(64);
  const RealGrid g = measure(forward_intensity(weak_object(8), inc, cfg), MeasurementSpec{10.0, 0.0, 1, false});
  CHECK((gs_iterate(g, inc, cfg, 1).array() == gs_single_step(g, inc, cfg).array()).all());
  CHECK_THROWS(gs_iterate(g, inc, cfg, 0));
}

TEST_CASE("outputs lie in (-pi, pi] and are deterministic") {
  const auto cfg = optics64();
  const ComplexGrid inc = plane_wave(64);
  const RealGrid f = synth_object(64, pi, 9);
  const RealGrid g = measure(forward_intensity(f, inc, cfg), MeasurementSpec{1.0, 0.0, 2, false});
  for (const RealGrid& x : {gs_single_step(g, inc, cfg), gs_iterate(g, inc, cfg, 7)}) {
    CHECK(x.minCoeff() > -pi);
    CHECK(x.maxCoeff() <= pi);
  }
  CHECK((gs_single_step(g, inc, cfg).array() == gs_single_step(g, inc, cfg).array()).all());
}

TEST_CASE("a global phase on the incident field shifts the approximant by that phase") {
  const auto cfg = optics64();
  const ComplexGrid inc = plane_wave(64);
  const RealGrid f = weak_object(11);
  const RealGrid g = forward_intensity(f, inc, cfg);
  const double theta = 0.3;
  const ComplexGrid rotated = inc * std::polar(1.0, theta);
  const RealGrid a = gs_single_step(g, inc, cfg);
  const RealGrid b = gs_single_step(g, rotated, cfg);
  for (Index i = 0; i < a.size(); ++i) CHECK(std::abs(wrap(b.data()[i] - a.data()[i] - theta)) < 1e-10);
  // The weak object does not straddle the branch cut, so PCC is unaffected.
  CHECK(std::abs(pcc(a, f) - pcc(b, f)) < 1e-10);
}

TEST_CASE("all-zero measurement yields zero phase") {
  const auto cfg = optics64();
  const ComplexGrid inc = plane_wave(64);
  const RealGrid zero = RealGrid::Zero(64, 64);
  CHECK(gs_single_step(zero, inc, cfg).cwiseAbs().maxCoeff() == 0.0);
  CHECK(gs_iterate(zero, inc, cfg, 3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero_mean removes the mean only") {
  const RealGrid x = random_real(8, 8, 3);
  const RealGrid z = zero_mean(x);
  CHECK(std::abs(z.mean()) < 1e-15);
  CHECK(((x - z).array() - x.mean()).abs().maxCoeff() < 1e-15);
}
