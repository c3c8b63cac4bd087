#include "doctest.h"

#include "phaselab/error.hpp"
#include "phaselab/probe.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>

using namespace phaselab;
using namespace phaselab::testing;

namespace {

WeightBundle toy_bundle(std::uint64_t seed) {
  return WeightBundle({random_layer<float>("conv1_1", 3, 4, seed), random_layer<float>("conv2_1", 4, 3, seed + 1)});
}

OptimizerOpts short_opts(int iters) {
  OptimizerOpts o;
  o.max_iters = iters;
  o.step = 0.5;
  return o;
}

}  // namespace

TEST_CASE("zero noise leaves the image untouched") {
  const auto bundle = toy_bundle(1);
  const RealGrid f = random_real(16, 16, 2, 0.0, std::numbers::pi);
  const auto r = loss_minimize(f, NoiseSpec{0.0, {0.25, 0.25}, 0.3, 0.4}, bundle, OptimizerOpts{});
  CHECK(r.report.iterations == 0);
  CHECK(r.report.converged);
  REQUIRE(r.report.trace.size() == 1);
  CHECK(r.report.trace[0] == 0.0);
  CHECK((r.fhat.array() == f.array()).all());
  CHECK(r.report.delta == 0.0);
}

TEST_CASE("minimization trace decreases strictly under accepted steps") {
  const auto bundle = toy_bundle(3);
  const RealGrid f = random_real(16, 16, 4, 0.0, std::numbers::pi);
  const auto r = loss_minimize(f, NoiseSpec{0.8, {0.25, 0.125}, 0.1, 1.3}, bundle, short_opts(25));
  REQUIRE(r.report.trace.size() == static_cast<std::size_t>(r.report.iterations) + 1);
  CHECK(r.report.iterations > 0);
  for (std::size_t i = 1; i < r.report.trace.size(); ++i) CHECK(r.report.trace[i] < r.report.trace[i - 1]);
  CHECK(r.fhat.allFinite());
}

TEST_CASE("suppression delta definition") {
  const RealGrid f = RealGrid::Zero(16, 16);
  const NoiseSpec spec{0.4, {0.25, 0.125}, 0.2, -0.9};
  const RealGrid noisy = inject(f, spec);
  CHECK(suppression_delta(noisy, noisy, spec) == 0.0);
  // Complete removal from a blank image: every bin drops by A.
  CHECK(std::abs(suppression_delta(noisy, f, spec) - 0.4) < 1e-12);
  // Amplification counts as negative suppression.
  CHECK(suppression_delta(noisy, 2.0 * noisy, spec) < 0.0);
}

TEST_CASE("optimizer options are validated") {
  const auto bundle = toy_bundle(5);
  const RealGrid f = random_real(8, 8, 6);
  OptimizerOpts o;
  o.step = 0.0;
  CHECK_THROWS_AS(loss_minimize(f, NoiseSpec{}, bundle, o), ConfigError);
  o = {};
  o.max_iters = 0;
  CHECK_THROWS_AS(loss_minimize(f, NoiseSpec{}, bundle, o), ConfigError);
  o = {};
  o.lower = 1.0;
  o.upper = 0.0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  o = {};
  o.shrink = 1.0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
}

TEST_CASE("non-finite inputs abort") {
  const auto bundle = toy_bundle(7);
  RealGrid f = random_real(8, 8, 8);
  f(3, 3) = NAN;
  CHECK_THROWS(loss_minimize(f, NoiseSpec{0.1, {0.25, 0.25}, 0.0, 0.0}, bundle, OptimizerOpts{}));
}

TEST_CASE("MAP ascent stays inside [0, 1] and never decreases the objective") {
  const auto bundle = toy_bundle(9);
  const Tensor3<float> init = random_tensor<float>(3, 16, 16, 10, 0.0, 1.0);
  OptimizerOpts o;
  o.max_iters = 30;
  o.step = 0.5;  // large enough that many pixels hit the bounds
  const auto r = map_ascend(bundle, init, o);
  CHECK(r.pattern.matrix().minCoeff() >= 0.0f);
  CHECK(r.pattern.matrix().maxCoeff() <= 1.0f);
  CHECK(((r.pattern.matrix().array() == 0.0f) || (r.pattern.matrix().array() == 1.0f)).any());
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] > r.trace[i - 1]);
  CHECK(r.trace.back() > r.trace.front());

  Tensor3<float> outside = init;
  outside(0, 0, 0) = 1.5f;
  CHECK_THROWS(map_ascend(bundle, outside, o));
}

TEST_CASE("MAP of an all-zero network is a stationary start") {
  const WeightBundle zero({ConvLayer<float>("conv1_1", 3, 2)});
  const Tensor3<float> init = random_tensor<float>(3, 8, 8, 11, 0.0, 1.0);
  const auto r = map_ascend(zero, init, OptimizerOpts{});
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  CHECK(r.trace.front() == 0.0);
  CHECK((r.pattern.matrix().array() == init.matrix().array()).all());
}

TEST_CASE("single-layer MAP gradient matches finite differences and ascends for 10 steps") {
  // One conv with a fixed, known kernel: a Laplacian-like detector on channel 0.
  ConvLayer<float> l("conv1_1", 3, 2);
  const float lap[3][3] = {{0, -1, 0}, {-1, 4, -1}, {0, -1, 0}};
  for (int dy = 0; dy < 3; ++dy)
    for (int dx = 0; dx < 3; ++dx) {
      l.tap(0, 0, dy, dx) = lap[dy][dx];
      l.tap(1, 1, dy, dx) = 0.5f * lap[dx][dy] + (dy == 1 && dx == 1 ? 0.25f : 0.0f);
    }
  l.bias << 0.1f, -0.05f;
  const WeightBundle bundle({l});
  const FeatureExtractor<float> net(bundle);
  const FeatureExtractor<double> net_d(bundle);

  const Tensor3<float> eta = random_tensor<float>(3, 8, 8, 12, 0.2, 0.8);
  Tensor3<float> g;
  map_objective(net, eta, &g);

  // Double-precision finite-difference oracle of ||relu(conv(2 eta - 1))||_F.
  const auto J = [&](const Tensor3<double>& e) {
    Tensor3<double> x((e.matrix().array() * 2.0 - 1.0).matrix(), e.height(), e.width());
    return net_d.forward(x).matrix().norm();
  };
  Tensor3<double> base = eta.cast<double>();
  Eigen::VectorXd fd(base.size()), an(base.size());
  for (Index i = 0; i < base.size(); ++i) {
    const double h = 1e-6;
    Tensor3<double> p = base, m = base;
    p.matrix().data()[i] += h;
    m.matrix().data()[i] -= h;
    fd[i] = (J(p) - J(m)) / (2 * h);
    an[i] = g.matrix().data()[i];
  }
  CHECK((fd - an).norm() / fd.norm() < 1e-4);

  OptimizerOpts o;
  o.max_iters = 10;
  o.step = 0.05;
  o.tolerance = 0.0;
  const auto r = map_ascend(bundle, eta, o);
  REQUIRE(r.trace.size() == 11);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] > r.trace[i - 1]);
}

TEST_CASE("suppression scan: zero amplitude, single example, determinism") {
  const auto bundle = toy_bundle(13);
  std::vector<RealGrid> set{random_real(16, 16, 14, 0.0, 3.0), random_real(16, 16, 15, 0.0, 3.0)};
  SuppressionConfig cfg;
  cfg.opts = short_opts(4);
  cfg.nus = {0.125, 0.25, 0.375};
  cfg.amplitude = 0.0;
  const auto zero = suppression_scan(set, bundle, cfg);
  for (double d : zero.delta_mean) CHECK(d == 0.0);

  cfg.amplitude = 0.05;
  const std::vector<RealGrid> one{set[0]};
  const auto s1 = suppression_scan(one, bundle, cfg);
  for (std::size_t k = 0; k < cfg.nus.size(); ++k) {
    const double a = impulse_amplitude(cfg.amplitude, cfg.convention, 16, 16);
    const auto spec = draw_noise(a, along(cfg.direction, cfg.nus[k]), cfg.seed, 0, k, cfg.phase_mode);
    CHECK(s1.delta_mean[k] == loss_minimize(set[0], spec, bundle, cfg.opts).report.delta);
    CHECK(s1.delta_std[k] == 0.0);
  }

  const auto a = suppression_scan(set, bundle, cfg);
  const auto b = suppression_scan(set, bundle, cfg);
  CHECK((a.delta.array() == b.delta.array()).all());
  CHECK(a.delta_mean == b.delta_mean);

  SuppressionConfig defaults;
  defaults.opts = short_opts(1);
  const auto d = suppression_scan(one, bundle, defaults);
  CHECK(d.nu.size() == 7);
  CHECK(d.nu.back() == 7.0 / 16);
}
