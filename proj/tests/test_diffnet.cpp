#include "doctest.h"

#include "phaselab/diffnet.hpp"
#include "phaselab/plt.hpp"
#include "test_support.hpp"

using namespace phaselab;
using namespace phaselab::testing;

namespace {

// Toy two-block bundle: conv1_1 3->4, pool, conv2_1 4->3.
WeightBundle toy_bundle(std::uint64_t seed) {
  return WeightBundle({random_layer<float>("conv1_1", 3, 4, seed), random_layer<float>("conv2_1", 4, 3, seed + 1)});
}

// From-scratch features using only the nested-loop oracles.
Tensor3<double> oracle_features(const RealGrid& x, const WeightBundle& b) {
  const double lo = x.minCoeff(), hi = x.maxCoeff();
  Tensor3<float> in(3, x.rows(), x.cols());
  for (Index c = 0; c < 3; ++c)
    for (Index r = 0; r < x.rows(); ++r)
      for (Index k = 0; k < x.cols(); ++k) in(c, r, k) = static_cast<float>(2.0 * (x(r, k) - lo) / (hi - lo) - 1.0);
  auto relu_d = [](Tensor3<double> t) {
    for (Index i = 0; i < t.size(); ++i) t.matrix().data()[i] = std::max(0.0, t.matrix().data()[i]);
    return t;
  };
  const Tensor3<double> a = relu_d(direct_conv(in, b.layers()[0]));
  const Tensor3<float> p = direct_pool(a).cast<float>();
  return relu_d(direct_conv(p, b.layers()[1]));
}

const WeightBundle& vgg() {
  static const WeightBundle bundle = read_pwb(data_dir() / "vgg16_relu2_2.pwb");
  return bundle;
}

}  // namespace

TEST_CASE("normalize_range conventions") {
  RealGrid bin(2, 2);
  bin << 0, 1, 1, 0;
  const auto t = normalize_range(bin);
  CHECK(t.channels() == 3);
  CHECK(t(0, 0, 0) == -1.0f);
  CHECK(t(2, 0, 1) == 1.0f);

  CHECK(normalize_range(RealGrid::Constant(4, 4, 3.0)).matrix().cwiseAbs().maxCoeff() == 0.0f);

  const auto r = normalize_range<double>(random_real(16, 16, 4, -3.0, 8.0));
  CHECK(r.matrix().minCoeff() == -1.0);
  CHECK(r.matrix().maxCoeff() == 1.0);
  CHECK((r.matrix().row(0).array() == r.matrix().row(2).array()).all());
}

TEST_CASE("vgg_prefix shape law and zero behaviour") {
  const auto zeros = vgg_prefix(Tensor3<float>(3, 16, 16), zero_vgg_prefix());
  CHECK(zeros.channels() == 128);
  CHECK(zeros.height() == 8);
  CHECK(zeros.matrix().cwiseAbs().maxCoeff() == 0.0f);

  const auto f = vgg_prefix(normalize_range(random_real(64, 64, 2)), vgg());
  CHECK(f.channels() == 128);
  CHECK(f.height() == 32);
  CHECK(f.width() == 32);
  CHECK(f.matrix().minCoeff() >= 0.0f);

  CHECK_THROWS_AS(vgg_prefix(Tensor3<float>(3, 16, 16), toy_bundle(1)), std::invalid_argument);
  CHECK_THROWS_AS(vgg_prefix(Tensor3<float>(1, 16, 16), vgg()), std::invalid_argument);
  CHECK_THROWS_AS(vgg_prefix(Tensor3<float>(3, 15, 16), vgg()), std::invalid_argument);
}

TEST_CASE("vgg_prefix matches the exported reference activations") {
  for (const std::string probe : {"gradient", "natural"}) {
    const auto input = read_tensor(data_dir() / "fixtures" / ("probe_" + probe + ".plt"));
    const auto want = read_tensor(data_dir() / "fixtures" / ("fixture_" + probe + "_relu2_2.plt"));
    const auto got = vgg_prefix(input, vgg());
    REQUIRE(got.channels() == want.channels());
    REQUIRE(got.height() == want.height());
    double worst = 0.0;
    for (Index i = 0; i < got.size(); ++i) {
      const double a = got.matrix().data()[i], b = want.matrix().data()[i];
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
    }
    CAPTURE(probe);
    CAPTURE(worst);
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("perceptual loss axioms") {
  const RealGrid a = random_real(32, 32, 1), b = random_real(32, 32, 2);
  CHECK(perceptual_loss(a, a, vgg()) == 0.0);
  const double ab = perceptual_loss(a, b, vgg()), ba = perceptual_loss(b, a, vgg());
  CHECK(ab > 0.0);
  CHECK(ab == ba);
  CHECK(perceptual_loss_grad(a, a, vgg()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(perceptual_loss(a, random_real(16, 16, 3), vgg()), std::invalid_argument);
}

TEST_CASE("perceptual loss equals an explicit recomputation from oracles") {
  const auto bundle = toy_bundle(10);
  const RealGrid f = random_real(8, 8, 11), fhat = random_real(8, 8, 12);
  const Tensor3<double> pf = oracle_features(f, bundle), pg = oracle_features(fhat, bundle);
  double sum = 0.0;
  for (Index i = 0; i < pf.size(); ++i) sum += std::pow(pf.matrix().data()[i] - pg.matrix().data()[i], 2);
  const double n_feat = 3, nx = 4, ny = 4;
  const double want = sum / (n_feat * nx * ny);
  CHECK(PerceptualLoss<float>(bundle)(f, fhat) == doctest::Approx(want).epsilon(1e-5));
  CHECK(PerceptualLoss<double>(bundle)(f, fhat) == doctest::Approx(want).epsilon(1e-5));
}

TEST_CASE("perceptual loss gradient matches central finite differences") {
  const auto bundle = toy_bundle(20);
  const RealGrid f = random_real(16, 16, 21), fhat = random_real(16, 16, 22);
  const PerceptualLoss<double> loss(bundle);
  const auto ref = loss.reference(f);
  RealGrid grad;
  loss(ref, fhat, &grad);

  // Pixels holding fhat's min or max move the normalization range; the gradient
  // holds that range fixed, so they are excluded from the sample.
  Index imin, jmin, imax, jmax;
  fhat.minCoeff(&imin, &jmin);
  fhat.maxCoeff(&imax, &jmax);
  StreamRng pick(23);
  Eigen::VectorXd ana(100), num(100);
  const double h = 1e-3;
  for (int s = 0; s < 100;) {
    const Index r = static_cast<Index>(pick.below(16)), c = static_cast<Index>(pick.below(16));
    if ((r == imin && c == jmin) || (r == imax && c == jmax)) continue;
    RealGrid p = fhat, m = fhat;
    p(r, c) += h;
    m(r, c) -= h;
    num[s] = (loss(ref, p) - loss(ref, m)) / (2 * h);
    ana[s] = grad(r, c);
    ++s;
  }
  CHECK(relative_error(ana, num) < 1e-3);
}

TEST_CASE("loss scale multiplies the gradient") {
  const auto bundle = toy_bundle(30);
  const RealGrid f = random_real(16, 16, 31), fhat = random_real(16, 16, 32);
  RealGrid g1, g3;
  const double l1 = PerceptualLoss<double>(bundle, NormalizationMode::Independent, 1.0)(f, fhat, &g1);
  const double l3 = PerceptualLoss<double>(bundle, NormalizationMode::Independent, 3.0)(f, fhat, &g3);
  CHECK(l3 == doctest::Approx(3.0 * l1).epsilon(1e-12));
  CHECK(relative_error(g3, RealGrid(3.0 * g1)) < 1e-12);
}

TEST_CASE("joint normalization mode") {
  const auto bundle = toy_bundle(40);
  const RealGrid f = random_real(16, 16, 41);
  const PerceptualLoss<double> joint(bundle, NormalizationMode::Joint);
  CHECK(joint(f, f) == 0.0);
  // Independent mode is blind to affine rescaling of fhat; joint mode is not.
  const RealGrid scaled = (0.5 * f.array() + 0.2).matrix();
  CHECK(PerceptualLoss<double>(bundle)(f, scaled) < 1e-20);
  CHECK(joint(f, scaled) > 1e-6);
}

TEST_CASE("backward passes are bit-identical on repetition") {
  const RealGrid f = random_real(32, 32, 51), fhat = random_real(32, 32, 52);
  const RealGrid a = perceptual_loss_grad(f, fhat, vgg()), b = perceptual_loss_grad(f, fhat, vgg());
  CHECK((a.array() == b.array()).all());
}
