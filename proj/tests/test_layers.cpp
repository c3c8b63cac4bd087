#include "doctest.h"

#include "phaselab/layers.hpp"
#include "test_support.hpp"

using namespace phaselab;
using namespace phaselab::testing;

namespace {

// Sum of w * y over a tensor, the scalar probe used by the finite-difference checks.
template <typename Scalar>
double dot(const Tensor3<Scalar>& a, const Tensor3<double>& w) {
  return (a.matrix().template cast<double>().array() * w.matrix().array()).sum();
}

// Central finite difference of phi(x) = <w, op(x)> at every entry of x.
template <typename Op>
Tensor3<double> numeric_input_grad(const Tensor3<double>& x, const Tensor3<double>& w, Op op, double h = 1e-6) {
  Tensor3<double> g(x.channels(), x.height(), x.width());
  for (Index i = 0; i < x.size(); ++i) {
    Tensor3<double> xp = x, xm = x;
    xp.matrix().data()[i] += h;
    xm.matrix().data()[i] -= h;
    g.matrix().data()[i] = (dot(op(xp), w) - dot(op(xm), w)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("identity kernel reproduces the input") {
  ConvLayer<float> id("id", 1, 1);
  id.tap(0, 0, 1, 1) = 1.0f;
  const auto x = random_tensor<float>(1, 6, 10, 3);
  CHECK(max_abs_diff(conv2d(x, id), x) == 0.0);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  ConvLayer<float> k("k", 1, 1);
  const float taps[9] = {1, -2, 3, 0.5f, 4, -1, 2, 0, -3};
  for (int i = 0; i < 9; ++i) k.kernel(0, i) = taps[i];
  k.bias[0] = 0.25f;
  const auto x = random_tensor<float>(1, 4, 4, 5);
  CHECK(max_abs_diff(conv2d(x, k), direct_conv(x, k)) < 1e-6);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto layer = random_layer<float>("r", 3, 5, 100 + seed);
    const auto xr = random_tensor<float>(3, 8, 6, 200 + seed);
    CHECK(max_abs_diff(conv2d(xr, layer), direct_conv(xr, layer)) < 1e-6);
  }
}

TEST_CASE("conv2d of zeros is the broadcast bias; channel mismatch throws") {
  const auto layer = random_layer<float>("r", 2, 3, 1);
  const auto y = conv2d(Tensor3<float>(2, 5, 5), layer);
  for (Index o = 0; o < 3; ++o) CHECK((y.matrix().row(o).array() == layer.bias[o]).all());
  CHECK_THROWS_AS(conv2d(Tensor3<float>(3, 5, 5), layer), std::invalid_argument);
}

TEST_CASE("relu matches the elementwise oracle") {
  const auto x = random_tensor<float>(3, 7, 5, 8);
  const auto y = relu(x);
  for (Index i = 0; i < x.size(); ++i) {
    const float v = x.matrix().data()[i];
    CHECK(y.matrix().data()[i] == (v > 0 ? v : 0.0f));
  }
  const auto pos = random_tensor<float>(2, 4, 4, 9, 0.0, 1.0);
  CHECK(max_abs_diff(relu(pos), pos) == 0.0);
  const auto neg = random_tensor<float>(2, 4, 4, 9, -1.0, -0.01);
  CHECK(relu(neg).matrix().cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("maxpool2 against window oracle and trivial cases") {
  const auto x = random_tensor<float>(4, 8, 8, 12);
  CHECK(max_abs_diff(maxpool2(x), direct_pool(x)) < 1e-6);

  Tensor3<float> c(1, 4, 6);
  c.matrix().setConstant(2.5f);
  const auto pc = maxpool2(c);
  CHECK(pc.height() == 2);
  CHECK(pc.width() == 3);
  CHECK((pc.matrix().array() == 2.5f).all());

  Tensor3<float> four(1, 2, 2);
  four(0, 0, 0) = 1;
  four(0, 0, 1) = 7;
  four(0, 1, 0) = -3;
  four(0, 1, 1) = 4;
  CHECK(maxpool2(four)(0, 0, 0) == 7.0f);
  CHECK_THROWS_AS(maxpool2(Tensor3<float>(1, 3, 4)), std::invalid_argument);
}

TEST_CASE("maxpool ties route the gradient to the first row-major element") {
  Tensor3<double> x(1, 2, 2);
  x.matrix().setConstant(1.0);
  PoolIndices idx;
  maxpool2(x, &idx);
  Tensor3<double> g(1, 1, 1);
  g(0, 0, 0) = 5.0;
  const auto back = maxpool2_backward(idx, g);
  CHECK(back(0, 0, 0) == 5.0);
  CHECK(back(0, 0, 1) == 0.0);
  CHECK(back(0, 1, 0) == 0.0);
  CHECK(back(0, 1, 1) == 0.0);
}

TEST_CASE("relu derivative at zero is zero") {
  Tensor3<double> out(1, 1, 3);
  out(0, 0, 0) = 0.0;
  out(0, 0, 1) = 1.0;
  out(0, 0, 2) = 0.0;
  Tensor3<double> g(1, 1, 3);
  g.matrix().setConstant(2.0);
  const auto b = relu_backward(out, g);
  CHECK(b(0, 0, 0) == 0.0);
  CHECK(b(0, 0, 1) == 2.0);
}

TEST_CASE("layer backward passes agree with central finite differences") {
  const auto layer = random_layer<double>("r", 3, 4, 31);
  const auto x = random_tensor<double>(3, 6, 8, 32);
  const auto w4 = random_tensor<double>(4, 6, 8, 33);

  SUBCASE("conv2d input") {
    const auto num = numeric_input_grad(x, w4, [&](const Tensor3<double>& t) { return conv2d(t, layer); });
    const auto ana = conv2d_backward_input(w4, layer);
    CHECK(relative_error(ana.matrix(), num.matrix()) < 1e-8);
  }
  SUBCASE("conv2d parameters") {
    ConvLayer<double> grad("g", 3, 4);
    conv2d_backward_params(x, w4, grad);
    const double h = 1e-6;
    double worst = 0.0;
    for (Index i = 0; i < layer.kernel.size(); ++i) {
      auto lp = layer, lm = layer;
      lp.kernel.data()[i] += h;
      lm.kernel.data()[i] -= h;
      const double num = (dot(conv2d(x, lp), w4) - dot(conv2d(x, lm), w4)) / (2 * h);
      worst = std::max(worst, std::abs(num - grad.kernel.data()[i]) / std::max(1.0, std::abs(num)));
    }
    for (Index o = 0; o < 4; ++o) {
      auto lp = layer, lm = layer;
      lp.bias[o] += h;
      lm.bias[o] -= h;
      const double num = (dot(conv2d(x, lp), w4) - dot(conv2d(x, lm), w4)) / (2 * h);
      worst = std::max(worst, std::abs(num - grad.bias[o]) / std::max(1.0, std::abs(num)));
    }
    CHECK(worst < 1e-8);
  }
  SUBCASE("relu") {
    const auto w3 = random_tensor<double>(3, 6, 8, 34);
    const auto num = numeric_input_grad(x, w3, [](const Tensor3<double>& t) { return relu(t); });
    const auto ana = relu_backward(relu(x), w3);
    CHECK(relative_error(ana.matrix(), num.matrix()) < 1e-8);
  }
  SUBCASE("maxpool2") {
    const auto w3 = random_tensor<double>(3, 3, 4, 35);
    const auto num = numeric_input_grad(x, w3, [](const Tensor3<double>& t) { return maxpool2(t); });
    PoolIndices idx;
    maxpool2(x, &idx);
    CHECK(relative_error(maxpool2_backward(idx, w3).matrix(), num.matrix()) < 1e-8);
  }
  SUBCASE("upsample2") {
    const auto w3 = random_tensor<double>(3, 12, 16, 36);
    const auto num = numeric_input_grad(x, w3, [](const Tensor3<double>& t) { return upsample2(t); });
    CHECK(relative_error(upsample2_backward(w3).matrix(), num.matrix()) < 1e-8);
  }
}

TEST_CASE("im2col/col2im are adjoint") {
  const auto x = random_tensor<double>(2, 5, 7, 40);
  const Tensor3<double>::Matrix c = Tensor3<double>::Matrix::NullaryExpr(
      18, 35, [](Index i, Index j) { return std::sin(0.37 * static_cast<double>(i * 35 + j)); });
  const double lhs = (im2col3x3(x).array() * c.array()).sum();
  const double rhs = (x.matrix().array() * col2im3x3<double>(c, 2, 5, 7).matrix().array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("concat and slice round trip") {
  const auto a = random_tensor<float>(2, 4, 4, 1), b = random_tensor<float>(3, 4, 4, 2);
  const auto ab = concat_channels(a, b);
  CHECK(ab.channels() == 5);
  CHECK(max_abs_diff(channel_slice(ab, 0, 2), a) == 0.0);
  CHECK(max_abs_diff(channel_slice(ab, 2, 3), b) == 0.0);
  CHECK_THROWS_AS(concat_channels(a, random_tensor<float>(1, 4, 2, 3)), std::invalid_argument);
}
