#pragma once

// Forward and reverse-mode primitives for small convolutional stacks.
// Convolutions are 3x3 cross-correlations, stride 1, zero padding 1.

#include "phaselab/tensor3.hpp"
#include "phaselab/weights.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace phaselab {

/// Unfolds x into a (C*9) x (H*W) patch matrix; row c*9 + dy*3 + dx holds
/// x[c, y+dy-1, x+dx-1] (zero outside).
template <typename Scalar>
typename Tensor3<Scalar>::Matrix im2col3x3(const Tensor3<Scalar>& x) {
  const Eigen::Index C = x.channels(), H = x.height(), W = x.width();
  typename Tensor3<Scalar>::Matrix cols = Tensor3<Scalar>::Matrix::Zero(C * 9, H * W);
  for (Eigen::Index c = 0; c < C; ++c) {
    const Scalar* src = x.matrix().row(c).data();
    for (int dy = 0; dy < 3; ++dy) {
      for (int dx = 0; dx < 3; ++dx) {
        Scalar* dst = cols.row(c * 9 + dy * 3 + dx).data();
        const Eigen::Index x0 = std::max<Eigen::Index>(0, 1 - dx);
        const Eigen::Index x1 = std::min<Eigen::Index>(W, W + 1 - dx);
        for (Eigen::Index y = 0; y < H; ++y) {
          const Eigen::Index sy = y + dy - 1;
          if (sy < 0 || sy >= H) continue;
          for (Eigen::Index xx = x0; xx < x1; ++xx) dst[y * W + xx] = src[sy * W + xx + dx - 1];
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col3x3: scatters patch-matrix gradients back onto the image.
template <typename Scalar>
Tensor3<Scalar> col2im3x3(const typename Tensor3<Scalar>::Matrix& cols, Eigen::Index C, Eigen::Index H, Eigen::Index W) {
  Tensor3<Scalar> x(C, H, W);
  for (Eigen::Index c = 0; c < C; ++c) {
    Scalar* dst = x.matrix().row(c).data();
    for (int dy = 0; dy < 3; ++dy) {
      for (int dx = 0; dx < 3; ++dx) {
        const Scalar* src = cols.row(c * 9 + dy * 3 + dx).data();
        const Eigen::Index x0 = std::max<Eigen::Index>(0, 1 - dx);
        const Eigen::Index x1 = std::min<Eigen::Index>(W, W + 1 - dx);
        for (Eigen::Index y = 0; y < H; ++y) {
          const Eigen::Index sy = y + dy - 1;
          if (sy < 0 || sy >= H) continue;
          for (Eigen::Index xx = x0; xx < x1; ++xx) dst[sy * W + xx + dx - 1] += src[y * W + xx];
        }
      }
    }
  }
  return x;
}

template <typename Scalar>
void require_conv_input(const Tensor3<Scalar>& x, const ConvLayer<Scalar>& layer) {
  if (x.channels() != layer.in_channels())
    throw std::invalid_argument("conv2d " + layer.name + ": input has " + std::to_string(x.channels()) +
                                " channels, layer expects " + std::to_string(layer.in_channels()));
}

template <typename Scalar>
Tensor3<Scalar> conv2d(const Tensor3<Scalar>& x, const ConvLayer<Scalar>& layer) {
  require_conv_input(x, layer);
  typename Tensor3<Scalar>::Matrix y = layer.kernel * im2col3x3(x);
  y.colwise() += layer.bias;
  return Tensor3<Scalar>(std::move(y), x.height(), x.width());
}

/// Gradient of a convolution with respect to its input.
template <typename Scalar>
Tensor3<Scalar> conv2d_backward_input(const Tensor3<Scalar>& grad_out, const ConvLayer<Scalar>& layer) {
  const typename Tensor3<Scalar>::Matrix gcols = layer.kernel.transpose() * grad_out.matrix();
  return col2im3x3<Scalar>(gcols, layer.in_channels(), grad_out.height(), grad_out.width());
}

/// Accumulates kernel and bias gradients of a convolution applied to `input`.
template <typename Scalar>
void conv2d_backward_params(const Tensor3<Scalar>& input, const Tensor3<Scalar>& grad_out, ConvLayer<Scalar>& grad) {
  grad.kernel.noalias() += grad_out.matrix() * im2col3x3(input).transpose();
  grad.bias += grad_out.matrix().rowwise().sum();
}

template <typename Scalar>
Tensor3<Scalar> relu(const Tensor3<Scalar>& x) {
  return Tensor3<Scalar>(x.matrix().cwiseMax(Scalar(0)), x.height(), x.width());
}

/// ReLU backward from the forward *output*; derivative at 0 is 0.
template <typename Scalar>
Tensor3<Scalar> relu_backward(const Tensor3<Scalar>& output, const Tensor3<Scalar>& grad_out) {
  typename Tensor3<Scalar>::Matrix g =
      (output.matrix().array() > Scalar(0)).select(grad_out.matrix(), Scalar(0));
  return Tensor3<Scalar>(std::move(g), output.height(), output.width());
}

/// Argmax positions (flat y*W+x in the input plane) of a 2x2 max pool.
using PoolIndices = std::vector<std::int32_t>;

template <typename Scalar>
Tensor3<Scalar> maxpool2(const Tensor3<Scalar>& x, PoolIndices* argmax = nullptr) {
  if (x.height() % 2 != 0 || x.width() % 2 != 0)
    throw std::invalid_argument("maxpool2: height and width must be even, got " + x.shape_string());
  const Eigen::Index C = x.channels(), H = x.height() / 2, W = x.width() / 2, Wi = x.width();
  Tensor3<Scalar> y(C, H, W);
  if (argmax) argmax->assign(static_cast<std::size_t>(C * H * W), 0);
  for (Eigen::Index c = 0; c < C; ++c) {
    const Scalar* src = x.matrix().row(c).data();
    Scalar* dst = y.matrix().row(c).data();
    for (Eigen::Index py = 0; py < H; ++py) {
      for (Eigen::Index px = 0; px < W; ++px) {
        // Row-major scan with strict '>' routes ties to the first maximal element.
        Eigen::Index best = (2 * py) * Wi + 2 * px;
        const Eigen::Index cand[3] = {best + 1, best + Wi, best + Wi + 1};
        for (Eigen::Index k : cand)
          if (src[k] > src[best]) best = k;
        dst[py * W + px] = src[best];
        if (argmax) (*argmax)[static_cast<std::size_t>(c * H * W + py * W + px)] = static_cast<std::int32_t>(best);
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor3<Scalar> maxpool2_backward(const PoolIndices& argmax, const Tensor3<Scalar>& grad_out) {
  const Eigen::Index C = grad_out.channels(), H = grad_out.height(), W = grad_out.width();
  Tensor3<Scalar> g(C, 2 * H, 2 * W);
  for (Eigen::Index c = 0; c < C; ++c) {
    const Scalar* src = grad_out.matrix().row(c).data();
    Scalar* dst = g.matrix().row(c).data();
    for (Eigen::Index i = 0; i < H * W; ++i) dst[argmax[static_cast<std::size_t>(c * H * W + i)]] += src[i];
  }
  return g;
}

/// Nearest-neighbour 2x upsampling.
template <typename Scalar>
Tensor3<Scalar> upsample2(const Tensor3<Scalar>& x) {
  const Eigen::Index C = x.channels(), H = x.height(), W = x.width();
  Tensor3<Scalar> y(C, 2 * H, 2 * W);
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index yy = 0; yy < 2 * H; ++yy)
      for (Eigen::Index xx = 0; xx < 2 * W; ++xx) y(c, yy, xx) = x(c, yy / 2, xx / 2);
  return y;
}

template <typename Scalar>
Tensor3<Scalar> upsample2_backward(const Tensor3<Scalar>& grad_out) {
  const Eigen::Index C = grad_out.channels(), H = grad_out.height() / 2, W = grad_out.width() / 2;
  Tensor3<Scalar> g(C, H, W);
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index yy = 0; yy < 2 * H; ++yy)
      for (Eigen::Index xx = 0; xx < 2 * W; ++xx) g(c, yy / 2, xx / 2) += grad_out(c, yy, xx);
  return g;
}

/// Channel concatenation [a; b].
template <typename Scalar>
Tensor3<Scalar> concat_channels(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw std::invalid_argument("concat_channels: spatial sizes differ");
  typename Tensor3<Scalar>::Matrix m(a.channels() + b.channels(), a.height() * a.width());
  m.topRows(a.channels()) = a.matrix();
  m.bottomRows(b.channels()) = b.matrix();
  return Tensor3<Scalar>(std::move(m), a.height(), a.width());
}

template <typename Scalar>
Tensor3<Scalar> channel_slice(const Tensor3<Scalar>& x, Eigen::Index first, Eigen::Index count) {
  return Tensor3<Scalar>(x.matrix().middleRows(first, count), x.height(), x.width());
}

}  // namespace phaselab
