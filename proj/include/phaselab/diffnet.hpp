#pragma once

// VGG-style feature extractor, input normalization and the feature-space
// perceptual loss  L(f, f^) = 1/(n_feat Nx Ny) sum_i ||VGG_i(f) - VGG_i(f^)||^2.

#include "phaselab/grid.hpp"
#include "phaselab/layers.hpp"
#include "phaselab/weights.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

namespace phaselab {

/// Affine map [lo, hi] -> [-1, 1]. A degenerate range (hi == lo) maps everything to 0.
struct RangeMap {
  double lo = 0.0;
  double hi = 1.0;

  double slope() const { return hi > lo ? 2.0 / (hi - lo) : 0.0; }
  double apply(double v) const { return hi > lo ? (v - lo) * slope() - 1.0 : 0.0; }

  static RangeMap of(const RealGrid& x) { return {x.minCoeff(), x.maxCoeff()}; }
  static RangeMap joint(const RealGrid& a, const RealGrid& b) {
    return {std::min(a.minCoeff(), b.minCoeff()), std::max(a.maxCoeff(), b.maxCoeff())};
  }
};

/// Maps x through `range` and replicates it into `channels` identical channels.
template <typename Scalar>
Tensor3<Scalar> normalize_range(const RealGrid& x, const RangeMap& range, Eigen::Index channels = 3) {
  Tensor3<Scalar> t(channels, x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto v = static_cast<Scalar>(range.apply(x.data()[i]));
    for (Eigen::Index c = 0; c < channels; ++c) t.matrix()(c, i) = v;
  }
  return t;
}

/// Per-image min/max normalization to [-1, 1], three identical channels.
template <typename Scalar = float>
Tensor3<Scalar> normalize_range(const RealGrid& x) {
  require_finite(x, "normalize_range");
  return normalize_range<Scalar>(x, RangeMap::of(x));
}

/// Plain chain of 3x3 conv + ReLU layers taken from a weight bundle, with a
/// 2x2 max pool inserted wherever the block index in the layer name
/// (conv<block>_<k>) increases. The output is the last ReLU activation.
template <typename Scalar>
class FeatureExtractor {
 public:
  struct Tape {
    std::vector<Tensor3<Scalar>> activations;  // ReLU outputs, one per conv
    std::vector<PoolIndices> pools;            // one per conv; empty when no pool precedes it
  };

  FeatureExtractor() = default;
  explicit FeatureExtractor(const WeightBundle& bundle) {
    if (bundle.layers().empty()) throw std::invalid_argument("feature extractor needs at least one layer");
    int previous_block = -1;
    for (const auto& layer : bundle.layers()) {
      if (!convs_.empty() && layer.in_channels() != convs_.back().out_channels())
        throw std::invalid_argument("weight bundle layer " + layer.name + " does not chain onto the previous layer");
      const int block = block_index(layer.name);
      pool_before_.push_back(!convs_.empty() && block > previous_block && previous_block >= 0);
      previous_block = block;
      convs_.push_back(layer.template cast<Scalar>());
    }
  }

  Eigen::Index input_channels() const { return convs_.front().in_channels(); }
  Eigen::Index feature_channels() const { return convs_.back().out_channels(); }
  Eigen::Index downsampling() const {
    return Eigen::Index(1) << std::count(pool_before_.begin(), pool_before_.end(), true);
  }
  const std::vector<ConvLayer<Scalar>>& layers() const { return convs_; }

  Tensor3<Scalar> forward(const Tensor3<Scalar>& input, Tape* tape = nullptr) const {
    if (input.channels() != input_channels())
      throw std::invalid_argument("feature extractor expects " + std::to_string(input_channels()) +
                                  " input channels, got " + std::to_string(input.channels()));
    if (input.height() % downsampling() != 0 || input.width() % downsampling() != 0)
      throw std::invalid_argument("feature extractor input " + input.shape_string() + " is not divisible by " +
                                  std::to_string(downsampling()));
    if (tape) {
      tape->activations.clear();
      tape->pools.assign(convs_.size(), {});
    }
    Tensor3<Scalar> x = input;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      if (pool_before_[i]) x = maxpool2(x, tape ? &tape->pools[i] : nullptr);
      x = relu(conv2d(x, convs_[i]));
      if (tape) tape->activations.push_back(x);
    }
    return x;
  }

  /// Gradient with respect to the input given the gradient at the output features.
  Tensor3<Scalar> backward(const Tape& tape, const Tensor3<Scalar>& grad_features) const {
    Tensor3<Scalar> g = grad_features;
    for (std::size_t i = convs_.size(); i-- > 0;) {
      g = relu_backward(tape.activations[i], g);
      g = conv2d_backward_input(g, convs_[i]);
      if (pool_before_[i]) g = maxpool2_backward(tape.pools[i], g);
    }
    return g;
  }

 private:
  static int block_index(const std::string& name) {
    // "conv2_1" -> 2; names without that pattern form a single block.
    if (name.rfind("conv", 0) != 0) return 0;
    std::size_t i = 4;
    int block = 0;
    while (i < name.size() && std::isdigit(static_cast<unsigned char>(name[i]))) block = block * 10 + (name[i++] - '0');
    return block;
  }

  std::vector<ConvLayer<Scalar>> convs_;
  std::vector<bool> pool_before_;
};

/// relu2_2 activations of an already-normalized 3-channel image.
Tensor3<float> vgg_prefix(const Tensor3<float>& x, const WeightBundle& bundle);

enum class NormalizationMode {
  Independent,  ///< each image mapped by its own min/max
  Joint,        ///< both images mapped by the min/max over the pair
};

template <typename Scalar>
class PerceptualLoss {
 public:
  /// Ground-truth side of the loss, with cached features when they do not
  /// depend on the other image.
  struct Reference {
    RealGrid image;
    RangeMap range;
    Tensor3<Scalar> features;
  };

  explicit PerceptualLoss(FeatureExtractor<Scalar> net, NormalizationMode mode = NormalizationMode::Independent,
                          double scale = 1.0)
      : net_(std::move(net)), mode_(mode), scale_(scale) {}
  explicit PerceptualLoss(const WeightBundle& bundle, NormalizationMode mode = NormalizationMode::Independent,
                          double scale = 1.0)
      : PerceptualLoss(FeatureExtractor<Scalar>(bundle), mode, scale) {}

  const FeatureExtractor<Scalar>& extractor() const { return net_; }
  NormalizationMode mode() const { return mode_; }

  Reference reference(const RealGrid& f) const {
    require_finite(f, "perceptual loss ground truth");
    Reference ref{f, RangeMap::of(f), {}};
    if (mode_ == NormalizationMode::Independent)
      ref.features = net_.forward(normalize_range<Scalar>(f, ref.range, net_.input_channels()));
    return ref;
  }

  /// Loss value; when `grad` is non-null it receives dL/dfhat with the
  /// normalization min/max held constant.
  double operator()(const Reference& ref, const RealGrid& fhat, RealGrid* grad = nullptr) const {
    if (fhat.rows() != ref.image.rows() || fhat.cols() != ref.image.cols())
      throw std::invalid_argument("perceptual loss: image sizes differ");
    require_finite(fhat, "perceptual loss estimate");
    RangeMap range = RangeMap::of(fhat);
    Tensor3<Scalar> target_features;
    const Tensor3<Scalar>* target = &ref.features;
    if (mode_ == NormalizationMode::Joint) {
      range = RangeMap::joint(ref.image, fhat);
      target_features = net_.forward(normalize_range<Scalar>(ref.image, range, net_.input_channels()));
      target = &target_features;
    }
    typename FeatureExtractor<Scalar>::Tape tape;
    const Tensor3<Scalar> features =
        net_.forward(normalize_range<Scalar>(fhat, range, net_.input_channels()), grad ? &tape : nullptr);
    const auto n = static_cast<double>(features.size());
    double sum = 0.0;
    const Scalar* a = features.matrix().data();
    const Scalar* b = target->matrix().data();
    for (Eigen::Index i = 0; i < features.size(); ++i) {
      const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      sum += d * d;
    }
    if (grad) {
      Tensor3<Scalar> gf(((features.matrix() - target->matrix()) * static_cast<Scalar>(2.0 * scale_ / n)).eval(),
                         features.height(), features.width());
      const Tensor3<Scalar> gin = net_.backward(tape, gf);
      grad->resize(fhat.rows(), fhat.cols());
      const double slope = range.slope();
      for (Eigen::Index i = 0; i < fhat.size(); ++i) {
        double s = 0.0;
        for (Eigen::Index c = 0; c < gin.channels(); ++c) s += static_cast<double>(gin.matrix()(c, i));
        grad->data()[i] = s * slope;
      }
    }
    return scale_ * sum / n;
  }

  double operator()(const RealGrid& f, const RealGrid& fhat, RealGrid* grad = nullptr) const {
    return (*this)(reference(f), fhat, grad);
  }

 private:
  FeatureExtractor<Scalar> net_;
  NormalizationMode mode_;
  double scale_;
};

/// Convenience wrappers over a VGG16 relu2_2 bundle (single precision).
double perceptual_loss(const RealGrid& f, const RealGrid& fhat, const WeightBundle& bundle,
                       NormalizationMode mode = NormalizationMode::Independent);
RealGrid perceptual_loss_grad(const RealGrid& f, const RealGrid& fhat, const WeightBundle& bundle,
                              NormalizationMode mode = NormalizationMode::Independent);

}  // namespace phaselab
