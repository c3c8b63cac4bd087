#include "phaselab/diffnet.hpp"

namespace phaselab {

Tensor3<float> vgg_prefix(const Tensor3<float>& x, const WeightBundle& bundle) {
  bundle.require_vgg_prefix();
  if (x.channels() != 3) throw std::invalid_argument("vgg_prefix: expected a 3-channel input, got " + x.shape_string());
  if (x.height() % 2 != 0 || x.width() % 2 != 0)
    throw std::invalid_argument("vgg_prefix: input size must be even, got " + x.shape_string());
  return FeatureExtractor<float>(bundle).forward(x);
}

double perceptual_loss(const RealGrid& f, const RealGrid& fhat, const WeightBundle& bundle, NormalizationMode mode) {
  return PerceptualLoss<float>(bundle, mode)(f, fhat);
}

RealGrid perceptual_loss_grad(const RealGrid& f, const RealGrid& fhat, const WeightBundle& bundle,
                              NormalizationMode mode) {
  RealGrid grad;
  PerceptualLoss<float>(bundle, mode)(f, fhat, &grad);
  return grad;
}

}  // namespace phaselab
