#pragma once

// Toy encoder-decoder that maps the single-step approximant to a phase
// estimate, with perceptual-loss training and evaluation.
//
// Layout for depth D and base width w (c_d = w * 2^d):
//   enc_d      conv(c_{d-1} or 1 -> c_d) + ReLU, kept as skip_d, then 2x2 max pool   d = 0..D-1
//   bottleneck conv(c_{D-1} -> c_D) + ReLU
//   dec_d      nearest 2x upsample, concat skip_d, conv(c_{d+1} + c_d -> c_d) + ReLU   d = D-1..0
//   out        conv(c_0 -> 1), linear, plus the input when `residual` is set
//
// Without the residual path a net whose ReLUs all close emits a constant
// image, where the min/max-normalized loss has zero gradient for good.

#include "phaselab/calibrate.hpp"
#include "phaselab/dataset.hpp"
#include "phaselab/diffnet.hpp"
#include "phaselab/layers.hpp"
#include "phaselab/weights.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phaselab {

struct PhennArch {
  int depth = 2;
  int width = 16;
  bool residual = true;

  void validate() const;
  Eigen::Index channels(int level) const { return Eigen::Index(width) << level; }
  /// Names and (in, out) channels of every conv, in storage order.
  std::vector<LayerManifestEntry> layout() const;
};

template <typename Scalar>
class Phenn {
 public:
  using Layer = ConvLayer<Scalar>;

  struct Tape {
    std::vector<Tensor3<Scalar>> conv_inputs;  // one per conv, storage order
    std::vector<Tensor3<Scalar>> activations;  // ReLU outputs of the hidden convs
    std::vector<PoolIndices> pools;            // one per encoder level
  };

  Phenn() = default;

  /// Zero kernels and biases.
  explicit Phenn(const PhennArch& arch) : arch_(arch) {
    arch_.validate();
    for (const auto& e : arch_.layout()) layers_.emplace_back(e.name, e.in_channels, e.out_channels);
  }

  /// He-normal kernels (variance 2 / fan_in; 1 / fan_in for the linear output), zero biases.
  static Phenn initialized(const PhennArch& arch, std::uint64_t seed);

  /// From a bundle written by to_bundle(); checks the architecture metadata and layer shapes.
  static Phenn from_bundle(const WeightBundle& bundle);
  WeightBundle to_bundle() const;

  const PhennArch& arch() const { return arch_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.kernel.size() + l.bias.size();
    return n;
  }

  template <typename Other>
  Phenn<Other> cast() const {
    Phenn<Other> out(arch_);
    for (std::size_t i = 0; i < layers_.size(); ++i) out.layers()[i] = layers_[i].template cast<Other>();
    return out;
  }

  Tensor3<Scalar> forward(const Tensor3<Scalar>& input, Tape* tape = nullptr) const {
    const Eigen::Index m = Eigen::Index(1) << arch_.depth;
    if (input.channels() != 1) throw std::invalid_argument("phenn expects a single input channel");
    if (input.height() % m != 0 || input.width() % m != 0)
      throw std::invalid_argument("phenn input " + input.shape_string() + " is not divisible by 2^depth = " +
                                  std::to_string(m));
    if (tape) {
      tape->conv_inputs.clear();
      tape->activations.clear();
      tape->pools.assign(static_cast<std::size_t>(arch_.depth), {});
    }
    std::size_t li = 0;
    const auto conv_relu = [&](const Tensor3<Scalar>& x) {
      if (tape) tape->conv_inputs.push_back(x);
      Tensor3<Scalar> y = relu(conv2d(x, layers_[li++]));
      if (tape) tape->activations.push_back(y);
      return y;
    };

    std::vector<Tensor3<Scalar>> skips;
    Tensor3<Scalar> x = input;
    for (int d = 0; d < arch_.depth; ++d) {
      skips.push_back(conv_relu(x));
      x = maxpool2(skips.back(), tape ? &tape->pools[static_cast<std::size_t>(d)] : nullptr);
    }
    x = conv_relu(x);
    for (int d = arch_.depth - 1; d >= 0; --d) x = conv_relu(concat_channels(upsample2(x), skips[static_cast<std::size_t>(d)]));
    if (tape) tape->conv_inputs.push_back(x);
    Tensor3<Scalar> y = conv2d(x, layers_[li]);
    if (arch_.residual) y.matrix() += input.matrix();
    return y;
  }

  RealGrid forward(const RealGrid& input) const {
    Tensor3<Scalar> t(1, input.rows(), input.cols());
    for (Eigen::Index i = 0; i < input.size(); ++i) t.matrix()(0, i) = static_cast<Scalar>(input.data()[i]);
    const Tensor3<Scalar> y = forward(t);
    RealGrid out(input.rows(), input.cols());
    for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = static_cast<double>(y.matrix()(0, i));
    return out;
  }

  /// Accumulates parameter gradients into `grads` (same layout as layers())
  /// for the output gradient `grad_out`; returns the input gradient.
  Tensor3<Scalar> backward(const Tape& tape, const Tensor3<Scalar>& grad_out, std::vector<Layer>& grads) const {
    if (grads.size() != layers_.size()) throw std::invalid_argument("phenn backward: gradient layout mismatch");
    const auto D = static_cast<std::size_t>(arch_.depth);
    std::size_t li = layers_.size() - 1;

    conv2d_backward_params(tape.conv_inputs[li], grad_out, grads[li]);
    Tensor3<Scalar> g = conv2d_backward_input(grad_out, layers_[li]);

    std::vector<Tensor3<Scalar>> skip_grads(D);
    // Decoder, traversed from the last-applied level (d = 0) back to d = D-1.
    for (std::size_t d = 0; d < D; ++d) {
      --li;
      g = relu_backward(tape.activations[li], g);
      conv2d_backward_params(tape.conv_inputs[li], g, grads[li]);
      const Tensor3<Scalar> gin = conv2d_backward_input(g, layers_[li]);
      const Eigen::Index up_channels = gin.channels() - arch_.channels(static_cast<int>(d));
      skip_grads[d] = channel_slice(gin, up_channels, arch_.channels(static_cast<int>(d)));
      g = upsample2_backward(channel_slice(gin, 0, up_channels));
    }
    --li;  // bottleneck
    g = relu_backward(tape.activations[li], g);
    conv2d_backward_params(tape.conv_inputs[li], g, grads[li]);
    g = conv2d_backward_input(g, layers_[li]);
    for (std::size_t d = D; d-- > 0;) {
      --li;
      g = maxpool2_backward(tape.pools[d], g);
      g.matrix() += skip_grads[d].matrix();
      g = relu_backward(tape.activations[li], g);
      conv2d_backward_params(tape.conv_inputs[li], g, grads[li]);
      g = conv2d_backward_input(g, layers_[li]);
    }
    if (arch_.residual) g.matrix() += grad_out.matrix();
    return g;
  }

  /// Zero-valued gradient buffers in the layout of layers().
  std::vector<Layer> zero_grads() const {
    std::vector<Layer> g;
    for (const auto& l : layers_) g.emplace_back(l.name, l.in_channels(), l.out_channels());
    return g;
  }

 private:
  PhennArch arch_;
  std::vector<Layer> layers_;
};

extern template class Phenn<float>;
extern template class Phenn<double>;

/// Network input: the mean-removed approximant.
RealGrid phenn_input(const Triplet& t);

struct TrainConfig {
  int epochs = 20;
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  PhennArch arch;
  NormalizationMode normalization = NormalizationMode::Independent;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  ///< 1-based
  double train_loss = 0.0;  ///< mean over the epoch's mini-batches
  double val_loss = 0.0;    ///< mean over the validation set, NaN without one
};

struct TrainResult {
  Phenn<float> best;  ///< parameters at the lowest validation loss (last epoch without validation data)
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on the mean perceptual loss of each mini-batch. Examples are visited
/// in a seeded order per epoch; per-example gradients are computed in parallel
/// and summed in example order, so results do not depend on the worker count.
/// A non-finite batch loss aborts with NumericalError naming the batch.
TrainResult train(std::span<const Triplet> train_set, std::span<const Triplet> val_set, const WeightBundle& vgg,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Continues from given parameters (same architecture as cfg.arch).
TrainResult train(Phenn<float> init, std::span<const Triplet> train_set, std::span<const Triplet> val_set,
                  const WeightBundle& vgg, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Mean perceptual loss of the network over a set.
double mean_loss(const Phenn<float>& net, std::span<const Triplet> set, const PerceptualLoss<float>& loss);

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

struct ExampleScores {
  double pcc = 0.0;
  double mse = 0.0;
  double perceptual = 0.0;
};

struct EvalReport {
  std::vector<ExampleScores> examples;
  ExampleScores mean;
  std::vector<ExampleScores> calibrated;  ///< empty without a calibration model
  ExampleScores calibrated_mean;
};

/// Scores of estimates against ground truths.
EvalReport evaluate(std::span<const RealGrid> estimates, std::span<const RealGrid> truths, const WeightBundle& vgg,
                    const std::optional<CalibrationModel>& calibration = std::nullopt);

/// Reconstructs every triplet and scores it.
EvalReport evaluate(const Phenn<float>& net, std::span<const Triplet> test_set, const WeightBundle& vgg,
                    const std::optional<CalibrationModel>& calibration = std::nullopt);

/// Per-example rows `example, pcc, mse, perceptual[, pcc_cal, mse_cal, perceptual_cal]`.
void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace phaselab
