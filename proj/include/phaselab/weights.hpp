#pragma once

// PWB1 weight bundles: an ASCII manifest
//   PWB1 <n_layers>
//   meta <key> <value>                                   (zero or more)
//   layer <name> <in> <out> <kh> <kw> <offset> <crc32>   (n_layers lines)
//   end
// followed by one little-endian float32 blob per layer: kernel laid out
// out/in/row/col, then bias. Offsets are relative to the first blob byte and
// each CRC32 (zlib polynomial, 8 hex digits) covers that layer's blob.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phaselab {

/// 3x3 convolution weights; kernel row o holds in*9 taps ordered (in, row, col).
template <typename Scalar>
struct ConvLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::string name;
  Matrix kernel;
  Vector bias;

  ConvLayer() = default;
  ConvLayer(std::string layer_name, Eigen::Index in_channels, Eigen::Index out_channels)
      : name(std::move(layer_name)),
        kernel(Matrix::Zero(out_channels, in_channels * 9)),
        bias(Vector::Zero(out_channels)) {}

  Eigen::Index in_channels() const { return kernel.cols() / 9; }
  Eigen::Index out_channels() const { return kernel.rows(); }

  Scalar& tap(Eigen::Index o, Eigen::Index i, int dy, int dx) { return kernel(o, i * 9 + dy * 3 + dx); }
  Scalar tap(Eigen::Index o, Eigen::Index i, int dy, int dx) const { return kernel(o, i * 9 + dy * 3 + dx); }

  template <typename Other>
  ConvLayer<Other> cast() const {
    ConvLayer<Other> out;
    out.name = name;
    out.kernel = kernel.template cast<Other>();
    out.bias = bias.template cast<Other>();
    return out;
  }
};

struct LayerManifestEntry {
  std::string name;
  Eigen::Index in_channels = 0;
  Eigen::Index out_channels = 0;
  std::uint64_t offset = 0;
  std::uint32_t crc32 = 0;
};

/// Ordered, named convolution layers plus free-form metadata.
class WeightBundle {
 public:
  WeightBundle() = default;
  explicit WeightBundle(std::vector<ConvLayer<float>> layers, std::map<std::string, std::string> meta = {})
      : layers_(std::move(layers)), meta_(std::move(meta)) {}

  const std::vector<ConvLayer<float>>& layers() const { return layers_; }
  std::vector<ConvLayer<float>>& layers() { return layers_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }
  std::map<std::string, std::string>& meta() { return meta_; }

  const ConvLayer<float>& layer(const std::string& name) const;
  std::optional<std::string> meta_value(const std::string& key) const;

  /// Manifest (name, shape, offset, CRC32) as it would be written to disk.
  std::vector<LayerManifestEntry> manifest() const;

  bool is_vgg_prefix() const;
  /// Throws unless the layers are exactly conv1_1 3->64, conv1_2 64->64,
  /// conv2_1 64->128, conv2_2 128->128.
  void require_vgg_prefix() const;

 private:
  std::vector<ConvLayer<float>> layers_;
  std::map<std::string, std::string> meta_;
};

std::uint32_t crc32(std::span<const unsigned char> bytes);

void write_pwb(const std::filesystem::path& path, const WeightBundle& bundle);
/// Reads and verifies per-layer CRC32s; throws IoError on mismatch.
WeightBundle read_pwb(const std::filesystem::path& path);

/// VGG16 prefix with every kernel and bias zero (shape-correct placeholder).
WeightBundle zero_vgg_prefix();

}  // namespace phaselab
