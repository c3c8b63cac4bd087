#include "phaselab/weights.hpp"

#include "phaselab/error.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace phaselab {
namespace {

struct VggShape {
  const char* name;
  Eigen::Index in;
  Eigen::Index out;
};
constexpr VggShape kVggPrefix[] = {{"conv1_1", 3, 64}, {"conv1_2", 64, 64}, {"conv2_1", 64, 128}, {"conv2_2", 128, 128}};

std::vector<unsigned char> layer_blob(const ConvLayer<float>& layer) {
  static_assert(std::endian::native == std::endian::little, "PWB1 I/O assumes a little-endian host");
  const auto kbytes = static_cast<std::size_t>(layer.kernel.size()) * sizeof(float);
  const auto bbytes = static_cast<std::size_t>(layer.bias.size()) * sizeof(float);
  std::vector<unsigned char> blob(kbytes + bbytes);
  std::memcpy(blob.data(), layer.kernel.data(), kbytes);
  std::memcpy(blob.data() + kbytes, layer.bias.data(), bbytes);
  return blob;
}

}  // namespace

std::uint32_t crc32(std::span<const unsigned char> bytes) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

const ConvLayer<float>& WeightBundle::layer(const std::string& name) const {
  for (const auto& l : layers_)
    if (l.name == name) return l;
  throw std::out_of_range("weight bundle has no layer '" + name + "'");
}

std::optional<std::string> WeightBundle::meta_value(const std::string& key) const {
  if (auto it = meta_.find(key); it != meta_.end()) return it->second;
  return std::nullopt;
}

std::vector<LayerManifestEntry> WeightBundle::manifest() const {
  std::vector<LayerManifestEntry> out;
  std::uint64_t offset = 0;
  for (const auto& l : layers_) {
    const auto blob = layer_blob(l);
    out.push_back({l.name, l.in_channels(), l.out_channels(), offset, crc32(blob)});
    offset += blob.size();
  }
  return out;
}

bool WeightBundle::is_vgg_prefix() const {
  if (layers_.size() != std::size(kVggPrefix)) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.name != kVggPrefix[i].name || l.in_channels() != kVggPrefix[i].in || l.out_channels() != kVggPrefix[i].out)
      return false;
  }
  return true;
}

void WeightBundle::require_vgg_prefix() const {
  if (!is_vgg_prefix())
    throw std::invalid_argument(
        "weight bundle is not a VGG16 relu2_2 prefix (expected conv1_1 3->64, conv1_2 64->64, conv2_1 64->128, "
        "conv2_2 128->128)");
}

void write_pwb(const std::filesystem::path& path, const WeightBundle& bundle) {
  std::ostringstream header;
  header << "PWB1 " << bundle.layers().size() << '\n';
  for (const auto& [k, v] : bundle.meta()) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos || v.empty())
      throw std::invalid_argument("PWB1 meta keys must be single tokens and values single lines");
    header << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& e : bundle.manifest()) {
    header << "layer " << e.name << ' ' << e.in_channels << ' ' << e.out_channels << " 3 3 " << e.offset << ' '
           << std::hex << std::setw(8) << std::setfill('0') << e.crc32 << std::dec << std::setfill(' ') << '\n';
  }
  header << "end\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& l : bundle.layers()) {
    const auto blob = layer_blob(l);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

WeightBundle read_pwb(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  std::istringstream first(line);
  std::string magic;
  std::size_t count = 0;
  if (!(first >> magic >> count) || magic != "PWB1") throw IoError(path.string() + ": not a PWB1 file");

  std::map<std::string, std::string> meta;
  std::vector<LayerManifestEntry> entries;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      meta[key] = value;
    } else if (tag == "layer") {
      LayerManifestEntry e;
      int kh = 0, kw = 0;
      std::string crc;
      if (!(ls >> e.name >> e.in_channels >> e.out_channels >> kh >> kw >> e.offset >> crc))
        throw IoError(path.string() + ": malformed layer line '" + line + "'");
      if (kh != 3 || kw != 3) throw IoError(path.string() + ": layer " + e.name + " is not 3x3");
      e.crc32 = static_cast<std::uint32_t>(std::stoul(crc, nullptr, 16));
      entries.push_back(e);
    } else {
      throw IoError(path.string() + ": unexpected manifest line '" + line + "'");
    }
  }
  if (line != "end" || entries.size() != count) throw IoError(path.string() + ": truncated PWB1 manifest");

  const std::vector<unsigned char> payload{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<ConvLayer<float>> layers;
  for (const auto& e : entries) {
    ConvLayer<float> layer(e.name, e.in_channels, e.out_channels);
    const auto kbytes = static_cast<std::size_t>(layer.kernel.size()) * sizeof(float);
    const auto bbytes = static_cast<std::size_t>(layer.bias.size()) * sizeof(float);
    if (e.offset + kbytes + bbytes > payload.size()) throw IoError(path.string() + ": layer " + e.name + " truncated");
    const std::span<const unsigned char> blob(payload.data() + e.offset, kbytes + bbytes);
    if (crc32(blob) != e.crc32) throw IoError(path.string() + ": CRC32 mismatch in layer " + e.name);
    std::memcpy(layer.kernel.data(), blob.data(), kbytes);
    std::memcpy(layer.bias.data(), blob.data() + kbytes, bbytes);
    if (!layer.kernel.allFinite() || !layer.bias.allFinite())
      throw IoError(path.string() + ": non-finite weights in layer " + e.name);
    layers.push_back(std::move(layer));
  }
  return WeightBundle(std::move(layers), std::move(meta));
}

WeightBundle zero_vgg_prefix() {
  std::vector<ConvLayer<float>> layers;
  for (const auto& s : kVggPrefix) layers.emplace_back(s.name, s.in, s.out);
  return WeightBundle(std::move(layers), {{"tap", "relu2_2"}});
}

}  // namespace phaselab
