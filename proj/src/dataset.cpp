#include "phaselab/dataset.hpp"

#include "phaselab/approximant.hpp"
#include "phaselab/error.hpp"
#include "phaselab/parallel.hpp"
#include "phaselab/plt.hpp"
#include "phaselab/rng.hpp"

#include <png.h>

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numbers>

namespace phaselab {

void DatasetManifest::validate() const {
  if (counts.train == 0 || counts.val == 0 || counts.test == 0)
    throw ConfigError("dataset split counts must all be positive");
  if (!is_power_of_two(grid) || grid < 4) throw ConfigError("dataset grid must be a power of two >= 4");
  if (!(phase_max > 0.0)) throw ConfigError("dataset phase_max must be positive");
  if (!(photon_level >= 0.0)) throw ConfigError("dataset photon_level must be non-negative");
}

RealGrid synth_object(Index n, double phase_max, std::uint64_t seed) {
  StreamRng rng(seed);
  const double dn = static_cast<double>(n);

  // Smooth blobs: a dozen Gaussians with random centres, widths and signs.
  RealGrid blobs = RealGrid::Zero(n, n);
  for (int b = 0; b < 12; ++b) {
    const double cy = rng.uniform(0.0, dn), cx = rng.uniform(0.0, dn);
    const double sigma = rng.uniform(dn / 20.0, dn / 5.0);
    const double w = rng.uniform(-1.0, 1.0);
    for (Index y = 0; y < n; ++y)
      for (Index x = 0; x < n; ++x) {
        const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        blobs(y, x) += w * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
  }

  // Band-limited noise with a 1/|nu| amplitude spectrum (1/f^2 power) inside |nu| <= 1/2.
  ComplexGrid spectrum = ComplexGrid::Zero(n, n);
  for (Index ky = 0; ky < n; ++ky)
    for (Index kx = 0; kx < n; ++kx) {
      const double r = std::hypot(bin_frequency(kx, n), bin_frequency(ky, n));
      const double phase = rng.uniform(-std::numbers::pi, std::numbers::pi);
      if (r == 0.0 || r > 0.5) continue;
      spectrum(ky, kx) = std::polar(1.0 / r, phase);
    }
  RealGrid noise = ifft2(spectrum).real();

  const auto unit = [](RealGrid g) {
    g.array() -= g.mean();
    const double s = std::sqrt(g.squaredNorm() / static_cast<double>(g.size()));
    return s > 0.0 ? RealGrid(g / s) : g;
  };
  RealGrid tex = unit(blobs) + unit(noise);
  const double lo = tex.minCoeff(), hi = tex.maxCoeff();
  return ((tex.array() - lo) * (phase_max / (hi - lo))).matrix();
}

std::vector<RealGrid> synth_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  std::vector<RealGrid> out(manifest.counts.total());
  const std::uint64_t base = derive_seed(manifest.seed, "dataset");
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = synth_object(manifest.grid, manifest.phase_max, derive_seed(base, static_cast<std::uint64_t>(i)));
  });
  return out;
}

namespace {

Image read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) throw IoError(path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(path.string() + ": " + image.message);
  }
  Image img{static_cast<Index>(image.height), static_cast<Index>(image.width), 3, {}};
  img.values.reserve(buffer.size());
  for (png_byte b : buffer) img.values.push_back(b / 255.0);
  return img;
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        t += c;
        break;
      }
    }
    while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) t += c;
    return t;
  };
  const std::string magic = token();
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
    throw IoError(path.string() + ": not a PGM/PPM file");
  Image img;
  try {
    img.width = std::stol(token());
    img.height = std::stol(token());
    const long maxval = std::stol(token());
    if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535) throw std::invalid_argument("range");
    img.channels = (magic == "P3" || magic == "P6") ? 3 : 1;
    const auto count = static_cast<std::size_t>(img.width * img.height * img.channels);
    img.values.resize(count);
    if (magic == "P2" || magic == "P3") {
      for (auto& v : img.values) v = static_cast<double>(std::stol(token())) / static_cast<double>(maxval);
    } else {
      const int bytes = maxval > 255 ? 2 : 1;
      std::vector<unsigned char> raw(count * static_cast<std::size_t>(bytes));
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw IoError(path.string() + ": truncated raster");
      for (std::size_t i = 0; i < count; ++i) {
        const unsigned v = bytes == 2 ? (raw[2 * i] << 8u) | raw[2 * i + 1] : raw[i];
        img.values[i] = static_cast<double>(v) / static_cast<double>(maxval);
      }
    }
  } catch (const std::logic_error&) {
    throw IoError(path.string() + ": malformed PGM/PPM header or raster");
  }
  return img;
}

std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  throw IoError(path.string() + ": unsupported image type (png, pgm, ppm)");
}

RealGrid luma(const Image& img) {
  RealGrid out(img.height, img.width);
  for (Index i = 0; i < out.size(); ++i) {
    const auto base = static_cast<std::size_t>(i * img.channels);
    out.data()[i] = img.channels == 1 ? img.values[base]
                                      : 0.299 * img.values[base] + 0.587 * img.values[base + 1] +
                                            0.114 * img.values[base + 2];
  }
  return out;
}

RealGrid center_crop(const RealGrid& x) {
  const Index s = std::min(x.rows(), x.cols());
  return x.block((x.rows() - s) / 2, (x.cols() - s) / 2, s, s);
}

RealGrid area_resample(const RealGrid& x, Index n) {
  if (x.rows() != x.cols()) throw std::invalid_argument("area_resample expects a square grid");
  const Index m = x.rows();
  // W(j, i) = overlap of source pixel [i, i+1) with output cell [j m/n, (j+1) m/n), normalised.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, m);
  const double scale = static_cast<double>(m) / static_cast<double>(n);
  for (Index j = 0; j < n; ++j) {
    const double a = static_cast<double>(j) * scale, b = static_cast<double>(j + 1) * scale;
    for (Index i = static_cast<Index>(std::floor(a)); i < std::min<Index>(m, static_cast<Index>(std::ceil(b))); ++i) {
      const double overlap = std::min(b, static_cast<double>(i + 1)) - std::max(a, static_cast<double>(i));
      if (overlap > 0.0) w(j, i) = overlap / scale;
    }
  }
  return w * x * w.transpose();
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  StreamRng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

std::vector<RealGrid> ingest_directory(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  manifest.validate();
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<RealGrid> objects;
  for (const auto& f : files) {
    try {
      const RealGrid g = area_resample(center_crop(luma(read_image(f))), manifest.grid);
      objects.push_back(g * manifest.phase_max);
    } catch (const IoError& e) {
      warn("skipping " + f.filename().string() + ": " + e.what());
    }
  }
  if (objects.size() < manifest.counts.total())
    throw IoError(dir.string() + ": " + std::to_string(objects.size()) + " usable images, manifest needs " +
                  std::to_string(manifest.counts.total()));
  objects.resize(manifest.counts.total());
  return objects;
}

Split split_indices(const SplitCounts& counts, std::uint64_t seed) {
  const auto perm = shuffled_indices(counts.total(), derive_seed(seed, "split"));
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(counts.train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(counts.train),
               perm.begin() + static_cast<std::ptrdiff_t>(counts.train + counts.val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(counts.train + counts.val), perm.end());
  return s;
}

std::vector<Triplet> build_triplets(const std::vector<RealGrid>& objects, const OpticalConfig& cfg,
                                    const MeasurementSpec& spec, std::uint64_t first_index) {
  std::vector<Triplet> out(objects.size());
  const ComplexGrid inc = plane_wave(cfg.grid);
  parallel_for(objects.size(), [&](std::size_t i) {
    MeasurementSpec s = spec;
    s.seed = derive_seed(spec.seed, first_index + i);
    out[i].f = objects[i];
    out[i].g = measure(forward_intensity(objects[i], inc, cfg), s);
    out[i].fapprox = gs_single_step(out[i].g, inc, cfg);
  });
  return out;
}

namespace {

const char* kSplitNames[] = {"train", "val", "test"};

template <typename Splits>
auto& split_ref(Splits& d, int s) {
  return s == 0 ? d.train : s == 1 ? d.val : d.test;
}

std::string index_name(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
}

}  // namespace

void save_dataset(const std::filesystem::path& root, const DatasetSplits& data) {
  for (int s = 0; s < 3; ++s) {
    const auto dir = root / kSplitNames[s];
    std::filesystem::create_directories(dir);
    const auto& items = split_ref(data, s);
    for (std::size_t i = 0; i < items.size(); ++i) {
      write_grid(dir / (index_name(i) + "_f.plt"), items[i].f);
      write_grid(dir / (index_name(i) + "_g.plt"), items[i].g);
      write_grid(dir / (index_name(i) + "_fapprox.plt"), items[i].fapprox);
    }
  }
  const auto& m = data.manifest;
  nlohmann::ordered_json j;
  j["format"] = "phaselab-dataset/1";
  j["source"] = m.source;
  j["counts"] = {{"train", data.train.size()}, {"val", data.val.size()}, {"test", data.test.size()}};
  j["grid"] = m.grid;
  j["phase_max"] = m.phase_max;
  j["photon_level"] = m.photon_level;
  j["seed"] = m.seed;
  std::ofstream out(root / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (root / "manifest.json").string());
  out << j.dump(2) << '\n';
}

DatasetSplits load_dataset(const std::filesystem::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in) throw IoError("no manifest.json under " + root.string());
  DatasetSplits d;
  try {
    const auto j = nlohmann::json::parse(in);
    d.manifest.source = j.at("source").get<std::string>();
    d.manifest.counts = {j.at("counts").at("train").get<std::size_t>(), j.at("counts").at("val").get<std::size_t>(),
                         j.at("counts").at("test").get<std::size_t>()};
    d.manifest.grid = j.at("grid").get<Index>();
    d.manifest.phase_max = j.at("phase_max").get<double>();
    d.manifest.photon_level = j.at("photon_level").get<double>();
    d.manifest.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError((root / "manifest.json").string() + ": " + e.what());
  }
  const std::size_t counts[3] = {d.manifest.counts.train, d.manifest.counts.val, d.manifest.counts.test};
  for (int s = 0; s < 3; ++s) {
    auto& items = split_ref(d, s);
    items.resize(counts[s]);
    for (std::size_t i = 0; i < counts[s]; ++i) {
      const auto base = root / kSplitNames[s] / index_name(i);
      items[i].f = read_real_grid(base.string() + "_f.plt");
      items[i].g = read_real_grid(base.string() + "_g.plt");
      items[i].fapprox = read_real_grid(base.string() + "_fapprox.plt");
    }
  }
  return d;
}

DatasetSplits make_dataset(const DatasetManifest& manifest, const OpticalConfig& cfg, double read_sigma,
                           std::vector<RealGrid> images) {
  manifest.validate();
  if (cfg.grid != manifest.grid) throw ConfigError("optics grid and dataset grid differ");
  std::vector<RealGrid> objects = images.empty() ? synth_dataset(manifest) : std::move(images);
  if (objects.size() < manifest.counts.total()) throw ConfigError("not enough objects for the requested split");
  objects.resize(manifest.counts.total());

  const MeasurementSpec spec{manifest.photon_level, read_sigma, derive_seed(manifest.seed, "measure"), false};
  const auto all = build_triplets(objects, cfg, spec);
  const Split split = split_indices(manifest.counts, manifest.seed);
  DatasetSplits d;
  d.manifest = manifest;
  for (auto i : split.train) d.train.push_back(all[i]);
  for (auto i : split.val) d.val.push_back(all[i]);
  for (auto i : split.test) d.test.push_back(all[i]);
  return d;
}

}  // namespace phaselab
