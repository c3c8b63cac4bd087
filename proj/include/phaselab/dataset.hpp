#pragma once

// Phase-object corpora: procedural textures or ingested grayscale images,
// split into train/val/test, and (f, g, f~) triplets cached as PLT1 files.

#include "phaselab/grid.hpp"
#include "phaselab/optics.hpp"

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

namespace phaselab {

struct SplitCounts {
  std::size_t train = 950;
  std::size_t val = 45;
  std::size_t test = 50;

  std::size_t total() const { return train + val + test; }
};

struct DatasetManifest {
  std::string source = "synthetic";  ///< "synthetic" or the ingested directory
  SplitCounts counts;
  Index grid = 64;
  double phase_max = std::numbers::pi;
  double photon_level = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One procedural texture: smoothed random blobs plus band-limited 1/f noise,
/// min/max mapped onto [0, phase_max].
RealGrid synth_object(Index n, double phase_max, std::uint64_t seed);

/// manifest.counts.total() textures, example i seeded from (manifest.seed, i).
std::vector<RealGrid> synth_dataset(const DatasetManifest& manifest);

/// 8-bit or 16-bit grayscale/RGB raster, values scaled to [0, 1].
struct Image {
  Index height = 0;
  Index width = 0;
  int channels = 1;
  std::vector<double> values;  ///< row-major, interleaved channels
};

/// PNG (libpng) or binary/ASCII PGM/PPM (P2, P3, P5, P6). Throws IoError.
Image read_image(const std::filesystem::path& path);

/// Luma (Rec. 601 weights) of an image; grayscale passes through.
RealGrid luma(const Image& img);

/// Centered square crop.
RealGrid center_crop(const RealGrid& x);

/// Box-filter (area) resampling of a square grid to n x n.
RealGrid area_resample(const RealGrid& x, Index n);

/// Files ordered by name, decoded, converted to phase on [0, phase_max] by
/// the linear map v -> phase_max * v. Unreadable files are skipped with a warning;
/// fewer than counts.total() usable images is an error. The first counts.total()
/// images are returned in file-name order; make_dataset shuffles them with
/// split_indices.
std::vector<RealGrid> ingest_directory(const std::filesystem::path& dir, const DatasetManifest& manifest);

/// Seeded permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train, val, test;
};

/// Consecutive blocks of a seeded permutation of [0, counts.total()).
Split split_indices(const SplitCounts& counts, std::uint64_t seed);

struct Triplet {
  RealGrid f;        ///< ground-truth phase
  RealGrid g;        ///< photon counts
  RealGrid fapprox;  ///< single-step approximant (not mean-removed)
};

/// forward_intensity -> measure -> gs_single_step per object; example i is
/// measured with seed derive_seed(spec.seed, first_index + i).
std::vector<Triplet> build_triplets(const std::vector<RealGrid>& objects, const OpticalConfig& cfg,
                                    const MeasurementSpec& spec, std::uint64_t first_index = 0);

struct DatasetSplits {
  DatasetManifest manifest;
  std::vector<Triplet> train, val, test;
};

/// Writes <root>/{train,val,test}/<idx>_{f,g,fapprox}.plt and <root>/manifest.json.
void save_dataset(const std::filesystem::path& root, const DatasetSplits& data);
DatasetSplits load_dataset(const std::filesystem::path& root);

/// Full pipeline for a manifest: objects (synthetic when `images` is empty),
/// seeded split, triplets at manifest.photon_level.
DatasetSplits make_dataset(const DatasetManifest& manifest, const OpticalConfig& cfg, double read_sigma,
                           std::vector<RealGrid> images = {});

}  // namespace phaselab
