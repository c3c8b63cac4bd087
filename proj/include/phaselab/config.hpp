#pragma once
// Experiment configuration: a versioned JSON document whose default instance
// doubles as its schema. User files and `--set a.b=value` overrides may only
// touch keys the defaults define, with matching JSON types.
#include "phaselab/dataset.hpp"
#include "phaselab/optics.hpp"
#include "phaselab/phenn.hpp"
#include "phaselab/probe.hpp"
#include "phaselab/spectral.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace phaselab {

inline constexpr const char* config_schema = "phaselab-config/1";

struct MapConfig {
  int iterations = 200;
  double step = 0.1;  ///< largest per-pixel move of the first trial
  double tolerance = 1e-6;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output = "runs/phaselab";
  std::filesystem::path weights;      ///< empty: the bundled VGG16 prefix
  std::filesystem::path dataset_dir;  ///< load a saved dataset instead of generating one
  std::filesystem::path images;       ///< ingest these images instead of synthesizing
  OpticalConfig optics;
  MeasurementSpec measurement;  ///< seed is derived from `seed`
  DatasetManifest manifest;     ///< grid, photon level and seed mirror the other sections
  int approximant_iterations = 1;
  TrainConfig training;
  std::vector<Direction> scan_directions{Direction::Horizontal, Direction::Vertical, Direction::Diagonal};
  ScanConfig scan;
  std::size_t scan_examples = 50;
  SuppressionConfig probe;
  std::size_t probe_examples = 50;
  double probe_nu = 0.25;  ///< single-frequency `minimize` runs
  MapConfig map;
  PsdAveraging psd_averaging = PsdAveraging::Power;
  int calibration_degree = 3;
  std::vector<double> photon_levels{1, 10, 100, 1000};
};

/// Complete default document, including the schema tag.
nlohmann::json default_config_json();

/// Recursively overlays `user` onto `base` (a complete document). Unknown keys,
/// type mismatches and a wrong schema tag throw ConfigError.
nlohmann::json merge_config(const nlohmann::json& user, nlohmann::json base = default_config_json());

/// Applies `dotted.path=value`; the value is parsed as JSON when possible and
/// taken as a string otherwise. The path must name an existing leaf.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Typed view of a merged document; every section is validated.
ExperimentConfig parse_config(const nlohmann::json& merged);

/// FNV-1a 64 over the compact dump of the document, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

/// Parses a JSON file without merging; IoError when unreadable, ConfigError
/// when not JSON.
nlohmann::json read_config_file(const std::filesystem::path& path);

}  // namespace phaselab
