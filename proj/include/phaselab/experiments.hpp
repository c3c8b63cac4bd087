#pragma once
// Canned recipes shared by the command-line tool and the acceptance checks:
// dataset resolution from a config, the photon-level sweep, and peak finding
// on scan curves.
#include "phaselab/config.hpp"
#include "phaselab/phenn.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace phaselab {

/// Loads the bundle named by the config, or the bundled VGG16 prefix when empty.
WeightBundle load_weights(const ExperimentConfig& cfg, const std::filesystem::path& bundled);

/// Saved dataset when `dataset_dir` is set, otherwise built from the manifest
/// (ingesting `images` when set) at the configured photon level.
DatasetSplits resolve_dataset(const ExperimentConfig& cfg);

/// Ground-truth objects of the test split, at most `limit` of them. Skips the
/// measurement step, so scans do not pay for triplets they never read.
std::vector<RealGrid> test_objects(const ExperimentConfig& cfg, std::size_t limit);

struct PhotonLevelResult {
  double photon_level = 0.0;
  double pcc_approximant = 0.0;      ///< mean test PCC(f~, f)
  double pcc_reconstruction = 0.0;   ///< mean test PCC(f^, f)
  double loss_approximant = 0.0;     ///< mean test perceptual loss of f~
  double loss_reconstruction = 0.0;  ///< mean test perceptual loss of f^
  int best_epoch = 0;
  std::vector<EpochRecord> history;
  Phenn<float> net;
  Triplet sample;  ///< first test example
  RealGrid sample_reconstruction;
};

/// Trains and scores one network per photon level on the same objects.
std::vector<PhotonLevelResult> photon_sweep(const ExperimentConfig& cfg, const WeightBundle& vgg,
                                            const std::function<void(const PhotonLevelResult&)>& on_level = {});

/// Desk-scale sweep: 32x32 objects at z = 5 mm (keeps the chirp sampled),
/// 64/16/32 split, 20 epochs of a width-8 net.
nlohmann::json photon_sweep_recipe();

/// Loss scans for the 64x64 characteristic-frequency figure: 50 test objects.
nlohmann::json fig5_recipe();

/// Diagonal suppression scan on 50 test objects with a fixed step of 3 and
/// at most 20 descent iterations per frequency.
nlohmann::json fig7_recipe();

/// Strict local maximum of `curve` whose abscissa lies within `tolerance` of
/// `target`; the largest such maximum when several qualify.
std::optional<std::size_t> local_maximum_near(std::span<const double> x, std::span<const double> curve, double target,
                                              double tolerance);

}  // namespace phaselab
