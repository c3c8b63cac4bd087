#pragma once

// Single-frequency Hermitian noise, loss scans along a direction of the
// Fourier plane, and a robust spike detector for the derivative curves.

#include "phaselab/diffnet.hpp"
#include "phaselab/grid.hpp"
#include "phaselab/weights.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace phaselab {

/// xi = A * F^-1{ e^{ia} d(nu - nu0) + e^{-ia} d(nu + nu0)
///               + e^{ib} d(nu_x + nu_x0, nu_y - nu_y0) + e^{-ib} d(nu_x - nu_x0, nu_y + nu_y0) }
struct NoiseSpec {
  double amplitude = 0.1;
  FreqCoord freq;
  double phase_a = 0.0;
  double phase_b = 0.0;
};

/// How a scan's noise amplitude is interpreted. Unitary: A is the magnitude of
/// each spectral impulse under the unitary FFT. Pixel: A is the amplitude of each
/// complex exponential in the image domain, i.e. A * sqrt(rows * cols) per impulse.
enum class AmplitudeConvention { Unitary, Pixel };

std::string to_string(AmplitudeConvention c);
AmplitudeConvention parse_amplitude_convention(const std::string& s);

/// Impulse magnitude (unitary convention) for amplitude A on a rows x cols grid.
double impulse_amplitude(double amplitude, AmplitudeConvention c, Index rows, Index cols);

/// How the random phases (a, b) are drawn during a scan.
enum class PhaseMode {
  PerExample,    ///< one (a, b) per example, reused at every frequency
  PerFrequency,  ///< fresh (a, b) for every (example, frequency) cell
};

std::string to_string(PhaseMode m);
PhaseMode parse_phase_mode(const std::string& s);

/// Phases uniform on [-pi, pi] from the counter stream keyed by `seed`.
NoiseSpec draw_noise(double amplitude, FreqCoord freq, std::uint64_t seed, std::size_t example,
                     std::size_t freq_index, PhaseMode mode);

/// One spectral impulse of the noise; coincident impulses are merged.
struct Impulse {
  Index row = 0;  ///< ky bin
  Index col = 0;  ///< kx bin
  std::complex<double> value;
};

/// Distinct bins and merged amplitudes (already scaled by A) on a rows x cols grid.
std::vector<Impulse> noise_impulses(const NoiseSpec& spec, Index rows, Index cols);

/// Real-valued noise grid; throws if the frequency is not grid-representable.
RealGrid make_noise(const NoiseSpec& spec, Index rows, Index cols);
inline RealGrid make_noise(const NoiseSpec& spec, Index n) { return make_noise(spec, n, n); }

/// f + make_noise(spec).
RealGrid inject(const RealGrid& f, const NoiseSpec& spec);

/// nu in {k/N : k = 1..N/2}.
std::vector<double> default_scan_grid(Index n);

struct ScanConfig {
  Direction direction = Direction::Horizontal;
  std::vector<double> nus;  ///< strictly increasing, within [0, 0.5]; empty means default_scan_grid
  double amplitude = 0.1;
  AmplitudeConvention convention = AmplitudeConvention::Pixel;
  std::uint64_t seed = 0;
  PhaseMode phase_mode = PhaseMode::PerExample;
  NormalizationMode normalization = NormalizationMode::Independent;
};

struct ScanRecord {
  Direction direction = Direction::Horizontal;
  std::vector<double> nu;
  Eigen::MatrixXd losses;          ///< examples x frequencies
  std::vector<double> loss_mean;   ///< mean over examples
  std::vector<double> loss_std;    ///< population standard deviation over examples
  std::vector<double> dloss_abs_mean;  ///< mean over examples of |dL_i/dnu|

  /// Recomputes the summary rows from `losses` and `nu`.
  void summarize();
};

/// L_i(nu) = perceptual_loss(f_i, f_i + xi(A, nu)) for every example and frequency.
ScanRecord scan_losses(std::span<const RealGrid> testset, const WeightBundle& bundle, const ScanConfig& cfg);

void write_scan_csv(const std::filesystem::path& path, std::span<const ScanRecord> records);
void write_scan_long_csv(const std::filesystem::path& path, std::span<const ScanRecord> records);

/// Indices i where values[i] > median + k * MAD of the window [i - w, i + w].
std::vector<std::size_t> robust_spikes(std::span<const double> values, std::size_t half_window, double k);

/// Frequencies where the mean |dL/dnu| curve spikes.
std::vector<FreqCoord> detect_nonsmooth(const ScanRecord& rec, std::size_t half_window = 4, double k = 3.0);

/// Indices of strict local maxima (both neighbours lower) of a curve.
std::vector<std::size_t> local_maxima(std::span<const double> values);

}  // namespace phaselab
