#include "phaselab/spectral.hpp"

#include "phaselab/csv.hpp"
#include "phaselab/parallel.hpp"
#include "phaselab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace phaselab {

std::string to_string(PhaseMode m) { return m == PhaseMode::PerExample ? "per_example" : "per_frequency"; }

PhaseMode parse_phase_mode(const std::string& s) {
  if (s == "per_example") return PhaseMode::PerExample;
  if (s == "per_frequency") return PhaseMode::PerFrequency;
  throw std::invalid_argument("unknown phase mode '" + s + "' (per_example|per_frequency)");
}

std::string to_string(AmplitudeConvention c) { return c == AmplitudeConvention::Unitary ? "unitary" : "pixel"; }

AmplitudeConvention parse_amplitude_convention(const std::string& s) {
  if (s == "unitary") return AmplitudeConvention::Unitary;
  if (s == "pixel") return AmplitudeConvention::Pixel;
  throw std::invalid_argument("unknown amplitude convention '" + s + "' (unitary|pixel)");
}

double impulse_amplitude(double amplitude, AmplitudeConvention c, Index rows, Index cols) {
  return c == AmplitudeConvention::Unitary ? amplitude : amplitude * std::sqrt(static_cast<double>(rows * cols));
}

NoiseSpec draw_noise(double amplitude, FreqCoord freq, std::uint64_t seed, std::size_t example,
                     std::size_t freq_index, PhaseMode mode) {
  const CounterRng rng(derive_seed(seed, mode == PhaseMode::PerExample ? "noise/example" : "noise/cell"));
  const std::uint64_t counter =
      mode == PhaseMode::PerExample ? example : (static_cast<std::uint64_t>(example) << 20) + freq_index;
  const double pi = std::numbers::pi;
  return {amplitude, freq, rng.uniform(counter, 0, -pi, pi), rng.uniform(counter, 1, -pi, pi)};
}

std::vector<Impulse> noise_impulses(const NoiseSpec& spec, Index rows, Index cols) {
  if (!(spec.amplitude >= 0.0)) throw std::invalid_argument("noise amplitude must be non-negative");
  const Index kx = frequency_bin(spec.freq.nu_x, cols);
  const Index ky = frequency_bin(spec.freq.nu_y, rows);
  const auto neg = [](Index k, Index n) { return (n - k) % n; };
  const std::complex<double> ea = std::polar(spec.amplitude, spec.phase_a);
  const std::complex<double> eb = std::polar(spec.amplitude, spec.phase_b);
  const Impulse raw[4] = {{ky, kx, ea},
                          {neg(ky, rows), neg(kx, cols), std::conj(ea)},
                          {ky, neg(kx, cols), eb},
                          {neg(ky, rows), kx, std::conj(eb)}};
  std::vector<Impulse> merged;
  for (const auto& imp : raw) {
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const Impulse& m) { return m.row == imp.row && m.col == imp.col; });
    if (it == merged.end())
      merged.push_back(imp);
    else
      it->value += imp.value;
  }
  return merged;
}

RealGrid make_noise(const NoiseSpec& spec, Index rows, Index cols) {
  ComplexGrid spectrum = ComplexGrid::Zero(rows, cols);
  for (const auto& imp : noise_impulses(spec, rows, cols)) spectrum(imp.row, imp.col) = imp.value;
  return ifft2(spectrum).real();
}

RealGrid inject(const RealGrid& f, const NoiseSpec& spec) { return f + make_noise(spec, f.rows(), f.cols()); }

std::vector<double> default_scan_grid(Index n) {
  std::vector<double> nus;
  for (Index k = 1; k <= n / 2; ++k) nus.push_back(static_cast<double>(k) / static_cast<double>(n));
  return nus;
}

void ScanRecord::summarize() {
  const auto n_ex = losses.rows();
  const auto n_nu = losses.cols();
  loss_mean.assign(static_cast<std::size_t>(n_nu), 0.0);
  loss_std.assign(static_cast<std::size_t>(n_nu), 0.0);
  dloss_abs_mean.assign(static_cast<std::size_t>(n_nu), 0.0);
  if (n_ex == 0 || n_nu == 0) return;
  for (Index k = 0; k < n_nu; ++k) {
    const auto col = losses.col(k);
    const double mean = col.mean();
    loss_mean[static_cast<std::size_t>(k)] = mean;
    loss_std[static_cast<std::size_t>(k)] = std::sqrt((col.array() - mean).square().mean());
    if (n_nu < 2) continue;
    // Central differences inside, one-sided at the ends.
    const Index lo = std::max<Index>(k - 1, 0), hi = std::min<Index>(k + 1, n_nu - 1);
    const double dnu = nu[static_cast<std::size_t>(hi)] - nu[static_cast<std::size_t>(lo)];
    dloss_abs_mean[static_cast<std::size_t>(k)] = ((losses.col(hi) - losses.col(lo)) / dnu).cwiseAbs().mean();
  }
}

ScanRecord scan_losses(std::span<const RealGrid> testset, const WeightBundle& bundle, const ScanConfig& cfg) {
  if (testset.empty()) throw std::invalid_argument("scan_losses: empty test set");
  const Index n = testset.front().rows();
  ScanRecord rec;
  rec.direction = cfg.direction;
  rec.nu = cfg.nus.empty() ? default_scan_grid(n) : cfg.nus;
  for (std::size_t k = 0; k < rec.nu.size(); ++k) {
    if (rec.nu[k] < 0.0 || rec.nu[k] > 0.5) throw std::invalid_argument("scan frequencies must lie in [0, 0.5]");
    if (k > 0 && !(rec.nu[k] > rec.nu[k - 1])) throw std::invalid_argument("scan frequencies must increase");
  }
  const PerceptualLoss<float> loss(bundle, cfg.normalization);
  std::vector<PerceptualLoss<float>::Reference> refs(testset.size());
  parallel_for(testset.size(), [&](std::size_t i) { refs[i] = loss.reference(testset[i]); });

  const auto n_nu = rec.nu.size();
  const double amplitude = impulse_amplitude(cfg.amplitude, cfg.convention, n, testset.front().cols());
  rec.losses = Eigen::MatrixXd::Zero(static_cast<Index>(testset.size()), static_cast<Index>(n_nu));
  parallel_for(testset.size() * n_nu, [&](std::size_t cell) {
    const std::size_t i = cell / n_nu, k = cell % n_nu;
    const NoiseSpec spec = draw_noise(amplitude, along(cfg.direction, rec.nu[k]), cfg.seed, i, k, cfg.phase_mode);
    rec.losses(static_cast<Index>(i), static_cast<Index>(k)) = loss(refs[i], inject(testset[i], spec));
  });
  rec.summarize();
  return rec;
}

void write_scan_csv(const std::filesystem::path& path, std::span<const ScanRecord> records) {
  CsvWriter csv(path, {"direction", "nu", "loss_mean", "loss_std", "dloss_abs_mean"});
  for (const auto& r : records)
    for (std::size_t k = 0; k < r.nu.size(); ++k) {
      csv << to_string(r.direction) << r.nu[k] << r.loss_mean[k] << r.loss_std[k] << r.dloss_abs_mean[k];
      csv.end_row();
    }
}

void write_scan_long_csv(const std::filesystem::path& path, std::span<const ScanRecord> records) {
  CsvWriter csv(path, {"direction", "example", "nu", "loss"});
  for (const auto& r : records)
    for (Index i = 0; i < r.losses.rows(); ++i)
      for (std::size_t k = 0; k < r.nu.size(); ++k) {
        csv << to_string(r.direction) << static_cast<long long>(i) << r.nu[k] << r.losses(i, static_cast<Index>(k));
        csv.end_row();
      }
}

namespace {
double median_of(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}
}  // namespace

std::vector<std::size_t> robust_spikes(std::span<const double> values, std::size_t half_window, double k) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i >= half_window ? i - half_window : 0;
    const std::size_t hi = std::min(values.size(), i + half_window + 1);
    std::vector<double> window(values.begin() + static_cast<std::ptrdiff_t>(lo),
                               values.begin() + static_cast<std::ptrdiff_t>(hi));
    const double med = median_of(window);
    for (auto& w : window) w = std::abs(w - med);
    const double mad = median_of(window);
    if (values[i] > med + k * mad) out.push_back(i);
  }
  return out;
}

std::vector<FreqCoord> detect_nonsmooth(const ScanRecord& rec, std::size_t half_window, double k) {
  std::vector<FreqCoord> peaks;
  for (std::size_t i : robust_spikes(rec.dloss_abs_mean, half_window, k)) peaks.push_back(along(rec.direction, rec.nu[i]));
  return peaks;
}

std::vector<std::size_t> local_maxima(std::span<const double> values) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < values.size(); ++i)
    if (values[i] > values[i - 1] && values[i] > values[i + 1]) out.push_back(i);
  return out;
}

}  // namespace phaselab
