#include "cadd/encoders/prosody.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace cadd::encoders {

namespace {

constexpr std::size_t kFftSize = 1024;
constexpr double kSilenceEnergy = 1e-5;
constexpr double kVoicingThreshold = 0.5;
constexpr double kOctaveTolerance = 0.85;

// FFTW planning is not thread-safe; execution with the new-array API is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class FrameAnalyzer {
 public:
  FrameAnalyzer() {
    real_ = fftw_alloc_real(kFftSize);
    spectrum_ = fftw_alloc_complex(kFftSize / 2 + 1);
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(kFftSize), real_, spectrum_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(kFftSize), spectrum_, real_, FFTW_ESTIMATE);
  }
  ~FrameAnalyzer() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spectrum_);
  }
  FrameAnalyzer(const FrameAnalyzer&) = delete;
  FrameAnalyzer& operator=(const FrameAnalyzer&) = delete;

  ProsodyFrame analyze(const double* x) {
    ProsodyFrame f{};
    double energy = 0.0;
    std::size_t crossings = 0;
    for (std::size_t i = 0; i < kFrameLength; ++i) {
      energy += x[i] * x[i];
      if (i > 0 && ((x[i] >= 0.0) != (x[i - 1] >= 0.0))) ++crossings;
    }
    energy /= static_cast<double>(kFrameLength);
    f.log_energy = std::log(energy + 1e-10);
    f.zero_crossing_rate = static_cast<double>(crossings) / static_cast<double>(kFrameLength - 1);

    for (std::size_t i = 0; i < kFftSize; ++i) real_[i] = i < kFrameLength ? x[i] : 0.0;
    fftw_execute_dft_r2c(forward_, real_, spectrum_);

    double weighted = 0.0, total = 0.0;
    for (std::size_t k = 0; k <= kFftSize / 2; ++k) {
      const double power = spectrum_[k][0] * spectrum_[k][0] + spectrum_[k][1] * spectrum_[k][1];
      const double hz = static_cast<double>(k) * datagen::kSampleRate / static_cast<double>(kFftSize);
      weighted += hz * power;
      total += power;
      spectrum_[k][0] = power;  // |X|^2 -> autocorrelation via inverse transform
      spectrum_[k][1] = 0.0;
    }
    f.spectral_centroid_hz = total > 0.0 ? weighted / total : 0.0;

    f.pitch_hz = 0.0;
    if (energy < kSilenceEnergy) return f;
    fftw_execute_dft_c2r(inverse_, spectrum_, real_);
    const double r0 = real_[0];
    if (r0 <= 0.0) return f;
    const auto min_lag = static_cast<std::size_t>(std::floor(datagen::kSampleRate / kMaxPitchHz));
    const auto max_lag = static_cast<std::size_t>(std::ceil(datagen::kSampleRate / kMinPitchHz));
    // Unbiased estimate: undo the (N - lag) / N taper of a finite frame.
    for (std::size_t lag = 1; lag <= max_lag + 1; ++lag)
      real_[lag] *= static_cast<double>(kFrameLength) / static_cast<double>(kFrameLength - lag);
    double peak = -1.0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) peak = std::max(peak, real_[lag]);
    // Shortest-lag local maximum near the global peak; avoids subharmonic picks.
    std::size_t best = 0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      const bool local = real_[lag] >= real_[lag - 1] && real_[lag] >= real_[lag + 1];
      if (local && real_[lag] >= kOctaveTolerance * peak) {
        best = lag;
        break;
      }
    }
    const double best_val = real_[best];
    if (best_val / r0 < kVoicingThreshold) return f;
    double lag = static_cast<double>(best);
    if (best > min_lag && best < max_lag) {
      const double a = real_[best - 1], b = real_[best], c = real_[best + 1];
      const double denom = a - 2.0 * b + c;
      if (denom < 0.0) lag += 0.5 * (a - c) / denom;
    }
    const double hz = datagen::kSampleRate / lag;
    f.pitch_hz = hz >= kMinPitchHz && hz <= kMaxPitchHz ? hz : 0.0;
    return f;
  }

 private:
  double* real_;
  fftw_complex* spectrum_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

}  // namespace

std::size_t frame_count(std::size_t num_samples) {
  if (num_samples < kFrameLength) return 0;
  return (num_samples - kFrameLength) / kFrameHop + 1;
}

std::vector<ProsodyFrame> extract_prosody(const datagen::Waveform& wave) {
  thread_local FrameAnalyzer analyzer;
  const std::size_t n = frame_count(wave.samples.size());
  std::vector<ProsodyFrame> frames;
  frames.reserve(n);
  for (std::size_t t = 0; t < n; ++t) frames.push_back(analyzer.analyze(wave.samples.data() + t * kFrameHop));
  return frames;
}

ProsodySummary summarize(const std::vector<ProsodyFrame>& frames) {
  ProsodySummary s;
  if (frames.empty()) return s;
  double pitch = 0.0, energy = 0.0;
  std::size_t voiced = 0;
  for (const auto& f : frames) {
    energy += f.log_energy;
    if (f.pitch_hz > 0.0) {
      pitch += f.pitch_hz;
      ++voiced;
    }
  }
  s.mean_log_energy = energy / static_cast<double>(frames.size());
  s.mean_pitch_hz = voiced ? pitch / static_cast<double>(voiced) : 0.0;
  s.voiced_fraction = static_cast<double>(voiced) / static_cast<double>(frames.size());
  return s;
}

}  // namespace cadd::encoders
