#pragma once

#include <cstddef>
#include <vector>

#include "cadd/datagen/wav.hpp"

namespace cadd::encoders {

inline constexpr std::size_t kFrameLength = 400;  // 25 ms at 16 kHz
inline constexpr std::size_t kFrameHop = 160;     // 10 ms
inline constexpr double kMinPitchHz = 50.0;
inline constexpr double kMaxPitchHz = 500.0;

struct ProsodyFrame {
  double log_energy;
  double pitch_hz;  // 0 when unvoiced
  double zero_crossing_rate;
  double spectral_centroid_hz;
};

/// floor((num_samples - window) / hop) + 1, or 0 for signals shorter than a window.
std::size_t frame_count(std::size_t num_samples);

/// Frame-level energy, autocorrelation pitch, ZCR and spectral centroid.
std::vector<ProsodyFrame> extract_prosody(const datagen::Waveform& wave);

/// Mean pitch over voiced frames (0 if none) and mean log energy over all frames.
struct ProsodySummary {
  double mean_pitch_hz = 0.0;
  double mean_log_energy = 0.0;
  double voiced_fraction = 0.0;
};
ProsodySummary summarize(const std::vector<ProsodyFrame>& frames);

}  // namespace cadd::encoders
