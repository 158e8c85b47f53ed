#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cadd::datagen {

inline constexpr int kSampleRate = 16000;

/// Mono signal in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

/// Canonical 44-byte-header RIFF/WAVE, PCM16, mono. Samples are clamped to
/// [-1, 1] and quantised as round(x * 32767).
std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& wave);

/// Accepts PCM16 mono 16 kHz only; unknown chunks are skipped. Throws
/// ValidationError on anything else.
Waveform decode_wav_pcm16(std::span<const std::uint8_t> bytes);

void write_wav(const std::filesystem::path& path, const Waveform& wave);
Waveform read_wav(const std::filesystem::path& path);

/// Value after a PCM16 round trip; lets callers work with exactly what a file holds.
double quantize_pcm16(double x);

}  // namespace cadd::datagen
