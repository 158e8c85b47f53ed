#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cadd/datagen/taxonomy.hpp"
#include "cadd/datagen/wav.hpp"

namespace cadd::datagen {

/// Utterance-level prosody a rendering aims for.
struct ProsodyTargets {
  double pitch_mean_hz;
  double pitch_range;  // relative excursion of accents around the mean
  double energy_rms;   // RMS of voiced nuclei
  double rate;         // syllable-rate multiplier
  double breathiness;  // aspiration noise share of the voiced source
};

/// Positive valence raises pitch mean by 15%, widens range, raises energy and
/// speeds up; negative mirrors it. The tag adds a small within-valence offset
/// and the voice sets register.
ProsodyTargets prosody_for(const VoiceProfile& voice, const EmotionTag& tag);

/// Lowercased word tokens (letters, digits, apostrophes).
std::vector<std::string> split_words(std::string_view text);

/// Parametric source-filter rendering of `text`: one glottal-pulse syllable per
/// vowel group through voice-scaled formant resonators, with optional noise
/// onsets. Deterministic in every argument.
Waveform render_waveform(std::string_view text, const VoiceProfile& voice, const EmotionTag& tag,
                         std::uint64_t seed);

}  // namespace cadd::datagen
