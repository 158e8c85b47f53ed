#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace cadd::datagen {

enum class Valence { Positive, Negative };

/// Directional three-way dissonance label.
enum class CaddClass : int { Masking = 0, Coping = 1, Congruent = 2 };

inline constexpr std::size_t kNumClasses = 3;

std::string_view to_string(Valence v);
std::string_view to_string(CaddClass c);
Valence parse_valence(std::string_view s);

/// Masking: positive text over negative acoustics. Coping: the reverse.
/// Anything aligned is Congruent.
constexpr CaddClass derive_label(Valence text, Valence acoustic) {
  if (text == Valence::Positive && acoustic == Valence::Negative) return CaddClass::Masking;
  if (text == Valence::Negative && acoustic == Valence::Positive) return CaddClass::Coping;
  return CaddClass::Congruent;
}

struct EmotionTag {
  std::string_view name;
  Valence acoustic_valence;
};

/// sad, angry, annoyed, appalled (negative), then happy, excited, cheerful, calm.
std::span<const EmotionTag> emotion_tags();
const EmotionTag& emotion_tag(std::string_view name);

struct VoiceProfile {
  std::string_view name;
  double base_pitch_hz;
  double formant_scale;  // vocal-tract length proxy
  double spectral_tilt;  // glottal source low-pass coefficient
  std::uint64_t timbre_seed;
};

/// Jarnathan, Juniper, Eve.
std::span<const VoiceProfile> voices();
const VoiceProfile& voice(std::string_view name);

struct SentenceRecord {
  int sentence_id;
  std::string_view text;
  Valence text_valence;
};

/// 100 journal-style statements: ids 0-49 positive, 50-99 negative.
std::span<const SentenceRecord> sentence_pool();

}  // namespace cadd::datagen
