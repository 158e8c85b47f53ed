#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cadd/datagen/wav.hpp"
#include "cadd/model/dacm.hpp"

namespace cadd::service {

inline constexpr double kDefaultPromptThreshold = 0.05;
inline constexpr double kMinEntrySeconds = 0.5;
inline constexpr double kMaxEntrySeconds = 120.0;

enum class PromptKey { None, Masking, Coping };

std::string_view to_string(PromptKey k);
PromptKey parse_prompt_key(std::string_view s);

/// Prompts fire only for a dissonant prediction with S strictly above the
/// threshold. A Congruent prediction never prompts.
struct PromptPolicy {
  double threshold = kDefaultPromptThreshold;
  std::string masking_prompt =
      "Your words and your voice seemed to point in different directions. "
      "Is there something underneath \"fine\" that you want to note?";
  std::string coping_prompt =
      "You sounded steadier than your words. What helped you hold it together today?";

  PromptKey decide(std::size_t predicted_class, double mismatch) const;
  const std::string* text_for(PromptKey key) const;
};

struct Analysis {
  std::array<double, model::kClassCount> class_probs{};
  std::size_t predicted_class = model::kCongruentLabel;
  double mismatch_S = 0.0;
  PromptKey prompt_key = PromptKey::None;
};

/// Immutable checkpoint plus its frozen encoders; safe for concurrent use.
class Analyzer {
 public:
  Analyzer(model::Dacm model, PromptPolicy policy = {});

  /// Deterministic (no dropout). Throws ValidationError for empty text or
  /// audio outside 0.5-120 s.
  Analysis analyze(std::string_view text, const datagen::Waveform& wave) const;
  /// Decodes PCM16 WAV bytes first; malformed audio throws ValidationError.
  Analysis analyze_wav(std::string_view text, std::span<const std::uint8_t> wav_bytes) const;

  const model::Dacm& model() const { return model_; }
  const PromptPolicy& policy() const { return policy_; }

 private:
  model::Dacm model_;
  model::Featurizer featurizer_;
  PromptPolicy policy_;
};

struct JournalEntry {
  std::uint64_t entry_id = 0;
  std::string created_at;  // UTC, ISO 8601 with microseconds
  std::string text;
  std::string audio_ref;  // relative to the store root
  Analysis analysis;
};

std::string to_json(const JournalEntry& e);
JournalEntry entry_from_json(const std::string& line);

/// Append-only journal: one line-delimited record file plus an audio
/// directory. Audio is written before its record, so every listed entry has
/// its audio. Appends are serialised by one writer lock; ids are monotonic.
class JournalStore {
 public:
  explicit JournalStore(std::filesystem::path root);

  JournalEntry create(std::string_view text, std::span<const std::uint8_t> wav_bytes,
                      const Analysis& analysis);
  /// Newest first: descending created_at, ties by descending entry_id.
  std::vector<JournalEntry> list(std::size_t limit) const;
  std::optional<JournalEntry> get(std::uint64_t id) const;
  std::filesystem::path audio_path(const JournalEntry& e) const { return root_ / e.audio_ref; }
  std::size_t size() const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::vector<JournalEntry> entries_;  // in append order
  std::uint64_t next_id_ = 1;
  std::string last_created_at_;
};

/// Current UTC time formatted as YYYY-MM-DDTHH:MM:SS.ffffffZ.
std::string utc_timestamp();

}  // namespace cadd::service
