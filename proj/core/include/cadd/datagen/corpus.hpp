#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cadd/datagen/taxonomy.hpp"

namespace cadd::datagen {

enum class Split { Train, Val, Test, Unassigned };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ManifestRecord {
  std::string sample_id;  // zero-padded index, also the WAV file stem
  int sentence_id = 0;
  std::string voice;
  std::string emotion_tag;
  std::string text;
  Valence text_valence = Valence::Positive;
  Valence acoustic_valence = Valence::Positive;
  CaddClass label = CaddClass::Congruent;
  Split split = Split::Unassigned;
  std::string audio_path;  // relative to the manifest's directory
};

/// All 1800 records before splitting: Masking = 50 positive sentences x 3 voices
/// x 4 negative tags, Coping = the mirror image, Congruent = 100 sentences x
/// 3 voices x 2 of the 4 matching-valence tags drawn without replacement.
std::vector<ManifestRecord> build_manifest(std::uint64_t seed);

struct SplitRatios {
  double train = 0.70, val = 0.15, test = 0.15;
};

/// Per class, whole sentence_id groups are shuffled and dealt into train, then
/// val, then test. Train always receives whole groups (ConfigError otherwise).
/// When the val quota is not a multiple of the group size, one group is shared
/// between val and test, cut along (tag, voice) order.
void split_stratified(std::vector<ManifestRecord>& manifest, SplitRatios ratios, std::uint64_t seed);

/// Per-sample render seed, independent of rendering order.
std::uint64_t sample_seed(std::uint64_t corpus_seed, std::size_t index);

struct CorpusSummary {
  std::size_t total = 0;
  std::array<std::size_t, kNumClasses> per_class{};
  std::array<std::array<std::size_t, 3>, kNumClasses> per_class_split{};  // train/val/test
};

CorpusSummary summarize(const std::vector<ManifestRecord>& manifest);

struct GenerateOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 42;
  bool dry_run = false;  // build and split the manifest, write nothing
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Writes manifest.jsonl and wav/<sample_id>.wav. On failure every file this
/// call created is removed before the error propagates.
std::vector<ManifestRecord> generate_corpus(const GenerateOptions& options);

inline constexpr const char* kManifestName = "manifest.jsonl";

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

std::string to_json_line(const ManifestRecord& r);
ManifestRecord from_json_line(const std::string& line);

}  // namespace cadd::datagen
