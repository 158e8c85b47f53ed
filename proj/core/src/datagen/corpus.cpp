#include "cadd/datagen/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include <json.hpp>

#include "cadd/datagen/render.hpp"
#include "cadd/datagen/wav.hpp"
#include "cadd/errors.hpp"
#include "cadd/seed.hpp"

namespace cadd::datagen {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  return "unassigned";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  if (s == "unassigned") return Split::Unassigned;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

namespace {

std::string pad_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return buf;
}

std::size_t tag_order(std::string_view name) {
  const auto tags = emotion_tags();
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (tags[i].name == name) return i;
  return tags.size();
}

std::size_t voice_order(std::string_view name) {
  const auto vs = voices();
  for (std::size_t i = 0; i < vs.size(); ++i)
    if (vs[i].name == name) return i;
  return vs.size();
}

std::vector<const EmotionTag*> tags_with(Valence v) {
  std::vector<const EmotionTag*> out;
  for (const auto& t : emotion_tags())
    if (t.acoustic_valence == v) out.push_back(&t);
  return out;
}

ManifestRecord make_record(const SentenceRecord& s, const VoiceProfile& v, const EmotionTag& t) {
  ManifestRecord r;
  r.sentence_id = s.sentence_id;
  r.voice = std::string(v.name);
  r.emotion_tag = std::string(t.name);
  r.text = std::string(s.text);
  r.text_valence = s.text_valence;
  r.acoustic_valence = t.acoustic_valence;
  r.label = derive_label(s.text_valence, t.acoustic_valence);
  return r;
}

std::size_t exact_quota(std::size_t n, double ratio, const char* which) {
  const double q = static_cast<double>(n) * ratio;
  const double rounded = std::round(q);
  if (std::abs(q - rounded) > 1e-6) {
    throw ConfigError(std::string("split ratio for ") + which + " does not give a whole count of " +
                      std::to_string(n) + " samples");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

std::vector<ManifestRecord> build_manifest(std::uint64_t seed) {
  std::vector<ManifestRecord> out;
  out.reserve(1800);
  const auto pool = sentence_pool();
  const auto negative_tags = tags_with(Valence::Negative);
  const auto positive_tags = tags_with(Valence::Positive);

  // Masking: positive text, every negative tag.
  for (const auto& s : pool) {
    if (s.text_valence != Valence::Positive) continue;
    for (const auto& v : voices())
      for (const auto* t : negative_tags) out.push_back(make_record(s, v, *t));
  }
  // Coping: negative text, every positive tag.
  for (const auto& s : pool) {
    if (s.text_valence != Valence::Negative) continue;
    for (const auto& v : voices())
      for (const auto* t : positive_tags) out.push_back(make_record(s, v, *t));
  }
  // Congruent: 2 of the 4 matching tags per (sentence, voice).
  for (const auto& s : pool) {
    for (std::size_t vi = 0; vi < voices().size(); ++vi) {
      const auto& v = voices()[vi];
      auto pool_tags = s.text_valence == Valence::Positive ? positive_tags : negative_tags;
      std::mt19937_64 rng(derive_seed({seed, 0xC0u, static_cast<std::uint64_t>(s.sentence_id), vi}));
      std::shuffle(pool_tags.begin(), pool_tags.end(), rng);
      std::vector<const EmotionTag*> drawn(pool_tags.begin(), pool_tags.begin() + 2);
      std::sort(drawn.begin(), drawn.end(),
                [](auto* a, auto* b) { return tag_order(a->name) < tag_order(b->name); });
      for (const auto* t : drawn) out.push_back(make_record(s, v, *t));
    }
  }

  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].sample_id = pad_id(i);
    out[i].audio_path = "wav/" + out[i].sample_id + ".wav";
  }
  return out;
}

void split_stratified(std::vector<ManifestRecord>& manifest, SplitRatios ratios,
                      std::uint64_t seed) {
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      if (static_cast<std::size_t>(manifest[i].label) == c) groups[manifest[i].sentence_id].push_back(i);
    }
    std::size_t n = 0;
    for (auto& [sid, members] : groups) {
      n += members.size();
      std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        const auto ka = std::pair(tag_order(manifest[a].emotion_tag), voice_order(manifest[a].voice));
        const auto kb = std::pair(tag_order(manifest[b].emotion_tag), voice_order(manifest[b].voice));
        return ka < kb;
      });
    }
    if (n == 0) continue;
    const std::size_t train_quota = exact_quota(n, ratios.train, "train");
    const std::size_t val_quota = exact_quota(n, ratios.val, "val");
    const std::size_t test_quota = n - train_quota - val_quota;

    std::vector<int> order;
    for (const auto& [sid, members] : groups) order.push_back(sid);
    std::mt19937_64 rng(derive_seed({seed, 0x5E1Au, c}));
    std::shuffle(order.begin(), order.end(), rng);

    std::size_t cursor = 0;
    std::size_t remaining = train_quota;
    while (cursor < order.size() && groups[order[cursor]].size() <= remaining) {
      for (auto i : groups[order[cursor]]) manifest[i].split = Split::Train;
      remaining -= groups[order[cursor]].size();
      ++cursor;
    }
    if (remaining != 0) {
      throw ConfigError("train quota " + std::to_string(train_quota) + " for class " +
                        std::string(to_string(static_cast<CaddClass>(c))) +
                        " cannot be filled with whole sentence groups");
    }
    remaining = val_quota;
    std::size_t test_count = 0;
    for (; cursor < order.size(); ++cursor) {
      for (auto i : groups[order[cursor]]) {
        if (remaining > 0) {
          manifest[i].split = Split::Val;
          --remaining;
        } else {
          manifest[i].split = Split::Test;
          ++test_count;
        }
      }
    }
    if (remaining != 0 || test_count != test_quota) {
      throw ConfigError("infeasible val/test counts for class " +
                        std::string(to_string(static_cast<CaddClass>(c))));
    }
  }
}

std::uint64_t sample_seed(std::uint64_t corpus_seed, std::size_t index) {
  return derive_seed({corpus_seed, 0xA0D10u, index});
}

CorpusSummary summarize(const std::vector<ManifestRecord>& manifest) {
  CorpusSummary s;
  s.total = manifest.size();
  for (const auto& r : manifest) {
    const auto c = static_cast<std::size_t>(r.label);
    ++s.per_class[c];
    if (r.split != Split::Unassigned) ++s.per_class_split[c][static_cast<std::size_t>(r.split)];
  }
  return s;
}

std::vector<ManifestRecord> generate_corpus(const GenerateOptions& options) {
  auto manifest = build_manifest(options.seed);
  split_stratified(manifest, SplitRatios{}, options.seed);
  if (options.dry_run) return manifest;

  const fs::path wav_dir = options.out_dir / "wav";
  const bool created_out = !fs::exists(options.out_dir);
  const bool created_wav = !fs::exists(wav_dir);
  std::vector<fs::path> written(manifest.size());
  std::mutex error_mutex;
  std::exception_ptr error;

  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : written)
      if (!p.empty()) fs::remove(p, ec);
    fs::remove(options.out_dir / kManifestName, ec);
    if (created_wav) fs::remove(wav_dir, ec);
    if (created_out) fs::remove(options.out_dir, ec);
  };

  try {
    fs::create_directories(wav_dir);
  } catch (const fs::filesystem_error& e) {
    cleanup();
    throw IoError(std::string("cannot create output directory: ") + e.what());
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < manifest.size() && !failed; i = next++) {
      try {
        const auto& r = manifest[i];
        const auto wave = render_waveform(r.text, voice(r.voice), emotion_tag(r.emotion_tag),
                                          sample_seed(options.seed, i));
        const fs::path path = options.out_dir / r.audio_path;
        write_wav(path, wave);
        written[i] = path;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (error) {
    cleanup();
    std::rethrow_exception(error);
  }
  try {
    write_manifest(options.out_dir / kManifestName, manifest);
  } catch (...) {
    cleanup();
    throw;
  }
  return manifest;
}

std::string to_json_line(const ManifestRecord& r) {
  json j{{"sample_id", r.sample_id},
         {"sentence_id", r.sentence_id},
         {"voice", r.voice},
         {"emotion_tag", r.emotion_tag},
         {"text", r.text},
         {"text_valence", to_string(r.text_valence)},
         {"acoustic_valence", to_string(r.acoustic_valence)},
         {"label", static_cast<int>(r.label)},
         {"split", to_string(r.split)},
         {"audio_path", r.audio_path}};
  return j.dump();
}

ManifestRecord from_json_line(const std::string& line) {
  try {
    const auto j = json::parse(line);
    ManifestRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.sentence_id = j.at("sentence_id").get<int>();
    r.voice = j.at("voice").get<std::string>();
    r.emotion_tag = j.at("emotion_tag").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.text_valence = parse_valence(j.at("text_valence").get<std::string>());
    r.acoustic_valence = parse_valence(j.at("acoustic_valence").get<std::string>());
    const int label = j.at("label").get<int>();
    if (label < 0 || label > 2) throw ValidationError("label out of range");
    r.label = static_cast<CaddClass>(label);
    r.split = parse_split(j.at("split").get<std::string>());
    r.audio_path = j.at("audio_path").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad manifest line: ") + e.what());
  }
}

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    for (const auto& r : records) os << to_json_line(r) << '\n';
    if (!os) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(from_json_line(line));
  }
  return out;
}

}  // namespace cadd::datagen
