#include "cadd/service/journal.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "cadd/errors.hpp"

namespace cadd::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kRecordFile = "entries.jsonl";
constexpr const char* kAudioDir = "audio";

std::string class_name(std::size_t c) {
  return std::string(datagen::to_string(static_cast<datagen::CaddClass>(c)));
}

std::size_t parse_class(const std::string& s) {
  for (std::size_t c = 0; c < model::kClassCount; ++c)
    if (class_name(c) == s) return c;
  throw ValidationError("unknown class '" + s + "'");
}

}  // namespace

std::string_view to_string(PromptKey k) {
  switch (k) {
    case PromptKey::None: return "none";
    case PromptKey::Masking: return "masking";
    case PromptKey::Coping: return "coping";
  }
  return "none";
}

PromptKey parse_prompt_key(std::string_view s) {
  if (s == "none") return PromptKey::None;
  if (s == "masking") return PromptKey::Masking;
  if (s == "coping") return PromptKey::Coping;
  throw ValidationError("unknown prompt key '" + std::string(s) + "'");
}

PromptKey PromptPolicy::decide(std::size_t predicted_class, double mismatch) const {
  if (!(mismatch > threshold)) return PromptKey::None;
  switch (static_cast<datagen::CaddClass>(predicted_class)) {
    case datagen::CaddClass::Masking: return PromptKey::Masking;
    case datagen::CaddClass::Coping: return PromptKey::Coping;
    case datagen::CaddClass::Congruent: return PromptKey::None;
  }
  return PromptKey::None;
}

const std::string* PromptPolicy::text_for(PromptKey key) const {
  switch (key) {
    case PromptKey::Masking: return &masking_prompt;
    case PromptKey::Coping: return &coping_prompt;
    case PromptKey::None: return nullptr;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

Analyzer::Analyzer(model::Dacm model, PromptPolicy policy)
    : model_(std::move(model)), featurizer_(model_.config()), policy_(std::move(policy)) {}

Analysis Analyzer::analyze(std::string_view text, const datagen::Waveform& wave) const {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ValidationError("entry text is empty");
  }
  if (wave.sample_rate != datagen::kSampleRate) throw ValidationError("audio must be 16 kHz");
  const double seconds = wave.duration_seconds();
  if (seconds < kMinEntrySeconds || seconds > kMaxEntrySeconds) {
    throw ValidationError("audio must last between 0.5 and 120 seconds");
  }
  const auto sample = featurizer_.encode(text, wave);
  const auto out = model_.forward(sample);
  const auto logits = out.class_logits.values();
  Analysis a;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t c = 0; c < model::kClassCount; ++c) {
    a.class_probs[c] = std::exp(logits[c] - peak);
    z += a.class_probs[c];
  }
  for (auto& p : a.class_probs) p /= z;
  a.predicted_class = static_cast<std::size_t>(
      std::max_element(a.class_probs.begin(), a.class_probs.end()) - a.class_probs.begin());
  a.mismatch_S = std::clamp(out.mismatch, 0.0, 1.0);
  a.prompt_key = policy_.decide(a.predicted_class, a.mismatch_S);
  return a;
}

Analysis Analyzer::analyze_wav(std::string_view text, std::span<const std::uint8_t> wav_bytes) const {
  return analyze(text, datagen::decode_wav_pcm16(wav_bytes));
}

// ---------------------------------------------------------------------------

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto micros =
      std::chrono::duration_cast<std::chrono::microseconds>(now.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(micros / 1000000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(micros % 1000000));
  return buf;
}

std::string to_json(const JournalEntry& e) {
  json j{{"entry_id", e.entry_id},
         {"created_at", e.created_at},
         {"text", e.text},
         {"audio_ref", e.audio_ref},
         {"predicted_class", class_name(e.analysis.predicted_class)},
         {"class_probs", e.analysis.class_probs},
         {"mismatch_S", e.analysis.mismatch_S},
         {"prompt_key", to_string(e.analysis.prompt_key)}};
  return j.dump();
}

JournalEntry entry_from_json(const std::string& line) {
  try {
    const auto j = json::parse(line);
    JournalEntry e;
    e.entry_id = j.at("entry_id").get<std::uint64_t>();
    e.created_at = j.at("created_at").get<std::string>();
    e.text = j.at("text").get<std::string>();
    e.audio_ref = j.at("audio_ref").get<std::string>();
    e.analysis.predicted_class = parse_class(j.at("predicted_class").get<std::string>());
    e.analysis.class_probs = j.at("class_probs").get<std::array<double, model::kClassCount>>();
    e.analysis.mismatch_S = j.at("mismatch_S").get<double>();
    e.analysis.prompt_key = parse_prompt_key(j.at("prompt_key").get<std::string>());
    return e;
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("bad journal record: ") + ex.what());
  }
}

JournalStore::JournalStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / kAudioDir, ec);
  if (ec) throw IoError("cannot create journal store at " + root_.string() + ": " + ec.message());
  std::ifstream is(root_ / kRecordFile);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      entries_.push_back(entry_from_json(line));
    } catch (const ValidationError&) {
      if (is.peek() == EOF) break;  // torn final append
      throw;
    }
    next_id_ = std::max(next_id_, entries_.back().entry_id + 1);
    last_created_at_ = std::max(last_created_at_, entries_.back().created_at);
  }
}

JournalEntry JournalStore::create(std::string_view text, std::span<const std::uint8_t> wav_bytes,
                                  const Analysis& analysis) {
  std::lock_guard lock(mutex_);
  JournalEntry e;
  e.entry_id = next_id_;
  e.created_at = std::max(utc_timestamp(), last_created_at_);
  e.text = std::string(text);
  e.audio_ref = std::string(kAudioDir) + "/" + std::to_string(e.entry_id) + ".wav";
  e.analysis = analysis;

  const fs::path audio = root_ / e.audio_ref;
  {
    std::ofstream os(audio, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(wav_bytes.data()),
             static_cast<std::streamsize>(wav_bytes.size()));
    os.flush();
    if (!os) throw IoError("cannot write audio for entry " + std::to_string(e.entry_id));
  }
  {
    std::ofstream os(root_ / kRecordFile, std::ios::app);
    os << to_json(e) << '\n';
    os.flush();
    if (!os) {
      std::error_code ec;
      fs::remove(audio, ec);
      throw IoError("cannot append journal record " + std::to_string(e.entry_id));
    }
  }
  entries_.push_back(e);
  ++next_id_;
  last_created_at_ = e.created_at;
  return e;
}

std::vector<JournalEntry> JournalStore::list(std::size_t limit) const {
  std::vector<JournalEntry> out;
  {
    std::lock_guard lock(mutex_);
    out = entries_;
  }
  std::sort(out.begin(), out.end(), [](const JournalEntry& a, const JournalEntry& b) {
    if (a.created_at != b.created_at) return a.created_at > b.created_at;
    return a.entry_id > b.entry_id;
  });
  if (out.size() > limit) out.resize(limit);
  return out;
}

std::optional<JournalEntry> JournalStore::get(std::uint64_t id) const {
  std::lock_guard lock(mutex_);
  for (const auto& e : entries_)
    if (e.entry_id == id) return e;
  return std::nullopt;
}

std::size_t JournalStore::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

}  // namespace cadd::service
