#include "cadd/datagen/render.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

#include "cadd/errors.hpp"
#include "cadd/seed.hpp"

namespace cadd::datagen {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDt = 1.0 / kSampleRate;

struct TagShape {
  std::string_view name;
  double pitch, range, energy, rate, breath;
};

// Within-valence colouring. Every negative tag stays below every positive tag
// on pitch and energy once the +/-15% valence shift is applied.
constexpr std::array<TagShape, 8> kTagShapes{{
    {"sad", 0.97, 0.80, 0.85, 0.90, 0.15},
    {"angry", 1.03, 1.10, 1.25, 1.05, 0.05},
    {"annoyed", 1.00, 0.90, 1.05, 1.00, 0.06},
    {"appalled", 1.02, 1.20, 1.10, 0.95, 0.10},
    {"happy", 1.00, 1.00, 1.00, 1.00, 0.03},
    {"excited", 1.03, 1.20, 1.20, 1.10, 0.02},
    {"cheerful", 1.01, 1.10, 1.05, 1.05, 0.03},
    {"calm", 0.97, 0.80, 0.85, 0.92, 0.05},
}};

const TagShape& shape_for(const EmotionTag& tag) {
  for (const auto& s : kTagShapes)
    if (s.name == tag.name) return s;
  throw ValidationError("no prosody shape for tag '" + std::string(tag.name) + "'");
}

// (F1, F2, F3) for a small vowel inventory, adult-male register.
constexpr std::array<std::array<double, 3>, 8> kVowels{{
    {730, 1090, 2440},  // a
    {530, 1840, 2480},  // e
    {270, 2290, 3010},  // i
    {570, 840, 2410},   // o
    {300, 870, 2240},   // u
    {660, 1720, 2410},  // ae
    {520, 1190, 2390},  // schwa
    {490, 1350, 1690},  // er
}};

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

int syllable_count(const std::string& word) {
  int groups = 0;
  bool prev = false;
  for (char c : word) {
    const bool v = is_vowel(c);
    if (v && !prev) ++groups;
    prev = v;
  }
  if (groups > 1 && word.size() > 2 && word.back() == 'e' && !is_vowel(word[word.size() - 2])) {
    --groups;  // silent final e
  }
  return std::max(groups, 1);
}

// Two-pole resonator (Klatt form).
class Resonator {
 public:
  Resonator(double freq, double bandwidth) {
    const double r = std::exp(-std::numbers::pi * bandwidth * kDt);
    c_ = -r * r;
    b_ = 2.0 * r * std::cos(kTwoPi * freq * kDt);
    a_ = 1.0 - b_ - c_;
  }
  double operator()(double x) {
    const double y = a_ * x + b_ * y1_ + c_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a_, b_, c_;
  double y1_ = 0.0, y2_ = 0.0;
};

struct Syllable {
  std::array<double, 3> formants;
  double accent;        // pitch accent in [-1, 1]
  double energy_gain;
  bool noisy_onset;
  bool word_start;
  bool phrase_break;    // comma or sentence end follows the word
};

void scale_to_rms(std::vector<double>& seg, double target) {
  double ss = 0.0;
  for (double v : seg) ss += v * v;
  if (seg.empty() || ss <= 0.0) return;
  const double g = target / std::sqrt(ss / static_cast<double>(seg.size()));
  for (auto& v : seg) v *= g;
}

void apply_envelope(std::vector<double>& seg, std::size_t attack, std::size_t release) {
  const std::size_t n = seg.size();
  attack = std::min(attack, n / 2);
  release = std::min(release, n / 2);
  for (std::size_t i = 0; i < attack; ++i)
    seg[i] *= 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / attack);
  for (std::size_t i = 0; i < release; ++i)
    seg[n - 1 - i] *= 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / release);
}

std::size_t samples_for(double seconds) {
  return static_cast<std::size_t>(std::lround(seconds * kSampleRate));
}

}  // namespace

ProsodyTargets prosody_for(const VoiceProfile& voice, const EmotionTag& tag) {
  const TagShape& s = shape_for(tag);
  const bool positive = tag.acoustic_valence == Valence::Positive;
  ProsodyTargets p;
  p.pitch_mean_hz = voice.base_pitch_hz * (positive ? 1.15 : 0.85) * s.pitch;
  p.pitch_range = (positive ? 0.22 : 0.07) * s.range;
  p.energy_rms = (positive ? 0.11 : 0.05) * s.energy;
  p.rate = (positive ? 1.15 : 0.85) * s.rate;
  p.breathiness = s.breath;
  return p;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || ch == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

Waveform render_waveform(std::string_view text, const VoiceProfile& voice, const EmotionTag& tag,
                         std::uint64_t seed) {
  const auto words = split_words(text);
  if (words.empty()) throw ValidationError("render_waveform: text has no words");

  const ProsodyTargets target = prosody_for(voice, tag);
  std::mt19937_64 rng(derive_seed({seed, fnv1a(text), voice.timbre_seed, fnv1a(tag.name)}));
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Timbre: the voice shifts each formant by a fixed small amount.
  std::mt19937_64 timbre_rng(voice.timbre_seed);
  std::array<double, 3> timbre_shift{};
  for (auto& t : timbre_shift) t = 1.0 + 0.04 * (uni(timbre_rng) - 0.5);

  // Syllable plan, driven by word content so the same text keeps its phonetics.
  std::vector<Syllable> plan;
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::size_t word_pos = 0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto& word = words[w];
    const std::uint64_t wh = fnv1a(word);
    const int n = syllable_count(word);
    // A phrase break follows the last word and any word directly before ',' or ';'.
    bool brk = w + 1 == words.size();
    const auto at = lowered.find(word, word_pos);
    if (at != std::string::npos) {
      word_pos = at + word.size();
      if (word_pos < lowered.size() && (lowered[word_pos] == ',' || lowered[word_pos] == ';'))
        brk = true;
    }
    const int stressed = static_cast<int>(wh % static_cast<std::uint64_t>(n));
    for (int s = 0; s < n; ++s) {
      const std::uint64_t sh = splitmix64(wh + static_cast<std::uint64_t>(s));
      Syllable syl;
      syl.formants = kVowels[sh % kVowels.size()];
      syl.accent = s == stressed ? 1.0 : -0.5;
      syl.energy_gain = s == stressed ? 1.15 : 0.9;
      syl.noisy_onset = ((sh >> 8) & 3u) == 0u;
      syl.word_start = s == 0;
      syl.phrase_break = brk && s == n - 1;
      plan.push_back(syl);
    }
  }

  const double mean_pitch = target.pitch_mean_hz * (1.0 + 0.01 * jitter(rng));
  const double energy = target.energy_rms * (1.0 + 0.04 * jitter(rng));
  const double rate = target.rate * (1.0 + 0.03 * jitter(rng));

  std::vector<double> out(samples_for(0.12), 0.0);
  double phase = 0.0;
  double source_state = 0.0;
  const std::size_t total_syllables = plan.size();

  for (std::size_t k = 0; k < total_syllables; ++k) {
    const Syllable& syl = plan[k];
    if (syl.word_start && k > 0) out.resize(out.size() + samples_for(0.05 / rate), 0.0);

    if (syl.noisy_onset) {
      std::vector<double> onset(samples_for(0.045 / rate));
      Resonator fric(4200.0 * voice.formant_scale, 1800.0);
      for (auto& v : onset) v = fric(jitter(rng));
      scale_to_rms(onset, 0.35 * energy);
      apply_envelope(onset, samples_for(0.008), samples_for(0.01));
      out.insert(out.end(), onset.begin(), onset.end());
    }

    const std::size_t len = samples_for((0.16 + 0.02 * uni(rng)) / rate);
    std::vector<double> seg(len);
    Resonator f1(syl.formants[0] * voice.formant_scale * timbre_shift[0], 90.0);
    Resonator f2(syl.formants[1] * voice.formant_scale * timbre_shift[1], 110.0);
    Resonator f3(syl.formants[2] * voice.formant_scale * timbre_shift[2], 170.0);
    const double progress = total_syllables > 1
                                ? static_cast<double>(k) / static_cast<double>(total_syllables - 1)
                                : 0.5;
    const double declination = 0.5 * target.pitch_range * (0.5 - progress);
    for (std::size_t i = 0; i < len; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(len);
      const double accent_shape = syl.accent * std::sin(std::numbers::pi * u);
      const double f0 = mean_pitch * (1.0 + target.pitch_range * accent_shape + declination);
      // Glottal pulse train with aspiration noise, then a one-pole spectral tilt.
      phase += f0 * kDt;
      double pulse = 0.0;
      if (phase >= 1.0) {
        phase -= 1.0;
        pulse = 1.0;
      }
      const double aspiration = target.breathiness * 0.3 * jitter(rng);
      source_state = pulse + aspiration + voice.spectral_tilt * source_state;
      seg[i] = f3(f2(f1(source_state)));
    }
    // Remove the resonators' DC drift before level normalisation.
    double dc = 0.0;
    for (double v : seg) dc += v;
    dc /= static_cast<double>(len);
    for (auto& v : seg) v -= dc;
    scale_to_rms(seg, energy * syl.energy_gain);
    apply_envelope(seg, samples_for(0.015), samples_for(0.03));
    out.insert(out.end(), seg.begin(), seg.end());

    if (syl.phrase_break && k + 1 < total_syllables) {
      out.resize(out.size() + samples_for(0.15 / rate), 0.0);
    }
  }
  out.resize(out.size() + samples_for(0.12), 0.0);

  const std::size_t min_len = samples_for(0.5);
  if (out.size() < min_len) out.resize(min_len, 0.0);
  if (out.size() > samples_for(10.0)) out.resize(samples_for(10.0));
  for (auto& v : out) v = std::clamp(v, -1.0, 1.0);
  return Waveform{std::move(out), kSampleRate};
}

}  // namespace cadd::datagen
