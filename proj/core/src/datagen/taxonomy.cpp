#include "cadd/datagen/taxonomy.hpp"

#include <algorithm>
#include <vector>

#include "cadd/errors.hpp"

namespace cadd::datagen {

std::string_view to_string(Valence v) { return v == Valence::Positive ? "positive" : "negative"; }

std::string_view to_string(CaddClass c) {
  switch (c) {
    case CaddClass::Masking: return "masking";
    case CaddClass::Coping: return "coping";
    case CaddClass::Congruent: return "congruent";
  }
  return "unknown";
}

Valence parse_valence(std::string_view s) {
  if (s == "positive") return Valence::Positive;
  if (s == "negative") return Valence::Negative;
  throw ValidationError("unknown valence '" + std::string(s) + "'");
}

namespace {

constexpr std::array<EmotionTag, 8> kTags{{
    {"sad", Valence::Negative},
    {"angry", Valence::Negative},
    {"annoyed", Valence::Negative},
    {"appalled", Valence::Negative},
    {"happy", Valence::Positive},
    {"excited", Valence::Positive},
    {"cheerful", Valence::Positive},
    {"calm", Valence::Positive},
}};

// Base pitches sit close enough that one global mean-pitch threshold still
// separates +15% from -15% renderings across all three voices.
constexpr std::array<VoiceProfile, 3> kVoices{{
    {"Jarnathan", 145.0, 1.00, 0.90, 0x4A41524EULL},
    {"Juniper", 175.0, 1.14, 0.82, 0x4A554E49ULL},
    {"Eve", 160.0, 1.08, 0.86, 0x00455645ULL},
}};

constexpr std::array<std::string_view, 50> kPositive{
    "I'm fine, today went well.",
    "I had a great day at work.",
    "The morning walk made me feel calm and happy.",
    "I finally finished the project and I feel proud.",
    "Dinner with my friends was wonderful.",
    "I slept well and woke up rested.",
    "My presentation went better than I expected.",
    "I am grateful for my family today.",
    "The weekend trip was so much fun.",
    "I feel confident about the interview tomorrow.",
    "Everything went smoothly at the office.",
    "I laughed a lot with my sister tonight.",
    "The weather was beautiful and I felt peaceful.",
    "I got good news from the doctor.",
    "My team celebrated a big success today.",
    "I enjoyed cooking a new recipe this evening.",
    "I feel hopeful about the coming month.",
    "The concert last night was amazing.",
    "I had a lovely chat with an old friend.",
    "Work was easy and relaxed today.",
    "I am excited about my new apartment.",
    "My garden looks lovely this spring.",
    "I am glad I went to the gym this morning.",
    "The kids were cheerful and sweet all day.",
    "I received a kind message from my mentor.",
    "I feel great after a long swim.",
    "My exam results were excellent.",
    "I love the quiet mornings at home.",
    "The new job is going really well.",
    "I had a perfect afternoon at the park.",
    "My friends threw me a wonderful surprise party.",
    "I feel relaxed after the holiday.",
    "The meeting was productive and positive.",
    "I am proud of how I handled the conflict.",
    "Today felt bright and full of energy.",
    "I enjoyed reading in the sunshine.",
    "My partner made me a delicious breakfast.",
    "I feel happy with the progress I made.",
    "The volunteers were friendly and the event was great.",
    "I am thankful for a calm and easy week.",
    "I won the small contest at work.",
    "I had a joyful phone call with my parents.",
    "The project launch was a success.",
    "I feel energized and ready for tomorrow.",
    "We had a fantastic time at the beach.",
    "My manager praised my work today.",
    "I feel content and safe at home.",
    "The new course is interesting and fun.",
    "I had a pleasant dinner with my neighbors.",
    "Life feels good right now.",
};

constexpr std::array<std::string_view, 50> kNegative{
    "Everything went wrong today.",
    "I had a terrible day at work.",
    "I feel exhausted and sad tonight.",
    "The meeting was awful and stressful.",
    "I am worried about my health.",
    "I failed the exam I studied for.",
    "My boss was angry with me again.",
    "I feel lonely in this city.",
    "The project deadline makes me anxious.",
    "I lost my wallet on the train.",
    "I argued with my brother and it hurt.",
    "The rain ruined my whole weekend.",
    "I feel tired of trying so hard.",
    "My presentation was a disaster.",
    "I got bad news from the doctor.",
    "I am frustrated with my slow progress.",
    "The apartment feels empty and cold.",
    "I missed the bus and was late again.",
    "I feel stuck in this boring job.",
    "My friends cancelled our plans and I feel hurt.",
    "I am scared about the surgery next week.",
    "The traffic was horrible this morning.",
    "I feel guilty about what I said.",
    "Money problems keep me awake at night.",
    "I feel miserable and drained today.",
    "The interview went badly.",
    "I feel overwhelmed by all this work.",
    "My computer crashed and I lost everything.",
    "I am upset that nobody called me.",
    "The news today made me depressed.",
    "I feel sick and weak.",
    "My plans fell apart this afternoon.",
    "I am disappointed in myself.",
    "The neighbors were rude and loud all night.",
    "I feel nervous and tense before the trip.",
    "I had a painful argument with my partner.",
    "The week has been hard and exhausting.",
    "I feel ashamed of my mistake.",
    "My team lost the important client.",
    "I am stressed about the rent.",
    "The hospital visit was grim.",
    "I feel hopeless about the future.",
    "Work was chaotic and unpleasant today.",
    "I broke my phone and feel annoyed.",
    "I feel bitter about the unfair decision.",
    "My back pain is getting worse.",
    "I was embarrassed in front of everyone.",
    "I feel empty and sad this evening.",
    "The dinner was a miserable failure.",
    "Life feels heavy right now.",
};

std::vector<SentenceRecord> build_pool() {
  std::vector<SentenceRecord> pool;
  pool.reserve(100);
  for (std::size_t i = 0; i < kPositive.size(); ++i)
    pool.push_back({static_cast<int>(i), kPositive[i], Valence::Positive});
  for (std::size_t i = 0; i < kNegative.size(); ++i)
    pool.push_back({static_cast<int>(50 + i), kNegative[i], Valence::Negative});
  return pool;
}

}  // namespace

std::span<const EmotionTag> emotion_tags() { return kTags; }

const EmotionTag& emotion_tag(std::string_view name) {
  auto it = std::find_if(kTags.begin(), kTags.end(), [&](const auto& t) { return t.name == name; });
  if (it == kTags.end()) throw ValidationError("unknown emotion tag '" + std::string(name) + "'");
  return *it;
}

std::span<const VoiceProfile> voices() { return kVoices; }

const VoiceProfile& voice(std::string_view name) {
  auto it =
      std::find_if(kVoices.begin(), kVoices.end(), [&](const auto& v) { return v.name == name; });
  if (it == kVoices.end()) throw ValidationError("unknown voice '" + std::string(name) + "'");
  return *it;
}

std::span<const SentenceRecord> sentence_pool() {
  static const std::vector<SentenceRecord> pool = build_pool();
  return pool;
}

}  // namespace cadd::datagen
