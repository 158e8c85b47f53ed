#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cadd/datagen/render.hpp"
#include "cadd/datagen/taxonomy.hpp"
#include "cadd/encoders/encoders.hpp"
#include "cadd/errors.hpp"
#include "cadd/numeric/ops.hpp"
#include "support/gradcheck.hpp"

using namespace cadd::encoders;
using cadd::datagen::Waveform;
using cadd::numeric::Tensor;

namespace {

Waveform tone(double hz, double seconds, double amplitude = 0.5) {
  Waveform w;
  const auto n = static_cast<std::size_t>(seconds * cadd::datagen::kSampleRate);
  for (std::size_t i = 0; i < n; ++i)
    w.samples.push_back(amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) /
                                             cadd::datagen::kSampleRate));
  return w;
}

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  return cadd::testing::random_tensor({r, c}, rng, 1.0, false);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("weighted layer pool examples") {
  std::mt19937_64 rng(3);
  const auto a = random_matrix(4, 5, rng);
  const auto b = random_matrix(4, 5, rng);

  const Tensor one_layer[] = {a};
  const auto single = weighted_layer_pool(LayerStack::from_layers(one_layer), Tensor::vector({0.7}));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(single.at(i) == doctest::Approx(a.at(i)).epsilon(1e-15));

  const Tensor two[] = {a, b};
  const auto stack = LayerStack::from_layers(two);
  const auto uniform = weighted_layer_pool(stack, uniform_layer_weights(2));
  CHECK(uniform.shape() == cadd::numeric::Shape{4, 5});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(uniform.at(i) - (a.at(i) + b.at(i)) / 2) < 1e-12);

  const auto skewed = weighted_layer_pool(stack, Tensor::vector({std::log(3.0), 0.0}));
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::abs(skewed.at(i) - (0.75 * a.at(i) + 0.25 * b.at(i))) < 1e-12);

  const Tensor mismatched[] = {a, random_matrix(3, 5, rng)};
  CHECK_THROWS_AS(LayerStack::from_layers(mismatched), cadd::ShapeError);
  CHECK_THROWS_AS(weighted_layer_pool(stack, uniform_layer_weights(3)), cadd::ShapeError);
}

TEST_CASE("weighted layer pool gradient reaches only the layer weights") {
  std::mt19937_64 rng(4);
  const Tensor layers[] = {random_matrix(3, 4, rng), random_matrix(3, 4, rng), random_matrix(3, 4, rng)};
  const auto stack = LayerStack::from_layers(layers);
  std::vector<Tensor> inputs{cadd::testing::random_tensor({3}, rng)};
  const auto weights = random_matrix(3, 4, rng);
  const auto r = cadd::testing::grad_check(
      [&](std::vector<Tensor>& in) {
        return cadd::numeric::sum(cadd::numeric::mul(weighted_layer_pool(stack, in[0]), weights));
      },
      inputs);
  CHECK(r.max_relative_error < 1e-4);
  CHECK(!stack.layers.requires_grad());
}

TEST_CASE("projected stack equals its materialised form") {
  std::mt19937_64 rng(5);
  AudioEncoder enc(16, 9, 4);
  auto feats = random_matrix(7, AudioEncoder::kFeatureCount, rng);
  const auto stack = enc.layer_stack_from_features(feats);
  const auto w = Tensor::vector({0.3, -1.0, 0.5, 2.0});
  const auto factored = weighted_layer_pool(stack, w);
  const auto dense = weighted_layer_pool(stack.materialize(), w);
  REQUIRE(factored.shape() == dense.shape());
  for (std::size_t i = 0; i < dense.size(); ++i) CHECK(std::abs(factored.at(i) - dense.at(i)) < 1e-12);
}

TEST_CASE("text encoder: determinism, shape, empty input") {
  TextEncoder enc(32, 7);
  const std::vector<std::int64_t> ids{0, 11, 22, 33, 44, 55, 66};
  const auto a = enc.encode(ids);
  const auto b = enc.encode(ids);
  CHECK(a.sequence.shape() == cadd::numeric::Shape{7, 32});
  CHECK(a.pooled.size() == 32);
  CHECK(a.mask.size() == 7);
  CHECK(std::equal(a.sequence.values().begin(), a.sequence.values().end(), b.sequence.values().begin()));
  CHECK(std::equal(a.pooled.values().begin(), a.pooled.values().end(), b.pooled.values().begin()));
  // Pooled is the position-0 row.
  for (std::size_t j = 0; j < 32; ++j) CHECK(a.pooled.at(j) == a.sequence.at(j));
  CHECK(enc.layer_stack(ids).depth() == kDefaultLayers);

  CHECK_THROWS_AS(enc.encode(std::vector<std::int64_t>{}), cadd::ValidationError);

  TextEncoder other_seed(32, 8);
  const auto c = other_seed.encode(ids);
  CHECK(!std::equal(a.pooled.values().begin(), a.pooled.values().end(), c.pooled.values().begin()));
}

TEST_CASE("tokenizer prepends CLS and hashes words") {
  TextEncoder enc(16, 7);
  const auto ids = enc.tokenize("I'm fine, today went WELL.");
  REQUIRE(ids.size() == 6);
  CHECK(ids[0] == TextEncoder::kClsId);
  CHECK(ids[5] == TextEncoder::token_id("well"));
  for (std::size_t i = 1; i < ids.size(); ++i) {
    CHECK(ids[i] >= 1);
    CHECK(ids[i] < TextEncoder::kVocabSize);
  }
  CHECK(enc.token_polarity(TextEncoder::token_id("happy")) == 1.0);
  CHECK(enc.token_polarity(TextEncoder::token_id("sad")) == -1.0);
  CHECK(enc.token_polarity(TextEncoder::token_id("today")) == 0.0);
}

TEST_CASE("valence-bearing token flips the valence coordinate") {
  TextEncoder enc(32, 7);
  const auto happy = enc.encode(enc.tokenize("today I feel happy"));
  const auto sad = enc.encode(enc.tokenize("today I feel sad"));
  const std::size_t d = 32, row = 4, k = TextEncoder::kValenceDim;
  CHECK(happy.sequence.at(row * d + k) > 0.0);
  CHECK(sad.sequence.at(row * d + k) < 0.0);
  // Neutral tokens carry no valence.
  CHECK(happy.sequence.at(1 * d + k) == 0.0);

  // The pooled coordinate tracks sentence polarity through a noisy channel:
  // its sign agrees with the text valence for most, not all, sentences.
  int agree = 0;
  const auto pool = cadd::datagen::sentence_pool();
  for (const auto& s : pool) {
    const auto out = enc.encode(enc.tokenize(s.text));
    const double v = out.pooled.at(k);
    agree += (v > 0.0) == (s.text_valence == cadd::datagen::Valence::Positive);
  }
  MESSAGE("pooled valence sign agreement " << agree << "/100");
  CHECK(agree >= 70);
  CHECK(agree < 100);
}

TEST_CASE("audio encoder: frame count, pooled mean, determinism") {
  AudioEncoder enc(32, 7);
  const auto w = tone(220.0, 1.0);
  const auto out = enc.encode(w);
  CHECK(frame_count(w.samples.size()) == 98);
  CHECK(out.sequence.dim(0) == 98);
  CHECK(out.sequence.dim(1) == 32);

  std::vector<double> mean(32, 0.0);
  for (std::size_t t = 0; t < 98; ++t)
    for (std::size_t j = 0; j < 32; ++j) mean[j] += out.sequence.at(t * 32 + j) / 98.0;
  for (std::size_t j = 0; j < 32; ++j) CHECK(std::abs(out.pooled.at(j) - mean[j]) < 1e-9);

  const auto again = enc.encode(w);
  CHECK(std::equal(out.sequence.values().begin(), out.sequence.values().end(), again.sequence.values().begin()));
  CHECK(enc.layer_stack(w).depth() == kDefaultLayers);
}

TEST_CASE("audio encoder rejects bad input") {
  AudioEncoder enc(16, 7);
  CHECK_THROWS_AS(enc.encode(tone(220.0, 0.1)), cadd::ValidationError);
  auto w = tone(220.0, 1.0);
  w.sample_rate = 8000;
  CHECK_THROWS_AS(enc.encode(w), cadd::ValidationError);
}

TEST_CASE("prosody of a pure tone") {
  const auto frames = extract_prosody(tone(220.0, 1.0));
  REQUIRE(frames.size() == 98);
  for (const auto& f : frames) {
    CHECK(std::isfinite(f.log_energy));
    CHECK(f.pitch_hz == doctest::Approx(220.0).epsilon(0.02));
  }
  const auto silent = extract_prosody(tone(220.0, 1.0, 0.0));
  for (const auto& f : silent) CHECK(f.pitch_hz == 0.0);
  CHECK(frame_count(399) == 0);
  CHECK(frame_count(400) == 1);
  CHECK(frame_count(560) == 2);
}

TEST_CASE("high and low arousal renders give distinct pooled audio vectors") {
  const auto& voice = cadd::datagen::voice("Eve");
  const std::string text = "I had a great day at work.";
  AudioEncoder enc(64, 7);
  const auto hi = enc.encode(cadd::datagen::render_waveform(text, voice, cadd::datagen::emotion_tag("excited"), 3));
  const auto lo = enc.encode(cadd::datagen::render_waveform(text, voice, cadd::datagen::emotion_tag("sad"), 3));
  const double c = cosine(hi.pooled.values(), lo.pooled.values());
  MESSAGE("cosine " << c);
  CHECK(c < 0.99);
}
