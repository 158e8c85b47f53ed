#include <random>

#include <benchmark/benchmark.h>

#include "cadd/datagen/render.hpp"
#include "cadd/datagen/taxonomy.hpp"
#include "cadd/encoders/encoders.hpp"
#include "cadd/encoders/prosody.hpp"
#include "cadd/model/attention.hpp"
#include "cadd/numeric/ops.hpp"

using cadd::numeric::Tensor;

namespace {

Tensor random_tensor(cadd::numeric::Shape shape, std::mt19937_64& rng, bool grad = false) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::size_t size = 1;
  for (auto s : shape) size *= s;
  std::vector<double> v(size);
  for (auto& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

// args: width, sequence length
void BM_AttentionForward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto t = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(1);
  const auto params = cadd::model::AttentionParams::init(d, d >= 768 ? 8 : 4, rng);
  const auto q = random_tensor({d}, rng);
  const auto kv = random_tensor({t, d}, rng);
  const std::vector<bool> mask(t, true);
  for (auto _ : state) benchmark::DoNotOptimize(cadd::model::asymmetric_cross_attention(q, kv, mask, params));
}
BENCHMARK(BM_AttentionForward)->Args({64, 12})->Args({64, 300})->Args({768, 12})->Args({768, 300});

void BM_AttentionBackward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto t = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(2);
  auto params = cadd::model::AttentionParams::init(d, d >= 768 ? 8 : 4, rng);
  const auto q = random_tensor({d}, rng, true);
  const auto kv = random_tensor({t, d}, rng, true);
  const std::vector<bool> mask(t, true);
  for (auto _ : state) {
    auto loss = cadd::numeric::sum(cadd::model::asymmetric_cross_attention(q, kv, mask, params));
    loss.backward();
    params.w_q.zero_grad();
    params.w_k.zero_grad();
    params.w_v.zero_grad();
    params.w_o.zero_grad();
  }
}
BENCHMARK(BM_AttentionBackward)->Args({64, 300})->Args({768, 300});

// Factored audio path: features [T x 8] times projection [8 x d].
void BM_AttentionFactored(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const std::size_t t = 300;
  std::mt19937_64 rng(3);
  const auto params = cadd::model::AttentionParams::init(d, d >= 768 ? 8 : 4, rng);
  const auto q = random_tensor({d}, rng);
  const auto feats = random_tensor({t, cadd::encoders::AudioEncoder::kFeatureCount}, rng);
  const auto proj = random_tensor({cadd::encoders::AudioEncoder::kFeatureCount, d}, rng);
  const std::vector<bool> mask(t, true);
  for (auto _ : state)
    benchmark::DoNotOptimize(cadd::model::asymmetric_cross_attention(q, feats, proj, mask, params));
}
BENCHMARK(BM_AttentionFactored)->Arg(64)->Arg(768);

void BM_Prosody(benchmark::State& state) {
  const auto wave = cadd::datagen::render_waveform("I had a great day at work, honestly.",
                                                   cadd::datagen::voice("Eve"),
                                                   cadd::datagen::emotion_tag("excited"), 7);
  for (auto _ : state) benchmark::DoNotOptimize(cadd::encoders::extract_prosody(wave));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * wave.samples.size()));
}
BENCHMARK(BM_Prosody);

void BM_Render(benchmark::State& state) {
  const auto& v = cadd::datagen::voice("Eve");
  const auto& tag = cadd::datagen::emotion_tag("sad");
  for (auto _ : state)
    benchmark::DoNotOptimize(cadd::datagen::render_waveform("Nothing went right today.", v, tag, 11));
}
BENCHMARK(BM_Render);

}  // namespace

BENCHMARK_MAIN();
