#include "cadd/training/metrics.hpp"

#include <random>

#include "cadd/errors.hpp"

namespace cadd::training {

void ConfusionMatrix::add(std::size_t truth, std::size_t prediction) {
  if (truth >= kClassCount || prediction >= kClassCount) throw IndexError("class index out of range");
  ++counts[truth][prediction];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (auto c : row) n += c;
  return n;
}

EvalReport score(const ConfusionMatrix& confusion) {
  EvalReport r;
  r.confusion = confusion;
  r.n = confusion.total();
  std::size_t correct = 0;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < kClassCount; ++k) {
      predicted += confusion.counts[k][c];
      actual += confusion.counts[c][k];
    }
    const std::size_t tp = confusion.counts[c][c];
    correct += tp;
    // 2TP / (2TP + FP + FN); zero when the denominator is zero.
    const std::size_t denom = predicted + actual;
    r.f1[c] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    r.macro_f1 += r.f1[c] / static_cast<double>(kClassCount);
  }
  r.accuracy = r.n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(r.n);
  return r;
}

EvalReport score(std::span<const std::size_t> truth, std::span<const std::size_t> predicted) {
  if (truth.size() != predicted.size()) throw ShapeError("truth and prediction lengths differ");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
  return score(m);
}

double stratified_random_macro_f1(std::span<const std::size_t> truth, std::size_t draws,
                                  std::uint64_t seed) {
  if (truth.empty() || draws == 0) throw ValidationError("need labels and at least one draw");
  std::array<double, kClassCount> freq{};
  for (auto t : truth) {
    if (t >= kClassCount) throw IndexError("class index out of range");
    freq[t] += 1.0;
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> guess(freq.begin(), freq.end());
  double acc = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    ConfusionMatrix m;
    for (auto t : truth) m.add(t, guess(rng));
    acc += score(m).macro_f1;
  }
  return acc / static_cast<double>(draws);
}

}  // namespace cadd::training
