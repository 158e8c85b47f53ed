#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "cadd/model/interaction.hpp"

namespace cadd::training {

using model::kClassCount;

/// counts[truth][prediction].
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kClassCount>, kClassCount> counts{};

  void add(std::size_t truth, std::size_t prediction);
  std::size_t total() const;
};

struct EvalReport {
  ConfusionMatrix confusion;
  std::array<double, kClassCount> f1{};
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  double mean_mismatch = 0.0;
  std::size_t n = 0;
};

/// Per-class F1 is 0 when the class is neither present nor predicted
/// (precision and recall both undefined).
EvalReport score(const ConfusionMatrix& confusion);
EvalReport score(std::span<const std::size_t> truth, std::span<const std::size_t> predicted);

/// Mean macro-F1 of guessing each label at random with the empirical class
/// frequencies of `truth`, over `draws` independent draws.
double stratified_random_macro_f1(std::span<const std::size_t> truth, std::size_t draws,
                                  std::uint64_t seed);

}  // namespace cadd::training
