#include <doctest.h>

#include <cmath>
#include <random>

#include "cadd/errors.hpp"
#include "cadd/numeric/ops.hpp"
#include "cadd/numeric/optim.hpp"
#include "support/gradcheck.hpp"

using namespace cadd::numeric;
using cadd::testing::grad_check;
using cadd::testing::random_tensor;

namespace {

constexpr int kProbes = 20;
constexpr double kGradTol = 1e-4;

void check_probes(const std::function<Tensor(std::vector<Tensor>&)>& fn,
                  const std::function<std::vector<Tensor>(std::mt19937_64&)>& make_inputs,
                  std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  for (int probe = 0; probe < kProbes; ++probe) {
    auto inputs = make_inputs(rng);
    const auto r = grad_check(fn, inputs);
    CHECK_MESSAGE(r.max_relative_error < kGradTol, "probe ", probe, " input ", r.worst_input,
                  " rel err ", r.max_relative_error);
  }
}

// Contracts to a scalar with a fixed random weighting so every output element matters.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  auto w = random_tensor(y.shape(), rng, 1.0, false);
  return sum(mul(y, w));
}

}  // namespace

TEST_CASE("tensor shape and grad invariants") {
  Tensor t({2, 3}, 1.5, true);
  CHECK(t.size() == 6);
  CHECK(t.grad().size() == t.size());
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), cadd::ShapeError);

  // a is on the path, b is not.
  Tensor a = Tensor::vector({1, 2}, true);
  Tensor b = Tensor::vector({3, 4}, true);
  auto unused = mul(b, b);
  sum(mul(a, a)).backward();
  CHECK(a.grad()[0] == doctest::Approx(2.0));
  CHECK(b.grad()[0] == 0.0);
  CHECK(b.grad()[1] == 0.0);
}

TEST_CASE("softmax examples") {
  auto one = softmax(Tensor::vector({5.0}), 0);
  CHECK(one.item() == 1.0);

  auto uniform = softmax(Tensor::vector({0, 0, 0}), 0);
  for (double v : uniform.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // scalar exp-normalize oracle
  const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  const double z = e1 + e2 + e3;
  auto y = softmax(Tensor::vector({1, 2, 3}), 0);
  CHECK(std::abs(y.at(0) - e1 / z) < 1e-12);
  CHECK(std::abs(y.at(1) - e2 / z) < 1e-12);
  CHECK(std::abs(y.at(2) - e3 / z) < 1e-12);

  CHECK_THROWS_AS(softmax(Tensor::vector({1, 2}), 1), cadd::ShapeError);
}

TEST_CASE("softmax sums to one along any axis") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    auto x = random_tensor({3, 4, 5}, rng, 5.0, false);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      auto y = softmax(x, axis);
      const Shape& s = x.shape();
      std::size_t outer = 1, inner = 1;
      for (std::size_t k = 0; k < axis; ++k) outer *= s[k];
      for (std::size_t k = axis + 1; k < 3; ++k) inner *= s[k];
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          double total = 0.0;
          for (std::size_t k = 0; k < s[axis]; ++k) {
            const double v = y.at(o * s[axis] * inner + k * inner + in);
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
            total += v;
          }
          CHECK(std::abs(total - 1.0) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("masked softmax ignores masked positions") {
  auto x = Tensor::vector({1.0, 50.0, 2.0}, true);
  auto y = masked_softmax(x, 0, {true, false, true});
  CHECK(y.at(1) == 0.0);
  CHECK(y.at(0) + y.at(2) == doctest::Approx(1.0));
  sum(mul(y, Tensor::vector({1, 2, 3}))).backward();
  CHECK(x.grad()[1] == 0.0);
  CHECK_THROWS_AS(masked_softmax(x, 0, {false, false, false}), cadd::ValidationError);
}

TEST_CASE("cosine similarity examples") {
  std::vector<double> e0(16, 0.0);
  e0[0] = 1.0;
  CHECK(cosine_similarity(Tensor::vector(e0), Tensor::vector(e0)).item() == doctest::Approx(1.0));
  CHECK(cosine_similarity(Tensor::vector({1, 0}), Tensor::vector({0, 1})).item() == 0.0);

  // hand dot/norm evaluation
  const double dotp = 1 * -4 + 2 * 5 + 3 * -6;
  const double expected = dotp / (std::sqrt(1.0 + 4 + 9) * std::sqrt(16.0 + 25 + 36));
  auto c = cosine_similarity(Tensor::vector({1, 2, 3}), Tensor::vector({-4, 5, -6}));
  CHECK(std::abs(c.item() - expected) < 1e-14);
  auto c_swapped = cosine_similarity(Tensor::vector({-4, 5, -6}), Tensor::vector({1, 2, 3}));
  CHECK(c.item() == c_swapped.item());

  auto zero = Tensor::vector({0, 0, 0}, true);
  auto other = Tensor::vector({1, 2, 3}, true);
  auto degenerate = cosine_similarity(zero, other);
  CHECK(degenerate.item() == 0.0);
  degenerate.backward();
  for (double g : other.grad()) CHECK(g == 0.0);

  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    auto u = random_tensor({7}, rng, 1.0, false);
    auto v = random_tensor({7}, rng, 1.0, false);
    const double s = cosine_similarity(u, v).item();
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("smoothed cross entropy examples") {
  const double ln3 = std::log(3.0);
  for (std::size_t label = 0; label < 3; ++label) {
    CHECK(cross_entropy_smoothed(Tensor::vector({0, 0, 0}), label, 0.1).item() ==
          doctest::Approx(ln3).epsilon(1e-14));
  }
  // scalar log-softmax oracle: -log(e^10 / (e^10 + 2))
  const double plain = std::log1p(2.0 * std::exp(-10.0));
  const double ce0 = cross_entropy_smoothed(Tensor::vector({10, 0, 0}), 0, 0.0).item();
  CHECK(std::abs(ce0 - plain) < 1e-14);
  const double ce1 = cross_entropy_smoothed(Tensor::vector({10, 0, 0}), 0, 0.1).item();
  CHECK(ce1 > ce0);
  CHECK_THROWS_AS(cross_entropy_smoothed(Tensor::vector({1, 2, 3}), 3, 0.1), cadd::IndexError);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    auto logits = random_tensor({3}, rng, 4.0, false);
    CHECK(cross_entropy_smoothed(logits, static_cast<std::size_t>(i % 3), 0.1).item() >= 0.0);
  }
}

TEST_CASE("stop_gradient examples") {
  auto x = Tensor::vector({1.5, -2.0, 0.25}, true);
  auto y = stop_gradient(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.at(i) == x.at(i));

  sum(stop_gradient(x)).backward();
  for (double g : x.grad()) CHECK(g == 0.0);

  // d/dx sum(x * c) with c held constant at x's value: gradient is c, not 2x.
  x.zero_grad();
  sum(mul(x, stop_gradient(x))).backward();
  auto frozen = x.clone();
  auto eval = [&] { return sum(mul(x, frozen)).item(); };
  const auto fd = cadd::testing::finite_difference(eval, x, 1e-5);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(x.grad()[i] == doctest::Approx(x.at(i)).epsilon(1e-12));
    CHECK(fd[i] == doctest::Approx(x.at(i)).epsilon(1e-8));
  }
}

TEST_CASE("dropout identities") {
  std::mt19937_64 rng(1);
  auto x = Tensor::vector({1, 2, 3, 4});
  auto a = dropout(x, 0.0, rng, true);
  auto b = dropout(x, 0.4, rng, false);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.at(i) == x.at(i));
    CHECK(b.at(i) == x.at(i));
  }
  std::mt19937_64 r1(9), r2(9);
  auto big = Tensor({1000}, 1.0);
  auto d1 = dropout(big, 0.4, r1, true);
  auto d2 = dropout(big, 0.4, r2, true);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    CHECK(d1.at(i) == d2.at(i));
    if (d1.at(i) == 0.0) ++zeros;
    else CHECK(d1.at(i) == doctest::Approx(1.0 / 0.6));
  }
  CHECK(zeros > 300);
  CHECK(zeros < 500);
}

TEST_CASE("adamw examples") {
  SUBCASE("zero gradient and zero decay leave parameters unchanged") {
    std::vector<Tensor> params{Tensor::vector({1.0, -2.0, 3.0}, true)};
    auto state = OptimizerState::for_params(params, {5e-4, {0.9, 0.999}, 1e-8, 0.0});
    for (int i = 0; i < 5; ++i) adamw_step(params, state);
    CHECK(params[0].at(0) == 1.0);
    CHECK(params[0].at(1) == -2.0);
    CHECK(state.step == 5);
  }
  SUBCASE("scalar hand-rolled update") {
    std::vector<Tensor> params{Tensor::scalar(1.0, true)};
    params[0].grad_mut()[0] = 1.0;
    auto state = OptimizerState::for_params(params, {5e-4, {0.9, 0.999}, 1e-8, 0.0});
    adamw_step(params, state);
    const double m = (1 - 0.9) * 1.0, v = (1 - 0.999) * 1.0;
    const double m_hat = m / (1 - 0.9), v_hat = v / (1 - 0.999);
    const double expected = 1.0 - 5e-4 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(std::abs(params[0].item() - expected) < 1e-15);
  }
  SUBCASE("decoupled decay shrinks parameters without gradient") {
    std::vector<Tensor> params{Tensor::scalar(2.0, true)};
    auto state = OptimizerState::for_params(params, {0.1, {0.9, 0.999}, 1e-8, 0.5});
    adamw_step(params, state);
    CHECK(params[0].item() == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
  }
  SUBCASE("shape mismatch") {
    std::vector<Tensor> params{Tensor::vector({1.0, 2.0}, true)};
    auto state = OptimizerState::for_params(params, {});
    std::vector<Tensor> other{Tensor::vector({1.0, 2.0, 3.0}, true)};
    CHECK_THROWS_AS(adamw_step(other, state), cadd::ShapeError);
  }
  SUBCASE("clip halves a norm-2 gradient at max-norm 1") {
    std::vector<Tensor> params{Tensor::vector({0, 0}, true), Tensor::scalar(0, true)};
    params[0].grad_mut()[0] = 1.2;
    params[0].grad_mut()[1] = 1.6;  // |(1.2,1.6)| = 2
    const double norm = clip_grad_norm(params, 1.0);
    CHECK(norm == doctest::Approx(2.0));
    CHECK(params[0].grad()[0] == doctest::Approx(0.6));
    CHECK(params[0].grad()[1] == doctest::Approx(0.8));
    CHECK(params[1].grad()[0] == 0.0);
  }
}

TEST_CASE("finite-difference agreement for every differentiable op") {
  using Inputs = std::vector<Tensor>;
  auto vec = [](std::size_t n, double scale = 1.0) {
    return [=](std::mt19937_64& rng) { return Inputs{random_tensor({n}, rng, scale)}; };
  };
  auto pair = [](Shape a, Shape b) {
    return [=](std::mt19937_64& rng) {
      return Inputs{random_tensor(a, rng), random_tensor(b, rng)};
    };
  };

  SUBCASE("add/sub/mul") {
    check_probes([](Inputs& in) { return weighted_sum(add(in[0], in[1])); }, pair({5}, {5}));
    check_probes([](Inputs& in) { return weighted_sum(sub(in[0], in[1])); }, pair({5}, {5}));
    check_probes([](Inputs& in) { return weighted_sum(mul(in[0], in[1])); }, pair({2, 3}, {2, 3}));
  }
  SUBCASE("affine/exp/tanh/sigmoid/gelu") {
    check_probes([](Inputs& in) { return weighted_sum(affine(in[0], -0.7, 2.0)); }, vec(6));
    check_probes([](Inputs& in) { return weighted_sum(exp(in[0])); }, vec(6));
    check_probes([](Inputs& in) { return weighted_sum(tanh(in[0])); }, vec(6, 2.0));
    check_probes([](Inputs& in) { return weighted_sum(sigmoid(in[0])); }, vec(6, 3.0));
    check_probes([](Inputs& in) { return weighted_sum(gelu(in[0])); }, vec(6, 2.0));
  }
  SUBCASE("log") {
    check_probes([](Inputs& in) { return weighted_sum(log(exp(in[0]))); }, vec(4));
    check_probes([](Inputs& in) { return weighted_sum(log(affine(sigmoid(in[0]), 1.0, 0.1))); },
                 vec(4));
  }
  SUBCASE("relu away from the kink") {
    check_probes([](Inputs& in) { return weighted_sum(relu(in[0])); },
                 [](std::mt19937_64& rng) {
                   auto t = random_tensor({8}, rng);
                   for (auto& v : t.values_mut()) v += v >= 0 ? 0.1 : -0.1;
                   return Inputs{t};
                 });
  }
  SUBCASE("matmul ranks") {
    check_probes([](Inputs& in) { return weighted_sum(matmul(in[0], in[1])); },
                 pair({3, 4}, {4, 5}));
    check_probes([](Inputs& in) { return weighted_sum(matmul(in[0], in[1])); },
                 pair({3, 4}, {4}));
    check_probes([](Inputs& in) { return weighted_sum(matmul(in[0], in[1])); },
                 pair({4}, {4, 2}));
  }
  SUBCASE("transpose/reshape/concat/slice") {
    check_probes([](Inputs& in) { return weighted_sum(transpose(in[0])); }, pair({2, 3}, {1}));
    check_probes([](Inputs& in) { return weighted_sum(reshape(in[0], {3, 2})); },
                 pair({2, 3}, {1}));
    check_probes([](Inputs& in) { return weighted_sum(concat({in[0], in[1]})); },
                 pair({3}, {2, 2}));
    check_probes([](Inputs& in) { return weighted_sum(slice(in[0], 1, 4)); }, vec(6));
  }
  SUBCASE("reductions") {
    check_probes([](Inputs& in) { return mul(sum(in[0]), sum(in[0])); }, vec(5));
    check_probes([](Inputs& in) { return mul(mean(in[0]), mean(in[0])); }, vec(5));
    check_probes([](Inputs& in) { return dot(in[0], in[1]); }, pair({5}, {5}));
    check_probes([](Inputs& in) { return weighted_sum(masked_mean_rows(in[0], {true, false, true, true})); },
                 pair({4, 3}, {1}));
  }
  SUBCASE("softmax family") {
    check_probes([](Inputs& in) { return weighted_sum(softmax(in[0], 1)); }, pair({3, 4}, {1}));
    check_probes([](Inputs& in) { return weighted_sum(softmax(in[0], 0)); }, pair({3, 4}, {1}));
    check_probes(
        [](Inputs& in) { return weighted_sum(masked_softmax(in[0], 0, {true, true, false, true})); },
        pair({4, 2}, {1}));
    check_probes([](Inputs& in) { return weighted_sum(log_softmax(in[0])); }, vec(4, 2.0));
  }
  SUBCASE("cosine and normalisation") {
    check_probes([](Inputs& in) { return cosine_similarity(in[0], in[1]); }, pair({6}, {6}));
    check_probes([](Inputs& in) { return weighted_sum(l2_normalize(in[0])); }, vec(6));
  }
  SUBCASE("losses") {
    check_probes([](Inputs& in) { return cross_entropy_smoothed(in[0], 1, 0.1); }, vec(3, 2.0));
    check_probes([](Inputs& in) { return cross_entropy_smoothed(in[0], 2, 0.0); }, vec(3, 2.0));
    check_probes([](Inputs& in) { return bce_with_logits(in[0], 1.0); }, vec(1, 3.0));
    check_probes([](Inputs& in) { return bce_with_logits(reshape(in[0], {}), 0.0); }, vec(1, 3.0));
  }
  SUBCASE("head plumbing") {
    check_probes([](Inputs& in) { return weighted_sum(spread_heads(in[0], 2)); }, vec(6));
    check_probes([](Inputs& in) { return weighted_sum(collect_heads(in[0], 3)); },
                 pair({3, 6}, {1}));
  }
  SUBCASE("dropout mask is a fixed multiplier") {
    check_probes(
        [](Inputs& in) {
          std::mt19937_64 rng(4);
          return weighted_sum(dropout(in[0], 0.4, rng, true));
        },
        vec(10));
  }
}
