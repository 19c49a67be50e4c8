// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "jointrank/numerics.hpp"

using namespace jointrank;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector random_vector(SeededRng& rng, Eigen::Index n, double scale) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

}  // namespace

TEST_CASE("softmax of equal scores is uniform") {
  const Vector p = stable_softmax(vec({0, 0, 0, 0}));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("softmax of log-integers is proportional") {
  const Vector p = stable_softmax(vec({std::log(1.0), std::log(2.0), std::log(3.0)}));
  CHECK(std::abs(p[0] - 1.0 / 6) < 1e-15);
  CHECK(std::abs(p[1] - 2.0 / 6) < 1e-15);
  CHECK(std::abs(p[2] - 3.0 / 6) < 1e-15);
}

TEST_CASE("softmax survives large scores") {
  const Vector p = stable_softmax(vec({1000, 1001}));
  const double e = std::exp(1.0);
  CHECK(std::abs(p[0] - 1.0 / (1.0 + e)) < 1e-15);
  CHECK(std::abs(p[1] - e / (1.0 + e)) < 1e-15);
}

TEST_CASE("softmax and log_sum_exp reject bad input") {
  CHECK_THROWS_AS(stable_softmax(Vector()), UsageError);
  CHECK_THROWS_AS(log_sum_exp(Vector()), UsageError);
  CHECK_THROWS_AS(stable_softmax(vec({0, std::numeric_limits<double>::quiet_NaN()})),
                  ValidationError);
  CHECK_THROWS_AS(log_sum_exp(vec({std::numeric_limits<double>::infinity()})), ValidationError);
}

TEST_CASE("log_sum_exp examples") {
  CHECK(log_sum_exp(vec({0})) == 0.0);
  CHECK(std::abs(log_sum_exp(vec({0, 0})) - std::log(2.0)) < 1e-15);
  CHECK(std::abs(log_sum_exp(vec({1000, 1000})) - (1000 + std::log(2.0))) < 1e-12);
  CHECK(log_sum_exp(vec({-3.25})) == -3.25);
}

TEST_CASE("softmax properties on random inputs") {
  SeededRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.uniform_index(12));
    const Vector s = random_vector(rng, n, 20.0);
    const Vector p = stable_softmax(s);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK((p.array() > 0.0).all());
    CHECK((p.array() <= 1.0).all());

    const double c = rng.uniform(-500, 500);
    const Vector shifted = stable_softmax((s.array() + c).matrix());
    CHECK((p - shifted).cwiseAbs().maxCoeff() < 1e-12);

    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (s[i] > s[j]) CHECK(p[i] >= p[j]);
      }
    }
    Eigen::Index arg_s = 0, arg_p = 0;
    s.maxCoeff(&arg_s);
    p.maxCoeff(&arg_p);
    CHECK(arg_s == arg_p);

    const double lse = log_sum_exp(s);
    CHECK(lse >= s.maxCoeff());
    CHECK(lse <= s.maxCoeff() + std::log(static_cast<double>(n)) + 1e-12);
    const Vector lp = log_softmax(s);
    CHECK((lp.array().exp() - p.array()).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("first Adam step moves by the learning rate") {
  Vector param = vec({0});
  AdamState state = AdamState::fresh(1, 0.1);
  adam_step(param, vec({1}), state);
  // m_hat = 1, v_hat = 1, step = 0.1 * 1 / (1 + 1e-8)
  CHECK(std::abs(param[0] - (-0.1 / (1.0 + 1e-8))) < 1e-15);
  CHECK(state.step_count == 1);
}

TEST_CASE("two Adam steps with constant gradient keep decreasing") {
  Vector param = vec({0});
  AdamState state = AdamState::fresh(1, 0.1);
  adam_step(param, vec({1}), state);
  const double after_one = param[0];
  adam_step(param, vec({1}), state);
  // t=2: m = 0.19, v = 0.001999; both bias corrections give 1, so the step is again lr.
  const double m_hat = 0.19 / (1 - 0.81);
  const double v_hat = (0.001 * 0.999 + 0.001) / (1 - 0.999 * 0.999);
  CHECK(param[0] < after_one);
  CHECK(std::abs(param[0] - (after_one - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8))) < 1e-12);
  CHECK(state.step_count == 2);
}

TEST_CASE("Adam with zero gradient is a no-op") {
  SeededRng rng(3);
  Vector param = random_vector(rng, 16, 1.0);
  const Vector before = param;
  AdamState state = AdamState::fresh(16, 0.01);
  adam_step(param, Vector::Zero(16), state);
  CHECK(param == before);
  CHECK(state.step_count == 1);
}

TEST_CASE("Adam rejects mismatched lengths") {
  Vector param = Vector::Zero(3);
  AdamState state = AdamState::fresh(3, 0.01);
  CHECK_THROWS_AS(adam_step(param, Vector::Zero(2), state), UsageError);
  AdamState other = AdamState::fresh(4, 0.01);
  CHECK_THROWS_AS(adam_step(param, Vector::Zero(3), other), UsageError);
}

TEST_CASE("finite differences of simple functions") {
  const Vector g = finite_diff_grad([](const Vector& x) { return x[0] * x[0]; }, vec({3}), 1e-5);
  CHECK(std::abs(g[0] - 6.0) < 1e-6);
  const Vector z = finite_diff_grad([](const Vector&) { return 4.0; }, vec({1, 2, 3}));
  CHECK(z.isZero(0.0));
  CHECK_THROWS_AS(finite_diff_grad([](const Vector&) { return std::nan(""); }, vec({1})),
                  ValidationError);
  CHECK_THROWS_AS(finite_diff_grad([](const Vector& x) { return x[0]; }, vec({1}), 0.0),
                  UsageError);
}

TEST_CASE("rng is reproducible and streams differ") {
  SeededRng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  const SeededRng root(9);
  SeededRng s1 = root.split(1), s1b = root.split(1), s2 = root.split(2);
  CHECK(s1.next_u64() == s1b.next_u64());
  CHECK(root.split(1).next_u64() != s2.next_u64());
}

TEST_CASE("splitmix64 reference values") {
  // The reference generator seeded with 0 emits splitmix64(0), splitmix64(gamma), ...
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafull);
  CHECK(splitmix64(0x9e3779b97f4a7c15ull) == 0x6e789e6aa1b965f4ull);
}

TEST_CASE("uniform draws stay in range") {
  SeededRng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(rng.uniform_index(7) < 7);
  }
  CHECK_THROWS_AS(rng.uniform_index(0), UsageError);
}

TEST_CASE("sampling without replacement yields distinct indices") {
  SeededRng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto picks = rng.sample_without_replacement(20, 7);
    CHECK(picks.size() == 7);
    CHECK(std::set<std::size_t>(picks.begin(), picks.end()).size() == 7);
    for (std::size_t p : picks) CHECK(p < 20);
  }
  CHECK(rng.sample_without_replacement(5, 5).size() == 5);
  CHECK_THROWS_AS(rng.sample_without_replacement(3, 4), UsageError);
}

TEST_CASE("shuffle is a permutation") {
  SeededRng rng(2);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(std::span(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}
