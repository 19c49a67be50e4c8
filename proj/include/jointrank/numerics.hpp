// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
//
// Numeric kernels shared by the scorers, losses and trainer: stable softmax
// and log-sum-exp over Eigen expressions, Adam, a counter-based RNG, and a
// central-difference gradient used as a test oracle.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "jointrank/errors.hpp"

namespace jointrank {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.derived().array().isFinite().all();
}

namespace detail {

template <typename Derived>
void require_scores(const Eigen::MatrixBase<Derived>& scores, const char* op) {
  if (scores.size() == 0) throw UsageError(std::string(op) + ": empty score list");
  if (!all_finite(scores)) throw ValidationError(std::string(op) + ": non-finite score");
}

}  // namespace detail

/// ln(sum_i exp(s_i)), shifted by max(s) so large scores do not overflow.
template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& scores) {
  detail::require_scores(scores, "log_sum_exp");
  const double top = scores.maxCoeff();
  if (scores.size() == 1) return top;
  return top + std::log((scores.array() - top).exp().sum());
}

/// Softmax with max-subtraction. Output is a column vector of the same length.
template <typename Derived>
Vector stable_softmax(const Eigen::MatrixBase<Derived>& scores) {
  detail::require_scores(scores, "stable_softmax");
  Vector shifted = scores.reshaped();
  shifted.array() -= shifted.maxCoeff();
  Vector out = shifted.array().exp();
  out /= out.sum();
  return out;
}

/// s - log_sum_exp(s), evaluated without forming the probabilities first.
template <typename Derived>
Vector log_softmax(const Eigen::MatrixBase<Derived>& scores) {
  const double lse = log_sum_exp(scores);
  Vector out = scores.reshaped();
  out.array() -= lse;
  return out;
}

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  static AdamState fresh(Eigen::Index size, double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8);
};

/// One bias-corrected Adam update, in place on both params and state.
void adam_step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads,
               AdamState& state);

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / 2 eps for every i.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& point,
                        double eps = 1e-5);

/// Counter-based generator: output n is a SplitMix64 finalizer applied to
/// key + n * golden_gamma. Identical on every platform; split() derives an
/// independent stream keyed by an integer.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased uniform integer in [0, bound).
  std::uint64_t uniform_index(std::uint64_t bound);

  SeededRng split(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  /// Fills a matrix with iid uniform [lo, hi) draws in column-major order.
  void fill_uniform(Eigen::Ref<Matrix> out, double lo, double hi);

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace jointrank
