// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include "jointrank/numerics.hpp"

#include <limits>
#include <numeric>
#include <string>

namespace jointrank {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGoldenGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

AdamState AdamState::fresh(Eigen::Index size, double learning_rate, double beta1, double beta2,
                           double epsilon) {
  AdamState state;
  state.first_moment = Vector::Zero(size);
  state.second_moment = Vector::Zero(size);
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.epsilon = epsilon;
  state.learning_rate = learning_rate;
  return state;
}

void adam_step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw UsageError("adam_step: parameter, gradient and moment lengths differ");
  }
  if (!(state.learning_rate > 0.0) || !(state.epsilon > 0.0) || !(state.beta1 > 0.0) ||
      !(state.beta1 < 1.0) || !(state.beta2 > 0.0) || !(state.beta2 < 1.0)) {
    throw UsageError("adam_step: hyperparameters out of range");
  }
  if (!all_finite(grads)) throw ValidationError("adam_step: non-finite gradient");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  params.array() -= state.learning_rate * (state.first_moment.array() / bias1) /
                    ((state.second_moment.array() / bias2).sqrt() + state.epsilon);
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& point,
                        double eps) {
  if (!(eps > 0.0)) throw UsageError("finite_diff_grad: eps must be positive");
  Vector x = point;
  Vector grad(point.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = f(x);
    x[i] = saved - eps;
    const double down = f(x);
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw ValidationError("finite_diff_grad: non-finite value at coordinate " +
                            std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), key_(splitmix64(seed)) {}

std::uint64_t SeededRng::next_u64() {
  ++counter_;
  return splitmix64(key_ + counter_ * kGoldenGamma);
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw UsageError("uniform_index: bound must be positive");
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = next_u64();
  while (draw >= limit) draw = next_u64();
  return draw % bound;
}

SeededRng SeededRng::split(std::uint64_t stream) const {
  return SeededRng(splitmix64(key_ ^ splitmix64(stream ^ 0xD1B54A32D192ED03ULL)));
}

std::vector<std::size_t> SeededRng::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw UsageError("sample_without_replacement: k exceeds population");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + uniform_index(n - i)]);
  }
  pool.resize(k);
  return pool;
}

void SeededRng::fill_uniform(Eigen::Ref<Matrix> out, double lo, double hi) {
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = uniform(lo, hi);
  }
}

}  // namespace jointrank
