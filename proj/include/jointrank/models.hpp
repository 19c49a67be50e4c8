// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
//
// The two scorers. Both keep every weight in one flat Eigen vector with a
// fixed block order, and expose typed Map views over it, so the optimizer
// and the finite-difference oracle address the same coordinates the forward
// pass reads.
//
//   Dual encoder (per tower, query tower first):
//     embeddings (emb x vocab), W1 (hidden x emb), b1 (hidden), W2 (out x hidden), b2 (out)
//     encode(t) = W2 tanh(W1 mean_j E[:, t_j] + b1) + b2,   s_de = <E_Q(q), E_P(p)>
//
//   Cross encoder (one shared table):
//     embeddings (emb x vocab), W1 (hidden x 3 emb), b1 (hidden), w2 (hidden), b2 (1)
//     f = [pool(q); pool(p); pool(q) .* pool(p)],   s_ce = w2 . tanh(W1 f + b1) + b2
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <type_traits>
#include <vector>

#include "jointrank/corpus.hpp"
#include "jointrank/numerics.hpp"

namespace jointrank {

struct ModelDims {
  std::int32_t vocab_size = 500;
  Eigen::Index emb_dim = 64;
  Eigen::Index hidden_dim = 64;
  Eigen::Index out_dim = 64;  // d, the retrieval embedding width

  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Typed views over one encoder tower inside a flat parameter vector.
template <bool Const>
struct TowerView {
  template <typename T>
  using MapOf = std::conditional_t<Const, Eigen::Map<const T>, Eigen::Map<T>>;
  using Pointer = std::conditional_t<Const, const double*, double*>;

  MapOf<Matrix> embeddings;
  MapOf<Matrix> w1;
  MapOf<Vector> b1;
  MapOf<Matrix> w2;
  MapOf<Vector> b2;
};

using ConstTower = TowerView<true>;
using MutableTower = TowerView<false>;

/// One list to score: a query and its candidate passages.
struct ScoredList {
  std::span<const TokenId> query;
  std::vector<std::span<const TokenId>> candidates;
};

using Batch = std::span<const ScoredList>;

/// Total number of (query, candidate) scores in a batch.
std::size_t score_count(Batch batch);

class DualEncoder {
 public:
  DualEncoder() = default;
  /// Zero-initialized parameters.
  explicit DualEncoder(const ModelDims& dims);
  DualEncoder(const ModelDims& dims, Vector parameters);

  /// Embeddings and weights uniform in [-0.1, 0.1], biases zero.
  static DualEncoder random(const ModelDims& dims, SeededRng& rng);
  static Eigen::Index parameter_count(const ModelDims& dims);
  static Eigen::Index tower_size(const ModelDims& dims);

  const ModelDims& dims() const noexcept { return dims_; }
  const Vector& parameters() const noexcept { return theta_; }
  Vector& parameters() noexcept { return theta_; }

  ConstTower query_tower() const;
  ConstTower passage_tower() const;

  Vector encode_query(std::span<const TokenId> tokens) const;
  Vector encode_passage(std::span<const TokenId> tokens) const;

 private:
  ModelDims dims_;
  Vector theta_;
};

class CrossEncoder {
 public:
  CrossEncoder() = default;
  explicit CrossEncoder(const ModelDims& dims);
  CrossEncoder(const ModelDims& dims, Vector parameters);

  static CrossEncoder random(const ModelDims& dims, SeededRng& rng);
  static Eigen::Index parameter_count(const ModelDims& dims);

  const ModelDims& dims() const noexcept { return dims_; }
  const Vector& parameters() const noexcept { return theta_; }
  Vector& parameters() noexcept { return theta_; }

  Eigen::Map<const Matrix> embeddings() const;
  Eigen::Map<const Matrix> w1() const;
  Eigen::Map<const Vector> b1() const;
  Eigen::Map<const Vector> w2() const;
  double b2() const;

 private:
  ModelDims dims_;
  Vector theta_;
};

/// Views a tower of the given dims starting at data.
template <bool Const>
TowerView<Const> tower_view(typename TowerView<Const>::Pointer data, const ModelDims& dims) {
  const auto e = dims.emb_dim, h = dims.hidden_dim, d = dims.out_dim;
  const auto v = static_cast<Eigen::Index>(dims.vocab_size);
  auto* w1 = data + e * v;
  auto* b1 = w1 + h * e;
  auto* w2 = b1 + h;
  auto* b2 = w2 + d * h;
  return {{data, e, v}, {w1, h, e}, {b1, h}, {w2, d, h}, {b2, d}};
}

/// mean-pool -> affine -> tanh -> affine, for one tower.
Vector encode(const ConstTower& tower, std::span<const TokenId> tokens);

/// Plain dot product.
double score_de(const Eigen::Ref<const Vector>& query_emb,
                const Eigen::Ref<const Vector>& passage_emb);

double score_ce(const CrossEncoder& model, std::span<const TokenId> query,
                std::span<const TokenId> passage);

/// All s_de scores of a batch, list by list.
Vector score_batch(const DualEncoder& model, Batch batch);
/// All s_ce scores of a batch, list by list.
Vector score_batch(const CrossEncoder& model, Batch batch);

/// d(sum_i upstream_i * s_de,i) / d(theta).
Vector grad_de(const DualEncoder& model, Batch batch, const Eigen::Ref<const Vector>& upstream);
/// d(sum_i upstream_i * s_ce,i) / d(theta).
Vector grad_ce(const CrossEncoder& model, Batch batch, const Eigen::Ref<const Vector>& upstream);

// Checkpoints: "JRCK", u32 format version, u32 kind, u64 vocab_size, emb_dim,
// hidden_dim, out_dim, parameter count, then the flat parameters as
// little-endian IEEE-754 doubles.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const DualEncoder& model);
void save_checkpoint(const std::filesystem::path& path, const CrossEncoder& model);
DualEncoder load_dual_encoder(const std::filesystem::path& path);
CrossEncoder load_cross_encoder(const std::filesystem::path& path);

}  // namespace jointrank
