// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training objectives as pure functions from score lists to a value and the
// gradient with respect to those scores. Scores for a batch are laid out list
// by list; `list_sizes` gives the boundaries.
#pragma once

#include <span>
#include <vector>

#include "jointrank/numerics.hpp"

namespace jointrank {

/// Listwise relevance distribution: softmax over one candidate list.
template <typename Derived>
Vector normalize_listwise(const Eigen::MatrixBase<Derived>& scores) {
  return stable_softmax(scores);
}

struct KlResult {
  double value = 0.0;
  Vector grad_de;
  Vector grad_ce;
};

/// KL(softmax(de) || softmax(ce)) for one list; both arguments get gradients.
KlResult kl_loss(const Eigen::Ref<const Vector>& de_scores,
                 const Eigen::Ref<const Vector>& ce_scores);

struct ScalarLoss {
  double value = 0.0;
  Vector grad;
};

/// -log softmax(ce)[positive] for a list with exactly one label equal to 1.
ScalarLoss sup_ce_loss(const Eigen::Ref<const Vector>& ce_scores, std::span<const int> labels);

/// Logistic binary cross-entropy on a single score.
struct PointwiseLoss {
  double value = 0.0;
  double grad = 0.0;
};
PointwiseLoss pointwise_loss(double score, int label);

struct LossReport {
  double l_kl = 0.0;
  double l_sup = 0.0;
  double l_final = 0.0;
  Vector grad_wrt_de_scores;
  Vector grad_wrt_ce_scores;
  std::size_t instance_count = 0;
};

/// Batched joint objective. Both terms are averaged over the N lists;
/// the retriever gradient comes only from the KL term.
LossReport final_loss(const Eigen::Ref<const Vector>& de_scores,
                      const Eigen::Ref<const Vector>& ce_scores,
                      std::span<const std::size_t> list_sizes, std::span<const int> labels);

/// Pointwise re-ranker variant: l_sup is the per-list mean of pointwise
/// losses, averaged over lists; the KL term compares the retriever against
/// the listwise-normalized re-ranker scores and only feeds the retriever.
LossReport pointwise_final_loss(const Eigen::Ref<const Vector>& de_scores,
                                const Eigen::Ref<const Vector>& ce_scores,
                                std::span<const std::size_t> list_sizes,
                                std::span<const int> labels);

}  // namespace jointrank
