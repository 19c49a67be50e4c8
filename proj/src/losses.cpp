// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include "jointrank/losses.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace jointrank {

KlResult kl_loss(const Eigen::Ref<const Vector>& de_scores,
                 const Eigen::Ref<const Vector>& ce_scores) {
  if (de_scores.size() != ce_scores.size()) throw UsageError("kl_loss: list lengths differ");
  const Vector log_p = log_softmax(de_scores);
  const Vector log_q = log_softmax(ce_scores);
  const Vector p = log_p.array().exp();
  const Vector q = log_q.array().exp();
  const Vector log_ratio = log_p - log_q;

  KlResult out;
  // Clamp the last-ulp negatives that appear when p and q coincide.
  out.value = std::max(0.0, p.dot(log_ratio));
  // d/dde_j = p_j (log(p_j/q_j) - KL);  d/dce_j = q_j - p_j.
  out.grad_de = p.cwiseProduct((log_ratio.array() - p.dot(log_ratio)).matrix());
  out.grad_ce = q - p;
  return out;
}

ScalarLoss sup_ce_loss(const Eigen::Ref<const Vector>& ce_scores, std::span<const int> labels) {
  if (static_cast<std::size_t>(ce_scores.size()) != labels.size()) {
    throw UsageError("sup_ce_loss: score and label counts differ");
  }
  Eigen::Index positive = -1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      if (positive >= 0) throw ValidationError("sup_ce_loss: more than one positive label");
      positive = static_cast<Eigen::Index>(i);
    } else if (labels[i] != 0) {
      throw ValidationError("sup_ce_loss: labels must be 0 or 1");
    }
  }
  if (positive < 0) throw ValidationError("sup_ce_loss: no positive label");

  ScalarLoss out;
  out.value = log_sum_exp(ce_scores) - ce_scores[positive];
  out.grad = stable_softmax(ce_scores);
  out.grad[positive] -= 1.0;
  return out;
}

PointwiseLoss pointwise_loss(double score, int label) {
  if (!std::isfinite(score)) throw ValidationError("pointwise_loss: non-finite score");
  if (label != 0 && label != 1) throw ValidationError("pointwise_loss: label must be 0 or 1");
  // softplus(s) - y s, with softplus(s) = max(s, 0) + log1p(exp(-|s|)).
  const double softplus = std::max(score, 0.0) + std::log1p(std::exp(-std::abs(score)));
  const double sigmoid =
      score >= 0 ? 1.0 / (1.0 + std::exp(-score)) : std::exp(score) / (1.0 + std::exp(score));
  return {softplus - label * score, sigmoid - label};
}

namespace {

void check_layout(const Eigen::Ref<const Vector>& de_scores,
                  const Eigen::Ref<const Vector>& ce_scores,
                  std::span<const std::size_t> list_sizes, std::span<const int> labels) {
  const std::size_t total = std::accumulate(list_sizes.begin(), list_sizes.end(), std::size_t{0});
  if (list_sizes.empty()) throw UsageError("final_loss: empty batch");
  if (static_cast<std::size_t>(de_scores.size()) != total ||
      static_cast<std::size_t>(ce_scores.size()) != total || labels.size() != total) {
    throw UsageError("final_loss: scores, labels and list sizes disagree");
  }
  for (std::size_t m : list_sizes) {
    if (m == 0) throw UsageError("final_loss: empty candidate list");
  }
}

}  // namespace

LossReport final_loss(const Eigen::Ref<const Vector>& de_scores,
                      const Eigen::Ref<const Vector>& ce_scores,
                      std::span<const std::size_t> list_sizes, std::span<const int> labels) {
  check_layout(de_scores, ce_scores, list_sizes, labels);
  LossReport report;
  report.instance_count = list_sizes.size();
  report.grad_wrt_de_scores = Vector::Zero(de_scores.size());
  report.grad_wrt_ce_scores = Vector::Zero(ce_scores.size());
  const double inv_n = 1.0 / static_cast<double>(list_sizes.size());

  Eigen::Index offset = 0;
  for (std::size_t m : list_sizes) {
    const auto len = static_cast<Eigen::Index>(m);
    const KlResult kl = kl_loss(de_scores.segment(offset, len), ce_scores.segment(offset, len));
    const ScalarLoss sup =
        sup_ce_loss(ce_scores.segment(offset, len), labels.subspan(offset, m));
    report.l_kl += kl.value;
    report.l_sup += sup.value;
    report.grad_wrt_de_scores.segment(offset, len) = inv_n * kl.grad_de;
    report.grad_wrt_ce_scores.segment(offset, len) = inv_n * (kl.grad_ce + sup.grad);
    offset += len;
  }
  report.l_kl *= inv_n;
  report.l_sup *= inv_n;
  report.l_final = report.l_kl + report.l_sup;
  return report;
}

LossReport pointwise_final_loss(const Eigen::Ref<const Vector>& de_scores,
                                const Eigen::Ref<const Vector>& ce_scores,
                                std::span<const std::size_t> list_sizes,
                                std::span<const int> labels) {
  check_layout(de_scores, ce_scores, list_sizes, labels);
  LossReport report;
  report.instance_count = list_sizes.size();
  report.grad_wrt_de_scores = Vector::Zero(de_scores.size());
  report.grad_wrt_ce_scores = Vector::Zero(ce_scores.size());
  const double inv_n = 1.0 / static_cast<double>(list_sizes.size());

  Eigen::Index offset = 0;
  for (std::size_t m : list_sizes) {
    const auto len = static_cast<Eigen::Index>(m);
    const KlResult kl = kl_loss(de_scores.segment(offset, len), ce_scores.segment(offset, len));
    report.l_kl += kl.value;
    report.grad_wrt_de_scores.segment(offset, len) = inv_n * kl.grad_de;
    const double inv_m = 1.0 / static_cast<double>(m);
    for (Eigen::Index i = 0; i < len; ++i) {
      const PointwiseLoss pw = pointwise_loss(ce_scores[offset + i], labels[offset + i]);
      report.l_sup += inv_n * inv_m * pw.value;
      report.grad_wrt_ce_scores[offset + i] = inv_n * inv_m * pw.grad;
    }
    offset += len;
  }
  report.l_kl *= inv_n;
  report.l_final = report.l_kl + report.l_sup;
  return report;
}

}  // namespace jointrank
