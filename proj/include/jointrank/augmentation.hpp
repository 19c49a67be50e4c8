// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hybrid data augmentation. A warm-start retriever proposes the top-n
// passages for each query; an undenoised instance pairs the ground-truth
// positive with random non-positive picks from that pool, while a denoised
// instance keeps only candidates the re-ranker is confident about.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jointrank/corpus.hpp"
#include "jointrank/models.hpp"
#include "jointrank/retrieval.hpp"

namespace jointrank {

struct CandidatePool {
  std::string query_id;
  std::vector<Hit> hits;  // ranked, score descending then passage id ascending
};

enum class Provenance : char {
  ground_truth = 'G',
  undenoised = 'U',
  denoised = 'D',
};

/// One listwise training example. The positive sits at index 0.
struct TrainingInstance {
  std::string query_id;
  std::vector<std::string> candidates;
  std::vector<int> labels;
  Provenance positive_provenance = Provenance::ground_truth;
  std::vector<Provenance> negative_provenance;

  std::size_t size() const noexcept { return candidates.size(); }
  const std::string& positive() const { return candidates.front(); }
  /// True when built from re-ranker-filtered candidates.
  bool is_denoised() const;
};

/// Throws ValidationError if an instance breaks the one-positive-first,
/// no-duplicates layout.
void validate_instance(const TrainingInstance& instance);

CandidatePool retrieve_candidates(const DualEncoder& retriever, const ExactIndex& index,
                                  const Query& query, std::size_t n);

/// Ground-truth positive (smallest id) plus n_neg negatives drawn uniformly
/// without replacement from the non-positive pool entries. nullopt when the
/// pool is too small.
std::optional<TrainingInstance> sample_undenoised(const CandidatePool& pool, const Corpus& corpus,
                                                  const Qrels& qrels, std::size_t n_neg,
                                                  SeededRng& rng);

struct Thresholds {
  double positive = 0.9;
  double negative = 0.1;
};

struct DenoiseResult {
  std::vector<Hit> positives;  // confidence > t_pos, labeled or not, most confident first
  std::vector<Hit> negatives;  // non-positives with confidence < t_neg, pool order
};

/// Confidence is the logistic of s_ce. Candidates in [t_neg, t_pos] are dropped.
DenoiseResult denoise(const CandidatePool& pool, const Corpus& corpus, const Query& query,
                      const CrossEncoder& reranker, const Thresholds& thresholds,
                      const Qrels& qrels);

struct AugmentConfig {
  std::size_t retrieve_depth = 50;  // n
  std::size_t n_neg = 7;
  double denoised_fraction = 0.5;
  Thresholds thresholds;

  void validate() const;
};

struct AugmentResult {
  std::vector<TrainingInstance> instances;  // in query order
  std::size_t skipped = 0;
};

AugmentResult build_instances(const Corpus& corpus, std::span<const Query> queries,
                              const Qrels& qrels, const DualEncoder& retriever,
                              const CrossEncoder& reranker, const AugmentConfig& config,
                              std::uint64_t seed);

// Instance file: query_id \t positive_id \t comma-separated negative ids \t flags,
// where flags are the positive's provenance letter, ':', then one letter per
// negative (G ground truth, U undenoised, D denoised).
void write_instances(const std::filesystem::path& path,
                     const std::vector<TrainingInstance>& instances);
std::vector<TrainingInstance> read_instances(const std::filesystem::path& path);

}  // namespace jointrank
