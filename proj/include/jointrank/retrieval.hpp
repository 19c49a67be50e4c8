// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact dot-product retrieval, re-ranking, and MRR@k / Recall@k.
// Every ranking orders by score descending, then passage id ascending.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "jointrank/corpus.hpp"
#include "jointrank/models.hpp"

namespace jointrank {

struct Hit {
  std::size_t passage = 0;  // corpus index
  double score = 0.0;
};

/// All passage embeddings of one retriever snapshot, one column per passage.
struct ExactIndex {
  Matrix embeddings;  // d x M
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return ids.size(); }
};

ExactIndex build_index(const DualEncoder& retriever, const Corpus& corpus);

/// Exact top-k by dot product using bounded selection. k > M is clamped.
std::vector<Hit> top_k(const ExactIndex& index, const Eigen::Ref<const Vector>& query_emb,
                       std::size_t k);

/// Candidates re-sorted by s_ce; a permutation of the input.
std::vector<Hit> rerank(const CrossEncoder& reranker, std::span<const TokenId> query,
                        std::span<const std::string> candidate_ids, const Corpus& corpus);

/// Higher score first, ties by ascending id.
bool ranks_before(double score_a, const std::string& id_a, double score_b,
                  const std::string& id_b);

double mrr_at_k(const RunFile& run, const Qrels& qrels, std::size_t k);
double recall_at_k(const RunFile& run, const Qrels& qrels, std::size_t k);

/// Ordered (name, value) pairs, e.g. ("MRR@10", 0.31).
using Metrics = std::vector<std::pair<std::string, double>>;

/// MRR@10 and Recall@{5,10,50}, plus Recall@extra_recall_k when it is not
/// already in that list.
Metrics standard_metrics(const RunFile& run, const Qrels& qrels, std::size_t extra_recall_k = 0);

double metric_value(const Metrics& metrics, const std::string& name);

struct PipelineResult {
  Metrics retriever;
  Metrics reranked;
  RunFile retriever_run;
  RunFile reranked_run;
};

/// Retrieve k_retrieve candidates per query, re-rank them, and score both stages.
/// k_report (<= k_retrieve) adds a Recall@k_report row to both metric sets.
PipelineResult pipeline_eval(const DualEncoder& retriever, const CrossEncoder& reranker,
                             const Corpus& corpus, std::span<const Query> queries,
                             const Qrels& qrels, std::size_t k_retrieve, std::size_t k_report);

/// Retriever-only run for a query set.
RunFile retrieve_run(const DualEncoder& retriever, const Corpus& corpus,
                     std::span<const Query> queries, std::size_t k);

/// Lines "metric \t stage \t value".
void write_metrics(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, Metrics>>& stages);

}  // namespace jointrank
