// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include "jointrank/retrieval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <queue>

#include "jointrank/errors.hpp"

namespace jointrank {

bool ranks_before(double score_a, const std::string& id_a, double score_b,
                  const std::string& id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

ExactIndex build_index(const DualEncoder& retriever, const Corpus& corpus) {
  ExactIndex index;
  index.embeddings.resize(retriever.dims().out_dim, static_cast<Eigen::Index>(corpus.size()));
  index.ids.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    index.embeddings.col(static_cast<Eigen::Index>(i)) =
        retriever.encode_passage(corpus[i].tokens);
    index.ids.push_back(corpus[i].id);
  }
  return index;
}

std::vector<Hit> top_k(const ExactIndex& index, const Eigen::Ref<const Vector>& query_emb,
                       std::size_t k) {
  if (index.size() == 0) throw UsageError("top_k: empty index");
  if (k == 0) throw UsageError("top_k: k must be at least 1");
  if (query_emb.size() != index.embeddings.rows()) {
    throw UsageError("top_k: query embedding has the wrong length");
  }
  if (k > index.size()) {
    spdlog::warn("top_k: k={} exceeds index size {}, clamping", k, index.size());
    k = index.size();
  }
  const Vector scores = index.embeddings.transpose() * query_emb;
  auto better = [&](const Hit& a, const Hit& b) {
    return ranks_before(a.score, index.ids[a.passage], b.score, index.ids[b.passage]);
  };
  // Max-heap under `better` keeps the weakest retained hit on top.
  std::priority_queue<Hit, std::vector<Hit>, decltype(better)> heap(better);
  for (std::size_t i = 0; i < index.size(); ++i) {
    Hit hit{i, scores[static_cast<Eigen::Index>(i)]};
    if (heap.size() < k) {
      heap.push(hit);
    } else if (better(hit, heap.top())) {
      heap.pop();
      heap.push(hit);
    }
  }
  std::vector<Hit> out(heap.size());
  for (auto it = out.rbegin(); it != out.rend(); ++it) {
    *it = heap.top();
    heap.pop();
  }
  return out;
}

std::vector<Hit> rerank(const CrossEncoder& reranker, std::span<const TokenId> query,
                        std::span<const std::string> candidate_ids, const Corpus& corpus) {
  std::vector<Hit> hits;
  hits.reserve(candidate_ids.size());
  for (const auto& id : candidate_ids) {
    const std::size_t idx = corpus.index_of(id);
    hits.push_back({idx, score_ce(reranker, query, corpus[idx].tokens)});
  }
  std::stable_sort(hits.begin(), hits.end(), [&](const Hit& a, const Hit& b) {
    return ranks_before(a.score, corpus[a.passage].id, b.score, corpus[b.passage].id);
  });
  return hits;
}

namespace {

/// Rank of the first positive within the top k, or 0 when there is none.
std::size_t first_positive_rank(const std::string& qid, const std::vector<RunEntry>& entries,
                                const Qrels& qrels, std::size_t k) {
  auto it = qrels.find(qid);
  if (it == qrels.end()) throw ValidationError("run query " + qid + " missing from qrels");
  std::size_t best = 0;
  for (const RunEntry& e : entries) {
    if (e.rank > k || !it->second.contains(e.passage_id)) continue;
    if (best == 0 || e.rank < best) best = e.rank;
  }
  return best;
}

}  // namespace

double mrr_at_k(const RunFile& run, const Qrels& qrels, std::size_t k) {
  if (run.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [qid, entries] : run) {
    const std::size_t rank = first_positive_rank(qid, entries, qrels, k);
    if (rank > 0) total += 1.0 / static_cast<double>(rank);
  }
  return total / static_cast<double>(run.size());
}

double recall_at_k(const RunFile& run, const Qrels& qrels, std::size_t k) {
  if (run.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& [qid, entries] : run) {
    if (first_positive_rank(qid, entries, qrels, k) > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(run.size());
}

Metrics standard_metrics(const RunFile& run, const Qrels& qrels, std::size_t extra_recall_k) {
  Metrics m;
  m.emplace_back("MRR@10", mrr_at_k(run, qrels, 10));
  for (std::size_t k : {5, 10, 50}) {
    m.emplace_back("Recall@" + std::to_string(k), recall_at_k(run, qrels, k));
  }
  if (extra_recall_k != 0 && extra_recall_k != 5 && extra_recall_k != 10 &&
      extra_recall_k != 50) {
    m.emplace_back("Recall@" + std::to_string(extra_recall_k),
                   recall_at_k(run, qrels, extra_recall_k));
  }
  return m;
}

double metric_value(const Metrics& metrics, const std::string& name) {
  for (const auto& [key, value] : metrics) {
    if (key == name) return value;
  }
  throw UsageError("no metric named " + name);
}

namespace {

std::vector<RunEntry> to_entries(const std::vector<Hit>& hits, const Corpus& corpus) {
  std::vector<RunEntry> entries;
  entries.reserve(hits.size());
  for (std::size_t r = 0; r < hits.size(); ++r) {
    entries.push_back({corpus[hits[r].passage].id, r + 1, hits[r].score});
  }
  return entries;
}

}  // namespace

RunFile retrieve_run(const DualEncoder& retriever, const Corpus& corpus,
                     std::span<const Query> queries, std::size_t k) {
  const ExactIndex index = build_index(retriever, corpus);
  RunFile run;
  for (const Query& q : queries) {
    run[q.id] = to_entries(top_k(index, retriever.encode_query(q.tokens), k), corpus);
  }
  return run;
}

PipelineResult pipeline_eval(const DualEncoder& retriever, const CrossEncoder& reranker,
                             const Corpus& corpus, std::span<const Query> queries,
                             const Qrels& qrels, std::size_t k_retrieve, std::size_t k_report) {
  if (k_report == 0 || k_report > k_retrieve) {
    throw UsageError("pipeline_eval: need 1 <= k_report <= k_retrieve");
  }
  PipelineResult result;
  result.retriever_run = retrieve_run(retriever, corpus, queries, k_retrieve);
  for (const Query& q : queries) {
    std::vector<std::string> ids;
    for (const RunEntry& e : result.retriever_run.at(q.id)) ids.push_back(e.passage_id);
    result.reranked_run[q.id] = to_entries(rerank(reranker, q.tokens, ids, corpus), corpus);
  }
  result.retriever = standard_metrics(result.retriever_run, qrels, k_report);
  result.reranked = standard_metrics(result.reranked_run, qrels, k_report);
  return result;
}

void write_metrics(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, Metrics>>& stages) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& [stage, metrics] : stages) {
    for (const auto& [name, value] : metrics) {
      out << name << '\t' << stage << '\t' << format_real(value) << '\n';
    }
  }
}

}  // namespace jointrank
