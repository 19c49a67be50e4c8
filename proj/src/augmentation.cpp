// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include "jointrank/augmentation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "jointrank/errors.hpp"

namespace jointrank {

bool TrainingInstance::is_denoised() const {
  if (positive_provenance == Provenance::denoised) return true;
  return std::any_of(negative_provenance.begin(), negative_provenance.end(),
                     [](Provenance p) { return p == Provenance::denoised; });
}

void validate_instance(const TrainingInstance& instance) {
  const auto& c = instance.candidates;
  if (c.empty() || instance.labels.size() != c.size() ||
      instance.negative_provenance.size() + 1 != c.size()) {
    throw ValidationError("instance " + instance.query_id + ": inconsistent list sizes");
  }
  if (instance.labels.front() != 1 ||
      std::count(instance.labels.begin(), instance.labels.end(), 1) != 1 ||
      std::count(instance.labels.begin(), instance.labels.end(), 0) + 1 !=
          static_cast<std::ptrdiff_t>(c.size())) {
    throw ValidationError("instance " + instance.query_id +
                          ": needs exactly one positive, at position 0");
  }
  if (std::set<std::string>(c.begin(), c.end()).size() != c.size()) {
    throw ValidationError("instance " + instance.query_id + ": duplicate candidate");
  }
}

CandidatePool retrieve_candidates(const DualEncoder& retriever, const ExactIndex& index,
                                  const Query& query, std::size_t n) {
  if (index.size() == 0) throw UsageError("retrieve_candidates: empty corpus");
  if (n == 0) throw UsageError("retrieve_candidates: n must be at least 1");
  return {query.id, top_k(index, retriever.encode_query(query.tokens),
                          std::min(n, index.size()))};
}

namespace {

const std::set<std::string>& positives_of(const Qrels& qrels, const std::string& qid) {
  auto it = qrels.find(qid);
  if (it == qrels.end() || it->second.empty()) {
    throw ValidationError("query " + qid + " has no positive in qrels");
  }
  return it->second;
}

TrainingInstance make_instance(const std::string& qid, std::string positive,
                               Provenance positive_provenance) {
  TrainingInstance inst;
  inst.query_id = qid;
  inst.candidates.push_back(std::move(positive));
  inst.labels.push_back(1);
  inst.positive_provenance = positive_provenance;
  return inst;
}

void add_negatives(TrainingInstance& inst, const std::vector<Hit>& eligible,
                   const std::vector<std::size_t>& picks, const Corpus& corpus,
                   Provenance provenance) {
  for (std::size_t i : picks) {
    inst.candidates.push_back(corpus[eligible[i].passage].id);
    inst.labels.push_back(0);
    inst.negative_provenance.push_back(provenance);
  }
}

double logistic(double s) {
  return s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
}

}  // namespace

std::optional<TrainingInstance> sample_undenoised(const CandidatePool& pool, const Corpus& corpus,
                                                  const Qrels& qrels, std::size_t n_neg,
                                                  SeededRng& rng) {
  const auto& positives = positives_of(qrels, pool.query_id);
  const std::string& positive = *positives.begin();
  corpus.index_of(positive);

  std::vector<Hit> eligible;
  for (const Hit& h : pool.hits) {
    if (!positives.contains(corpus[h.passage].id)) eligible.push_back(h);
  }
  if (eligible.size() < n_neg) {
    spdlog::warn("query {}: {} eligible negatives in pool, need {}; skipping", pool.query_id,
                 eligible.size(), n_neg);
    return std::nullopt;
  }
  TrainingInstance inst = make_instance(pool.query_id, positive, Provenance::ground_truth);
  add_negatives(inst, eligible, rng.sample_without_replacement(eligible.size(), n_neg), corpus,
                Provenance::undenoised);
  return inst;
}

DenoiseResult denoise(const CandidatePool& pool, const Corpus& corpus, const Query& query,
                      const CrossEncoder& reranker, const Thresholds& thresholds,
                      const Qrels& qrels) {
  if (!(0.0 <= thresholds.negative && thresholds.negative <= thresholds.positive &&
        thresholds.positive <= 1.0)) {
    throw UsageError("denoise: need 0 <= t_neg <= t_pos <= 1");
  }
  const auto& positives = positives_of(qrels, pool.query_id);
  DenoiseResult result;
  std::vector<std::pair<double, Hit>> confident;
  for (const Hit& h : pool.hits) {
    const Passage& p = corpus[h.passage];
    const double confidence = logistic(score_ce(reranker, query.tokens, p.tokens));
    const bool labeled = positives.contains(p.id);
    if (confidence > thresholds.positive) {
      confident.emplace_back(confidence, h);
    } else if (confidence < thresholds.negative && !labeled) {
      result.negatives.push_back(h);
    }
  }
  std::stable_sort(confident.begin(), confident.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [c, h] : confident) result.positives.push_back(h);
  return result;
}

void AugmentConfig::validate() const {
  if (retrieve_depth == 0) throw UsageError("augment: retrieve depth must be positive");
  if (n_neg == 0) throw UsageError("augment: n_neg must be positive");
  if (!(denoised_fraction >= 0.0 && denoised_fraction <= 1.0)) {
    throw UsageError("augment: denoised_fraction must lie in [0, 1]");
  }
  if (!(0.0 <= thresholds.negative && thresholds.negative <= thresholds.positive &&
        thresholds.positive <= 1.0)) {
    throw UsageError("augment: need 0 <= t_neg <= t_pos <= 1");
  }
}

AugmentResult build_instances(const Corpus& corpus, std::span<const Query> queries,
                              const Qrels& qrels, const DualEncoder& retriever,
                              const CrossEncoder& reranker, const AugmentConfig& config,
                              std::uint64_t seed) {
  config.validate();
  const ExactIndex index = build_index(retriever, corpus);
  const SeededRng root(seed);
  AugmentResult result;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const Query& query = queries[qi];
    // A per-query stream keeps each query's draws independent of the others.
    SeededRng rng = root.split(qi);
    const CandidatePool pool = retrieve_candidates(retriever, index, query, config.retrieve_depth);
    std::optional<TrainingInstance> inst;
    if (rng.uniform() < config.denoised_fraction) {
      const DenoiseResult d = denoise(pool, corpus, query, reranker, config.thresholds, qrels);
      if (d.negatives.size() >= config.n_neg) {
        inst = d.positives.empty()
                   ? make_instance(query.id, *positives_of(qrels, query.id).begin(),
                                   Provenance::ground_truth)
                   : make_instance(query.id, corpus[d.positives.front().passage].id,
                                   Provenance::denoised);
        add_negatives(*inst, d.negatives,
                      rng.sample_without_replacement(d.negatives.size(), config.n_neg), corpus,
                      Provenance::denoised);
      }
    } else {
      inst = sample_undenoised(pool, corpus, qrels, config.n_neg, rng);
    }
    if (inst) {
      validate_instance(*inst);
      result.instances.push_back(std::move(*inst));
    } else {
      ++result.skipped;
    }
  }
  if (result.skipped > 0) {
    spdlog::warn("augment: skipped {} of {} queries without a viable instance", result.skipped,
                 queries.size());
  }
  return result;
}

void write_instances(const std::filesystem::path& path,
                     const std::vector<TrainingInstance>& instances) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const TrainingInstance& inst : instances) {
    out << inst.query_id << '\t' << inst.positive() << '\t';
    for (std::size_t i = 1; i < inst.candidates.size(); ++i) {
      if (i > 1) out << ',';
      out << inst.candidates[i];
    }
    out << '\t' << static_cast<char>(inst.positive_provenance) << ':';
    for (Provenance p : inst.negative_provenance) out << static_cast<char>(p);
    out << '\n';
  }
}

namespace {

Provenance parse_provenance(char c, std::size_t line) {
  switch (c) {
    case 'G': return Provenance::ground_truth;
    case 'U': return Provenance::undenoised;
    case 'D': return Provenance::denoised;
    default: throw ParseError(std::string("unknown provenance flag '") + c + "'", line);
  }
}

}  // namespace

std::vector<TrainingInstance> read_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<TrainingInstance> instances;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() != 4 || fields[0].empty() || fields[1].empty() || fields[3].size() < 2 ||
        fields[3][1] != ':') {
      throw ParseError("expected query_id<TAB>positive<TAB>negatives<TAB>flags", number);
    }
    TrainingInstance inst =
        make_instance(fields[0], fields[1], parse_provenance(fields[3][0], number));
    std::stringstream negs(fields[2]);
    for (std::string id; std::getline(negs, id, ',');) {
      if (id.empty()) throw ParseError("empty negative id", number);
      inst.candidates.push_back(id);
      inst.labels.push_back(0);
    }
    for (std::size_t i = 2; i < fields[3].size(); ++i) {
      inst.negative_provenance.push_back(parse_provenance(fields[3][i], number));
    }
    if (inst.negative_provenance.size() + 1 != inst.candidates.size()) {
      throw ParseError("provenance flags do not match the negative count", number);
    }
    try {
      validate_instance(inst);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), number);
    }
    instances.push_back(std::move(inst));
  }
  return instances;
}

}  // namespace jointrank
