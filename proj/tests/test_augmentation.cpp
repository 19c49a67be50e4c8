// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "jointrank/augmentation.hpp"

using namespace jointrank;
namespace fs = std::filesystem;

namespace {

const ModelDims kDims{20, 4, 4, 4};

Corpus small_corpus(std::size_t n) {
  std::vector<Passage> ps;
  for (std::size_t i = 0; i < n; ++i) {
    ps.push_back({"p" + std::to_string(i), {static_cast<TokenId>(i % 20)}});
  }
  return Corpus(ps, 20);
}

CandidatePool pool_of(const std::string& qid, std::initializer_list<std::size_t> idx) {
  CandidatePool pool{qid, {}};
  double s = 10.0;
  for (std::size_t i : idx) pool.hits.push_back({i, s--});
  return pool;
}

// A re-ranker whose score is the same constant for every pair.
CrossEncoder constant_reranker(double score) {
  CrossEncoder ce(kDims);
  ce.parameters()[ce.parameters().size() - 1] = score;
  return ce;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

SyntheticData small_data() {
  SyntheticConfig c;
  c.num_passages = 240;
  c.num_queries = 24;
  c.num_dev_queries = 4;
  c.vocab_size = 80;
  c.topic_count = 4;
  c.topic_words = 12;
  c.subtopics_per_topic = 4;
  c.positives_per_query = 3;
  return generate_synthetic(c, 9);
}

}  // namespace

TEST_CASE("candidate pools are clamped to the corpus") {
  const Corpus corpus = small_corpus(3);
  const ModelDims dims{20, 4, 4, 4};
  SeededRng rng(1);
  const DualEncoder de = DualEncoder::random(dims, rng);
  const ExactIndex index = build_index(de, corpus);
  const CandidatePool pool = retrieve_candidates(de, index, Query{"q", {1, 2}}, 5);
  CHECK(pool.hits.size() == 3);
  CHECK_THROWS_AS(retrieve_candidates(de, index, Query{"q", {1}}, 0), UsageError);
}

TEST_CASE("undenoised sampling") {
  const Corpus corpus = small_corpus(6);
  const Qrels qrels{{"q", {"p2", "p4"}}};
  const CandidatePool pool = pool_of("q", {4, 0, 1, 3, 2});
  SeededRng rng(2);
  const auto inst = sample_undenoised(pool, corpus, qrels, 3, rng);
  REQUIRE(inst.has_value());
  CHECK(inst->positive() == "p2");  // smallest labeled id, not the best ranked
  CHECK(inst->positive_provenance == Provenance::ground_truth);
  CHECK(inst->size() == 4);
  CHECK(inst->labels == std::vector<int>{1, 0, 0, 0});
  // Exactly the three non-positive pool entries, in some order.
  CHECK(std::set<std::string>(inst->candidates.begin() + 1, inst->candidates.end()) ==
        std::set<std::string>{"p0", "p1", "p3"});
  CHECK_FALSE(inst->is_denoised());
  CHECK_NOTHROW(validate_instance(*inst));

  SeededRng again(2);
  CHECK(sample_undenoised(pool, corpus, qrels, 3, again)->candidates == inst->candidates);
  SeededRng more(3);
  CHECK_FALSE(sample_undenoised(pool, corpus, qrels, 4, more).has_value());
  CHECK_THROWS_AS(sample_undenoised(pool, corpus, Qrels{}, 1, more), ValidationError);
}

TEST_CASE("undenoised negatives are uniform over the eligible pool") {
  const Corpus corpus = small_corpus(4);
  const Qrels qrels{{"q", {"p0"}}};
  const CandidatePool pool = pool_of("q", {0, 1, 2, 3});
  SeededRng rng(4);
  std::map<std::string, int> counts;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    ++counts[sample_undenoised(pool, corpus, qrels, 1, rng)->candidates[1]];
  }
  CHECK(counts.size() == 3);
  for (const auto& [id, n] : counts) {
    CHECK(std::abs(static_cast<double>(n) / trials - 1.0 / 3) < 0.02);
  }
}

TEST_CASE("denoise thresholds") {
  const Corpus corpus = small_corpus(6);
  const Qrels qrels{{"q", {"p1"}}};
  const CandidatePool pool = pool_of("q", {0, 1, 2, 3, 4});
  const Query query{"q", {1, 2}};

  SUBCASE("extreme thresholds keep nothing") {
    SeededRng rng(5);
    const CrossEncoder ce = CrossEncoder::random(kDims, rng);
    const DenoiseResult d = denoise(pool, corpus, query, ce, Thresholds{1.0, 0.0}, qrels);
    CHECK(d.positives.empty());
    CHECK(d.negatives.empty());
  }
  SUBCASE("low confidence makes every unlabeled passage a negative") {
    const DenoiseResult d = denoise(pool, corpus, query, constant_reranker(logit(0.05)),
                                    Thresholds{}, qrels);
    CHECK(d.positives.empty());
    REQUIRE(d.negatives.size() == 4);
    CHECK(d.negatives[0].passage == 0);
    CHECK(d.negatives[1].passage == 2);
  }
  SUBCASE("high confidence makes every passage a positive") {
    const DenoiseResult d = denoise(pool, corpus, query, constant_reranker(logit(0.95)),
                                    Thresholds{}, qrels);
    CHECK(d.positives.size() == 5);
    CHECK(d.negatives.empty());
  }
  SUBCASE("the middle band is dropped") {
    const DenoiseResult d =
        denoise(pool, corpus, query, constant_reranker(0.0), Thresholds{}, qrels);
    CHECK(d.positives.empty());
    CHECK(d.negatives.empty());
  }
  SUBCASE("invalid thresholds") {
    CHECK_THROWS_AS(denoise(pool, corpus, query, constant_reranker(0.0), Thresholds{0.2, 0.5},
                            qrels),
                    UsageError);
  }
}

TEST_CASE("tighter thresholds keep fewer candidates") {
  const Corpus corpus = small_corpus(20);
  const Qrels qrels{{"q", {"p3"}}};
  const CandidatePool pool = pool_of("q", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  SeededRng rng(6);
  CrossEncoder ce = CrossEncoder::random(kDims, rng);
  ce.parameters() *= 40.0;  // spread the confidences across (0, 1)
  const Query query{"q", {3}};
  std::size_t last_pos = pool.hits.size() + 1, last_neg = pool.hits.size() + 1;
  for (double t : {0.5, 0.6, 0.7, 0.8, 0.9, 0.99}) {
    const DenoiseResult d = denoise(pool, corpus, query, ce, Thresholds{t, 1.0 - t}, qrels);
    CHECK(d.positives.size() <= last_pos);
    CHECK(d.negatives.size() <= last_neg);
    last_pos = d.positives.size();
    last_neg = d.negatives.size();
  }
}

TEST_CASE("build_instances honours the denoised fraction") {
  const SyntheticData data = small_data();
  const ModelDims dims{80, 4, 4, 4};
  SeededRng rng(7);
  const DualEncoder de = DualEncoder::random(dims, rng);
  CrossEncoder ce(dims);
  AugmentConfig config;
  config.retrieve_depth = 20;
  config.n_neg = 3;

  SUBCASE("fraction zero gives undenoised instances only") {
    config.denoised_fraction = 0.0;
    const AugmentResult r = build_instances(data.corpus, data.train_queries, data.qrels, de, ce,
                                            config, 11);
    CHECK(r.skipped == 0);
    CHECK(r.instances.size() == data.train_queries.size());
    for (const TrainingInstance& inst : r.instances) {
      CHECK(inst.size() == 1 + config.n_neg);
      CHECK_FALSE(inst.is_denoised());
      CHECK(inst.positive() == *data.qrels.at(inst.query_id).begin());
    }
    const AugmentResult again = build_instances(data.corpus, data.train_queries, data.qrels, de,
                                                ce, config, 11);
    for (std::size_t i = 0; i < r.instances.size(); ++i) {
      CHECK(again.instances[i].candidates == r.instances[i].candidates);
    }
  }
  SUBCASE("fraction one with an undecided re-ranker skips everything") {
    config.denoised_fraction = 1.0;  // s_ce = 0 gives confidence 0.5 everywhere
    const AugmentResult r = build_instances(data.corpus, data.train_queries, data.qrels, de, ce,
                                            config, 11);
    CHECK(r.instances.empty());
    CHECK(r.skipped == data.train_queries.size());
  }
  SUBCASE("fraction one with a doubtful re-ranker falls back to ground truth") {
    config.denoised_fraction = 1.0;
    ce.parameters()[ce.parameters().size() - 1] = logit(0.05);
    const AugmentResult r = build_instances(data.corpus, data.train_queries, data.qrels, de, ce,
                                            config, 11);
    CHECK(r.instances.size() == data.train_queries.size());
    for (const TrainingInstance& inst : r.instances) {
      CHECK(inst.positive_provenance == Provenance::ground_truth);
      CHECK(inst.is_denoised());
      for (std::size_t j = 1; j < inst.size(); ++j) {
        CHECK_FALSE(data.qrels.at(inst.query_id).contains(inst.candidates[j]));
      }
    }
  }
  SUBCASE("invalid config") {
    config.n_neg = 0;
    CHECK_THROWS_AS(build_instances(data.corpus, data.train_queries, data.qrels, de, ce, config,
                                    11),
                    UsageError);
  }
}

TEST_CASE("instance layout validation") {
  TrainingInstance inst{
      "q", {"a", "b"}, {1, 0}, Provenance::ground_truth, {Provenance::undenoised}};
  CHECK_NOTHROW(validate_instance(inst));
  inst.labels = {0, 1};
  CHECK_THROWS_AS(validate_instance(inst), ValidationError);
  inst.labels = {1, 0};
  inst.candidates = {"a", "a"};
  CHECK_THROWS_AS(validate_instance(inst), ValidationError);
}

TEST_CASE("instance files round trip") {
  const fs::path dir = fs::temp_directory_path() / "jointrank_test_augmentation";
  fs::create_directories(dir);
  const std::vector<TrainingInstance> instances{
      {"q1", {"p1", "p2", "p3"}, {1, 0, 0}, Provenance::ground_truth,
       {Provenance::undenoised, Provenance::undenoised}},
      {"q2", {"p9", "p4"}, {1, 0}, Provenance::denoised, {Provenance::denoised}},
  };
  write_instances(dir / "inst.tsv", instances);
  std::ifstream in(dir / "inst.tsv");
  std::string first;
  std::getline(in, first);
  CHECK(first == "q1\tp1\tp2,p3\tG:UU");
  const auto back = read_instances(dir / "inst.tsv");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].query_id == instances[i].query_id);
    CHECK(back[i].candidates == instances[i].candidates);
    CHECK(back[i].labels == instances[i].labels);
    CHECK(back[i].positive_provenance == instances[i].positive_provenance);
    CHECK(back[i].negative_provenance == instances[i].negative_provenance);
  }
  std::ofstream(dir / "bad.tsv") << "q1\tp1\tp2\tG:UU\n";
  CHECK_THROWS_AS(read_instances(dir / "bad.tsv"), ParseError);
  std::ofstream(dir / "bad.tsv") << "q1\tp1\tp2\tG:X\n";
  CHECK_THROWS_AS(read_instances(dir / "bad.tsv"), ParseError);
}
