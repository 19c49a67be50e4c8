// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
//
// Queries, passages and relevance labels; the synthetic topic-corpus
// generator; and the tab-separated file formats used by every command.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace jointrank {

using TokenId = std::int32_t;
using Tokens = std::vector<TokenId>;

struct Passage {
  std::string id;
  Tokens tokens;
};

struct Query {
  std::string id;
  Tokens tokens;
};

class Corpus {
 public:
  Corpus() = default;
  /// Validates non-empty token lists, token range and id uniqueness.
  Corpus(std::vector<Passage> passages, std::int32_t vocab_size);

  std::size_t size() const noexcept { return passages_.size(); }
  bool empty() const noexcept { return passages_.empty(); }
  std::int32_t vocab_size() const noexcept { return vocab_size_; }
  const std::vector<Passage>& passages() const noexcept { return passages_; }
  const Passage& operator[](std::size_t i) const { return passages_[i]; }

  std::optional<std::size_t> find(std::string_view id) const;
  /// Index of an id, or ValidationError if absent.
  std::size_t index_of(std::string_view id) const;

 private:
  std::vector<Passage> passages_;
  std::int32_t vocab_size_ = 0;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// query id -> ids of its relevant passages.
using Qrels = std::map<std::string, std::set<std::string>>;

struct RunEntry {
  std::string passage_id;
  std::size_t rank = 0;  // 1-based
  double score = 0.0;
};

/// query id -> ranked list. Iteration order is ascending query id.
using RunFile = std::map<std::string, std::vector<RunEntry>>;

/// Lowercases, splits on whitespace, and hashes each word into [0, vocab_size).
Tokens tokenize(std::string_view text, std::int32_t vocab_size);

struct SyntheticConfig {
  std::size_t num_passages = 2000;
  std::size_t num_queries = 200;      // training queries
  std::size_t num_dev_queries = 50;
  std::int32_t vocab_size = 500;
  std::size_t topic_count = 20;
  std::size_t tokens_per_passage = 24;
  std::size_t tokens_per_query = 8;
  std::size_t positives_per_query = 10;  // drawn from the query's subtopic
  std::size_t topic_words = 40;       // size of each topic's core vocabulary
  double topic_purity = 0.8;          // P(token drawn from the topic core)
  double query_overlap = 0.3;         // P(query token copied from its positive)
  // Each topic is split into subtopics with their own small core, drawn from
  // the whole vocabulary. Passage i sits in subtopic (i / topic_count) % subtopics.
  std::size_t subtopics_per_topic = 10;
  std::size_t subtopic_words = 4;
  double subtopic_share = 0.8;        // P(token drawn from the subtopic core)
};

struct SyntheticData {
  Corpus corpus;
  std::vector<Query> train_queries;
  std::vector<Query> dev_queries;
  Qrels qrels;  // covers train and dev queries
};

/// Pure function of (config, seed).
SyntheticData generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

/// Every query has at least one positive and every positive resolves in the corpus.
void validate_qrels(const Qrels& qrels, const Corpus& corpus);

// Line formats, all tab-separated and LF-terminated:
//   corpus / queries:  id \t space-separated token ids
//   qrels:             query_id \t passage_id \t relevance (0 or 1)
//   run:               query_id \t passage_id \t rank \t score

Corpus read_corpus(const std::filesystem::path& path, std::int32_t vocab_size);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

std::vector<Query> read_queries(const std::filesystem::path& path, std::int32_t vocab_size);
void write_queries(const std::filesystem::path& path, const std::vector<Query>& queries);

Qrels read_qrels(const std::filesystem::path& path);
void write_qrels(const std::filesystem::path& path, const Qrels& qrels);

RunFile read_run(const std::filesystem::path& path);
void write_run(const std::filesystem::path& path, const RunFile& run);

/// Shortest decimal string that parses back to exactly the same double.
std::string format_real(double value);

std::string format_run_line(const std::string& query_id, const RunEntry& entry);

}  // namespace jointrank
