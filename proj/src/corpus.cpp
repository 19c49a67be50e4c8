// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include "jointrank/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "jointrank/errors.hpp"
#include "jointrank/numerics.hpp"

namespace jointrank {

namespace fs = std::filesystem;

Corpus::Corpus(std::vector<Passage> passages, std::int32_t vocab_size)
    : passages_(std::move(passages)), vocab_size_(vocab_size) {
  if (vocab_size_ <= 0) throw UsageError("corpus: vocab_size must be positive");
  by_id_.reserve(passages_.size());
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    const Passage& p = passages_[i];
    if (p.tokens.empty()) throw ValidationError("corpus: passage " + p.id + " has no tokens");
    for (TokenId t : p.tokens) {
      if (t < 0 || t >= vocab_size_) {
        throw ValidationError("corpus: passage " + p.id + " has token " + std::to_string(t) +
                              " outside vocabulary");
      }
    }
    if (!by_id_.emplace(p.id, i).second) {
      throw ValidationError("corpus: duplicate passage id " + p.id);
    }
  }
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::index_of(std::string_view id) const {
  if (auto idx = find(id)) return *idx;
  throw ValidationError("unknown passage id " + std::string(id));
}

Tokens tokenize(std::string_view text, std::int32_t vocab_size) {
  if (vocab_size <= 0) throw UsageError("tokenize: vocab_size must be positive");
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) break;
    // FNV-1a over the lowercased word.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
      h ^= static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(text[i])));
      h *= 0x100000001b3ULL;
      ++i;
    }
    out.push_back(static_cast<TokenId>(h % static_cast<std::uint64_t>(vocab_size)));
  }
  if (out.empty()) throw ValidationError("tokenize: text has no words");
  return out;
}

namespace {

std::string passage_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%05zu", i);
  return buf;
}

std::string query_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

struct Topic {
  std::vector<TokenId> core;
  std::vector<std::vector<TokenId>> subtopic_cores;
  std::vector<std::vector<std::size_t>> subtopic_passages;
};

TokenId draw_topic_token(const Topic& topic, std::size_t subtopic, const SyntheticConfig& config,
                         SeededRng& rng) {
  if (config.subtopic_share > 0.0 && rng.uniform() < config.subtopic_share) {
    const auto& core = topic.subtopic_cores[subtopic];
    return core[rng.uniform_index(core.size())];
  }
  if (rng.uniform() < config.topic_purity) {
    return topic.core[rng.uniform_index(topic.core.size())];
  }
  return static_cast<TokenId>(rng.uniform_index(static_cast<std::uint64_t>(config.vocab_size)));
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  if (config.num_passages == 0 || config.num_queries == 0 || config.vocab_size <= 0 ||
      config.topic_count == 0 || config.tokens_per_passage == 0 ||
      config.tokens_per_query == 0 || config.positives_per_query == 0 ||
      config.topic_words == 0 || config.subtopics_per_topic == 0 ||
      config.subtopic_words == 0) {
    throw ValidationError("generate_synthetic: sizes must be positive");
  }
  const auto vocab = static_cast<std::size_t>(config.vocab_size);
  if (config.topic_count > vocab || config.topic_words > vocab || config.subtopic_words > vocab) {
    throw ValidationError(
        "generate_synthetic: topic_count, topic_words and subtopic_words must not exceed vocab_size");
  }
  const std::size_t groups = config.topic_count * config.subtopics_per_topic;
  if (config.num_passages / groups < config.positives_per_query) {
    throw ValidationError(
        "generate_synthetic: fewer passages per subtopic than positives per query");
  }
  if (!(config.topic_purity >= 0.0 && config.topic_purity <= 1.0) ||
      !(config.query_overlap >= 0.0 && config.query_overlap <= 1.0) ||
      !(config.subtopic_share >= 0.0 && config.subtopic_share <= 1.0)) {
    throw ValidationError("generate_synthetic: probabilities must lie in [0, 1]");
  }

  SeededRng root(seed);
  SeededRng topic_rng = root.split(1);
  SeededRng passage_rng = root.split(2);
  SeededRng query_rng = root.split(3);

  std::vector<Topic> topics(config.topic_count);
  for (Topic& topic : topics) {
    for (std::size_t w : topic_rng.sample_without_replacement(vocab, config.topic_words)) {
      topic.core.push_back(static_cast<TokenId>(w));
    }
    topic.subtopic_passages.resize(config.subtopics_per_topic);
    for (std::size_t k = 0; k < config.subtopics_per_topic; ++k) {
      auto& core = topic.subtopic_cores.emplace_back();
      for (std::size_t w : topic_rng.sample_without_replacement(vocab, config.subtopic_words)) {
        core.push_back(static_cast<TokenId>(w));
      }
    }
  }

  std::vector<Passage> passages;
  passages.reserve(config.num_passages);
  for (std::size_t i = 0; i < config.num_passages; ++i) {
    Topic& topic = topics[i % config.topic_count];
    const std::size_t sub = (i / config.topic_count) % config.subtopics_per_topic;
    topic.subtopic_passages[sub].push_back(i);
    Passage p{passage_id(i), {}};
    p.tokens.reserve(config.tokens_per_passage);
    for (std::size_t j = 0; j < config.tokens_per_passage; ++j) {
      p.tokens.push_back(draw_topic_token(topic, sub, config, passage_rng));
    }
    passages.push_back(std::move(p));
  }

  SyntheticData data;
  auto make_queries = [&](std::size_t count, const char* prefix, std::vector<Query>& out) {
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const Topic& topic = topics[query_rng.uniform_index(topics.size())];
      const std::size_t sub = query_rng.uniform_index(config.subtopics_per_topic);
      const auto& members = topic.subtopic_passages[sub];
      const auto picks =
          query_rng.sample_without_replacement(members.size(), config.positives_per_query);
      Query q{query_id(prefix, i), {}};
      auto& positives = data.qrels[q.id];
      for (std::size_t pick : picks) positives.insert(passages[members[pick]].id);
      const Tokens& anchor = passages[members[picks.front()]].tokens;
      q.tokens.reserve(config.tokens_per_query);
      for (std::size_t j = 0; j < config.tokens_per_query; ++j) {
        if (query_rng.uniform() < config.query_overlap) {
          q.tokens.push_back(anchor[query_rng.uniform_index(anchor.size())]);
        } else {
          q.tokens.push_back(draw_topic_token(topic, sub, config, query_rng));
        }
      }
      out.push_back(std::move(q));
    }
  };
  make_queries(config.num_queries, "tq", data.train_queries);
  make_queries(config.num_dev_queries, "dq", data.dev_queries);
  data.corpus = Corpus(std::move(passages), config.vocab_size);
  return data;
}

void validate_qrels(const Qrels& qrels, const Corpus& corpus) {
  for (const auto& [qid, positives] : qrels) {
    if (positives.empty()) throw ValidationError("qrels: query " + qid + " has no positive");
    for (const auto& pid : positives) {
      if (!corpus.find(pid)) {
        throw ValidationError("qrels: query " + qid + " references unknown passage " + pid);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// File formats

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_double(std::string_view s, double& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(std::string_view(line), number);
  }
}

Tokens parse_tokens(std::string_view field, std::int32_t vocab_size, std::size_t line) {
  Tokens tokens;
  std::size_t i = 0;
  while (i < field.size()) {
    while (i < field.size() && field[i] == ' ') ++i;
    if (i == field.size()) break;
    auto j = field.find(' ', i);
    if (j == std::string_view::npos) j = field.size();
    TokenId t{};
    if (!parse_int(field.substr(i, j - i), t)) throw ParseError("bad token id", line);
    if (t < 0 || t >= vocab_size) throw ParseError("token id outside vocabulary", line);
    tokens.push_back(t);
    i = j;
  }
  if (tokens.empty()) throw ParseError("empty token list", line);
  return tokens;
}

void write_tokens(std::ostream& out, const std::string& id, const Tokens& tokens) {
  out << id << '\t';
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out << ' ';
    out << tokens[i];
  }
  out << '\n';
}

}  // namespace

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

Corpus read_corpus(const fs::path& path, std::int32_t vocab_size) {
  std::vector<Passage> passages;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty()) throw ParseError("expected id<TAB>tokens", n);
    passages.push_back({std::string(fields[0]), parse_tokens(fields[1], vocab_size, n)});
  });
  return Corpus(std::move(passages), vocab_size);
}

void write_corpus(const fs::path& path, const Corpus& corpus) {
  auto out = open_out(path);
  for (const Passage& p : corpus.passages()) write_tokens(out, p.id, p.tokens);
}

std::vector<Query> read_queries(const fs::path& path, std::int32_t vocab_size) {
  std::vector<Query> queries;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty()) throw ParseError("expected id<TAB>tokens", n);
    queries.push_back({std::string(fields[0]), parse_tokens(fields[1], vocab_size, n)});
  });
  return queries;
}

void write_queries(const fs::path& path, const std::vector<Query>& queries) {
  auto out = open_out(path);
  for (const Query& q : queries) write_tokens(out, q.id, q.tokens);
}

Qrels read_qrels(const fs::path& path) {
  Qrels qrels;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("expected query_id<TAB>passage_id<TAB>relevance", n);
    }
    int rel = -1;
    if (!parse_int(fields[2], rel) || (rel != 0 && rel != 1)) {
      throw ParseError("relevance must be 0 or 1", n);
    }
    auto& positives = qrels[std::string(fields[0])];
    if (rel == 1) positives.insert(std::string(fields[1]));
  });
  return qrels;
}

void write_qrels(const fs::path& path, const Qrels& qrels) {
  auto out = open_out(path);
  for (const auto& [qid, positives] : qrels) {
    for (const auto& pid : positives) out << qid << '\t' << pid << "\t1\n";
  }
}

std::string format_run_line(const std::string& query_id, const RunEntry& entry) {
  return query_id + '\t' + entry.passage_id + '\t' + std::to_string(entry.rank) + '\t' +
         format_real(entry.score);
}

RunFile read_run(const fs::path& path) {
  RunFile run;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto fields = split_tabs(line);
    if (fields.size() != 4 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("expected query_id<TAB>passage_id<TAB>rank<TAB>score", n);
    }
    RunEntry entry{std::string(fields[1]), 0, 0.0};
    if (!parse_int(fields[2], entry.rank) || entry.rank == 0) throw ParseError("bad rank", n);
    if (!parse_double(fields[3], entry.score)) throw ParseError("bad score", n);
    run[std::string(fields[0])].push_back(std::move(entry));
  });
  for (auto& [qid, entries] : run) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RunEntry& a, const RunEntry& b) { return a.rank < b.rank; });
  }
  return run;
}

void write_run(const fs::path& path, const RunFile& run) {
  auto out = open_out(path);
  for (const auto& [qid, entries] : run) {
    std::vector<const RunEntry*> sorted;
    for (const auto& e : entries) sorted.push_back(&e);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const RunEntry* a, const RunEntry* b) { return a->rank < b->rank; });
    for (const RunEntry* e : sorted) out << format_run_line(qid, *e) << '\n';
  }
}

}  // namespace jointrank
