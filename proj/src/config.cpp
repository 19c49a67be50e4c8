// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include "jointrank/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "jointrank/errors.hpp"

namespace jointrank {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw UsageError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw UsageError("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    out.push_back(parse_number<std::size_t>(key, trim(item)));
  }
  if (out.empty()) throw UsageError("config key '" + key + "': empty list");
  return out;
}

std::string show(bool b) { return b ? "true" : "false"; }
std::string show(double d) { return format_real(d); }
template <typename T>
  requires std::is_integral_v<T>
std::string show(T v) {
  return std::to_string(v);
}

struct Field {
  std::string key;
  std::function<void(ResolvedConfig&, const std::string&)> set;
  std::function<std::string(const ResolvedConfig&)> get;
};

#define JR_FIELD(name, member, kind)                                                      \
  Field {                                                                                 \
    name, [](ResolvedConfig& c, const std::string& v) { c.member = kind(name, v); },      \
        [](const ResolvedConfig& c) { return show(c.member); }                            \
  }

template <typename T>
auto number_parser() {
  return [](const std::string& key, const std::string& v) { return parse_number<T>(key, v); };
}

const std::vector<Field>& fields() {
  static const auto size = number_parser<std::size_t>();
  static const auto real = number_parser<double>();
  static const auto i32 = number_parser<std::int32_t>();
  static const auto i64 = number_parser<Eigen::Index>();
  static const auto u64 = number_parser<std::uint64_t>();
  static const std::vector<Field> table = {
      // generator
      JR_FIELD("num_passages", generator.num_passages, size),
      JR_FIELD("num_queries", generator.num_queries, size),
      JR_FIELD("num_dev_queries", generator.num_dev_queries, size),
      JR_FIELD("vocab_size", generator.vocab_size, i32),
      JR_FIELD("topic_count", generator.topic_count, size),
      JR_FIELD("tokens_per_passage", generator.tokens_per_passage, size),
      JR_FIELD("tokens_per_query", generator.tokens_per_query, size),
      JR_FIELD("positives_per_query", generator.positives_per_query, size),
      JR_FIELD("topic_words", generator.topic_words, size),
      JR_FIELD("topic_purity", generator.topic_purity, real),
      JR_FIELD("query_overlap", generator.query_overlap, real),
      JR_FIELD("subtopics_per_topic", generator.subtopics_per_topic, size),
      JR_FIELD("subtopic_words", generator.subtopic_words, size),
      JR_FIELD("subtopic_share", generator.subtopic_share, real),
      JR_FIELD("data_seed", data_seed, u64),
      // models
      JR_FIELD("emb_dim", train.dims.emb_dim, i64),
      JR_FIELD("hidden_dim", train.dims.hidden_dim, i64),
      JR_FIELD("out_dim", train.dims.out_dim, i64),
      // training
      Field{"mode",
            [](ResolvedConfig& c, const std::string& v) {
              try {
                c.train.mode = parse_train_mode(v);
              } catch (const UsageError&) {
                throw UsageError("config key 'mode': unknown training mode '" + v + "'");
              }
            },
            [](const ResolvedConfig& c) { return to_string(c.train.mode); }},
      JR_FIELD("use_denoised", train.use_denoised, parse_bool),
      JR_FIELD("use_in_batch_negatives", train.use_in_batch_negatives, parse_bool),
      JR_FIELD("epochs", train.epochs, size),
      JR_FIELD("batch_size", train.batch_size, size),
      JR_FIELD("learning_rate", train.learning_rate, real),
      JR_FIELD("n_neg", train.n_neg, size),
      JR_FIELD("seed", train.seed, u64),
      JR_FIELD("grad_clip", train.grad_clip, real),
      JR_FIELD("warm_start_epochs", train.warm_start_epochs, size),
      JR_FIELD("warm_start_learning_rate", train.warm_start_learning_rate, real),
      JR_FIELD("warm_start_in_batch", train.warm_start_in_batch, parse_bool),
      // augmentation
      JR_FIELD("retrieve_depth", augment.retrieve_depth, size),
      JR_FIELD("denoised_fraction", augment.denoised_fraction, real),
      JR_FIELD("t_pos", augment.thresholds.positive, real),
      JR_FIELD("t_neg", augment.thresholds.negative, real),
      // evaluation and experiments
      JR_FIELD("k_retrieve", k_retrieve, size),
      JR_FIELD("k_report", k_report, size),
      Field{"sweep_m",
            [](ResolvedConfig& c, const std::string& v) { c.sweep_m = parse_list("sweep_m", v); },
            [](const ResolvedConfig& c) {
              std::string s;
              for (std::size_t m : c.sweep_m) s += (s.empty() ? "" : ",") + std::to_string(m);
              return s;
            }},
      JR_FIELD("ablate_seeds", ablate_seeds, size),
  };
  return table;
}

#undef JR_FIELD

const Field& field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return f;
  }
  throw UsageError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

std::vector<std::pair<std::string, std::string>> ResolvedConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

void ResolvedConfig::validate() const {
  train.validate();
  augment.validate();
  if (train.dims.vocab_size != generator.vocab_size) {
    throw UsageError("model vocab_size must match the generator's");
  }
  if (k_report == 0 || k_report > k_retrieve) {
    throw UsageError("config key 'k_report': need 1 <= k_report <= k_retrieve");
  }
  for (std::size_t m : sweep_m) {
    if (m < 2) throw UsageError("config key 'sweep_m': list sizes must be at least 2");
  }
  if (ablate_seeds == 0) throw UsageError("config key 'ablate_seeds': must be positive");
}

ResolvedConfig parse_config_text(const std::string& text,
                                 const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> values;
  std::stringstream in(text);
  std::size_t number = 0;
  for (std::string line; std::getline(in, line);) {
    ++number;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    field(key);
    values[key] = trim(std::string_view(body).substr(eq + 1));
  }
  for (const auto& [key, value] : overrides) {
    field(key);
    values[key] = value;
  }
  ResolvedConfig config;
  for (const Field& f : fields()) {
    if (auto it = values.find(f.key); it != values.end()) f.set(config, it->second);
  }
  config.train.dims.vocab_size = config.generator.vocab_size;
  config.augment.n_neg = config.train.n_neg;
  config.validate();
  return config;
}

ResolvedConfig parse_config(const std::optional<std::filesystem::path>& file,
                            const std::map<std::string, std::string>& overrides) {
  std::string text;
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw UsageError("cannot open config file " + file->string());
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  return parse_config_text(text, overrides);
}

}  // namespace jointrank
