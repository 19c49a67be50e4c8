// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
//
// jointrank: generate data, warm-start, augment, train, evaluate, ablate.
#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jointrank/config.hpp"
#include "jointrank/errors.hpp"
#include "jointrank/trainer.hpp"

namespace fs = std::filesystem;
using namespace jointrank;

namespace {

constexpr const char* kDataEnv = "JOINTRANK_DATA_DIR";

std::uint64_t file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Options {
  std::string command;
  std::optional<fs::path> config_file;
  fs::path out;
  std::string data;    // empty: environment, then "data"
  std::string models;  // empty: the data directory
  std::string instances;
  std::string split = "dev";
  std::vector<std::string> extras;
};

class Run {
 public:
  Run(Options opts, ResolvedConfig config) : opts_(std::move(opts)), config_(std::move(config)) {
    fs::create_directories(opts_.out);
  }

  const ResolvedConfig& config() const { return config_; }

  fs::path data_dir() const {
    if (!opts_.data.empty()) return opts_.data;
    if (const char* env = std::getenv(kDataEnv); env && *env) return env;
    return "data";
  }
  fs::path models_dir() const { return opts_.models.empty() ? data_dir() : fs::path(opts_.models); }

  /// Records an input and checks that it exists.
  fs::path input(const std::string& name, const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ValidationError("missing input " + path.string());
    inputs_.emplace_back(name, path);
    return path;
  }

  fs::path output(const std::string& file) {
    outputs_.push_back(file);
    return opts_.out / file;
  }

  SyntheticData load_data() {
    const fs::path dir = data_dir();
    const auto vocab = config_.generator.vocab_size;
    SyntheticData data;
    data.corpus = read_corpus(input("corpus", dir / "corpus.tsv"), vocab);
    data.train_queries = read_queries(input("train_queries", dir / "train_queries.tsv"), vocab);
    data.dev_queries = read_queries(input("dev_queries", dir / "dev_queries.tsv"), vocab);
    data.qrels = read_qrels(input("qrels", dir / "qrels.tsv"));
    validate_qrels(data.qrels, data.corpus);
    return data;
  }

  Models load_models() {
    const fs::path dir = models_dir();
    return {load_dual_encoder(input("retriever", dir / "retriever.ckpt")),
            load_cross_encoder(input("reranker", dir / "reranker.ckpt"))};
  }

  void save_models(const Models& models) {
    save_checkpoint(output("retriever.ckpt"), models.retriever);
    save_checkpoint(output("reranker.ckpt"), models.reranker);
  }

  /// Written last, via a temporary file and a rename.
  void write_manifest() const {
    nlohmann::ordered_json j;
    j["command"] = opts_.command;
    j["seed"] = config_.train.seed;
    j["data_seed"] = config_.data_seed;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config_.entries()) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::ordered_json ins = nlohmann::ordered_json::array();
    for (const auto& [name, path] : inputs_) {
      ins.push_back({{"name", name}, {"path", path.generic_string()},
                     {"fnv1a64", hex(file_checksum(path))}});
    }
    j["inputs"] = ins;
    nlohmann::ordered_json outs = nlohmann::ordered_json::array();
    for (const std::string& file : outputs_) {
      outs.push_back({{"path", file}, {"fnv1a64", hex(file_checksum(opts_.out / file))}});
    }
    j["outputs"] = outs;

    const fs::path target = opts_.out / "manifest.json";
    const fs::path tmp = opts_.out / "manifest.json.tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw ValidationError("cannot write " + tmp.string());
      out << j.dump(2) << '\n';
      if (!out) throw ValidationError("cannot write " + tmp.string());
    }
    fs::rename(tmp, target);
  }

  const Options& options() const { return opts_; }

 private:
  Options opts_;
  ResolvedConfig config_;
  std::vector<std::pair<std::string, fs::path>> inputs_;
  std::vector<std::string> outputs_;
};

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& args) {
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0 || a.size() == 2) {
      throw UsageError("unexpected argument '" + a + "'");
    }
    std::string key = a.substr(2);
    std::string value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= args.size()) throw UsageError("config key '" + key + "': missing value");
      value = args[++i];
    }
    for (char& c : key) {
      if (c == '-') c = '_';
    }
    out[key] = value;
  }
  return out;
}

void write_tsv(const fs::path& path, const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "\t" : "") << row[i];
    out << '\n';
  }
}

void cmd_gen_data(Run& run) {
  const SyntheticData data = generate_synthetic(run.config().generator, run.config().data_seed);
  write_corpus(run.output("corpus.tsv"), data.corpus);
  write_queries(run.output("train_queries.tsv"), data.train_queries);
  write_queries(run.output("dev_queries.tsv"), data.dev_queries);
  write_qrels(run.output("qrels.tsv"), data.qrels);
}

void cmd_warm_start(Run& run) {
  const SyntheticData data = run.load_data();
  const DataView train(data.corpus, data.train_queries, data.qrels);
  const Models models = warm_start(train, run.config().train);
  run.save_models(models);
  const PipelineResult dev =
      pipeline_eval(models.retriever, models.reranker, data.corpus, data.dev_queries, data.qrels,
                    run.config().k_retrieve, run.config().k_report);
  write_metrics(run.output("warm_metrics.tsv"),
                {{"retriever", dev.retriever}, {"reranked", dev.reranked}});
}

void cmd_augment(Run& run) {
  const SyntheticData data = run.load_data();
  const Models models = run.load_models();
  AugmentConfig augment = run.config().augment;
  if (!run.config().train.use_denoised) augment.denoised_fraction = 0.0;
  const AugmentResult result =
      build_instances(data.corpus, data.train_queries, data.qrels, models.retriever,
                      models.reranker, augment, augment_seed(run.config().train));
  write_instances(run.output("instances.tsv"), result.instances);
}

void cmd_train(Run& run) {
  const SyntheticData data = run.load_data();
  const Models warm = run.load_models();
  const fs::path instances_path = run.options().instances.empty()
                                      ? run.models_dir() / "instances.tsv"
                                      : fs::path(run.options().instances);
  const auto instances = read_instances(run.input("instances", instances_path));
  const DataView train_view(data.corpus, data.train_queries, data.qrels);
  const DataView dev_view(data.corpus, data.dev_queries, data.qrels);
  TrainResult result = train(train_view, instances, warm, run.config().train, &dev_view);
  run.save_models(result.models);
  write_train_log(run.output("train_log.tsv"), result.log);
  write_epoch_metrics(run.output("epoch_metrics.tsv"), result.log);
}

void cmd_eval(Run& run) {
  const SyntheticData data = run.load_data();
  const Models models = run.load_models();
  const std::string& split = run.options().split;
  if (split != "dev" && split != "train") throw UsageError("--split must be dev or train");
  const auto& queries = split == "dev" ? data.dev_queries : data.train_queries;
  const PipelineResult r = pipeline_eval(models.retriever, models.reranker, data.corpus, queries,
                                         data.qrels, run.config().k_retrieve,
                                         run.config().k_report);
  write_metrics(run.output("metrics.tsv"), {{"retriever", r.retriever}, {"reranked", r.reranked}});
  write_run(run.output("retriever_run.tsv"), r.retriever_run);
  write_run(run.output("reranked_run.tsv"), r.reranked_run);
}

ExperimentConfig experiment_config(const ResolvedConfig& c) {
  ExperimentConfig e;
  e.train = c.train;
  e.augment = c.augment;
  e.k_retrieve = c.k_retrieve;
  e.k_report = c.k_report;
  return e;
}

void cmd_ablate(Run& run) {
  const SyntheticData data = run.load_data();
  const DataView train_view(data.corpus, data.train_queries, data.qrels);
  struct Variant {
    const char* name;
    TrainMode mode;
    bool denoised;
  };
  const Variant variants[] = {{"dynamic", TrainMode::dynamic_listwise, true},
                              {"static", TrainMode::static_distillation, true},
                              {"pointwise", TrainMode::pointwise_reranker, true},
                              {"no_denoised", TrainMode::dynamic_listwise, false}};
  std::vector<std::vector<std::string>> rows{{"seed", "variant", "retriever_mrr@10",
                                              "retriever_recall@50", "reranked_mrr@10",
                                              "warm_mrr@10", "initial_kl", "final_kl"}};
  for (std::size_t s = 0; s < run.config().ablate_seeds; ++s) {
    ExperimentConfig base = experiment_config(run.config());
    base.train.seed += s;
    // Pointwise mode has no in-batch variant; the shared warm start does not depend on mode.
    base.train.use_in_batch_negatives = false;
    const Models warm = warm_start(train_view, base.train);
    for (const Variant& v : variants) {
      ExperimentConfig e = base;
      e.train.mode = v.mode;
      e.train.use_denoised = v.denoised;
      const ExperimentResult r = run_experiment(data, e, &warm);
      rows.push_back({std::to_string(e.train.seed), v.name,
                      format_real(metric_value(r.final_dev.retriever, "MRR@10")),
                      format_real(metric_value(r.final_dev.retriever, "Recall@50")),
                      format_real(metric_value(r.final_dev.reranked, "MRR@10")),
                      format_real(metric_value(r.warm_dev, "MRR@10")), format_real(r.initial_kl),
                      format_real(r.final_kl)});
    }
  }
  write_tsv(run.output("ablation.tsv"), rows);
}

void cmd_sweep_negatives(Run& run) {
  const SyntheticData data = run.load_data();
  const DataView train_view(data.corpus, data.train_queries, data.qrels);
  const ExperimentConfig base = experiment_config(run.config());
  const Models warm = warm_start(train_view, base.train);
  std::vector<std::vector<std::string>> rows{
      {"m", "n_neg", "retriever_mrr@10", "reranked_mrr@10", "instances"}};
  for (std::size_t m : run.config().sweep_m) {
    ExperimentConfig e = base;
    e.train.n_neg = m - 1;
    const ExperimentResult r = run_experiment(data, e, &warm);
    rows.push_back({std::to_string(m), std::to_string(m - 1),
                    format_real(metric_value(r.final_dev.retriever, "MRR@10")),
                    format_real(metric_value(r.final_dev.reranked, "MRR@10")),
                    std::to_string(r.instances.size())});
  }
  write_tsv(run.output("sweep_negatives.tsv"), rows);
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_pattern("%l: %v");
  CLI::App app{"Joint retriever/re-ranker training on synthetic corpora", "jointrank"};
  app.require_subcommand(1);
  Options opts;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "Generate a synthetic corpus, queries and qrels"},
      {"warm-start", "Supervised pre-training of both scorers"},
      {"augment", "Build hybrid training instances with the warm-start models"},
      {"train", "Joint training in the configured mode"},
      {"eval", "Retrieve-then-rerank evaluation"},
      {"ablate", "Dynamic, static, pointwise and no-denoised variants under one seed"},
      {"sweep-negatives", "Joint training at each list size in sweep_m"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("--config", opts.config_file, "key = value config file");
    sub->add_option("--out", opts.out, "Output directory")->required();
    sub->add_option("--data", opts.data,
                    std::string("Data directory (default: $") + kDataEnv + " or ./data)");
    sub->footer("Any config key may be overridden with --key value.");
    if (name != "gen-data") {
      sub->add_option("--models", opts.models, "Checkpoint directory (default: data directory)");
    }
    if (name == "train") sub->add_option("--instances", opts.instances, "Instance file");
    if (name == "eval") sub->add_option("--split", opts.split, "dev or train");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) {
      opts.command = sub->get_name();
      opts.extras = sub->remaining();
    }
    ResolvedConfig config = parse_config(opts.config_file, parse_overrides(opts.extras));
    Run run(opts, std::move(config));
    if (opts.command == "gen-data") cmd_gen_data(run);
    else if (opts.command == "warm-start") cmd_warm_start(run);
    else if (opts.command == "augment") cmd_augment(run);
    else if (opts.command == "train") cmd_train(run);
    else if (opts.command == "eval") cmd_eval(run);
    else if (opts.command == "ablate") cmd_ablate(run);
    else if (opts.command == "sweep-negatives") cmd_sweep_negatives(run);
    run.write_manifest();
  } catch (const UsageError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
