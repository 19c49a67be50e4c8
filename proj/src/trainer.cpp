// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include "jointrank/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "jointrank/errors.hpp"

namespace jointrank {

namespace {
// RNG stream ids derived from TrainConfig::seed.
constexpr std::uint64_t kStreamRetrieverInit = 11;
constexpr std::uint64_t kStreamRerankerInit = 12;
constexpr std::uint64_t kStreamWarmStart = 13;
constexpr std::uint64_t kStreamShuffle = 14;
constexpr std::uint64_t kStreamAugment = 15;
}  // namespace

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::dynamic_listwise: return "dynamic_listwise";
    case TrainMode::static_distillation: return "static_distillation";
    case TrainMode::pointwise_reranker: return "pointwise_reranker";
  }
  return "unknown";
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "dynamic_listwise") return TrainMode::dynamic_listwise;
  if (name == "static_distillation") return TrainMode::static_distillation;
  if (name == "pointwise_reranker") return TrainMode::pointwise_reranker;
  throw UsageError("unknown training mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size == 0 || n_neg == 0) throw UsageError("batch_size and n_neg must be positive");
  if (!(learning_rate > 0.0) || !(warm_start_learning_rate > 0.0)) {
    throw UsageError("learning rates must be positive");
  }
  if (!(grad_clip > 0.0)) throw UsageError("grad_clip must be positive");
  if (mode == TrainMode::pointwise_reranker && use_in_batch_negatives) {
    throw UsageError("in-batch negatives are only defined for the listwise modes");
  }
  dims.validate();
}

DataView::DataView(const Corpus& corpus, std::span<const Query> queries, const Qrels& qrels)
    : corpus_(&corpus), queries_(queries), qrels_(&qrels) {
  for (const Query& q : queries_) by_id_.emplace(q.id, &q);
}

const Query& DataView::query(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ValidationError("unknown query id " + id);
  return *it->second;
}

OptimizerStates OptimizerStates::fresh(const Models& models, double learning_rate) {
  return {AdamState::fresh(models.retriever.parameters().size(), learning_rate),
          AdamState::fresh(models.reranker.parameters().size(), learning_rate)};
}

MaterializedBatch materialize(std::span<const TrainingInstance> batch, const DataView& data,
                              bool in_batch_negatives) {
  if (batch.empty()) throw UsageError("empty training batch");
  MaterializedBatch out;
  const Corpus& corpus = data.corpus();
  for (const TrainingInstance& inst : batch) {
    validate_instance(inst);
    ScoredList list{data.query(inst.query_id).tokens, {}};
    for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
      list.candidates.emplace_back(corpus[corpus.index_of(inst.candidates[i])].tokens);
      out.labels.push_back(inst.labels[i]);
    }
    if (in_batch_negatives) {
      std::set<std::string> held(inst.candidates.begin(), inst.candidates.end());
      for (const TrainingInstance& other : batch) {
        if (&other == &inst || !held.insert(other.positive()).second) continue;
        // Another query's positive may also be relevant here; keep only true negatives.
        const auto& own = data.qrels().at(inst.query_id);
        if (own.contains(other.positive())) continue;
        list.candidates.emplace_back(corpus[corpus.index_of(other.positive())].tokens);
        out.labels.push_back(0);
      }
    }
    out.list_sizes.push_back(list.candidates.size());
    out.lists.push_back(std::move(list));
  }
  return out;
}

JointGradients joint_gradients(const MaterializedBatch& batch, const Models& models,
                               TrainMode mode) {
  const Vector de = score_batch(models.retriever, batch.lists);
  const Vector ce = score_batch(models.reranker, batch.lists);
  JointGradients out;
  out.report = mode == TrainMode::pointwise_reranker
                   ? pointwise_final_loss(de, ce, batch.list_sizes, batch.labels)
                   : final_loss(de, ce, batch.list_sizes, batch.labels);
  out.retriever = grad_de(models.retriever, batch.lists, out.report.grad_wrt_de_scores);
  if (mode == TrainMode::static_distillation) {
    out.reranker = Vector::Zero(models.reranker.parameters().size());
  } else {
    out.reranker = grad_ce(models.reranker, batch.lists, out.report.grad_wrt_ce_scores);
  }
  return out;
}

double clip_global_norm(Vector& g, double max_norm) {
  const double norm = g.norm();
  if (norm > max_norm) g *= max_norm / norm;
  return norm;
}

LossReport joint_train_step(std::span<const TrainingInstance> batch, const DataView& data,
                            Models& models, OptimizerStates& states, const TrainConfig& config) {
  config.validate();
  const MaterializedBatch mb = materialize(batch, data, config.use_in_batch_negatives);
  JointGradients g = joint_gradients(mb, models, config.mode);
  clip_global_norm(g.retriever, config.grad_clip);
  adam_step(models.retriever.parameters(), g.retriever, states.retriever);
  if (config.mode != TrainMode::static_distillation) {
    clip_global_norm(g.reranker, config.grad_clip);
    adam_step(models.reranker.parameters(), g.reranker, states.reranker);
  }
  return g.report;
}

Models initial_models(const TrainConfig& config) {
  config.dims.validate();
  const SeededRng root(config.seed);
  SeededRng de_rng = root.split(kStreamRetrieverInit);
  SeededRng ce_rng = root.split(kStreamRerankerInit);
  return {DualEncoder::random(config.dims, de_rng), CrossEncoder::random(config.dims, ce_rng)};
}

namespace {

/// Mean listwise CE over a batch: value and upstream gradient per score.
std::pair<double, Vector> listwise_ce(const Vector& scores, const MaterializedBatch& batch) {
  Vector upstream(scores.size());
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.list_sizes.size());
  Eigen::Index offset = 0;
  for (std::size_t m : batch.list_sizes) {
    const auto len = static_cast<Eigen::Index>(m);
    const ScalarLoss l = sup_ce_loss(scores.segment(offset, len),
                                     std::span(batch.labels).subspan(offset, m));
    total += l.value;
    upstream.segment(offset, len) = inv_n * l.grad;
    offset += len;
  }
  return {total * inv_n, upstream};
}

}  // namespace

Models warm_start(const DataView& data, const TrainConfig& config) {
  config.validate();
  Models models = initial_models(config);
  if (config.warm_start_epochs == 0) return models;

  const Corpus& corpus = data.corpus();
  if (corpus.size() <= config.n_neg) throw ValidationError("warm_start: corpus too small");
  std::vector<std::size_t> order(data.queries().size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t qi : order) {
    const auto it = data.qrels().find(data.queries()[qi].id);
    if (it == data.qrels().end() || it->second.empty()) {
      throw ValidationError("warm_start: query " + data.queries()[qi].id + " has no positive");
    }
  }
  if (order.empty()) throw ValidationError("warm_start: no training queries");

  SeededRng rng = SeededRng(config.seed).split(kStreamWarmStart);
  OptimizerStates states = OptimizerStates::fresh(models, config.warm_start_learning_rate);
  for (std::size_t epoch = 0; epoch < config.warm_start_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<TrainingInstance> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        const Query& q = data.queries()[order[i]];
        const auto& positives = data.qrels().at(q.id);
        TrainingInstance inst;
        inst.query_id = q.id;
        inst.candidates.push_back(*positives.begin());
        inst.labels.push_back(1);
        while (inst.candidates.size() < config.n_neg + 1) {
          const std::string& id = corpus[rng.uniform_index(corpus.size())].id;
          if (positives.contains(id) ||
              std::find(inst.candidates.begin(), inst.candidates.end(), id) !=
                  inst.candidates.end()) {
            continue;
          }
          inst.candidates.push_back(id);
          inst.labels.push_back(0);
          inst.negative_provenance.push_back(Provenance::undenoised);
        }
        batch.push_back(std::move(inst));
      }
      const MaterializedBatch mb = materialize(batch, data, config.warm_start_in_batch);
      auto [de_loss, de_up] = listwise_ce(score_batch(models.retriever, mb.lists), mb);
      auto [ce_loss, ce_up] = listwise_ce(score_batch(models.reranker, mb.lists), mb);
      Vector g_de = grad_de(models.retriever, mb.lists, de_up);
      Vector g_ce = grad_ce(models.reranker, mb.lists, ce_up);
      clip_global_norm(g_de, config.grad_clip);
      clip_global_norm(g_ce, config.grad_clip);
      adam_step(models.retriever.parameters(), g_de, states.retriever);
      adam_step(models.reranker.parameters(), g_ce, states.reranker);
    }
  }
  return models;
}

namespace {

Metrics dev_metrics(const Models& models, const DataView& dev) {
  const RunFile run = retrieve_run(models.retriever, dev.corpus(), dev.queries(), 50);
  return standard_metrics(run, dev.qrels());
}

}  // namespace

TrainResult train(const DataView& data, const std::vector<TrainingInstance>& instances,
                  Models models, const TrainConfig& config, const DataView* dev) {
  config.validate();
  if (instances.empty() && config.epochs > 0) throw UsageError("train: no training instances");
  TrainResult result{std::move(models), {}};
  if (dev) result.log.epochs.push_back({0, dev_metrics(result.models, *dev)});

  OptimizerStates states = OptimizerStates::fresh(result.models, config.learning_rate);
  SeededRng rng = SeededRng(config.seed).split(kStreamShuffle);
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<TrainingInstance> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(instances[order[i]]);
      }
      ++step;
      const LossReport r = joint_train_step(batch, data, result.models, states, config);
      if (!std::isfinite(r.l_final) || !std::isfinite(r.l_kl) || !std::isfinite(r.l_sup)) {
        throw ValidationError("train: non-finite loss at step " + std::to_string(step));
      }
      result.log.steps.push_back({step, r.l_kl, r.l_sup, r.l_final});
    }
    if (dev) result.log.epochs.push_back({epoch, dev_metrics(result.models, *dev)});
  }
  return result;
}

double mean_list_kl(const DataView& data, std::span<const TrainingInstance> instances,
                    const Models& models) {
  if (instances.empty()) return 0.0;
  const MaterializedBatch mb = materialize(instances, data, false);
  const Vector de = score_batch(models.retriever, mb.lists);
  const Vector ce = score_batch(models.reranker, mb.lists);
  return final_loss(de, ce, mb.list_sizes, mb.labels).l_kl;
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "step\tl_kl\tl_sup\tl_final\n";
  for (const StepRecord& s : log.steps) {
    out << s.step << '\t' << format_real(s.l_kl) << '\t' << format_real(s.l_sup) << '\t'
        << format_real(s.l_final) << '\n';
  }
}

void write_epoch_metrics(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "epoch\tmetric\tvalue\n";
  for (const EpochRecord& e : log.epochs) {
    for (const auto& [name, value] : e.metrics) {
      out << e.epoch << '\t' << name << '\t' << format_real(value) << '\n';
    }
  }
}

std::uint64_t augment_seed(const TrainConfig& config) {
  return SeededRng(config.seed).split(kStreamAugment).next_u64();
}

ExperimentResult run_experiment(const SyntheticData& data, const ExperimentConfig& config,
                                const Models* warm) {
  const DataView train_view(data.corpus, data.train_queries, data.qrels);
  const DataView dev_view(data.corpus, data.dev_queries, data.qrels);

  ExperimentResult result;
  if (warm) {
    result.warm = *warm;
  } else {
    result.warm = config.warm_start ? warm_start(train_view, config.train)
                                    : initial_models(config.train);
  }
  result.warm_dev = dev_metrics(result.warm, dev_view);

  AugmentConfig augment = config.augment;
  augment.n_neg = config.train.n_neg;
  if (!config.train.use_denoised) augment.denoised_fraction = 0.0;
  AugmentResult aug = build_instances(data.corpus, data.train_queries, data.qrels,
                                      result.warm.retriever, result.warm.reranker, augment,
                                      augment_seed(config.train));
  result.instances = std::move(aug.instances);
  result.skipped = aug.skipped;

  result.initial_kl = mean_list_kl(train_view, result.instances, result.warm);
  TrainResult trained = train(train_view, result.instances, result.warm, config.train, &dev_view);
  result.trained = std::move(trained.models);
  result.log = std::move(trained.log);
  result.final_kl = mean_list_kl(train_view, result.instances, result.trained);
  result.final_dev = pipeline_eval(result.trained.retriever, result.trained.reranker, data.corpus,
                                   data.dev_queries, data.qrels, config.k_retrieve,
                                   config.k_report);
  return result;
}

}  // namespace jointrank
