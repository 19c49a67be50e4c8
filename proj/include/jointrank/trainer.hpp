// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
//
// Warm start, joint retriever/re-ranker training, and the ablation modes.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "jointrank/augmentation.hpp"
#include "jointrank/corpus.hpp"
#include "jointrank/losses.hpp"
#include "jointrank/models.hpp"
#include "jointrank/retrieval.hpp"

namespace jointrank {

enum class TrainMode {
  dynamic_listwise,     // both scorers updated; re-ranker from KL + supervised CE
  static_distillation,  // re-ranker frozen; retriever distils from it
  pointwise_reranker,   // re-ranker trained pointwise; retriever from its normalized scores
};

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::dynamic_listwise;
  bool use_denoised = true;
  bool use_in_batch_negatives = false;
  std::size_t epochs = 3;
  std::size_t batch_size = 8;  // queries per batch
  double learning_rate = 1e-3;
  std::size_t n_neg = 7;
  std::uint64_t seed = 7;
  double grad_clip = 5.0;  // global L2 norm, per scorer

  std::size_t warm_start_epochs = 16;
  double warm_start_learning_rate = 3e-3;
  bool warm_start_in_batch = true;  // other queries' positives as extra warm-start negatives
  ModelDims dims;

  void validate() const;
};

/// Read-only view of the data a training run draws from.
class DataView {
 public:
  DataView(const Corpus& corpus, std::span<const Query> queries, const Qrels& qrels);

  const Corpus& corpus() const noexcept { return *corpus_; }
  const Qrels& qrels() const noexcept { return *qrels_; }
  std::span<const Query> queries() const noexcept { return queries_; }
  const Query& query(const std::string& id) const;

 private:
  const Corpus* corpus_;
  std::span<const Query> queries_;
  const Qrels* qrels_;
  std::unordered_map<std::string, const Query*> by_id_;
};

struct Models {
  DualEncoder retriever;
  CrossEncoder reranker;
};

struct OptimizerStates {
  AdamState retriever;
  AdamState reranker;

  static OptimizerStates fresh(const Models& models, double learning_rate);
};

/// Score lists and labels for a batch, ready for the losses.
struct MaterializedBatch {
  std::vector<ScoredList> lists;
  std::vector<std::size_t> list_sizes;
  std::vector<int> labels;
};

/// Resolves instance ids to tokens. With in_batch_negatives, each list is
/// extended by the positives of the other instances in the batch (skipping
/// ids it already holds); the instances themselves are not touched.
MaterializedBatch materialize(std::span<const TrainingInstance> batch, const DataView& data,
                              bool in_batch_negatives);

struct JointGradients {
  LossReport report;
  Vector retriever;  // d L / d theta_de
  Vector reranker;   // d L / d theta_ce; zero in static mode
};

/// Loss and parameter gradients of one batch under a training mode, before clipping.
JointGradients joint_gradients(const MaterializedBatch& batch, const Models& models,
                               TrainMode mode);

/// One optimizer step. Static mode leaves the re-ranker and its state untouched.
LossReport joint_train_step(std::span<const TrainingInstance> batch, const DataView& data,
                            Models& models, OptimizerStates& states, const TrainConfig& config);

/// Scales g in place so that ||g||_2 <= max_norm. Returns the original norm.
double clip_global_norm(Vector& g, double max_norm);

/// Supervised pre-training of both scorers on (positive + random negatives)
/// lists from freshly seeded random init.
Models warm_start(const DataView& data, const TrainConfig& config);

/// Models at their seeded random initialization (what warm_start starts from).
Models initial_models(const TrainConfig& config);

struct StepRecord {
  std::size_t step = 0;
  double l_kl = 0.0;
  double l_sup = 0.0;
  double l_final = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the state before training
  Metrics metrics;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  Models models;
  TrainLog log;
};

/// Seeded-shuffle epochs of joint_train_step. When dev is given, retriever
/// dev metrics are recorded before training and after each epoch.
TrainResult train(const DataView& data, const std::vector<TrainingInstance>& instances,
                  Models models, const TrainConfig& config, const DataView* dev = nullptr);

/// Mean per-list KL between retriever and re-ranker over a set of instances.
double mean_list_kl(const DataView& data, std::span<const TrainingInstance> instances,
                    const Models& models);

void write_train_log(const std::filesystem::path& path, const TrainLog& log);
void write_epoch_metrics(const std::filesystem::path& path, const TrainLog& log);

/// Full desk-scale run: warm start, augmentation, joint training, evaluation.
struct ExperimentConfig {
  TrainConfig train;
  AugmentConfig augment;
  std::size_t k_retrieve = 50;
  std::size_t k_report = 10;
  bool warm_start = true;  // false trains jointly from random init
};

struct ExperimentResult {
  Models warm;
  Models trained;
  std::vector<TrainingInstance> instances;
  std::size_t skipped = 0;
  TrainLog log;
  Metrics warm_dev;       // retriever dev metrics of the warm-start checkpoint
  PipelineResult final_dev;
  double initial_kl = 0.0;  // mean per-list KL over the instances, before joint training
  double final_kl = 0.0;
};

/// Seed that run_experiment hands to build_instances.
std::uint64_t augment_seed(const TrainConfig& config);

/// Augmentation honours train.n_neg and, when train.use_denoised is false,
/// forces denoised_fraction to 0.
ExperimentResult run_experiment(const SyntheticData& data, const ExperimentConfig& config,
                                const Models* warm = nullptr);

}  // namespace jointrank
