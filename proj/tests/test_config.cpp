// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "jointrank/config.hpp"

using namespace jointrank;

namespace {

std::string error_of(const std::string& text, const std::map<std::string, std::string>& o = {}) {
  try {
    parse_config_text(text, o);
  } catch (const UsageError& e) {
    return e.what();
  }
  return {};
}

bool mentions(const std::string& message, const std::string& word) {
  return message.find(word) != std::string::npos;
}

}  // namespace

TEST_CASE("empty config resolves to the defaults") {
  const ResolvedConfig c = parse_config_text("", {});
  const ResolvedConfig d;
  CHECK(c.train.epochs == d.train.epochs);
  CHECK(c.train.learning_rate == d.train.learning_rate);
  CHECK(c.train.mode == TrainMode::dynamic_listwise);
  CHECK(c.generator.num_passages == d.generator.num_passages);
  CHECK(c.k_retrieve == 50);
  CHECK(c.train.dims.vocab_size == c.generator.vocab_size);
  CHECK(c.augment.n_neg == c.train.n_neg);
  CHECK(parse_config(std::nullopt, {}).entries() == c.entries());
}

TEST_CASE("overrides beat the file, the file beats defaults") {
  const std::string file = "epochs = 3\nlearning_rate = 0.01  # tuned\n\n# comment only\n";
  const ResolvedConfig from_file = parse_config_text(file, {});
  CHECK(from_file.train.epochs == 3);
  CHECK(from_file.train.learning_rate == 0.01);
  const ResolvedConfig overridden = parse_config_text(file, {{"epochs", "1"}});
  CHECK(overridden.train.epochs == 1);
  CHECK(overridden.train.learning_rate == 0.01);
}

TEST_CASE("derived fields follow their sources") {
  const ResolvedConfig c = parse_config_text("vocab_size = 300\nn_neg = 3\n", {});
  CHECK(c.train.dims.vocab_size == 300);
  CHECK(c.augment.n_neg == 3);
}

TEST_CASE("typed values") {
  const ResolvedConfig c = parse_config_text(
      "mode = static_distillation\nuse_denoised = false\nsweep_m = 2, 6\nt_pos = 0.8\n", {});
  CHECK(c.train.mode == TrainMode::static_distillation);
  CHECK_FALSE(c.train.use_denoised);
  CHECK(c.sweep_m == std::vector<std::size_t>{2, 6});
  CHECK(c.augment.thresholds.positive == 0.8);
}

TEST_CASE("errors name the offending key") {
  CHECK(mentions(error_of("epohcs = 3\n"), "'epohcs'"));
  CHECK(mentions(error_of("", {{"epohcs", "3"}}), "'epohcs'"));
  CHECK(mentions(error_of("epochs = three\n"), "'epochs'"));
  CHECK(mentions(error_of("epochs = -1\n"), "'epochs'"));
  CHECK(mentions(error_of("learning_rate = 1e-3x\n"), "'learning_rate'"));
  CHECK(mentions(error_of("use_denoised = maybe\n"), "'use_denoised'"));
  CHECK(mentions(error_of("mode = listwise\n"), "'mode'"));
  CHECK(mentions(error_of("sweep_m = 1\n"), "'sweep_m'"));
  CHECK(mentions(error_of("k_report = 60\n"), "'k_report'"));
  CHECK(mentions(error_of("just some words\n"), "line 1"));
}

TEST_CASE("semantic validation") {
  CHECK_THROWS_AS(parse_config_text("mode = pointwise_reranker\nuse_in_batch_negatives = true\n",
                                    {}),
                  UsageError);
  CHECK_THROWS_AS(parse_config_text("denoised_fraction = 1.5\n", {}), UsageError);
  CHECK_THROWS_AS(parse_config_text("ablate_seeds = 0\n", {}), UsageError);
}

TEST_CASE("entries list every key once, in order") {
  const auto entries = ResolvedConfig{}.entries();
  REQUIRE(entries.size() == config_keys().size());
  for (std::size_t i = 0; i < entries.size(); ++i) CHECK(entries[i].first == config_keys()[i]);
  // Printing and re-reading is lossless.
  std::string text;
  for (const auto& [k, v] : parse_config_text("learning_rate = 0.00123\n", {}).entries()) {
    text += k + " = " + v + "\n";
  }
  CHECK(parse_config_text(text, {}).train.learning_rate == 0.00123);
}

TEST_CASE("config files") {
  const auto path = std::filesystem::temp_directory_path() / "jointrank_test_config.conf";
  std::ofstream(path) << "epochs = 5\n";
  CHECK(parse_config(path, {}).train.epochs == 5);
  CHECK_THROWS_AS(parse_config(path.string() + ".missing", {}), UsageError);
}
