// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
//
// Line-oriented "key = value" configuration with command-line overrides.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jointrank/augmentation.hpp"
#include "jointrank/corpus.hpp"
#include "jointrank/trainer.hpp"

namespace jointrank {

struct ResolvedConfig {
  SyntheticConfig generator;
  std::uint64_t data_seed = 7;
  TrainConfig train;
  AugmentConfig augment;
  std::size_t k_retrieve = 50;
  std::size_t k_report = 10;
  std::vector<std::size_t> sweep_m{2, 4, 8};  // list sizes for sweep-negatives
  std::size_t ablate_seeds = 1;               // ablate repeats over seeds seed, seed+1, ...

  /// Every key with its resolved value, in the documented order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  void validate() const;
};

/// Documented key names, in order.
const std::vector<std::string>& config_keys();

/// Overrides win over the file, the file over defaults. Unknown keys and
/// malformed values throw UsageError naming the key.
ResolvedConfig parse_config(const std::optional<std::filesystem::path>& file,
                            const std::map<std::string, std::string>& overrides);

/// Same, from in-memory text (the file contents).
ResolvedConfig parse_config_text(const std::string& text,
                                 const std::map<std::string, std::string>& overrides);

}  // namespace jointrank
