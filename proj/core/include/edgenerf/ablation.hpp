#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgenerf/config.hpp"
#include "edgenerf/eval.hpp"

namespace edgenerf {

struct AblationRow {
  std::string name;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  EdgeGating gating = EdgeGating::EdgeGuided;
};

// baseline, +depth, +normal, full, plus +depth with global (un-gated) smoothing.
// The regularizer weights come from `config` for the rows that enable them.
std::vector<AblationRow> default_ablation_rows(const Config& config);

struct AblationResult {
  AblationRow row;
  MetricsReport metrics;
  double train_ms = 0.0;
  std::uint64_t density_gradient_calls = 0;
  std::vector<std::uint64_t> draws;
};

struct AblationReport {
  std::vector<AblationResult> results;
  bool draws_consistent = true;  // identical RNG draw counts per iteration across rows

  const AblationResult& row(const std::string& name) const;
  std::string table() const;
};

// Trains every row into out_dir/<row name>/, interleaving their iterations,
// then evaluates each on the test split and writes table.txt.
AblationReport run_ablation(const Config& config, const std::filesystem::path& data_dir,
                            const std::filesystem::path& out_dir, const std::vector<AblationRow>& rows);

}  // namespace edgenerf
