#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefscore/corpus.hpp"
#include "prefscore/scorer.hpp"
#include "prefscore/text_pipeline.hpp"
#include "prefscore/train_config.hpp"

namespace prefscore {

struct ScoredPair {
  std::string id;
  double r_good = 0.0;
  double r_bad = 0.0;
};

/// Fraction of pairs with r_good strictly greater than r_bad. Ties count as
/// incorrect; their share is reported separately by tie_fraction.
double pairwise_accuracy(std::span<const ScoredPair> scored);
double tie_fraction(std::span<const ScoredPair> scored);

/// 1-based fractional ranks, ties averaged.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank-order correlation with average ranks for ties. Undefined
/// (absent) when either rank vector has zero variance, mirroring the "-"
/// report cells. Lengths must match and be >= 3.
std::optional<double> spearman(std::span<const double> model_scores,
                               std::span<const double> human_scores);

/// Product-moment correlation. Zero variance in either argument is an error.
double pearson(std::span<const double> x, std::span<const double> y);

/// One (task, setup, seed) measurement.
struct SeedResult {
  std::string task;
  std::string setup;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double tie_frac = 0.0;
  std::optional<double> spearman_rho;
};

struct CellStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1); 0 when n == 1
  int n_seeds = 0;
  std::optional<double> spearman_rho;  // mean of present per-seed values
};

/// Task-row / setup-column report. Rows and columns keep first-appearance
/// order of the input.
struct RunReport {
  std::vector<std::string> tasks;
  std::vector<std::string> setups;
  std::map<std::pair<std::string, std::string>, CellStats> cells;

  const CellStats* cell(const std::string& task, const std::string& setup) const;
  /// Unweighted mean of per-task accuracy means in one setup column.
  double column_average(const std::string& setup) const;
};

RunReport aggregate(std::span<const SeedResult> results);

void write_report_csv(const RunReport& report, std::ostream& out);
void write_report_text(const RunReport& report, std::ostream& out);
void emit_report(const RunReport& report, const std::filesystem::path& path,
                 const std::string& format);  // "csv" or "text"

// Seed-level results file (schema: task,setup,seed,accuracy,tie_fraction,spearman).
void save_seed_results(const std::filesystem::path& path, std::span<const SeedResult> rows);
std::vector<SeedResult> load_seed_results(const std::filesystem::path& path);

struct EvalOutcome {
  double accuracy = 0.0;
  double tie_frac = 0.0;
  std::optional<double> spearman_rho;
  std::vector<ScoredPair> scored;
};

/// Score every test pair of one model and compute the metrics. Spearman uses
/// the samples that carry a human_score (both sides of each pair), comparing
/// model scores to the original annotation scores.
EvalOutcome evaluate_model(const ScorerModel& model,
                           std::span<const PreferencePair> test_pairs,
                           const TaskRegistry& registry, const TrainConfig& cfg,
                           const Vocabulary& vocab);

}  // namespace prefscore
