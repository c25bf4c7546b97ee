#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefscore/corpus.hpp"
#include "prefscore/instructions.hpp"
#include "prefscore/scorer.hpp"
#include "prefscore/text_pipeline.hpp"
#include "prefscore/train_config.hpp"

namespace prefscore {

struct RankingLossResult {
  double loss;
  double d_good;  // dL/dr_good = -sigmoid(r_bad - r_good)
  double d_bad;   // dL/dr_bad  = +sigmoid(r_bad - r_good)
};

/// L = log(1 + exp(r_bad - r_good)) in the overflow-safe softplus form:
/// with D = r_bad - r_good, L = max(D, 0) + log1p(exp(-|D|)).
RankingLossResult ranking_loss(double r_good, double r_bad);

struct LossCurvePoint {
  int step;    // optimizer update index, 1-based
  int epoch;   // 0-based epoch of the update
  double loss; // mean ranking loss of the accumulated batch
};

struct TrainResult {
  ScorerModel model;
  std::vector<LossCurvePoint> curve;
};

/// Optimize the ranking loss over the pairs. Each epoch shuffles with
/// seed = cfg.seed xor epoch index, accumulates gradients over grad_accum
/// pairs, and applies one averaged adaptive-moment update (or SGD with
/// cfg.use_sgd); a trailing partial batch is flushed at epoch end. Fully
/// deterministic given (cfg, data, model).
TrainResult train(ScorerModel model, std::span<const PreferencePair> pairs,
                  const TaskRegistry& registry, const TrainConfig& cfg,
                  const Vocabulary& vocab);

enum class Setup { SingleTask, MultiTask, CrossTask, CrossCluster };

Setup setup_from_string(const std::string& name);  // names as in the CLI
std::string setup_to_string(Setup setup);

struct RunSpec {
  Setup setup = Setup::SingleTask;
  std::string target_task;             // required except multi_task training
  std::optional<std::string> cluster;  // required for cross_cluster
  std::vector<std::uint64_t> seeds;
};

/// The training-set selector behind each experimental setup:
/// single_task keeps only the target, multi_task keeps everything,
/// cross_task drops the target, cross_cluster keeps the cluster minus the
/// target. Errors if the selection comes out empty.
std::vector<PreferencePair> select_training_pairs(const RunSpec& spec,
                                                  const SplitDataset& splits,
                                                  std::span<const Cluster> clusters);

/// One independent training run per seed (seed drives both the parameter
/// init and the epoch shuffles).
std::vector<TrainResult> run_setup(const RunSpec& spec, const SplitDataset& splits,
                                   const TaskRegistry& registry,
                                   std::span<const Cluster> clusters,
                                   const TrainConfig& cfg, const ScorerConfig& scorer_cfg,
                                   const Vocabulary& vocab);

void save_loss_curve(const std::filesystem::path& path,
                     std::span<const LossCurvePoint> curve);

/// CandidateEval that trains a fresh model with the candidate instruction on
/// train_pairs and returns validation pairwise accuracy.
CandidateEval make_instruction_trial(const TaskSpec& task,
                                     std::vector<PreferencePair> train_pairs,
                                     std::vector<PreferencePair> val_pairs,
                                     const TrainConfig& cfg, const ScorerConfig& scorer_cfg,
                                     const Vocabulary& vocab);

/// CandidateEval for zero-shot targets: scores the validation pairs with an
/// already-trained model under each candidate instruction, without touching
/// the target task's training data.
CandidateEval make_pretrained_instruction_trial(const ScorerModel& model,
                                                std::vector<PreferencePair> val_pairs,
                                                const TrainConfig& cfg,
                                                const Vocabulary& vocab);

/// Max relative finite-difference error of the analytic pair-loss gradient,
/// |analytic - central| / max(1, |analytic|), over n_samples randomly chosen
/// parameters of a randomly initialized model on a random token pair.
double gradient_check(const ScorerConfig& cfg, int n_samples, double epsilon,
                      std::uint64_t seed);

}  // namespace prefscore
