#include "prefscore/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "prefscore/evaluator.hpp"
#include "prefscore/instructions.hpp"
#include "prefscore/rng.hpp"

namespace prefscore {

RankingLossResult ranking_loss(double r_good, double r_bad) {
  if (!std::isfinite(r_good) || !std::isfinite(r_bad)) {
    throw ValidationError("ranking_loss: scores must be finite");
  }
  const double delta = r_bad - r_good;
  const double loss = std::max(delta, 0.0) + std::log1p(std::exp(-std::abs(delta)));
  // sigmoid(delta), evaluated without overflow on either tail
  const double sig = delta >= 0.0 ? 1.0 / (1.0 + std::exp(-delta))
                                  : std::exp(delta) / (1.0 + std::exp(delta));
  return RankingLossResult{loss, -sig, sig};
}

namespace {

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t t = 0;
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void apply_update(ParamSet& params, ParamSet& grads, AdamState& adam,
                  const TrainConfig& cfg, std::size_t batch_n) {
  const double inv_n = 1.0 / static_cast<double>(batch_n);
  if (cfg.use_sgd) {
    std::vector<std::vector<double>*> ps, gs;
    params.for_each_tensor([&](std::vector<double>& t) { ps.push_back(&t); });
    grads.for_each_tensor([&](std::vector<double>& t) { gs.push_back(&t); });
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& p = *ps[i];
      auto& gr = *gs[i];
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= cfg.learning_rate * gr[j] * inv_n;
    }
    return;
  }
  adam.t += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
  std::vector<std::vector<double>*> ps, gs, ms, vs;
  params.for_each_tensor([&](std::vector<double>& t) { ps.push_back(&t); });
  grads.for_each_tensor([&](std::vector<double>& t) { gs.push_back(&t); });
  adam.m.for_each_tensor([&](std::vector<double>& t) { ms.push_back(&t); });
  adam.v.for_each_tensor([&](std::vector<double>& t) { vs.push_back(&t); });
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& p = *ps[i];
    auto& gr = *gs[i];
    auto& m = *ms[i];
    auto& v = *vs[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = gr[j] * inv_n;
      m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g;
      v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }
}

}  // namespace

TrainResult train(ScorerModel model, std::span<const PreferencePair> pairs,
                  const TaskRegistry& registry, const TrainConfig& cfg,
                  const Vocabulary& vocab) {
  if (pairs.empty()) throw ValidationError("train: no pairs given");
  if (cfg.learning_rate <= 0) throw ValidationError("train: learning_rate must be > 0");
  if (cfg.grad_accum < 1) throw ValidationError("train: grad_accum must be >= 1");
  if (cfg.epochs < 1) throw ValidationError("train: epochs must be >= 1");

  const AssemblyConfig asm_cfg{cfg.label_input, cfg.truncate_right, model.cfg.max_len};

  // Resolve one instruction per task up front; every pair's task must have a
  // usable instruction.
  std::map<std::string, std::string> instruction_of;
  for (const auto& p : pairs) {
    if (instruction_of.count(p.task)) continue;
    instruction_of[p.task] = instruction_for(registry.get(p.task)).text;
  }

  // Pre-assemble both sides of every pair (the instruction is fixed for the
  // whole run, so this is equivalent to assembling inside the loop).
  struct Assembled {
    TokenSequence good, bad;
    const std::string* id;
    const std::string* task;
  };
  std::vector<Assembled> data;
  data.reserve(pairs.size());
  for (const auto& p : pairs) {
    const std::string& instr = instruction_of[p.task];
    data.push_back(Assembled{assemble(instr, p.good, asm_cfg, vocab),
                             assemble(instr, p.bad, asm_cfg, vocab), &p.id, &p.task});
  }

  Gradients grads = ParamSet::zeros(model.cfg);
  AdamState adam;
  adam.m = ParamSet::zeros(model.cfg);
  adam.v = ParamSet::zeros(model.cfg);

  TrainResult result;
  ForwardCache cache_good, cache_bad;
  std::vector<std::size_t> order(data.size());
  int update_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    deterministic_shuffle(order, cfg.seed ^ static_cast<std::uint64_t>(epoch));

    std::size_t batch_n = 0;
    double batch_loss = 0.0;
    std::map<std::string, int> task_counts;
    std::size_t pair_index = 0;

    auto flush = [&]() {
      if (batch_n == 0) return;
      apply_update(model.params, grads, adam, cfg, batch_n);
      grads.set_zero();
      ++update_step;
      result.curve.push_back(
          LossCurvePoint{update_step, epoch, batch_loss / static_cast<double>(batch_n)});
      batch_n = 0;
      batch_loss = 0.0;
    };

    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      const Assembled& ex = data[order[oi]];
      if (cfg.per_task_cap > 0) {
        int& count = task_counts[*ex.task];
        if (count >= cfg.per_task_cap) continue;
        ++count;
      }
      const double r_good =
          score_cached(model, ex.good.ids, ex.good.true_len, cache_good);
      const double r_bad = score_cached(model, ex.bad.ids, ex.bad.true_len, cache_bad);
      if (!std::isfinite(r_good) || !std::isfinite(r_bad)) {
        throw TrainingError("train: non-finite score at pair index " +
                            std::to_string(pair_index) + " (pair id \"" + *ex.id + "\")");
      }
      const RankingLossResult rl = ranking_loss(r_good, r_bad);
      if (!std::isfinite(rl.loss)) {
        throw TrainingError("train: non-finite loss at pair index " +
                            std::to_string(pair_index) + " (pair id \"" + *ex.id + "\")");
      }
      backward(model, cache_good, rl.d_good, grads);
      backward(model, cache_bad, rl.d_bad, grads);
      batch_loss += rl.loss;
      ++batch_n;
      ++pair_index;
      if (batch_n == static_cast<std::size_t>(cfg.grad_accum)) flush();
    }
    flush();  // trailing partial accumulation
  }

  result.model = std::move(model);
  return result;
}

Setup setup_from_string(const std::string& name) {
  if (name == "single_task") return Setup::SingleTask;
  if (name == "multi_task") return Setup::MultiTask;
  if (name == "cross_task") return Setup::CrossTask;
  if (name == "cross_cluster") return Setup::CrossCluster;
  throw ValidationError("unknown setup \"" + name + "\"");
}

std::string setup_to_string(Setup setup) {
  switch (setup) {
    case Setup::SingleTask: return "single_task";
    case Setup::MultiTask: return "multi_task";
    case Setup::CrossTask: return "cross_task";
    case Setup::CrossCluster: return "cross_cluster";
  }
  return "?";
}

std::vector<PreferencePair> select_training_pairs(const RunSpec& spec,
                                                  const SplitDataset& splits,
                                                  std::span<const Cluster> clusters) {
  if (spec.setup != Setup::MultiTask && spec.target_task.empty()) {
    throw ValidationError("run spec: target_task is required for this setup");
  }

  std::set<std::string> include, exclude;
  switch (spec.setup) {
    case Setup::SingleTask:
      include.insert(spec.target_task);
      break;
    case Setup::MultiTask:
      break;
    case Setup::CrossTask:
      exclude.insert(spec.target_task);
      break;
    case Setup::CrossCluster: {
      if (!spec.cluster) {
        throw ValidationError("run spec: cross_cluster requires a cluster name");
      }
      const Cluster* found = nullptr;
      for (const auto& c : clusters) {
        if (c.name == *spec.cluster) {
          found = &c;
          break;
        }
      }
      if (!found) throw ValidationError("unknown cluster \"" + *spec.cluster + "\"");
      if (!found->contains(spec.target_task)) {
        throw ValidationError("task \"" + spec.target_task + "\" is not in cluster \"" +
                              found->name + "\"");
      }
      include.insert(found->task_ids.begin(), found->task_ids.end());
      include.erase(spec.target_task);
      if (include.empty()) {
        throw ValidationError("cluster \"" + found->name +
                              "\" has no tasks besides the target");
      }
      break;
    }
  }

  auto selected = filter_tasks(splits.train, include, exclude);
  if (selected.empty()) {
    throw ValidationError("run spec: empty training selection for setup " +
                          setup_to_string(spec.setup));
  }
  return selected;
}

std::vector<TrainResult> run_setup(const RunSpec& spec, const SplitDataset& splits,
                                   const TaskRegistry& registry,
                                   std::span<const Cluster> clusters,
                                   const TrainConfig& cfg, const ScorerConfig& scorer_cfg,
                                   const Vocabulary& vocab) {
  if (spec.seeds.empty()) throw ValidationError("run spec: at least one seed required");
  auto training_pairs = select_training_pairs(spec, splits, clusters);

  std::vector<TrainResult> runs;
  runs.reserve(spec.seeds.size());
  for (std::uint64_t seed : spec.seeds) {
    ScorerConfig sc = scorer_cfg;
    sc.init_seed = seed;
    TrainConfig tc = cfg;
    tc.seed = seed;
    runs.push_back(train(init_scorer(sc), training_pairs, registry, tc, vocab));
  }
  return runs;
}

void save_loss_curve(const std::filesystem::path& path,
                     std::span<const LossCurvePoint> curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss curve: " + path.string());
  out << "step,epoch,loss\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", p.step, p.epoch, p.loss);
    out << buf;
  }
}

CandidateEval make_instruction_trial(const TaskSpec& task,
                                     std::vector<PreferencePair> train_pairs,
                                     std::vector<PreferencePair> val_pairs,
                                     const TrainConfig& cfg, const ScorerConfig& scorer_cfg,
                                     const Vocabulary& vocab) {
  return [task, train_pairs = std::move(train_pairs), val_pairs = std::move(val_pairs),
          cfg, scorer_cfg, vocab](const InstructionCandidate& candidate) {
    TaskSpec trial = task;
    trial.instructions = {candidate};
    trial.selected_instruction = candidate.id;
    TaskRegistry registry;
    registry.add(trial);
    TrainResult run = train(init_scorer(scorer_cfg), train_pairs, registry, cfg, vocab);
    return evaluate_model(run.model, val_pairs, registry, cfg, vocab).accuracy;
  };
}

CandidateEval make_pretrained_instruction_trial(const ScorerModel& model,
                                                std::vector<PreferencePair> val_pairs,
                                                const TrainConfig& cfg,
                                                const Vocabulary& vocab) {
  return [&model, val_pairs = std::move(val_pairs), cfg,
          vocab](const InstructionCandidate& candidate) {
    if (val_pairs.empty()) throw ValidationError("instruction trial: empty validation set");
    TaskSpec trial;
    trial.id = val_pairs.front().task;
    trial.instructions = {candidate};
    trial.selected_instruction = candidate.id;
    TaskRegistry registry;
    registry.add(trial);
    return evaluate_model(model, val_pairs, registry, cfg, vocab).accuracy;
  };
}

double gradient_check(const ScorerConfig& cfg, int n_samples, double epsilon,
                      std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("gradient_check: n_samples must be >= 1");
  if (epsilon <= 0) throw ValidationError("gradient_check: epsilon must be > 0");

  ScorerConfig sc = cfg;
  sc.init_seed = seed;
  ScorerModel model = init_scorer(sc);

  DetRng rng(seed ^ 0x9e3779b97f4a7c15ull);
  // Random head so the loss actually depends on every layer.
  for (auto& w : model.params.head_w) w = rng.uniform(-0.5, 0.5);
  model.params.head_b[0] = rng.uniform(-0.1, 0.1);

  const int len_good = std::max(2, sc.max_len / 2);
  const int len_bad = std::max(2, sc.max_len / 2 + 1);
  std::vector<int> ids_good(static_cast<std::size_t>(sc.max_len), 0);
  std::vector<int> ids_bad(static_cast<std::size_t>(sc.max_len), 0);
  for (int i = 0; i < len_good; ++i) {
    ids_good[static_cast<std::size_t>(i)] = static_cast<int>(rng.bounded(sc.vocab_size));
  }
  for (int i = 0; i < len_bad; ++i) {
    ids_bad[static_cast<std::size_t>(i)] = static_cast<int>(rng.bounded(sc.vocab_size));
  }

  auto pair_loss = [&](const ScorerModel& m) {
    const double rg = score(m, ids_good, len_good);
    const double rb = score(m, ids_bad, len_bad);
    return ranking_loss(rg, rb).loss;
  };

  // Analytic gradient of the pair loss.
  Gradients grads = ParamSet::zeros(sc);
  {
    ForwardCache cg, cb;
    const double rg = score_cached(model, ids_good, len_good, cg);
    const double rb = score_cached(model, ids_bad, len_bad, cb);
    const RankingLossResult rl = ranking_loss(rg, rb);
    backward(model, cg, rl.d_good, grads);
    backward(model, cb, rl.d_bad, grads);
  }

  std::vector<std::vector<double>*> ptensors, gtensors;
  model.params.for_each_tensor([&](std::vector<double>& t) { ptensors.push_back(&t); });
  grads.for_each_tensor([&](std::vector<double>& t) { gtensors.push_back(&t); });

  // Embedding rows of tokens that never occur have exactly zero gradient;
  // sampling them would test nothing, so draw until the slot is used (the
  // first tensor is the embedding).
  std::set<int> used_tokens(ids_good.begin(), ids_good.begin() + len_good);
  used_tokens.insert(ids_bad.begin(), ids_bad.begin() + len_bad);

  double max_rel = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    std::size_t ti = static_cast<std::size_t>(rng.bounded(ptensors.size()));
    std::vector<double>& tensor = *ptensors[ti];
    std::size_t ei = static_cast<std::size_t>(rng.bounded(tensor.size()));
    if (ti == 0) {
      const int row = static_cast<int>(ei) / sc.d_model;
      if (!used_tokens.count(row)) {
        --s;
        continue;
      }
    }
    const double saved = tensor[ei];
    tensor[ei] = saved + epsilon;
    const double lp = pair_loss(model);
    tensor[ei] = saved - epsilon;
    const double lm = pair_loss(model);
    tensor[ei] = saved;
    const double numeric = (lp - lm) / (2.0 * epsilon);
    const double analytic = (*gtensors[ti])[ei];
    const double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
    if (rel > max_rel) max_rel = rel;
  }
  return max_rel;
}

}  // namespace prefscore
