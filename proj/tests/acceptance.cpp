// Acceptance suite: one line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"
#include "prefscore/cli.hpp"
#include "prefscore/corpus.hpp"
#include "prefscore/evaluator.hpp"
#include "prefscore/pair_builder.hpp"
#include "prefscore/rng.hpp"
#include "prefscore/scorer.hpp"
#include "prefscore/synth.hpp"
#include "prefscore/text_pipeline.hpp"
#include "prefscore/trainer.hpp"

using namespace prefscore;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

fs::path data_dir() { return fs::path(PREFSCORE_SOURCE_DIR) / "data"; }

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("prefscore_accept_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// -------------------------------------------------------------------------
// shared synthetic-training harness
// -------------------------------------------------------------------------

struct TrainedSetup {
  Vocabulary vocab = Vocabulary::build(std::vector<std::string>{}, 5);
  TaskRegistry registry;
  ScorerConfig scorer_cfg;
  TrainConfig train_cfg;
};

TrainedSetup make_setup(const std::vector<const SynthOutput*>& tasks,
                        std::span<const PreferencePair> train_pairs) {
  TrainedSetup s;
  for (const auto* t : tasks) s.registry.add(t->task);

  std::vector<std::string> corpus;
  for (const auto& p : train_pairs) {
    corpus.push_back(p.good.elements[0].text);
    corpus.push_back(p.good.answer);
    corpus.push_back(p.bad.answer);
  }
  for (const auto* t : tasks) {
    for (const auto& c : t->task.instructions) corpus.push_back(c.text);
  }
  corpus.push_back("answer");
  s.vocab = Vocabulary::build(corpus, 512);

  s.scorer_cfg.d_model = 64;
  s.scorer_cfg.n_layers = 2;
  s.scorer_cfg.n_heads = 4;
  s.scorer_cfg.d_ff = 256;
  s.scorer_cfg.max_len = 64;
  s.scorer_cfg.vocab_size = static_cast<int>(s.vocab.size());

  s.train_cfg.learning_rate = 2e-4;
  s.train_cfg.grad_accum = 8;
  s.train_cfg.epochs = 3;
  return s;
}

// -------------------------------------------------------------------------
// criteria
// -------------------------------------------------------------------------

Check criterion1_loss_oracle() {
  Check c;
  const auto t0 = Clock::now();

  DetRng rng(101);
  for (int i = 0; i < 100; ++i) {
    const double r = rng.uniform(-100.0, 100.0);
    c.require(std::abs(ranking_loss(r, r).loss - 0.6931471805599453) < 1e-12,
              "loss(r,r) != ln 2");
  }
  // arbitrary-precision reference for log(1 + exp(20)):
  // 20.000000002061153620314380703238982798878
  const RankingLossResult big = ranking_loss(0.0, 20.0);
  c.require(std::isfinite(big.loss), "overflow at gap 20");
  c.require(std::abs(big.loss - 20.000000002061153620314380703) < 1e-9,
            "loss(0,20) off the high-precision reference");
  for (int i = 0; i < 100; ++i) {
    const RankingLossResult r =
        ranking_loss(rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0));
    c.require(r.d_good + r.d_bad == 0.0, "gradient pair does not sum to zero");
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.require(secs < 1.0, "runtime over 1 s");
  return c;
}

Check criterion2_gradient_check() {
  Check c;
  const auto t0 = Clock::now();
  ScorerConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 4;
  cfg.d_ff = 64;
  cfg.max_len = 32;
  cfg.vocab_size = 64;
  const double max_rel = gradient_check(cfg, 25, 1e-4, 7);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max relative error %.3g", max_rel);
  c.note(buf);
  c.require(max_rel < 1e-4, "finite-difference mismatch");
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.require(secs < 30.0, "runtime over 30 s");
  return c;
}

Check criterion3_aggregate_fixtures() {
  Check c;
  const auto t0 = Clock::now();

  nlohmann::json table2;
  std::ifstream(data_dir() / "fixtures" / "reference_results.json") >> table2;
  std::vector<SeedResult> rows;
  for (const auto& [task, cells] : table2.items()) {
    for (const char* setup : {"base", "single_task", "multi_task", "cross_task"}) {
      rows.push_back(SeedResult{task, setup, 0, cells[setup]["mean"].get<double>(), 0.0,
                                std::nullopt});
    }
  }
  c.require(rows.size() == 88, "expected 22 tasks x 4 setups");
  RunReport report = aggregate(rows);
  const double single = report.column_average("single_task");
  const double multi = report.column_average("multi_task");
  const double cross = report.column_average("cross_task");
  const double base = report.column_average("base");
  c.require(std::abs(single - 63.24) < 0.01, "single-task average off 63.24");
  c.require(std::abs(multi - 68.82) < 0.01, "multi-task average off 68.82");
  c.require(std::abs(cross - 54.85) < 0.01, "cross-task average off 54.85");
  // The base column recomputes to ~48.28; the reported 50.58 is not
  // reproducible from the rounded per-task values.
  c.require(std::abs(base - 48.28) < 0.01, "recomputed base average off 48.28");
  {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "base recomputes to %.2f (reported 50.58)", base);
    c.note(buf);
  }

  nlohmann::json table3;
  std::ifstream(data_dir() / "fixtures" / "reference_cluster_results.json") >> table3;
  for (const auto& cluster : table3) {
    std::vector<SeedResult> crows;
    for (const auto& [task, vals] : cluster["tasks"].items()) {
      crows.push_back(SeedResult{task, "cross_all", 0, vals[0].get<double>(), 0.0,
                                 std::nullopt});
      crows.push_back(SeedResult{task, "cross_cluster", 0, vals[1].get<double>(), 0.0,
                                 std::nullopt});
    }
    RunReport cr = aggregate(crows);
    const double want_all = cluster["cross_all_avg"].get<double>();
    const double want_cluster = cluster["cross_cluster_avg"].get<double>();
    c.require(std::abs(cr.column_average("cross_all") - want_all) < 0.01,
              cluster["name"].get<std::string>() + ": cross-all average off");
    c.require(std::abs(cr.column_average("cross_cluster") - want_cluster) < 0.01,
              cluster["name"].get<std::string>() + ": cross-cluster average off");
  }

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.require(secs < 1.0, "runtime over 1 s");
  return c;
}

Check criterion4_pearson_fixture() {
  Check c;
  const auto t0 = Clock::now();

  nlohmann::json counts, table2;
  std::ifstream(data_dir() / "fixtures" / "task_example_counts.json") >> counts;
  std::ifstream(data_dir() / "fixtures" / "reference_results.json") >> table2;

  std::vector<double> n_total, n_train, single;
  for (const auto& [task, n] : counts.items()) {
    const double total = n.get<double>();
    n_total.push_back(total);
    n_train.push_back(total - 2.0 * std::floor(total / 10.0));
    single.push_back(table2[task]["single_task"]["mean"].get<double>());
  }
  const double rho_total = pearson(n_total, single);
  const double rho_train = pearson(n_train, single);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "rho(total counts)=%.4f, rho(train counts)=%.4f, reference value 0.15",
                rho_total, rho_train);
  c.note(buf);
  // Both count bases recompute to ~0.0995 from the shipped reference values,
  // just below the required band; see the bracketing assertion below.
  c.require(rho_total >= 0.10 && rho_total <= 0.20,
            "recomputed correlation outside [0.10, 0.20]");
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.require(secs < 1.0, "runtime over 1 s");
  return c;
}

Check criterion5_learnability() {
  Check c;

  SynthTaskSpec spec;
  spec.task_id = "synA";
  spec.family = "famA";
  spec.vocab_words = 200;
  spec.pair_count = 2000;
  spec.noise = 0.0;
  spec.seed = 11;
  SynthOutput data = generate(spec);
  SplitDataset splits = split_per_task(data.pairs, 1);

  TrainedSetup s = make_setup({&data}, splits.train);

  // untrained zero-head model: every score is exactly 0
  {
    ScorerConfig cfg = s.scorer_cfg;
    cfg.init_seed = 1;
    ScorerModel untrained = init_scorer(cfg);
    EvalOutcome out = evaluate_model(untrained, splits.test, s.registry, s.train_cfg, s.vocab);
    c.require(out.accuracy == 0.0, "untrained raw accuracy not 0.0");
    c.require(out.tie_frac == 1.0, "untrained tie fraction not 1.0");
  }

  // exactly one optimizer update: ties vanish, accuracy near chance
  {
    ScorerConfig cfg = s.scorer_cfg;
    cfg.init_seed = 1;
    TrainConfig one_step = s.train_cfg;
    one_step.epochs = 1;
    one_step.seed = 1;
    std::vector<PreferencePair> first8(splits.train.begin(), splits.train.begin() + 8);
    TrainResult run = train(init_scorer(cfg), first8, s.registry, one_step, s.vocab);
    c.require(run.curve.size() == 1, "expected exactly one update");
    EvalOutcome out = evaluate_model(run.model, splits.test, s.registry, s.train_cfg, s.vocab);
    c.require(out.tie_frac == 0.0, "ties persist after one step");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "one-step accuracy %.3f", out.accuracy);
    c.note(buf);
    c.require(out.accuracy >= 0.35 && out.accuracy <= 0.65,
              "one-step accuracy outside [0.35, 0.65]");
  }

  // full runs: >= 0.90 test accuracy for every one of 5 seeds
  RunSpec rs;
  rs.setup = Setup::SingleTask;
  rs.target_task = "synA";
  rs.seeds = {1, 2, 3, 4, 5};
  double min_acc = 1.0;
  for (std::uint64_t seed : rs.seeds) {
    const auto t0 = Clock::now();
    RunSpec one = rs;
    one.seeds = {seed};
    auto runs = run_setup(one, splits, s.registry, {}, s.train_cfg, s.scorer_cfg, s.vocab);
    EvalOutcome out =
        evaluate_model(runs[0].model, splits.test, s.registry, s.train_cfg, s.vocab);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    min_acc = std::min(min_acc, out.accuracy);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "seed %llu: acc %.3f (%.0f s)",
                  static_cast<unsigned long long>(seed), out.accuracy, secs);
    c.note(buf);
    c.require(out.accuracy >= 0.90, "seed accuracy below 0.90");
    c.require(secs < 180.0, "per-seed runtime over 3 min");
  }
  return c;
}

Check criterion6_transfer() {
  Check c;

  SynthTaskSpec target;
  target.task_id = "synT";
  target.family = "famX";
  target.pair_count = 100;
  target.seed = 21;
  SynthTaskSpec aux_same = target;
  aux_same.task_id = "synU";
  aux_same.pair_count = 2000;
  aux_same.seed = 22;
  SynthTaskSpec aux_other = aux_same;
  aux_other.task_id = "synV";
  aux_other.family = "famY";
  aux_other.seed = 23;

  SynthOutput dt = generate(target);
  SynthOutput du = generate(aux_same);
  SynthOutput dv = generate(aux_other);

  auto combined = dt.pairs;
  combined.insert(combined.end(), du.pairs.begin(), du.pairs.end());
  SplitDataset same_splits = split_per_task(combined, 1);
  SplitDataset target_only = split_per_task(dt.pairs, 1);
  auto target_test = filter_tasks(same_splits.test, {"synT"}, {});

  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  TrainedSetup multi = make_setup({&dt, &du}, same_splits.train);
  double multi_sum = 0.0;
  {
    RunSpec spec;
    spec.setup = Setup::MultiTask;
    spec.seeds = seeds;
    auto runs = run_setup(spec, same_splits, multi.registry, {}, multi.train_cfg,
                          multi.scorer_cfg, multi.vocab);
    for (const auto& run : runs) {
      multi_sum +=
          evaluate_model(run.model, target_test, multi.registry, multi.train_cfg, multi.vocab)
              .accuracy;
    }
  }
  const double multi_mean = multi_sum / seeds.size();

  // single-task baseline sees only the target's 80 training pairs but is
  // evaluated on the same test slice
  TrainedSetup single = make_setup({&dt}, target_only.train);
  double single_sum = 0.0;
  {
    RunSpec spec;
    spec.setup = Setup::SingleTask;
    spec.target_task = "synT";
    spec.seeds = seeds;
    auto runs = run_setup(spec, target_only, single.registry, {}, single.train_cfg,
                          single.scorer_cfg, single.vocab);
    for (const auto& run : runs) {
      single_sum += evaluate_model(run.model, target_test, single.registry,
                                   single.train_cfg, single.vocab)
                        .accuracy;
    }
  }
  const double single_mean = single_sum / seeds.size();

  char buf[128];
  std::snprintf(buf, sizeof(buf), "single mean %.3f, same-family multi mean %.3f",
                single_mean, multi_mean);
  c.note(buf);
  c.require(multi_mean >= single_mean,
            "same-family multi-task mean below single-task mean");

  // cross-family auxiliary: no guarantee, assert completion only
  {
    auto cross_combined = dt.pairs;
    cross_combined.insert(cross_combined.end(), dv.pairs.begin(), dv.pairs.end());
    SplitDataset cross_splits = split_per_task(cross_combined, 1);
    TrainedSetup cross = make_setup({&dt, &dv}, cross_splits.train);
    cross.train_cfg.epochs = 1;
    RunSpec spec;
    spec.setup = Setup::MultiTask;
    spec.seeds = {1};
    auto runs = run_setup(spec, cross_splits, cross.registry, {}, cross.train_cfg,
                          cross.scorer_cfg, cross.vocab);
    auto cross_test = filter_tasks(cross_splits.test, {"synT"}, {});
    EvalOutcome out = evaluate_model(runs[0].model, cross_test, cross.registry,
                                     cross.train_cfg, cross.vocab);
    c.require(out.accuracy >= 0.0 && out.accuracy <= 1.0,
              "cross-family run did not complete");
    std::snprintf(buf, sizeof(buf), "cross-family multi accuracy %.3f (no bound asserted)",
                  out.accuracy);
    c.note(buf);
  }
  return c;
}

Check criterion7_metric_oracles() {
  Check c;

  std::vector<double> x{1, 2, 3, 4}, y{1, 1, 2, 2};
  auto rho = spearman(x, y);
  c.require(rho.has_value() && std::abs(*rho - 0.8944) < 1e-4,
            "spearman tie fixture off 0.8944");

  std::vector<ScoredPair> three{{"a", 1, 0}, {"b", 0, 1}, {"c", 2, 2}};
  c.require(std::abs(pairwise_accuracy(three) - 1.0 / 3.0) < 1e-12,
            "strict-tie accuracy fixture off 1/3");

  DetRng rng(55);
  std::vector<ScoredPair> scored;
  for (int i = 0; i < 1000; ++i) {
    const double g = rng.uniform(-1, 1);
    const double b = rng.bounded(8) == 0 ? g : rng.uniform(-1, 1);
    scored.push_back({"p" + std::to_string(i), g, b});
  }
  auto swapped = scored;
  for (auto& sp : swapped) std::swap(sp.r_good, sp.r_bad);
  const long correct = std::lround(pairwise_accuracy(scored) * 1000);
  const long ties = std::lround(tie_fraction(scored) * 1000);
  const long swapped_correct = std::lround(pairwise_accuracy(swapped) * 1000);
  c.require(swapped_correct == 1000 - correct - ties, "label-swap identity violated");
  return c;
}

Check criterion8_determinism() {
  Check c;

  // 598-instance fixture splits 480/59/59
  SynthTaskSpec spec;
  spec.task_id = "AGfix";
  spec.family = "famFix";
  spec.pair_count = 598;
  spec.seed = 31;
  SynthOutput data = generate(spec);
  SplitDataset splits = split_per_task(data.pairs, 3);
  c.require(splits.train.size() == 480, "train size not 480");
  c.require(splits.validation.size() == 59, "validation size not 59");
  c.require(splits.test.size() == 59, "test size not 59");

  // two identical CLI train runs produce bit-identical artifacts
  fs::path dir = fresh_dir("determinism");
  SynthTaskSpec small;
  small.task_id = "synD";
  small.family = "famD";
  small.pair_count = 120;
  small.seed = 41;
  SynthOutput sd = generate(small);
  save_dataset(dir / "pairs.jsonl", sd.pairs);
  TaskRegistry reg;
  reg.add(sd.task);
  reg.save(dir / "registry.json");

  auto train_into = [&](const std::string& sub) {
    std::vector<std::string> args{
        "train", "--setup", "single_task", "--task", "synD",
        "--train", (dir / "pairs.jsonl").string(),
        "--registry", (dir / "registry.json").string(),
        "--out_dir", (dir / sub).string(),
        "--seed_list", "3", "--vocab_cap", "256",
        "--d_model", "16", "--n_layers", "1", "--d_ff", "32", "--max_len", "48",
        "--learning_rate", "1e-3", "--grad_accum", "4", "--epochs", "2"};
    return cli::dispatch(args);
  };
  c.require(train_into("run1") == 0, "first train run failed");
  c.require(train_into("run2") == 0, "second train run failed");
  for (const char* name : {"model_seed3.ckpt", "loss_seed3.csv", "vocab.txt",
                           "manifest.json"}) {
    c.require(read_file(dir / "run1" / name) == read_file(dir / "run2" / name),
              std::string(name) + " differs between identical runs");
  }

  auto eval_into = [&](const std::string& models, const std::string& sub) {
    std::vector<std::string> args{
        "evaluate", "--models", (dir / models).string(), "--task", "synD",
        "--test", (dir / "pairs.jsonl").string(),
        "--registry", (dir / "registry.json").string(),
        "--out_dir", (dir / sub).string()};
    return cli::dispatch(args);
  };
  c.require(eval_into("run1", "eval1") == 0, "first evaluate failed");
  c.require(eval_into("run2", "eval2") == 0, "second evaluate failed");
  for (const char* name : {"results.csv", "report.csv", "report.txt"}) {
    c.require(read_file(dir / "eval1" / name) == read_file(dir / "eval2" / name),
              std::string(name) + " differs between identical evaluations");
  }
  return c;
}

Check criterion9_pair_builder_equivalence() {
  Check c;
  DetRng rng(71);
  int absolute_cases = 0, ranking_cases = 0;
  while (absolute_cases + ranking_cases < 200) {
    if (rng.bounded(2) == 0) {
      ++absolute_cases;
      std::vector<RawAbsolute> recs;
      const int n_ctx = 1 + static_cast<int>(rng.bounded(3));
      for (int cx = 0; cx < n_ctx; ++cx) {
        const int n_ans = 1 + static_cast<int>(rng.bounded(6));
        for (int a = 0; a < n_ans; ++a) {
          RawAbsolute r;
          r.task = "T";
          r.elements = {{"prompt", "ctx" + std::to_string(cx)}};
          r.answer = "ans" + std::to_string(rng.bounded(6));
          r.score = static_cast<double>(rng.bounded(5)) + (rng.bounded(2) ? 0.5 : 0.0);
          if (rng.bounded(2)) r.annotator_id = "ann" + std::to_string(rng.bounded(3));
          recs.push_back(std::move(r));
        }
      }
      PairingPolicy policy;
      policy.scope = rng.bounded(2) ? PairScope::AnyContext : PairScope::SameContext;
      policy.min_gap = rng.bounded(2) ? 0.0 : 0.5;
      policy.average_annotators = rng.bounded(2) != 0;

      std::multiset<std::string> got;
      for (const auto& p : pairs_from_absolute(recs, policy)) {
        got.insert(oracles::pair_key(p));
      }
      if (got != oracles::enumerate_absolute(recs, policy)) {
        c.require(false, "absolute case " + std::to_string(absolute_cases) + " diverged");
        break;
      }
    } else {
      ++ranking_cases;
      RawRanking r;
      r.task = "T";
      r.elements = {{"prompt", "ctx" + std::to_string(rng.bounded(4))}};
      const int k = 1 + static_cast<int>(rng.bounded(6));
      for (int i = 0; i < k; ++i) {
        r.answers.push_back("ans" + std::to_string(rng.bounded(5)));
        r.ranks.push_back(1 + static_cast<int>(rng.bounded(3)));
      }
      std::multiset<std::string> got;
      for (const auto& p : pairs_from_ranking(r)) got.insert(oracles::pair_key(p));
      if (got != oracles::enumerate_ranking(r)) {
        c.require(false, "ranking case " + std::to_string(ranking_cases) + " diverged");
        break;
      }
    }
  }
  c.note(std::to_string(absolute_cases) + " absolute + " + std::to_string(ranking_cases) +
         " ranking cases");
  return c;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Check()> body;
  };
  const std::vector<Criterion> criteria{
      {"1. ranking-loss oracle", criterion1_loss_oracle},
      {"2. gradient finite-difference check", criterion2_gradient_check},
      {"3. aggregate reproduction from fixtures", criterion3_aggregate_fixtures},
      {"4. count-accuracy correlation fixture", criterion4_pearson_fixture},
      {"5. synthetic single-task learnability", criterion5_learnability},
      {"6. synthetic multi-task transfer", criterion6_transfer},
      {"7. metric unit oracles", criterion7_metric_oracles},
      {"8. end-to-end determinism + split fixture", criterion8_determinism},
      {"9. pair-builder brute-force equivalence", criterion9_pair_builder_equivalence},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto t0 = Clock::now();
    Check result;
    try {
      result = criterion.body();
    } catch (const std::exception& e) {
      result.ok = false;
      result.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("%s %s (%.1f s)%s%s\n", result.ok ? "PASS" : "FAIL", criterion.name, secs,
                result.detail.empty() ? "" : " -- ", result.detail.c_str());
    std::fflush(stdout);
    if (!result.ok) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
