#include <fstream>
#include <cmath>

#include "doctest.h"
#include "prefscore/rng.hpp"
#include "prefscore/synth.hpp"
#include "prefscore/text_pipeline.hpp"
#include "prefscore/trainer.hpp"
#include "test_util.hpp"

using namespace prefscore;

namespace {

// Small real training fixture: a synthetic task, its registry, and a vocab.
struct Fixture {
  std::vector<PreferencePair> pairs;
  TaskRegistry registry;
  Vocabulary vocab = Vocabulary::build(std::vector<std::string>{}, 5);
  ScorerConfig scorer_cfg;

  explicit Fixture(int n_pairs, std::uint64_t seed = 3) {
    SynthTaskSpec spec;
    spec.task_id = "syn";
    spec.family = "famT";
    spec.pair_count = n_pairs;
    spec.seed = seed;
    SynthOutput out = generate(spec);
    pairs = std::move(out.pairs);
    registry.add(out.task);

    std::vector<std::string> corpus;
    for (const auto& p : pairs) {
      corpus.push_back(p.good.elements[0].text);
      corpus.push_back(p.good.answer);
      corpus.push_back(p.bad.answer);
    }
    corpus.push_back(out.task.instructions[0].text);
    corpus.push_back("answer");
    vocab = Vocabulary::build(corpus, 512);

    scorer_cfg.d_model = 16;
    scorer_cfg.n_layers = 1;
    scorer_cfg.n_heads = 4;
    scorer_cfg.d_ff = 32;
    scorer_cfg.max_len = 48;
    scorer_cfg.vocab_size = static_cast<int>(vocab.size());
    scorer_cfg.init_seed = 1;
  }
};

bool params_equal(const ParamSet& a, const ParamSet& b) {
  bool equal = true;
  std::vector<const std::vector<double>*> ta, tb;
  a.for_each_tensor([&](const std::vector<double>& t) { ta.push_back(&t); });
  b.for_each_tensor([&](const std::vector<double>& t) { tb.push_back(&t); });
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (*ta[i] != *tb[i]) equal = false;
  }
  return equal;
}

}  // namespace

TEST_CASE("ranking loss oracle values") {
  SUBCASE("equal scores give ln 2") {
    DetRng rng(5);
    for (int i = 0; i < 100; ++i) {
      const double r = rng.uniform(-50.0, 50.0);
      CHECK(std::abs(ranking_loss(r, r).loss - 0.6931471805599453) < 1e-12);
    }
  }
  SUBCASE("direct evaluation at (2, 0)") {
    // log(1 + exp(-2)) to 20 digits: 0.12692801104297249644
    CHECK(std::abs(ranking_loss(2.0, 0.0).loss - 0.12692801104297249644) < 1e-12);
  }
  SUBCASE("stable form survives a 20-unit gap") {
    // log(1 + exp(20)) to 22 digits: 20.00000000206115362031
    const RankingLossResult r = ranking_loss(0.0, 20.0);
    CHECK(std::abs(r.loss - 20.00000000206115362031) < 1e-9);
    CHECK(std::abs(r.d_good + 1.0) < 1e-8);
    CHECK(std::abs(r.d_bad - 1.0) < 1e-8);
  }
  SUBCASE("no overflow at extreme gaps") {
    CHECK(ranking_loss(0.0, 800.0).loss == 800.0);
    CHECK(ranking_loss(800.0, 0.0).loss >= 0.0);
    CHECK(std::isfinite(ranking_loss(-750.0, 750.0).loss));
  }
  SUBCASE("gradient pair sums to zero exactly") {
    DetRng rng(6);
    for (int i = 0; i < 100; ++i) {
      const RankingLossResult r =
          ranking_loss(rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0));
      CHECK(r.d_good + r.d_bad == 0.0);
      CHECK(r.loss > 0.0);
    }
  }
  SUBCASE("gradients are the logistic of the gap") {
    const RankingLossResult r = ranking_loss(1.0, 0.0);
    const double sig = 1.0 / (1.0 + std::exp(1.0));
    CHECK(std::abs(r.d_bad - sig) < 1e-15);
  }
  SUBCASE("non-finite input is an error") {
    CHECK_THROWS_AS(ranking_loss(std::nan(""), 0.0), ValidationError);
    CHECK_THROWS_AS(ranking_loss(0.0, std::numeric_limits<double>::infinity()),
                    ValidationError);
  }
  SUBCASE("swap antisymmetry: swapping labels evaluates at the negated gap") {
    DetRng rng(8);
    for (int i = 0; i < 20; ++i) {
      const double a = rng.uniform(-5.0, 5.0), b = rng.uniform(-5.0, 5.0);
      const double neg_delta = a - b;  // swapped pair sees -(b - a)
      const double ref =
          std::max(neg_delta, 0.0) + std::log1p(std::exp(-std::abs(neg_delta)));
      CHECK(ranking_loss(b, a).loss == ref);
    }
  }
}

TEST_CASE("one small step on one pair decreases its loss") {
  Fixture fx(4);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.grad_accum = 1;
  cfg.epochs = 1;
  cfg.seed = 1;

  std::vector<PreferencePair> one{fx.pairs[0]};
  TrainResult run = train(init_scorer(fx.scorer_cfg), one, fx.registry, cfg, fx.vocab);
  REQUIRE(run.curve.size() == 1);
  const double initial = run.curve[0].loss;
  CHECK(initial == doctest::Approx(std::log(2.0)).epsilon(1e-12));  // zero head

  // re-evaluate the same pair on the updated model
  const auto& task = fx.registry.get("syn");
  AssemblyConfig asm_cfg{cfg.label_input, cfg.truncate_right, fx.scorer_cfg.max_len};
  auto sg = assemble(task.instructions[0].text, one[0].good, asm_cfg, fx.vocab);
  auto sb = assemble(task.instructions[0].text, one[0].bad, asm_cfg, fx.vocab);
  const double after = ranking_loss(score(run.model, sg.ids, sg.true_len),
                                    score(run.model, sb.ids, sb.true_len)).loss;
  CHECK(after < initial);
}

TEST_CASE("gradient accumulation semantics") {
  Fixture fx(6);
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.epochs = 2;
  cfg.seed = 9;

  SUBCASE("grad_accum = n gives one update per epoch") {
    cfg.grad_accum = 6;
    TrainResult run = train(init_scorer(fx.scorer_cfg), fx.pairs, fx.registry, cfg, fx.vocab);
    REQUIRE(run.curve.size() == 2);
    CHECK(run.curve[0].epoch == 0);
    CHECK(run.curve[1].epoch == 1);
    CHECK(run.curve[0].step == 1);
    CHECK(run.curve[1].step == 2);
  }
  SUBCASE("trailing partial batch is flushed") {
    cfg.grad_accum = 4;  // 6 pairs -> updates of 4 and 2 per epoch
    TrainResult run = train(init_scorer(fx.scorer_cfg), fx.pairs, fx.registry, cfg, fx.vocab);
    CHECK(run.curve.size() == 4);
  }
  SUBCASE("per-task cap limits pairs per epoch") {
    cfg.grad_accum = 1;
    cfg.per_task_cap = 2;
    TrainResult run = train(init_scorer(fx.scorer_cfg), fx.pairs, fx.registry, cfg, fx.vocab);
    CHECK(run.curve.size() == 4);  // 2 pairs x 2 epochs
  }
}

TEST_CASE("training is bit-deterministic given (seed, data, config)") {
  Fixture fx(10);
  TrainConfig cfg;
  cfg.learning_rate = 2e-4;
  cfg.grad_accum = 3;
  cfg.epochs = 2;
  cfg.seed = 77;

  TrainResult a = train(init_scorer(fx.scorer_cfg), fx.pairs, fx.registry, cfg, fx.vocab);
  TrainResult b = train(init_scorer(fx.scorer_cfg), fx.pairs, fx.registry, cfg, fx.vocab);
  CHECK(params_equal(a.model.params, b.model.params));
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].loss == b.curve[i].loss);
  }

  cfg.seed = 78;
  TrainResult c = train(init_scorer(fx.scorer_cfg), fx.pairs, fx.registry, cfg, fx.vocab);
  CHECK(!params_equal(a.model.params, c.model.params));

  SUBCASE("sgd path is also deterministic") {
    cfg.seed = 77;
    cfg.use_sgd = true;
    TrainResult d = train(init_scorer(fx.scorer_cfg), fx.pairs, fx.registry, cfg, fx.vocab);
    TrainResult e = train(init_scorer(fx.scorer_cfg), fx.pairs, fx.registry, cfg, fx.vocab);
    CHECK(params_equal(d.model.params, e.model.params));
    CHECK(!params_equal(a.model.params, d.model.params));
  }
}

TEST_CASE("select_training_pairs implements the four setups") {
  SplitDataset splits;
  for (const char* t : {"A", "B", "C"}) {
    for (int i = 0; i < 3; ++i) {
      splits.train.push_back(make_pair(std::string(t) + std::to_string(i), t,
                                       "ctx" + std::to_string(i), "g", "b"));
    }
  }
  std::vector<Cluster> clusters{{"pairable", {"A", "B"}}};

  auto tasks_of = [](const std::vector<PreferencePair>& v) {
    std::set<std::string> out;
    for (const auto& p : v) out.insert(p.task);
    return out;
  };

  RunSpec spec;
  spec.seeds = {1};

  spec.setup = Setup::SingleTask;
  spec.target_task = "A";
  CHECK(tasks_of(select_training_pairs(spec, splits, clusters)) ==
        std::set<std::string>{"A"});

  spec.setup = Setup::CrossTask;
  CHECK(tasks_of(select_training_pairs(spec, splits, clusters)) ==
        std::set<std::string>{"B", "C"});

  spec.setup = Setup::MultiTask;
  spec.target_task = "";
  CHECK(tasks_of(select_training_pairs(spec, splits, clusters)) ==
        std::set<std::string>{"A", "B", "C"});

  spec.setup = Setup::CrossCluster;
  spec.target_task = "A";
  spec.cluster = "pairable";
  CHECK(tasks_of(select_training_pairs(spec, splits, clusters)) ==
        std::set<std::string>{"B"});

  SUBCASE("errors") {
    RunSpec bad;
    bad.setup = Setup::SingleTask;
    bad.target_task = "";
    CHECK_THROWS_AS(select_training_pairs(bad, splits, clusters), ValidationError);

    bad.target_task = "Z";  // no pairs
    CHECK_THROWS_AS(select_training_pairs(bad, splits, clusters), ValidationError);

    bad.setup = Setup::CrossCluster;
    bad.target_task = "A";
    CHECK_THROWS_AS(select_training_pairs(bad, splits, clusters), ValidationError);  // no cluster
    bad.cluster = "missing";
    CHECK_THROWS_AS(select_training_pairs(bad, splits, clusters), ValidationError);
    bad.cluster = "pairable";
    bad.target_task = "C";  // not in cluster
    CHECK_THROWS_AS(select_training_pairs(bad, splits, clusters), ValidationError);
  }
}

TEST_CASE("run_setup trains one model per seed") {
  Fixture fx(8);
  SplitDataset splits;
  splits.train = fx.pairs;

  RunSpec spec;
  spec.setup = Setup::SingleTask;
  spec.target_task = "syn";
  spec.seeds = {4, 9};

  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.grad_accum = 4;
  cfg.epochs = 1;

  auto runs = run_setup(spec, splits, fx.registry, {}, cfg, fx.scorer_cfg, fx.vocab);
  REQUIRE(runs.size() == 2);
  CHECK(!params_equal(runs[0].model.params, runs[1].model.params));
  CHECK(runs[0].model.cfg.init_seed == 4);
  CHECK(runs[1].model.cfg.init_seed == 9);
}

TEST_CASE("loss curve csv is written") {
  auto dir = make_temp_dir("losscurve");
  std::vector<LossCurvePoint> curve{{1, 0, 0.693}, {2, 0, 0.5}};
  save_loss_curve(dir / "loss.csv", curve);
  std::ifstream in(dir / "loss.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,epoch,loss");
  std::getline(in, line);
  CHECK(line.rfind("1,0,", 0) == 0);
}
