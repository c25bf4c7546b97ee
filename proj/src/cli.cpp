#include "prefscore/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "prefscore/corpus.hpp"
#include "prefscore/evaluator.hpp"
#include "prefscore/instructions.hpp"
#include "prefscore/pair_builder.hpp"
#include "prefscore/rng.hpp"
#include "prefscore/scorer.hpp"
#include "prefscore/synth.hpp"
#include "prefscore/text_pipeline.hpp"
#include "prefscore/trainer.hpp"

namespace prefscore::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "fnv1a:%016llx", static_cast<unsigned long long>(h));
  return hex;
}

struct Manifest {
  std::string command;
  json config = json::object();
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> outputs;

  void add_input(const fs::path& path) { input_hashes[path.string()] = file_hash(path); }

  void write(const fs::path& dir) const {
    json obj{{"command", command},
             {"config", config},
             {"seeds", seeds},
             {"inputs", input_hashes},
             {"outputs", outputs}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << obj.dump(2) << '\n';
  }
};

json scorer_config_to_json(const ScorerConfig& cfg) {
  return json{{"d_model", cfg.d_model},     {"n_layers", cfg.n_layers},
              {"n_heads", cfg.n_heads},     {"d_ff", cfg.d_ff},
              {"max_len", cfg.max_len},     {"vocab_size", cfg.vocab_size},
              {"init_seed", cfg.init_seed},
              {"pooling", cfg.pooling == Pooling::Cls ? "cls" : "last"}};
}

void add_scorer_flags(CLI::App* cmd, ScorerConfig& cfg, std::string& pooling) {
  cmd->add_option("--d_model", cfg.d_model, "model width");
  cmd->add_option("--n_layers", cfg.n_layers, "encoder layers");
  cmd->add_option("--n_heads", cfg.n_heads, "attention heads");
  cmd->add_option("--d_ff", cfg.d_ff, "feed-forward width");
  cmd->add_option("--max_len", cfg.max_len, "max sequence length");
  cmd->add_option("--pooling", pooling, "pooled position: last | cls")
      ->check(CLI::IsMember({"last", "cls"}));
}

// Train-config flags. Explicitly set flags override whatever --config or the
// registry preset supplies.
struct TrainFlags {
  TrainConfig values;
  CLI::App* cmd = nullptr;

  void attach(CLI::App* c) {
    cmd = c;
    c->add_option("--learning_rate", values.learning_rate, "optimizer step size");
    c->add_option("--grad_accum", values.grad_accum, "pairs per optimizer update");
    c->add_option("--epochs", values.epochs, "training epochs");
    c->add_flag("--label_input,!--no-label_input", values.label_input,
                "label context elements in the input");
    c->add_flag("--truncate_right,!--no-truncate_right", values.truncate_right,
                "truncate long inputs from the right");
    c->add_flag("--use_sgd", values.use_sgd, "plain SGD instead of adaptive moments");
    c->add_option("--per_task_cap", values.per_task_cap, "max pairs per task per epoch");
  }

  void overlay(TrainConfig& base) const {
    if (cmd->count("--learning_rate")) base.learning_rate = values.learning_rate;
    if (cmd->count("--grad_accum")) base.grad_accum = values.grad_accum;
    if (cmd->count("--epochs")) base.epochs = values.epochs;
    if (cmd->count("--label_input") || cmd->count("--no-label_input")) {
      base.label_input = values.label_input;
    }
    if (cmd->count("--truncate_right") || cmd->count("--no-truncate_right")) {
      base.truncate_right = values.truncate_right;
    }
    if (cmd->count("--use_sgd")) base.use_sgd = values.use_sgd;
    if (cmd->count("--per_task_cap")) base.per_task_cap = values.per_task_cap;
  }
};

json train_config_json(const TrainConfig& cfg) {
  return json::parse(train_config_to_json(cfg));
}

std::vector<std::uint64_t> expand_seeds(int seed_count, const std::string& seed_list) {
  std::vector<std::uint64_t> seeds;
  if (!seed_list.empty()) {
    std::stringstream ss(seed_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) seeds.push_back(std::stoull(item));
    }
  } else {
    for (int i = 1; i <= seed_count; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
  }
  if (seeds.empty()) throw ValidationError("no seeds given");
  return seeds;
}

/// Deterministic vocabulary corpus: pair texts in file order, instruction
/// candidates of the tasks present, and the literal answer label.
std::vector<std::string> vocab_corpus(std::span<const PreferencePair> pairs,
                                      const TaskRegistry& registry) {
  std::vector<std::string> corpus;
  std::set<std::string> tasks_seen;
  for (const auto& p : pairs) {
    tasks_seen.insert(p.task);
    for (const Sample* s : {&p.good, &p.bad}) {
      for (const auto& el : s->elements) {
        corpus.push_back(el.label);
        corpus.push_back(el.text);
      }
      corpus.push_back(s->answer);
    }
  }
  for (const auto& t : registry.tasks()) {
    if (!tasks_seen.count(t.id)) continue;
    for (const auto& c : t.instructions) corpus.push_back(c.text);
  }
  corpus.push_back("answer");
  return corpus;
}

std::string model_filename(std::uint64_t seed) {
  return "model_seed" + std::to_string(seed) + ".ckpt";
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

struct BuildPairsArgs {
  std::string raw, out_dir, registry, scope = "same_context";
  double min_gap = 0.0;
  bool average_annotators = true;
};

int run_build_pairs(const BuildPairsArgs& a) {
  PairingPolicy policy;
  policy.scope = a.scope == "any_context" ? PairScope::AnyContext : PairScope::SameContext;
  policy.min_gap = a.min_gap;
  policy.average_annotators = a.average_annotators;

  RawRecords records = load_raw(a.raw);
  auto pairs = build_pairs(records, policy);
  if (!a.registry.empty()) {
    TaskRegistry reg = TaskRegistry::load(a.registry);
    for (const auto& p : pairs) validate_pair(p, &reg);
  }

  fs::create_directories(a.out_dir);
  save_dataset(fs::path(a.out_dir) / "pairs.jsonl", pairs);

  Manifest m;
  m.command = "build-pairs";
  m.config = json{{"scope", a.scope},
                  {"min_gap", a.min_gap},
                  {"average_annotators", a.average_annotators}};
  m.add_input(a.raw);
  if (!a.registry.empty()) m.add_input(a.registry);
  m.outputs = {"pairs.jsonl"};
  m.write(a.out_dir);
  std::cout << "wrote " << pairs.size() << " pairs to " << a.out_dir << "/pairs.jsonl\n";
  return 0;
}

struct SplitArgs {
  std::string pairs, out_dir;
  std::uint64_t seed = 0;
  bool group_aware = true;
};

int run_split(const SplitArgs& a) {
  auto pairs = load_dataset(a.pairs);
  SplitDataset splits = split_per_task(pairs, a.seed, a.group_aware);

  fs::create_directories(a.out_dir);
  save_dataset(fs::path(a.out_dir) / "train.jsonl", splits.train);
  save_dataset(fs::path(a.out_dir) / "validation.jsonl", splits.validation);
  save_dataset(fs::path(a.out_dir) / "test.jsonl", splits.test);

  Manifest m;
  m.command = "split";
  m.config = json{{"group_aware", a.group_aware}};
  m.seeds = {a.seed};
  m.add_input(a.pairs);
  m.outputs = {"train.jsonl", "validation.jsonl", "test.jsonl"};
  m.write(a.out_dir);
  std::cout << "split " << pairs.size() << " pairs: train " << splits.train.size()
            << " / validation " << splits.validation.size() << " / test "
            << splits.test.size() << '\n';
  return 0;
}

struct SynthArgs {
  std::string task_id = "syn", family = "f0", out_dir;
  int vocab_words = 200, pairs = 1000;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  SynthTaskSpec spec;
  spec.task_id = a.task_id;
  spec.family = a.family;
  spec.vocab_words = a.vocab_words;
  spec.pair_count = a.pairs;
  spec.noise = a.noise;
  spec.seed = a.seed;
  SynthOutput out = generate(spec);

  fs::create_directories(a.out_dir);
  save_dataset(fs::path(a.out_dir) / "dataset.jsonl", out.pairs);
  save_latent_quality(fs::path(a.out_dir) / "latent.jsonl", out);
  TaskRegistry reg;
  reg.add(out.task);
  reg.save(fs::path(a.out_dir) / "registry.json");

  Manifest m;
  m.command = "synth";
  m.config = json{{"task_id", a.task_id}, {"family", a.family},
                  {"vocab_words", a.vocab_words}, {"pairs", a.pairs}, {"noise", a.noise}};
  m.seeds = {a.seed};
  m.outputs = {"dataset.jsonl", "latent.jsonl", "registry.json"};
  m.write(a.out_dir);
  std::cout << "generated " << out.pairs.size() << " pairs for task " << a.task_id << '\n';
  return 0;
}

struct TrainArgs {
  std::string setup = "single_task", task, cluster, train, registry, clusters, config,
              out_dir, seed_list, pooling = "last";
  int seeds = 1, vocab_cap = 8192, jobs = 1;
  ScorerConfig scorer_cfg;
  TrainFlags flags;
};

// --config wins over the registry preset; explicit flags win over both.
TrainConfig resolve_train_config(const std::string& config_path, const TrainFlags& flags,
                                 const TaskRegistry& registry, const std::string& task) {
  TrainConfig cfg;
  if (!config_path.empty()) {
    cfg = load_train_config(config_path);
  } else if (!task.empty()) {
    cfg = registry.get(task).preset;
  }
  flags.overlay(cfg);
  return cfg;
}

int run_train(const TrainArgs& a) {
  TaskRegistry registry = TaskRegistry::load(a.registry);
  auto train_pairs = load_dataset(a.train, &registry);
  std::vector<Cluster> clusters;
  if (!a.clusters.empty()) {
    clusters = load_clusters(a.clusters);
    validate_clusters(clusters, registry);
  }

  RunSpec spec;
  spec.setup = setup_from_string(a.setup);
  spec.target_task = a.task;
  if (!a.cluster.empty()) spec.cluster = a.cluster;
  spec.seeds = expand_seeds(a.seeds, a.seed_list);

  TrainConfig cfg = resolve_train_config(a.config, a.flags, registry, a.task);

  SplitDataset splits;
  splits.train = train_pairs;
  auto selected = select_training_pairs(spec, splits, clusters);

  Vocabulary vocab = Vocabulary::build(vocab_corpus(selected, registry),
                                       static_cast<std::size_t>(a.vocab_cap));
  ScorerConfig scfg = a.scorer_cfg;
  scfg.vocab_size = static_cast<int>(vocab.size());
  scfg.pooling = a.pooling == "cls" ? Pooling::Cls : Pooling::LastToken;

  fs::create_directories(a.out_dir);
  vocab.save(fs::path(a.out_dir) / "vocab.txt");

  // Seeds are independent runs; --jobs fans them out across threads.
  std::vector<TrainResult> results(spec.seeds.size());
  const int jobs = std::max(1, a.jobs);
  std::vector<std::thread> workers;
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&]() {
    for (;;) {
      std::size_t idx;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= spec.seeds.size()) return;
        idx = next++;
      }
      RunSpec one = spec;
      one.seeds = {spec.seeds[idx]};
      results[idx] = std::move(
          run_setup(one, splits, registry, clusters, cfg, scfg, vocab).front());
    }
  };
  for (int w = 0; w < jobs; ++w) workers.emplace_back(worker);
  for (auto& w : workers) w.join();

  Manifest m;
  m.command = "train";
  m.config = json{{"setup", a.setup},
                  {"task", a.task},
                  {"cluster", a.cluster},
                  {"vocab_cap", a.vocab_cap},
                  {"train_config", train_config_json(cfg)},
                  {"scorer_config", scorer_config_to_json(scfg)}};
  m.seeds = spec.seeds;
  m.add_input(a.train);
  m.add_input(a.registry);
  if (!a.clusters.empty()) m.add_input(a.clusters);
  if (!a.config.empty()) m.add_input(a.config);
  m.outputs.push_back("vocab.txt");
  for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
    const std::uint64_t seed = spec.seeds[i];
    save_checkpoint(results[i].model, fs::path(a.out_dir) / model_filename(seed));
    save_loss_curve(fs::path(a.out_dir) / ("loss_seed" + std::to_string(seed) + ".csv"),
                    results[i].curve);
    m.outputs.push_back(model_filename(seed));
    m.outputs.push_back("loss_seed" + std::to_string(seed) + ".csv");
  }
  m.write(a.out_dir);
  std::cout << "trained " << spec.seeds.size() << " model(s) into " << a.out_dir << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string models, task, test, split = "test", registry, config, out_dir, setup;
};

int run_evaluate(const EvaluateArgs& a) {
  TaskRegistry registry = TaskRegistry::load(a.registry);
  auto test_pairs_all = load_dataset(a.test, &registry);
  auto test_pairs = filter_tasks(test_pairs_all, {a.task}, {});
  if (test_pairs.empty()) {
    throw ValidationError("evaluate: no test pairs for task \"" + a.task + "\"");
  }

  // Assembly flags must match training; default them from the train manifest.
  fs::path models_dir(a.models);
  json train_manifest;
  {
    std::ifstream in(models_dir / "manifest.json");
    if (in) in >> train_manifest;
  }
  TrainConfig cfg;
  if (!a.config.empty()) {
    cfg = load_train_config(a.config);
  } else if (train_manifest.contains("config") &&
             train_manifest["config"].contains("train_config")) {
    cfg = train_config_from_json_text(train_manifest["config"]["train_config"].dump());
  }
  std::string setup = a.setup;
  if (setup.empty() && train_manifest.contains("config") &&
      train_manifest["config"].contains("setup")) {
    setup = train_manifest["config"]["setup"].get<std::string>();
  }
  if (setup.empty()) setup = "single_task";

  Vocabulary vocab = Vocabulary::load(models_dir / "vocab.txt");

  std::vector<std::pair<std::uint64_t, fs::path>> checkpoints;
  for (const auto& entry : fs::directory_iterator(models_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("model_seed", 0) == 0 && entry.path().extension() == ".ckpt") {
      std::uint64_t seed = std::stoull(name.substr(10, name.size() - 10 - 5));
      checkpoints.emplace_back(seed, entry.path());
    }
  }
  if (checkpoints.empty()) {
    throw ValidationError("evaluate: no model_seed*.ckpt files in " + a.models);
  }
  std::sort(checkpoints.begin(), checkpoints.end());

  std::vector<SeedResult> rows;
  for (const auto& [seed, path] : checkpoints) {
    ScorerModel model = load_checkpoint(path);
    EvalOutcome outcome = evaluate_model(model, test_pairs, registry, cfg, vocab);
    SeedResult r;
    r.task = a.task;
    r.setup = setup;
    r.seed = seed;
    r.accuracy = outcome.accuracy * 100.0;  // report convention: percent
    r.tie_frac = outcome.tie_frac;
    r.spearman_rho = outcome.spearman_rho;
    rows.push_back(std::move(r));
  }

  fs::create_directories(a.out_dir);
  save_seed_results(fs::path(a.out_dir) / "results.csv", rows);
  RunReport report = aggregate(rows);
  emit_report(report, fs::path(a.out_dir) / "report.csv", "csv");
  emit_report(report, fs::path(a.out_dir) / "report.txt", "text");

  Manifest m;
  m.command = "evaluate";
  m.config = json{{"task", a.task}, {"split", a.split}, {"setup", setup},
                  {"train_config", train_config_json(cfg)}};
  for (const auto& [seed, path] : checkpoints) {
    m.seeds.push_back(seed);
    m.add_input(path);
  }
  m.add_input(a.test);
  m.add_input(a.registry);
  m.outputs = {"results.csv", "report.csv", "report.txt"};
  m.write(a.out_dir);

  const CellStats* cell = report.cell(a.task, setup);
  std::cout << a.task << " " << setup << ": accuracy " << cell->mean << " +- "
            << cell->stddev << " over " << cell->n_seeds << " seed(s)\n";
  return 0;
}

struct ReportArgs {
  std::vector<std::string> results;
  std::string out_dir, format = "both";
};

int run_report(const ReportArgs& a) {
  std::vector<SeedResult> rows;
  for (const auto& path : a.results) {
    auto part = load_seed_results(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  RunReport report = aggregate(rows);

  fs::create_directories(a.out_dir);
  Manifest m;
  m.command = "report";
  m.config = json{{"format", a.format}};
  for (const auto& path : a.results) m.add_input(path);
  if (a.format == "csv" || a.format == "both") {
    emit_report(report, fs::path(a.out_dir) / "report.csv", "csv");
    m.outputs.push_back("report.csv");
  }
  if (a.format == "text" || a.format == "both") {
    emit_report(report, fs::path(a.out_dir) / "report.txt", "text");
    m.outputs.push_back("report.txt");
  }
  m.write(a.out_dir);
  write_report_text(report, std::cout);
  return 0;
}

struct SelectInstructionArgs {
  std::string task, registry, train, val, out_dir, config, model, pooling = "last";
  int vocab_cap = 8192;
  ScorerConfig scorer_cfg;
  std::uint64_t seed = 0;
  TrainFlags flags;
};

int run_select_instruction(const SelectInstructionArgs& a) {
  TaskRegistry registry = TaskRegistry::load(a.registry);
  auto val_pairs = load_dataset(a.val, &registry);
  val_pairs = filter_tasks(val_pairs, {a.task}, {});

  TrainConfig cfg = resolve_train_config(a.config, a.flags, registry, a.task);
  cfg.seed = a.seed;

  TaskSpec& task = registry.get_mutable(a.task);
  SelectionResult selection;
  if (!a.model.empty()) {
    // Zero-shot target: rank candidates with the already-trained model.
    ScorerModel model = load_checkpoint(a.model);
    Vocabulary vocab = Vocabulary::load(fs::path(a.model).parent_path() / "vocab.txt");
    auto trial = make_pretrained_instruction_trial(model, val_pairs, cfg, vocab);
    selection = select_instruction(task, trial, val_pairs);
  } else {
    auto train_pairs = load_dataset(a.train, &registry);
    train_pairs = filter_tasks(train_pairs, {a.task}, {});
    Vocabulary vocab = Vocabulary::build(vocab_corpus(train_pairs, registry),
                                         static_cast<std::size_t>(a.vocab_cap));
    ScorerConfig scfg = a.scorer_cfg;
    scfg.vocab_size = static_cast<int>(vocab.size());
    scfg.pooling = a.pooling == "cls" ? Pooling::Cls : Pooling::LastToken;
    scfg.init_seed = a.seed;
    auto trial = make_instruction_trial(task, train_pairs, val_pairs, cfg, scfg, vocab);
    selection = select_instruction(task, trial, val_pairs);
  }

  fs::create_directories(a.out_dir);
  registry.save(fs::path(a.out_dir) / "registry.json");

  Manifest m;
  m.command = "select-instruction";
  m.config = json{{"task", a.task}, {"train_config", train_config_json(cfg)}};
  m.seeds = {a.seed};
  m.add_input(a.registry);
  m.add_input(a.val);
  if (!a.train.empty()) m.add_input(a.train);
  if (!a.model.empty()) m.add_input(a.model);
  m.outputs = {"registry.json"};
  m.write(a.out_dir);

  std::cout << "selected instruction " << selection.instruction_id << " for task "
            << a.task << '\n';
  for (const auto& [id, acc] : selection.val_accuracy) {
    std::cout << "  " << id << ": validation accuracy " << acc << '\n';
  }
  return 0;
}

struct GradCheckArgs {
  ScorerConfig cfg{.d_model = 16, .n_layers = 1, .n_heads = 4, .d_ff = 64,
                   .max_len = 32, .vocab_size = 64, .init_seed = 0};
  int samples = 25;
  double eps = 1e-4, tolerance = 1e-4;
  std::uint64_t seed = 7;
  std::string pooling = "last", out_dir;
};

int run_grad_check(const GradCheckArgs& a) {
  ScorerConfig cfg = a.cfg;
  cfg.pooling = a.pooling == "cls" ? Pooling::Cls : Pooling::LastToken;
  const double max_rel = gradient_check(cfg, a.samples, a.eps, a.seed);
  std::cout << "max relative gradient error: " << max_rel << " (tolerance " << a.tolerance
            << ", " << a.samples << " samples)\n";
  const bool ok = max_rel < a.tolerance;
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    {
      std::ofstream out(fs::path(a.out_dir) / "gradcheck.json");
      out << json{{"max_relative_error", max_rel},
                  {"tolerance", a.tolerance},
                  {"samples", a.samples},
                  {"passed", ok}}
                 .dump(2)
          << '\n';
    }
    Manifest m;
    m.command = "grad-check";
    m.config = json{{"samples", a.samples}, {"eps", a.eps}, {"tolerance", a.tolerance},
                    {"scorer_config", scorer_config_to_json(cfg)}};
    m.seeds = {a.seed};
    m.outputs = {"gradcheck.json"};
    m.write(a.out_dir);
  }
  return ok ? 0 : 1;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"instruction-conditioned pairwise preference metric toolkit"};
  app.require_subcommand(1);

  BuildPairsArgs bp;
  auto* bp_cmd = app.add_subcommand("build-pairs",
                                    "convert raw annotations to preference pairs");
  bp_cmd->add_option("--raw", bp.raw, "raw annotation JSONL")->required();
  bp_cmd->add_option("--out_dir", bp.out_dir, "output directory")->required();
  bp_cmd->add_option("--registry", bp.registry, "task registry for validation");
  bp_cmd->add_option("--scope", bp.scope, "pairing scope")
      ->check(CLI::IsMember({"same_context", "any_context"}));
  bp_cmd->add_option("--min_gap", bp.min_gap, "minimum score gap");
  bp_cmd->add_flag("--average_annotators,!--no-average_annotators", bp.average_annotators,
                   "average scores per (context, answer)");

  SplitArgs sp;
  auto* sp_cmd = app.add_subcommand("split", "80/10/10 per-task split");
  sp_cmd->add_option("--pairs", sp.pairs, "dataset JSONL")->required();
  sp_cmd->add_option("--out_dir", sp.out_dir, "output directory")->required();
  sp_cmd->add_option("--seed", sp.seed, "shuffle seed")->required();
  sp_cmd->add_flag("--group_aware,!--no-group_aware", sp.group_aware,
                   "keep identical good-contexts in one split");

  SynthArgs sy;
  auto* sy_cmd = app.add_subcommand("synth", "generate a synthetic preference task");
  sy_cmd->add_option("--task_id", sy.task_id, "task id");
  sy_cmd->add_option("--family", sy.family, "quality-weight family");
  sy_cmd->add_option("--vocab_words", sy.vocab_words, "word sample space size");
  sy_cmd->add_option("--pairs", sy.pairs, "number of pairs");
  sy_cmd->add_option("--noise", sy.noise, "label flip probability");
  sy_cmd->add_option("--seed", sy.seed, "generator seed")->required();
  sy_cmd->add_option("--out_dir", sy.out_dir, "output directory")->required();

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "train scoring models");
  tr_cmd->add_option("--setup", tr.setup, "experimental setup")
      ->check(CLI::IsMember({"single_task", "multi_task", "cross_task", "cross_cluster"}));
  tr_cmd->add_option("--task", tr.task, "target task id");
  tr_cmd->add_option("--cluster", tr.cluster, "cluster name (cross_cluster)");
  tr_cmd->add_option("--train", tr.train, "training split JSONL")->required();
  tr_cmd->add_option("--registry", tr.registry, "task registry")->required();
  tr_cmd->add_option("--clusters", tr.clusters, "cluster file");
  tr_cmd->add_option("--config", tr.config, "train config JSON file");
  tr_cmd->add_option("--seeds", tr.seeds, "number of seeds (expands to 1..N)");
  tr_cmd->add_option("--seed_list", tr.seed_list, "explicit comma-separated seeds");
  tr_cmd->add_option("--out_dir", tr.out_dir, "output directory")->required();
  tr_cmd->add_option("--vocab_cap", tr.vocab_cap, "vocabulary size cap");
  tr_cmd->add_option("--jobs", tr.jobs, "parallel independent runs");
  std::string tr_pooling = "last";
  add_scorer_flags(tr_cmd, tr.scorer_cfg, tr_pooling);
  tr.flags.attach(tr_cmd);

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "evaluate trained models on a test split");
  ev_cmd->add_option("--models", ev.models, "directory with model_seed*.ckpt + vocab.txt")
      ->required();
  ev_cmd->add_option("--task", ev.task, "target task id")->required();
  ev_cmd->add_option("--test", ev.test, "test split JSONL")->required();
  ev_cmd->add_option("--split", ev.split, "split label for the manifest");
  ev_cmd->add_option("--registry", ev.registry, "task registry")->required();
  ev_cmd->add_option("--config", ev.config, "train config JSON (assembly flags)");
  ev_cmd->add_option("--setup", ev.setup, "setup label for report rows");
  ev_cmd->add_option("--out_dir", ev.out_dir, "output directory")->required();

  ReportArgs rp;
  auto* rp_cmd = app.add_subcommand("report", "aggregate seed-level results");
  rp_cmd->add_option("--results", rp.results, "seed-level results CSV(s)")->required();
  rp_cmd->add_option("--out_dir", rp.out_dir, "output directory")->required();
  rp_cmd->add_option("--format", rp.format, "csv | text | both")
      ->check(CLI::IsMember({"csv", "text", "both"}));

  SelectInstructionArgs si;
  auto* si_cmd = app.add_subcommand("select-instruction",
                                    "pick the best instruction on the validation split");
  si_cmd->add_option("--task", si.task, "task id")->required();
  si_cmd->add_option("--registry", si.registry, "task registry")->required();
  si_cmd->add_option("--train", si.train, "training split JSONL");
  si_cmd->add_option("--val", si.val, "validation split JSONL")->required();
  si_cmd->add_option("--out_dir", si.out_dir, "output directory")->required();
  si_cmd->add_option("--config", si.config, "train config JSON file");
  si_cmd->add_option("--model", si.model, "pretrained checkpoint (zero-shot targets)");
  si_cmd->add_option("--vocab_cap", si.vocab_cap, "vocabulary size cap");
  si_cmd->add_option("--seed", si.seed, "seed for the candidate trials");
  std::string si_pooling = "last";
  add_scorer_flags(si_cmd, si.scorer_cfg, si_pooling);
  si.flags.attach(si_cmd);

  GradCheckArgs gc;
  auto* gc_cmd = app.add_subcommand("grad-check",
                                    "finite-difference check of the analytic gradients");
  std::string gc_pooling = "last";
  add_scorer_flags(gc_cmd, gc.cfg, gc_pooling);
  gc_cmd->add_option("--vocab_size", gc.cfg.vocab_size, "vocabulary size");
  gc_cmd->add_option("--samples", gc.samples, "parameters to sample");
  gc_cmd->add_option("--eps", gc.eps, "central difference step");
  gc_cmd->add_option("--tolerance", gc.tolerance, "max relative error to pass");
  gc_cmd->add_option("--seed", gc.seed, "sampling seed");
  gc_cmd->add_option("--out_dir", gc.out_dir, "write gradcheck.json + manifest here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (bp_cmd->parsed()) return run_build_pairs(bp);
    if (sp_cmd->parsed()) return run_split(sp);
    if (sy_cmd->parsed()) return run_synth(sy);
    if (tr_cmd->parsed()) {
      tr.pooling = tr_pooling;
      return run_train(tr);
    }
    if (ev_cmd->parsed()) return run_evaluate(ev);
    if (rp_cmd->parsed()) return run_report(rp);
    if (si_cmd->parsed()) {
      si.pooling = si_pooling;
      return run_select_instruction(si);
    }
    if (gc_cmd->parsed()) {
      gc.pooling = gc_pooling;
      return run_grad_check(gc);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace prefscore::cli
