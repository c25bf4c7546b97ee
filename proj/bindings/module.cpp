#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "prefscore/cli.hpp"
#include "prefscore/corpus.hpp"
#include "prefscore/evaluator.hpp"
#include "prefscore/instructions.hpp"
#include "prefscore/pair_builder.hpp"
#include "prefscore/scorer.hpp"
#include "prefscore/synth.hpp"
#include "prefscore/text_pipeline.hpp"
#include "prefscore/trainer.hpp"

namespace py = pybind11;
using namespace prefscore;

PYBIND11_MODULE(_core, m) {
  m.doc() = "instruction-conditioned pairwise preference metric core";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  // ----- corpus ------------------------------------------------------------
  py::class_<Element>(m, "Element")
      .def(py::init<std::string, std::string>(), py::arg("label"), py::arg("text"))
      .def_readwrite("label", &Element::label)
      .def_readwrite("text", &Element::text);

  py::class_<Sample>(m, "Sample")
      .def(py::init<>())
      .def(py::init([](std::vector<Element> elements, std::string answer,
                       std::optional<double> human_score) {
             return Sample{std::move(elements), std::move(answer), human_score};
           }),
           py::arg("elements"), py::arg("answer"), py::arg("human_score") = py::none())
      .def_readwrite("elements", &Sample::elements)
      .def_readwrite("answer", &Sample::answer)
      .def_readwrite("human_score", &Sample::human_score);

  py::class_<PreferencePair>(m, "PreferencePair")
      .def(py::init<>())
      .def(py::init([](std::string id, std::string task, Sample good, Sample bad) {
             return PreferencePair{std::move(id), std::move(task), std::move(good),
                                   std::move(bad)};
           }),
           py::arg("id"), py::arg("task"), py::arg("good"), py::arg("bad"))
      .def_readwrite("id", &PreferencePair::id)
      .def_readwrite("task", &PreferencePair::task)
      .def_readwrite("good", &PreferencePair::good)
      .def_readwrite("bad", &PreferencePair::bad);

  py::class_<InstructionCandidate>(m, "InstructionCandidate")
      .def(py::init<std::string, std::string>(), py::arg("id"), py::arg("text"))
      .def_readwrite("id", &InstructionCandidate::id)
      .def_readwrite("text", &InstructionCandidate::text);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("grad_accum", &TrainConfig::grad_accum)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("label_input", &TrainConfig::label_input)
      .def_readwrite("truncate_right", &TrainConfig::truncate_right)
      .def_readwrite("use_sgd", &TrainConfig::use_sgd)
      .def_readwrite("per_task_cap", &TrainConfig::per_task_cap);

  py::class_<TaskSpec>(m, "TaskSpec")
      .def(py::init<>())
      .def_readwrite("id", &TaskSpec::id)
      .def_readwrite("dataset_name", &TaskSpec::dataset_name)
      .def_readwrite("criterion", &TaskSpec::criterion)
      .def_readwrite("instructions", &TaskSpec::instructions)
      .def_readwrite("selected_instruction", &TaskSpec::selected_instruction)
      .def_readwrite("preset", &TaskSpec::preset);

  py::class_<Cluster>(m, "Cluster")
      .def(py::init<>())
      .def_readwrite("name", &Cluster::name)
      .def_readwrite("task_ids", &Cluster::task_ids);

  py::class_<TaskRegistry>(m, "TaskRegistry")
      .def(py::init<>())
      .def("add", &TaskRegistry::add)
      .def("has", &TaskRegistry::has)
      .def("get", &TaskRegistry::get, py::return_value_policy::reference_internal)
      .def("tasks", &TaskRegistry::tasks, py::return_value_policy::reference_internal)
      .def_static("load", &TaskRegistry::load)
      .def("save", &TaskRegistry::save)
      .def("__len__", &TaskRegistry::size);

  py::class_<SplitDataset>(m, "SplitDataset")
      .def_readonly("train", &SplitDataset::train)
      .def_readonly("validation", &SplitDataset::validation)
      .def_readonly("test", &SplitDataset::test)
      .def_readonly("split_seed", &SplitDataset::split_seed);

  m.def("load_dataset", &load_dataset, py::arg("path"), py::arg("registry") = nullptr);
  m.def("save_dataset", [](const std::filesystem::path& path,
                           const std::vector<PreferencePair>& pairs) {
    save_dataset(path, pairs);
  });
  m.def("split_per_task", [](const std::vector<PreferencePair>& pairs, std::uint64_t seed,
                             bool group_aware) {
          return split_per_task(pairs, seed, group_aware);
        },
        py::arg("pairs"), py::arg("seed"), py::arg("group_aware") = true);
  m.def("filter_tasks", [](const std::vector<PreferencePair>& pairs,
                           const std::set<std::string>& include,
                           const std::set<std::string>& exclude) {
          return filter_tasks(pairs, include, exclude);
        },
        py::arg("pairs"), py::arg("include") = std::set<std::string>{},
        py::arg("exclude") = std::set<std::string>{});

  // ----- pair builder -------------------------------------------------------
  py::enum_<PairScope>(m, "PairScope")
      .value("SAME_CONTEXT", PairScope::SameContext)
      .value("ANY_CONTEXT", PairScope::AnyContext);

  py::class_<PairingPolicy>(m, "PairingPolicy")
      .def(py::init<>())
      .def_readwrite("scope", &PairingPolicy::scope)
      .def_readwrite("min_gap", &PairingPolicy::min_gap)
      .def_readwrite("average_annotators", &PairingPolicy::average_annotators);

  py::class_<RawAbsolute>(m, "RawAbsolute")
      .def(py::init<>())
      .def_readwrite("task", &RawAbsolute::task)
      .def_readwrite("elements", &RawAbsolute::elements)
      .def_readwrite("answer", &RawAbsolute::answer)
      .def_readwrite("score", &RawAbsolute::score)
      .def_readwrite("annotator_id", &RawAbsolute::annotator_id);

  py::class_<RawRanking>(m, "RawRanking")
      .def(py::init<>())
      .def_readwrite("task", &RawRanking::task)
      .def_readwrite("elements", &RawRanking::elements)
      .def_readwrite("answers", &RawRanking::answers)
      .def_readwrite("ranks", &RawRanking::ranks);

  m.def("pairs_from_absolute", [](const std::vector<RawAbsolute>& records,
                                  const PairingPolicy& policy) {
          return pairs_from_absolute(records, policy);
        },
        py::arg("records"), py::arg("policy") = PairingPolicy{});
  m.def("pairs_from_ranking", &pairs_from_ranking);

  // ----- text pipeline ------------------------------------------------------
  m.def("tokenize", [](const std::string& text) { return tokenize(text); });

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("build", [](const std::vector<std::string>& corpus, std::size_t cap) {
                    return Vocabulary::build(corpus, cap);
                  },
                  py::arg("corpus"), py::arg("cap") = 8192)
      .def_static("load", &Vocabulary::load)
      .def("save", &Vocabulary::save)
      .def("id_of", [](const Vocabulary& v, const std::string& tok) { return v.id_of(tok); })
      .def("token", &Vocabulary::token)
      .def("__len__", &Vocabulary::size);

  py::class_<AssemblyConfig>(m, "AssemblyConfig")
      .def(py::init<>())
      .def_readwrite("label_input", &AssemblyConfig::label_input)
      .def_readwrite("truncate_right", &AssemblyConfig::truncate_right)
      .def_readwrite("max_len", &AssemblyConfig::max_len);

  m.def("assemble", [](const std::string& instruction, const Sample& sample,
                       const AssemblyConfig& cfg, const Vocabulary& vocab) {
          TokenSequence seq = assemble(instruction, sample, cfg, vocab);
          return py::make_tuple(seq.ids, seq.true_len);
        },
        py::arg("instruction"), py::arg("sample"), py::arg("config"), py::arg("vocab"));

  // ----- scorer ---------------------------------------------------------------
  py::enum_<Pooling>(m, "Pooling")
      .value("LAST_TOKEN", Pooling::LastToken)
      .value("CLS", Pooling::Cls);

  py::class_<ScorerConfig>(m, "ScorerConfig")
      .def(py::init<>())
      .def_readwrite("d_model", &ScorerConfig::d_model)
      .def_readwrite("n_layers", &ScorerConfig::n_layers)
      .def_readwrite("n_heads", &ScorerConfig::n_heads)
      .def_readwrite("d_ff", &ScorerConfig::d_ff)
      .def_readwrite("max_len", &ScorerConfig::max_len)
      .def_readwrite("vocab_size", &ScorerConfig::vocab_size)
      .def_readwrite("init_seed", &ScorerConfig::init_seed)
      .def_readwrite("pooling", &ScorerConfig::pooling);

  py::class_<ScorerModel>(m, "ScorerModel")
      .def_readonly("cfg", &ScorerModel::cfg);

  m.def("init_scorer", &init_scorer);
  m.def("score", [](const ScorerModel& model, const std::vector<int>& ids, int true_len) {
          return score(model, ids, true_len);
        },
        py::arg("model"), py::arg("ids"), py::arg("true_len"));
  m.def("save_checkpoint", &save_checkpoint);
  m.def("load_checkpoint", &load_checkpoint);
  m.def("gradient_check", &gradient_check, py::arg("config"), py::arg("n_samples") = 25,
        py::arg("epsilon") = 1e-4, py::arg("seed") = 7);

  // ----- trainer ---------------------------------------------------------------
  m.def("ranking_loss", [](double r_good, double r_bad) {
          RankingLossResult r = ranking_loss(r_good, r_bad);
          return py::make_tuple(r.loss, r.d_good, r.d_bad);
        },
        py::arg("r_good"), py::arg("r_bad"));

  py::class_<LossCurvePoint>(m, "LossCurvePoint")
      .def_readonly("step", &LossCurvePoint::step)
      .def_readonly("epoch", &LossCurvePoint::epoch)
      .def_readonly("loss", &LossCurvePoint::loss);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("model", &TrainResult::model)
      .def_readonly("curve", &TrainResult::curve);

  m.def("train", [](const ScorerModel& model, const std::vector<PreferencePair>& pairs,
                    const TaskRegistry& registry, const TrainConfig& cfg,
                    const Vocabulary& vocab) {
          return train(model, pairs, registry, cfg, vocab);
        },
        py::arg("model"), py::arg("pairs"), py::arg("registry"), py::arg("config"),
        py::arg("vocab"));

  py::enum_<Setup>(m, "Setup")
      .value("SINGLE_TASK", Setup::SingleTask)
      .value("MULTI_TASK", Setup::MultiTask)
      .value("CROSS_TASK", Setup::CrossTask)
      .value("CROSS_CLUSTER", Setup::CrossCluster);

  py::class_<RunSpec>(m, "RunSpec")
      .def(py::init<>())
      .def_readwrite("setup", &RunSpec::setup)
      .def_readwrite("target_task", &RunSpec::target_task)
      .def_readwrite("cluster", &RunSpec::cluster)
      .def_readwrite("seeds", &RunSpec::seeds);

  m.def("select_training_pairs", [](const RunSpec& spec, const SplitDataset& splits,
                                    const std::vector<Cluster>& clusters) {
          return select_training_pairs(spec, splits, clusters);
        },
        py::arg("spec"), py::arg("splits"), py::arg("clusters") = std::vector<Cluster>{});
  m.def("run_setup", [](const RunSpec& spec, const SplitDataset& splits,
                        const TaskRegistry& registry, const std::vector<Cluster>& clusters,
                        const TrainConfig& cfg, const ScorerConfig& scorer_cfg,
                        const Vocabulary& vocab) {
          return run_setup(spec, splits, registry, clusters, cfg, scorer_cfg, vocab);
        },
        py::arg("spec"), py::arg("splits"), py::arg("registry"), py::arg("clusters"),
        py::arg("config"), py::arg("scorer_config"), py::arg("vocab"));

  // ----- instructions -----------------------------------------------------------
  py::class_<ResolvedInstruction>(m, "ResolvedInstruction")
      .def_readonly("text", &ResolvedInstruction::text)
      .def_readonly("used_fallback", &ResolvedInstruction::used_fallback);

  m.def("instruction_for", &instruction_for);

  py::class_<SelectionResult>(m, "SelectionResult")
      .def_readonly("instruction_id", &SelectionResult::instruction_id)
      .def_readonly("val_accuracy", &SelectionResult::val_accuracy);

  m.def("select_instruction", [](TaskSpec& task, const std::function<double(
                                     const InstructionCandidate&)>& evaluate,
                                 const std::vector<PreferencePair>& val) {
          return select_instruction(task, evaluate, val);
        },
        py::arg("task"), py::arg("evaluate"), py::arg("val"));

  // ----- evaluator ----------------------------------------------------------------
  py::class_<ScoredPair>(m, "ScoredPair")
      .def(py::init([](std::string id, double r_good, double r_bad) {
             return ScoredPair{std::move(id), r_good, r_bad};
           }),
           py::arg("id"), py::arg("r_good"), py::arg("r_bad"))
      .def_readwrite("id", &ScoredPair::id)
      .def_readwrite("r_good", &ScoredPair::r_good)
      .def_readwrite("r_bad", &ScoredPair::r_bad);

  m.def("pairwise_accuracy", [](const std::vector<ScoredPair>& scored) {
    return pairwise_accuracy(scored);
  });
  m.def("tie_fraction", [](const std::vector<ScoredPair>& scored) {
    return tie_fraction(scored);
  });
  m.def("average_ranks", [](const std::vector<double>& v) { return average_ranks(v); });
  m.def("spearman", [](const std::vector<double>& a, const std::vector<double>& b) {
    return spearman(a, b);
  });
  m.def("pearson", [](const std::vector<double>& a, const std::vector<double>& b) {
    return pearson(a, b);
  });

  py::class_<SeedResult>(m, "SeedResult")
      .def(py::init([](std::string task, std::string setup, std::uint64_t seed,
                       double accuracy, double tie_frac, std::optional<double> rho) {
             return SeedResult{std::move(task), std::move(setup), seed, accuracy, tie_frac,
                               rho};
           }),
           py::arg("task"), py::arg("setup"), py::arg("seed"), py::arg("accuracy"),
           py::arg("tie_fraction") = 0.0, py::arg("spearman") = py::none())
      .def_readwrite("task", &SeedResult::task)
      .def_readwrite("setup", &SeedResult::setup)
      .def_readwrite("seed", &SeedResult::seed)
      .def_readwrite("accuracy", &SeedResult::accuracy)
      .def_readwrite("tie_fraction", &SeedResult::tie_frac)
      .def_readwrite("spearman", &SeedResult::spearman_rho);

  py::class_<CellStats>(m, "CellStats")
      .def_readonly("mean", &CellStats::mean)
      .def_readonly("stddev", &CellStats::stddev)
      .def_readonly("n_seeds", &CellStats::n_seeds)
      .def_readonly("spearman", &CellStats::spearman_rho);

  py::class_<RunReport>(m, "RunReport")
      .def_readonly("tasks", &RunReport::tasks)
      .def_readonly("setups", &RunReport::setups)
      .def("cell", &RunReport::cell, py::return_value_policy::reference_internal)
      .def("column_average", &RunReport::column_average)
      .def("to_csv", [](const RunReport& r) {
        std::ostringstream out;
        write_report_csv(r, out);
        return out.str();
      })
      .def("to_text", [](const RunReport& r) {
        std::ostringstream out;
        write_report_text(r, out);
        return out.str();
      });

  m.def("aggregate", [](const std::vector<SeedResult>& rows) { return aggregate(rows); });

  py::class_<EvalOutcome>(m, "EvalOutcome")
      .def_readonly("accuracy", &EvalOutcome::accuracy)
      .def_readonly("tie_fraction", &EvalOutcome::tie_frac)
      .def_readonly("spearman", &EvalOutcome::spearman_rho)
      .def_readonly("scored", &EvalOutcome::scored);

  m.def("evaluate_model", [](const ScorerModel& model,
                             const std::vector<PreferencePair>& test_pairs,
                             const TaskRegistry& registry, const TrainConfig& cfg,
                             const Vocabulary& vocab) {
          return evaluate_model(model, test_pairs, registry, cfg, vocab);
        },
        py::arg("model"), py::arg("test_pairs"), py::arg("registry"), py::arg("config"),
        py::arg("vocab"));

  // ----- synth -------------------------------------------------------------------
  py::class_<SynthTaskSpec>(m, "SynthTaskSpec")
      .def(py::init<>())
      .def_readwrite("task_id", &SynthTaskSpec::task_id)
      .def_readwrite("family", &SynthTaskSpec::family)
      .def_readwrite("vocab_words", &SynthTaskSpec::vocab_words)
      .def_readwrite("pair_count", &SynthTaskSpec::pair_count)
      .def_readwrite("noise", &SynthTaskSpec::noise)
      .def_readwrite("seed", &SynthTaskSpec::seed);

  py::class_<SynthOutput>(m, "SynthOutput")
      .def_readonly("pairs", &SynthOutput::pairs)
      .def_readonly("task", &SynthOutput::task)
      .def_readonly("latent_quality", &SynthOutput::latent_quality);

  m.def("generate", &generate);
  m.def("oracle_score", &oracle_score);

  py::class_<FamilyTraits>(m, "FamilyTraits")
      .def_readonly("keywords", &FamilyTraits::keywords)
      .def_readonly("ideal_len", &FamilyTraits::ideal_len)
      .def_readonly("w_keyword", &FamilyTraits::w_keyword)
      .def_readonly("w_length", &FamilyTraits::w_length)
      .def_readonly("w_corruption", &FamilyTraits::w_corruption)
      .def_readonly("bias", &FamilyTraits::bias);
  m.def("family_traits", &family_traits);

  // ----- cli ----------------------------------------------------------------------
  m.def("run_cli", [](const std::vector<std::string>& args) {
    return prefscore::cli::dispatch(args);
  });
}
