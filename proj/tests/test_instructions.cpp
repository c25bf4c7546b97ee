#include "doctest.h"
#include "prefscore/instructions.hpp"
#include "prefscore/rng.hpp"
#include "test_util.hpp"

using namespace prefscore;

namespace {

TaskSpec task_with(std::vector<InstructionCandidate> candidates) {
  TaskSpec t;
  t.id = "T";
  t.instructions = std::move(candidates);
  return t;
}

std::vector<PreferencePair> val_pairs(int n, const std::string& task = "T") {
  std::vector<PreferencePair> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(make_pair("v" + std::to_string(i), task, "ctx" + std::to_string(i),
                            "g" + std::to_string(i), "b" + std::to_string(i)));
  }
  return out;
}

}  // namespace

TEST_CASE("instruction_for resolves the shipped registry texts") {
  TaskRegistry reg = TaskRegistry::load(source_data() / "tasks.json");
  ResolvedInstruction ag = instruction_for(reg.get("AG"));
  CHECK(ag.text ==
        "Determine the grammaticality of an answer given a narrative, a question and an "
        "answer to that question.");
  CHECK(!ag.used_fallback);

  ResolvedInstruction hso = instruction_for(reg.get("HSO"));
  CHECK(hso.text == "You are given a hate speech. Determine how offensive the hate speech is.");
}

TEST_CASE("instruction_for fallback rules") {
  SUBCASE("single unselected candidate resolves without a warning") {
    TaskSpec t = task_with({{"i1", "Judge the answer."}});
    ResolvedInstruction r = instruction_for(t);
    CHECK(r.text == "Judge the answer.");
    CHECK(!r.used_fallback);
  }
  SUBCASE("several unselected candidates fall back to the first with a warning") {
    TaskSpec t = task_with({{"i1", "First."}, {"i2", "Second."}, {"i3", "Third."}});
    ResolvedInstruction r = instruction_for(t);
    CHECK(r.text == "First.");
    CHECK(r.used_fallback);
  }
  SUBCASE("the selected candidate wins") {
    TaskSpec t = task_with({{"i1", "First."}, {"i2", "Second."}});
    t.selected_instruction = "i2";
    CHECK(instruction_for(t).text == "Second.");
  }
  SUBCASE("no candidates is an error") {
    TaskSpec t;
    t.id = "empty";
    CHECK_THROWS_AS(instruction_for(t), ValidationError);
  }
  SUBCASE("dangling selection is an error") {
    TaskSpec t = task_with({{"i1", "First."}});
    t.selected_instruction = "missing";
    CHECK_THROWS_AS(instruction_for(t), ValidationError);
  }
}

TEST_CASE("select_instruction picks the argmax of validation accuracy") {
  auto val = val_pairs(3);

  SUBCASE("plain argmax") {
    TaskSpec t = task_with({{"i1", "First."}, {"i2", "Second."}});
    auto eval = [](const InstructionCandidate& c) { return c.id == "i1" ? 0.70 : 0.65; };
    SelectionResult r = select_instruction(t, eval, val);
    CHECK(r.instruction_id == "i1");
    CHECK(t.selected_instruction == "i1");
    CHECK(r.val_accuracy.at("i1") == 0.70);
    CHECK(r.val_accuracy.at("i2") == 0.65);
  }
  SUBCASE("ties break to the lexicographically smallest id") {
    TaskSpec t = task_with({{"zz", "First."}, {"aa", "Second."}});
    auto eval = [](const InstructionCandidate&) { return 0.70; };
    CHECK(select_instruction(t, eval, val).instruction_id == "aa");
  }
  SUBCASE("a single candidate wins without evaluation") {
    TaskSpec t = task_with({{"only", "Only."}});
    int calls = 0;
    auto eval = [&](const InstructionCandidate&) {
      ++calls;
      return 0.5;
    };
    CHECK(select_instruction(t, eval, val).instruction_id == "only");
    CHECK(calls == 0);
    CHECK(t.selected_instruction == "only");
  }
  SUBCASE("selection is invariant under candidate permutation") {
    auto eval = [](const InstructionCandidate& c) {
      if (c.id == "i2") return 0.8;
      return c.id == "i3" ? 0.8 : 0.1;  // i2/i3 tie at the top
    };
    TaskSpec t1 = task_with({{"i1", "A."}, {"i2", "B."}, {"i3", "C."}});
    TaskSpec t2 = task_with({{"i3", "C."}, {"i1", "A."}, {"i2", "B."}});
    CHECK(select_instruction(t1, eval, val).instruction_id ==
          select_instruction(t2, eval, val).instruction_id);
    CHECK(t1.selected_instruction == "i2");
  }
  SUBCASE("failures name the candidate") {
    TaskSpec t = task_with({{"i1", "First."}, {"boom", "Second."}});
    auto eval = [](const InstructionCandidate& c) -> double {
      if (c.id == "boom") throw std::runtime_error("diverged");
      return 0.5;
    };
    CHECK_THROWS_WITH_AS(select_instruction(t, eval, val),
                         doctest::Contains("boom"), TrainingError);
  }
  SUBCASE("validation pairs must belong to the task") {
    TaskSpec t = task_with({{"i1", "First."}, {"i2", "Second."}});
    auto wrong = val_pairs(2, "OTHER");
    auto eval = [](const InstructionCandidate&) { return 0.5; };
    CHECK_THROWS_AS(select_instruction(t, eval, wrong), ValidationError);
    CHECK_THROWS_AS(select_instruction(t, eval, std::vector<PreferencePair>{}),
                    ValidationError);
  }
}
