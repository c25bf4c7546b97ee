#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>

#include "prefscore/corpus.hpp"

namespace prefscore {

struct ResolvedInstruction {
  std::string text;
  bool used_fallback = false;  // selection unset with several candidates
};

/// The instruction text for a task: the selected candidate when set, the
/// sole candidate when there is exactly one, otherwise the first candidate
/// with the fallback flag raised. No candidates is an error.
ResolvedInstruction instruction_for(const TaskSpec& task);

/// Trains-and-evaluates one instruction candidate, returning validation
/// pairwise accuracy. Supplied by the caller (the trainer module offers
/// ready-made implementations).
using CandidateEval = std::function<double(const InstructionCandidate&)>;

struct SelectionResult {
  std::string instruction_id;
  std::map<std::string, double> val_accuracy;  // per candidate id
};

/// Evaluate every candidate on the validation set and pick the argmax,
/// breaking ties by lexicographically smallest id. A single candidate wins
/// without any evaluation. The winner is recorded in
/// task.selected_instruction. Evaluation failures name the candidate.
SelectionResult select_instruction(TaskSpec& task, const CandidateEval& evaluate,
                                   std::span<const PreferencePair> val);

}  // namespace prefscore
