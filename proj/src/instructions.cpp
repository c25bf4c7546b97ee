#include "prefscore/instructions.hpp"

#include "prefscore/errors.hpp"

namespace prefscore {

ResolvedInstruction instruction_for(const TaskSpec& task) {
  if (task.instructions.empty()) {
    throw ValidationError("task \"" + task.id + "\" has no instruction candidates");
  }
  if (task.selected_instruction) {
    for (const auto& c : task.instructions) {
      if (c.id == *task.selected_instruction) return ResolvedInstruction{c.text, false};
    }
    throw ValidationError("task \"" + task.id + "\": selected_instruction \"" +
                          *task.selected_instruction + "\" is not a candidate");
  }
  if (task.instructions.size() == 1) {
    return ResolvedInstruction{task.instructions.front().text, false};
  }
  return ResolvedInstruction{task.instructions.front().text, true};
}

SelectionResult select_instruction(TaskSpec& task, const CandidateEval& evaluate,
                                   std::span<const PreferencePair> val) {
  if (task.instructions.empty()) {
    throw ValidationError("select_instruction: task \"" + task.id +
                          "\" has no instruction candidates");
  }
  if (val.empty()) {
    throw ValidationError("select_instruction: validation set is empty");
  }
  for (const auto& p : val) {
    if (p.task != task.id) {
      throw ValidationError("select_instruction: validation pair \"" + p.id +
                            "\" belongs to task \"" + p.task + "\", not \"" + task.id + "\"");
    }
  }

  SelectionResult result;
  if (task.instructions.size() == 1) {
    result.instruction_id = task.instructions.front().id;
    task.selected_instruction = result.instruction_id;
    return result;
  }

  for (const auto& candidate : task.instructions) {
    double acc;
    try {
      acc = evaluate(candidate);
    } catch (const std::exception& e) {
      throw TrainingError("select_instruction: candidate \"" + candidate.id +
                          "\" failed: " + e.what());
    }
    result.val_accuracy[candidate.id] = acc;
  }

  // argmax with lexicographic tie-break; the map iterates ids in order, so
  // a strictly-greater comparison picks the smallest id among ties.
  const std::string* best = nullptr;
  double best_acc = 0.0;
  for (const auto& [id, acc] : result.val_accuracy) {
    if (!best || acc > best_acc) {
      best = &id;
      best_acc = acc;
    }
  }
  result.instruction_id = *best;
  task.selected_instruction = result.instruction_id;
  return result;
}

}  // namespace prefscore
