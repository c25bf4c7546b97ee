#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "prefscore/errors.hpp"
#include "prefscore/train_config.hpp"

namespace prefscore {

/// One labeled context element, e.g. ("narrative", "Tim was unemployed. ...").
struct Element {
  std::string label;
  std::string text;

  bool operator==(const Element&) const = default;
};

/// A context plus one generated answer, optionally with the original
/// human annotation score (used for rank correlation).
struct Sample {
  std::vector<Element> elements;
  std::string answer;
  std::optional<double> human_score;

  bool operator==(const Sample&) const = default;
};

/// One comparative instance: under the task's criterion, `good` was
/// preferred over `bad`. Each sample carries its own context.
struct PreferencePair {
  std::string id;
  std::string task;
  Sample good;
  Sample bad;
};

struct InstructionCandidate {
  std::string id;
  std::string text;
};

/// A (dataset, evaluation criterion) combination with its instruction
/// candidates and shipped hyperparameter preset.
struct TaskSpec {
  std::string id;
  std::string dataset_name;
  std::string criterion;
  std::vector<InstructionCandidate> instructions;
  std::optional<std::string> selected_instruction;
  TrainConfig preset;
  bool allow_empty_context = false;  // permit elements with empty text
};

/// A handpicked group of related tasks for cross-cluster training.
struct Cluster {
  std::string name;
  std::vector<std::string> task_ids;

  bool contains(const std::string& task_id) const;
};

struct SplitDataset {
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> validation;
  std::vector<PreferencePair> test;
  std::uint64_t split_seed = 0;
};

/// Ordered task registry keyed by task id.
class TaskRegistry {
 public:
  void add(TaskSpec spec);
  bool has(const std::string& id) const;
  const TaskSpec& get(const std::string& id) const;  // throws ValidationError
  TaskSpec& get_mutable(const std::string& id);
  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  std::size_t size() const { return tasks_.size(); }

  static TaskRegistry load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<TaskSpec> tasks_;
  std::map<std::string, std::size_t> index_;
};

/// Parse a JSON-lines dataset. Every record is validated against the type
/// invariants; errors name the offending line and field. When a registry is
/// given, task ids must resolve against it.
std::vector<PreferencePair> load_dataset(const std::filesystem::path& path,
                                         const TaskRegistry* registry = nullptr);

/// Write pairs as JSON-lines with alphabetical key order (canonical form).
void save_dataset(const std::filesystem::path& path,
                  std::span<const PreferencePair> pairs);

/// Validate one pair against the type invariants (standalone records; id
/// uniqueness is a dataset-level check done by load_dataset).
void validate_pair(const PreferencePair& pair, const TaskRegistry* registry = nullptr);

/// Per-task 80/10/10 split: within each task the pairs are shuffled with
/// `seed`, n_val = n_test = floor(n/10) exactly, the remainder trains.
/// With group_aware (default) pairs sharing an identical good-context stay
/// in one split whenever the exact quotas permit; quota exactness wins when
/// they conflict. A task with fewer than 3 pairs is an error.
SplitDataset split_per_task(std::span<const PreferencePair> pairs,
                            std::uint64_t seed, bool group_aware = true);

/// Keep pairs whose task is in `include` (all tasks when empty) and not in
/// `exclude`. Order preserved. The two sets must be disjoint.
std::vector<PreferencePair> filter_tasks(std::span<const PreferencePair> pairs,
                                         const std::set<std::string>& include,
                                         const std::set<std::string>& exclude);

std::vector<Cluster> load_clusters(const std::filesystem::path& path);
void save_clusters(const std::filesystem::path& path, std::span<const Cluster> clusters);

/// Check that every cluster is non-empty, duplicate-free, and refers only to
/// registered tasks.
void validate_clusters(std::span<const Cluster> clusters, const TaskRegistry& registry);

// TrainConfig <-> JSON text (keys exactly as the field names).
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json_text(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace prefscore
