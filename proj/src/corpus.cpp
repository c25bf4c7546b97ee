#include "prefscore/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "prefscore/rng.hpp"

namespace prefscore {

using nlohmann::json;

namespace {

std::string context_key(const Sample& s) {
  std::string key;
  for (const auto& el : s.elements) {
    key += el.label;
    key += '\x1f';
    key += el.text;
    key += '\x1e';
  }
  return key;
}

json element_to_json(const Element& el) {
  return json{{"label", el.label}, {"text", el.text}};
}

json sample_to_json(const Sample& s) {
  json elements = json::array();
  for (const auto& el : s.elements) elements.push_back(element_to_json(el));
  json out{{"elements", std::move(elements)}, {"answer", s.answer}};
  if (s.human_score) out["human_score"] = *s.human_score;
  return out;
}

// Field access helpers that name the missing/mistyped field in the error.
const json& require_field(const json& obj, const char* field, const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ParseError(where + ": missing field \"" + field + "\"");
  }
  return *it;
}

std::string require_string(const json& obj, const char* field, const std::string& where) {
  const json& v = require_field(obj, field, where);
  if (!v.is_string()) {
    throw ParseError(where + ": field \"" + field + "\" must be a string");
  }
  return v.get<std::string>();
}

Sample sample_from_json(const json& obj, const char* field, const std::string& where) {
  const json& sj = require_field(obj, field, where);
  if (!sj.is_object()) {
    throw ParseError(where + ": field \"" + field + "\" must be an object");
  }
  std::string ctx = where + ", field \"" + field + "\"";
  Sample s;
  const json& elements = require_field(sj, "elements", ctx);
  if (!elements.is_array()) {
    throw ParseError(ctx + ": \"elements\" must be an array");
  }
  for (const auto& ej : elements) {
    Element el;
    el.label = require_string(ej, "label", ctx);
    el.text = require_string(ej, "text", ctx);
    s.elements.push_back(std::move(el));
  }
  s.answer = require_string(sj, "answer", ctx);
  if (sj.contains("human_score") && !sj["human_score"].is_null()) {
    if (!sj["human_score"].is_number()) {
      throw ParseError(ctx + ": \"human_score\" must be a number");
    }
    s.human_score = sj["human_score"].get<double>();
  }
  return s;
}

void validate_sample(const Sample& s, const std::string& where, bool allow_empty_text) {
  for (const auto& el : s.elements) {
    if (el.label.empty()) {
      throw ValidationError(where + ": element label must be non-empty");
    }
    if (el.label.find("<sep>") != std::string::npos) {
      throw ValidationError(where + ": element label contains the <sep> literal");
    }
    if (el.text.empty() && !allow_empty_text) {
      throw ValidationError(where + ": element \"" + el.label +
                            "\" has empty text (not allowed by task config)");
    }
  }
  if (s.answer.empty()) {
    throw ValidationError(where + ": answer must be non-empty");
  }
  if (s.human_score && !std::isfinite(*s.human_score)) {
    throw ValidationError(where + ": human_score must be finite");
  }
}

}  // namespace

bool Cluster::contains(const std::string& task_id) const {
  return std::find(task_ids.begin(), task_ids.end(), task_id) != task_ids.end();
}

void validate_pair(const PreferencePair& pair, const TaskRegistry* registry) {
  std::string where = "pair \"" + pair.id + "\"";
  if (pair.id.empty()) throw ValidationError("pair id must be non-empty");
  if (pair.task.empty()) throw ValidationError(where + ": task must be non-empty");
  bool allow_empty = false;
  if (registry) {
    if (!registry->has(pair.task)) {
      throw ValidationError(where + ": unknown task id \"" + pair.task + "\"");
    }
    allow_empty = registry->get(pair.task).allow_empty_context;
  }
  validate_sample(pair.good, where + ", field \"good\"", allow_empty);
  validate_sample(pair.bad, where + ", field \"bad\"", allow_empty);
  if (pair.good.answer == pair.bad.answer && pair.good.elements == pair.bad.elements) {
    throw ValidationError(where + ": good and bad samples are identical");
  }
}

std::vector<PreferencePair> load_dataset(const std::filesystem::path& path,
                                         const TaskRegistry* registry) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path.string());

  std::vector<PreferencePair> pairs;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = "line " + std::to_string(lineno);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object()) throw ParseError(where + ": record must be a JSON object");

    PreferencePair pair;
    pair.id = require_string(obj, "id", where);
    pair.task = require_string(obj, "task", where);
    pair.good = sample_from_json(obj, "good", where);
    pair.bad = sample_from_json(obj, "bad", where);

    try {
      validate_pair(pair, registry);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (!seen_ids.insert(pair.id).second) {
      throw ValidationError(where + ": duplicate pair id \"" + pair.id + "\"");
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void save_dataset(const std::filesystem::path& path,
                  std::span<const PreferencePair> pairs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path.string());
  for (const auto& p : pairs) {
    json obj{{"id", p.id},
             {"task", p.task},
             {"good", sample_to_json(p.good)},
             {"bad", sample_to_json(p.bad)}};
    out << obj.dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed writing dataset file: " + path.string());
}

SplitDataset split_per_task(std::span<const PreferencePair> pairs,
                            std::uint64_t seed, bool group_aware) {
  if (pairs.empty()) throw ValidationError("split_per_task: no pairs given");

  // Bucket per task, keeping first-appearance order of tasks and pairs.
  std::vector<std::string> task_order;
  std::map<std::string, std::vector<const PreferencePair*>> by_task;
  for (const auto& p : pairs) {
    auto [it, inserted] = by_task.try_emplace(p.task);
    if (inserted) task_order.push_back(p.task);
    it->second.push_back(&p);
  }

  SplitDataset out;
  out.split_seed = seed;
  for (const auto& task : task_order) {
    const auto& members = by_task[task];
    const std::size_t n = members.size();
    if (n < 3) {
      throw ValidationError("split_per_task: task \"" + task + "\" has only " +
                            std::to_string(n) + " pairs (need at least 3)");
    }
    const std::size_t n_val = n / 10;
    const std::size_t n_test = n / 10;

    // Groups of pairs sharing an identical good-context; singletons when
    // group awareness is off.
    std::vector<std::vector<const PreferencePair*>> groups;
    if (group_aware) {
      std::map<std::string, std::size_t> group_index;
      for (const auto* p : members) {
        std::string key = context_key(p->good);
        auto [it, inserted] = group_index.try_emplace(key, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(p);
      }
    } else {
      for (const auto* p : members) groups.push_back({p});
    }
    deterministic_shuffle(groups, seed);

    // Exact-quota fill: whole groups first, then split one group if no
    // whole-group packing reaches the quota. Quota exactness takes
    // precedence over group integrity.
    std::vector<char> consumed(groups.size(), 0);
    auto pick_exact = [&](std::size_t quota, std::vector<PreferencePair>& dst) {
      for (std::size_t g = 0; g < groups.size() && quota > 0; ++g) {
        if (consumed[g] || groups[g].size() > quota) continue;
        for (const auto* p : groups[g]) dst.push_back(*p);
        quota -= groups[g].size();
        consumed[g] = 1;
      }
      for (std::size_t g = 0; g < groups.size() && quota > 0; ++g) {
        if (consumed[g]) continue;
        auto& grp = groups[g];
        for (std::size_t i = 0; i < quota; ++i) dst.push_back(*grp[i]);
        grp.erase(grp.begin(), grp.begin() + static_cast<std::ptrdiff_t>(quota));
        quota = 0;
      }
    };
    pick_exact(n_test, out.test);
    pick_exact(n_val, out.validation);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (consumed[g]) continue;
      for (const auto* p : groups[g]) out.train.push_back(*p);
    }
  }
  return out;
}

std::vector<PreferencePair> filter_tasks(std::span<const PreferencePair> pairs,
                                         const std::set<std::string>& include,
                                         const std::set<std::string>& exclude) {
  for (const auto& t : include) {
    if (exclude.count(t)) {
      throw ValidationError("filter_tasks: task \"" + t +
                            "\" appears in both include and exclude");
    }
  }
  std::vector<PreferencePair> out;
  for (const auto& p : pairs) {
    if (!include.empty() && !include.count(p.task)) continue;
    if (exclude.count(p.task)) continue;
    out.push_back(p);
  }
  return out;
}

void TaskRegistry::add(TaskSpec spec) {
  if (spec.id.empty()) throw ValidationError("task id must be non-empty");
  if (index_.count(spec.id)) {
    throw ValidationError("duplicate task id \"" + spec.id + "\"");
  }
  if (spec.instructions.empty()) {
    throw ValidationError("task \"" + spec.id + "\" has no instruction candidates");
  }
  std::set<std::string> ids;
  for (const auto& c : spec.instructions) {
    if (c.text.empty()) {
      throw ValidationError("task \"" + spec.id + "\": instruction \"" + c.id +
                            "\" has empty text");
    }
    if (!ids.insert(c.id).second) {
      throw ValidationError("task \"" + spec.id + "\": duplicate instruction id \"" +
                            c.id + "\"");
    }
  }
  if (spec.selected_instruction && !ids.count(*spec.selected_instruction)) {
    throw ValidationError("task \"" + spec.id + "\": selected_instruction \"" +
                          *spec.selected_instruction + "\" is not a candidate");
  }
  index_[spec.id] = tasks_.size();
  tasks_.push_back(std::move(spec));
}

bool TaskRegistry::has(const std::string& id) const { return index_.count(id) != 0; }

const TaskSpec& TaskRegistry::get(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown task id \"" + id + "\"");
  return tasks_[it->second];
}

TaskSpec& TaskRegistry::get_mutable(const std::string& id) {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown task id \"" + id + "\"");
  return tasks_[it->second];
}

namespace {

json train_config_to_json_obj(const TrainConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate},
              {"grad_accum", cfg.grad_accum},
              {"epochs", cfg.epochs},
              {"seed", cfg.seed},
              {"label_input", cfg.label_input},
              {"truncate_right", cfg.truncate_right},
              {"use_sgd", cfg.use_sgd},
              {"per_task_cap", cfg.per_task_cap}};
}

TrainConfig train_config_from_json_obj(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": config must be a JSON object");
  TrainConfig cfg;
  try {
    if (obj.contains("learning_rate")) cfg.learning_rate = obj["learning_rate"].get<double>();
    if (obj.contains("grad_accum")) cfg.grad_accum = obj["grad_accum"].get<int>();
    if (obj.contains("epochs")) cfg.epochs = obj["epochs"].get<int>();
    if (obj.contains("seed")) cfg.seed = obj["seed"].get<std::uint64_t>();
    if (obj.contains("label_input")) cfg.label_input = obj["label_input"].get<bool>();
    if (obj.contains("truncate_right")) cfg.truncate_right = obj["truncate_right"].get<bool>();
    if (obj.contains("use_sgd")) cfg.use_sgd = obj["use_sgd"].get<bool>();
    if (obj.contains("per_task_cap")) cfg.per_task_cap = obj["per_task_cap"].get<int>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": bad config value: " + e.what());
  }
  if (cfg.learning_rate <= 0) throw ValidationError(where + ": learning_rate must be > 0");
  if (cfg.grad_accum < 1) throw ValidationError(where + ": grad_accum must be >= 1");
  if (cfg.epochs < 1) throw ValidationError(where + ": epochs must be >= 1");
  return cfg;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) {
  return train_config_to_json_obj(cfg).dump();
}

TrainConfig train_config_from_json_text(const std::string& text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: invalid JSON: ") + e.what());
  }
  return train_config_from_json_obj(obj, "train config");
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return train_config_from_json_text(buf.str());
}

TaskRegistry TaskRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open task registry: " + path.string());
  json arr;
  try {
    in >> arr;
  } catch (const json::exception& e) {
    throw ParseError("task registry " + path.string() + ": invalid JSON: " + e.what());
  }
  if (!arr.is_array()) {
    throw ParseError("task registry " + path.string() + ": top level must be an array");
  }
  TaskRegistry reg;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& tj = arr[i];
    std::string where = "task registry entry " + std::to_string(i);
    TaskSpec spec;
    spec.id = require_string(tj, "id", where);
    where += " (\"" + spec.id + "\")";
    if (tj.contains("dataset_name")) spec.dataset_name = tj["dataset_name"].get<std::string>();
    if (tj.contains("criterion")) spec.criterion = tj["criterion"].get<std::string>();
    const json& instrs = require_field(tj, "instructions", where);
    if (!instrs.is_array()) throw ParseError(where + ": \"instructions\" must be an array");
    for (const auto& ij : instrs) {
      InstructionCandidate c;
      c.id = require_string(ij, "id", where);
      c.text = require_string(ij, "text", where);
      spec.instructions.push_back(std::move(c));
    }
    if (tj.contains("selected_instruction") && !tj["selected_instruction"].is_null()) {
      spec.selected_instruction = tj["selected_instruction"].get<std::string>();
    }
    if (tj.contains("preset")) {
      spec.preset = train_config_from_json_obj(tj["preset"], where);
    }
    if (tj.contains("allow_empty_context")) {
      spec.allow_empty_context = tj["allow_empty_context"].get<bool>();
    }
    reg.add(std::move(spec));
  }
  return reg;
}

void TaskRegistry::save(const std::filesystem::path& path) const {
  json arr = json::array();
  for (const auto& t : tasks_) {
    json instrs = json::array();
    for (const auto& c : t.instructions) {
      instrs.push_back(json{{"id", c.id}, {"text", c.text}});
    }
    json tj{{"id", t.id},
            {"dataset_name", t.dataset_name},
            {"criterion", t.criterion},
            {"instructions", std::move(instrs)},
            {"preset", train_config_to_json_obj(t.preset)}};
    if (t.selected_instruction) tj["selected_instruction"] = *t.selected_instruction;
    if (t.allow_empty_context) tj["allow_empty_context"] = true;
    arr.push_back(std::move(tj));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write task registry: " + path.string());
  out << arr.dump(2) << '\n';
}

std::vector<Cluster> load_clusters(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open cluster file: " + path.string());
  json arr;
  try {
    in >> arr;
  } catch (const json::exception& e) {
    throw ParseError("cluster file " + path.string() + ": invalid JSON: " + e.what());
  }
  if (!arr.is_array()) {
    throw ParseError("cluster file " + path.string() + ": top level must be an array");
  }
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    std::string where = "cluster entry " + std::to_string(i);
    Cluster c;
    c.name = require_string(arr[i], "name", where);
    const json& ids = require_field(arr[i], "task_ids", where);
    if (!ids.is_array()) throw ParseError(where + ": \"task_ids\" must be an array");
    for (const auto& idj : ids) c.task_ids.push_back(idj.get<std::string>());
    clusters.push_back(std::move(c));
  }
  return clusters;
}

void save_clusters(const std::filesystem::path& path, std::span<const Cluster> clusters) {
  json arr = json::array();
  for (const auto& c : clusters) {
    arr.push_back(json{{"name", c.name}, {"task_ids", c.task_ids}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write cluster file: " + path.string());
  out << arr.dump(2) << '\n';
}

void validate_clusters(std::span<const Cluster> clusters, const TaskRegistry& registry) {
  for (const auto& c : clusters) {
    if (c.task_ids.empty()) {
      throw ValidationError("cluster \"" + c.name + "\" is empty");
    }
    std::set<std::string> seen;
    for (const auto& t : c.task_ids) {
      if (!seen.insert(t).second) {
        throw ValidationError("cluster \"" + c.name + "\" lists task \"" + t + "\" twice");
      }
      if (!registry.has(t)) {
        throw ValidationError("cluster \"" + c.name + "\" refers to unknown task \"" + t + "\"");
      }
    }
  }
}

}  // namespace prefscore
