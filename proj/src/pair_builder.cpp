#include "prefscore/pair_builder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"

namespace prefscore {

using nlohmann::json;

namespace {

std::string context_key(const std::vector<Element>& elements) {
  std::string key;
  for (const auto& el : elements) {
    key += el.label;
    key += '\x1f';
    key += el.text;
    key += '\x1e';
  }
  return key;
}

std::string make_id(const std::string& task, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return task + "-" + buf;
}

struct Candidate {
  std::string ctx_key;
  const std::vector<Element>* elements;
  std::string answer;
  double score;
  std::string tiebreak;  // annotator id when not averaging
};

}  // namespace

std::vector<PreferencePair> pairs_from_absolute(std::span<const RawAbsolute> records,
                                                const PairingPolicy& policy) {
  if (policy.min_gap < 0) throw ValidationError("pairing policy: min_gap must be >= 0");
  if (records.empty()) return {};

  const std::string& task = records.front().task;
  for (const auto& r : records) {
    if (r.task != task) {
      throw ValidationError("pairs_from_absolute: records mix tasks \"" + task +
                            "\" and \"" + r.task + "\"");
    }
    if (!std::isfinite(r.score)) {
      throw ValidationError("pairs_from_absolute: non-finite score for answer \"" +
                            r.answer + "\"");
    }
  }

  std::vector<Candidate> candidates;
  if (policy.average_annotators) {
    // Average scores per (context, answer).
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> acc;
    std::map<std::pair<std::string, std::string>, const std::vector<Element>*> ctx_of;
    for (const auto& r : records) {
      auto key = std::make_pair(context_key(r.elements), r.answer);
      auto& slot = acc[key];
      slot.first += r.score;
      slot.second += 1;
      ctx_of.emplace(key, &r.elements);
    }
    for (const auto& [key, slot] : acc) {
      candidates.push_back(Candidate{key.first, ctx_of[key], key.second,
                                     slot.first / static_cast<double>(slot.second), ""});
    }
  } else {
    for (const auto& r : records) {
      candidates.push_back(Candidate{context_key(r.elements), &r.elements, r.answer,
                                     r.score, r.annotator_id.value_or("")});
    }
  }

  // Canonical order makes the output invariant under input permutation.
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.ctx_key != b.ctx_key) return a.ctx_key < b.ctx_key;
    if (a.answer != b.answer) return a.answer < b.answer;
    if (a.score != b.score) return a.score < b.score;
    return a.tiebreak < b.tiebreak;
  });

  std::vector<PreferencePair> pairs;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      const Candidate& a = candidates[i];
      const Candidate& b = candidates[j];
      if (policy.scope == PairScope::SameContext && a.ctx_key != b.ctx_key) continue;
      if (std::abs(a.score - b.score) <= policy.min_gap) continue;  // tie
      if (a.answer == b.answer && a.ctx_key == b.ctx_key) continue;  // not distinct
      const Candidate& hi = a.score > b.score ? a : b;
      const Candidate& lo = a.score > b.score ? b : a;
      PreferencePair p;
      p.id = make_id(task, pairs.size());
      p.task = task;
      p.good = Sample{*hi.elements, hi.answer, hi.score};
      p.bad = Sample{*lo.elements, lo.answer, lo.score};
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

std::vector<PreferencePair> pairs_from_ranking(const RawRanking& record) {
  if (record.answers.size() != record.ranks.size()) {
    throw ValidationError("pairs_from_ranking: answers and ranks differ in length");
  }
  if (record.answers.empty()) {
    throw ValidationError("pairs_from_ranking: record has no answers");
  }
  for (int r : record.ranks) {
    if (r < 1) throw ValidationError("pairs_from_ranking: ranks must be positive");
  }

  // Ranks are only meaningful within this context group, so no human_score
  // is attached (there is no global annotation scale to correlate against).
  std::vector<PreferencePair> pairs;
  for (std::size_t i = 0; i < record.answers.size(); ++i) {
    for (std::size_t j = i + 1; j < record.answers.size(); ++j) {
      if (record.ranks[i] == record.ranks[j]) continue;
      std::size_t good = record.ranks[i] < record.ranks[j] ? i : j;
      std::size_t bad = good == i ? j : i;
      if (record.answers[good] == record.answers[bad]) continue;
      PreferencePair p;
      p.id = make_id(record.task, pairs.size());
      p.task = record.task;
      p.good = Sample{record.elements, record.answers[good], std::nullopt};
      p.bad = Sample{record.elements, record.answers[bad], std::nullopt};
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

std::vector<PreferencePair> build_pairs(const RawRecords& records,
                                        const PairingPolicy& policy) {
  std::map<std::string, std::vector<RawAbsolute>> abs_by_task;
  for (const auto& r : records.absolute) abs_by_task[r.task].push_back(r);

  std::map<std::string, std::vector<const RawRanking*>> rank_by_task;
  for (const auto& r : records.ranking) rank_by_task[r.task].push_back(&r);
  for (auto& [task, list] : rank_by_task) {
    std::sort(list.begin(), list.end(), [](const RawRanking* a, const RawRanking* b) {
      std::string ka = context_key(a->elements), kb = context_key(b->elements);
      if (ka != kb) return ka < kb;
      if (a->answers != b->answers) return a->answers < b->answers;
      return a->ranks < b->ranks;
    });
  }

  std::vector<std::string> tasks;
  for (const auto& [task, unused] : abs_by_task) tasks.push_back(task);
  for (const auto& [task, unused] : rank_by_task) {
    if (!abs_by_task.count(task)) tasks.push_back(task);
  }
  std::sort(tasks.begin(), tasks.end());

  std::vector<PreferencePair> out;
  for (const auto& task : tasks) {
    std::size_t index = 0;
    if (auto it = abs_by_task.find(task); it != abs_by_task.end()) {
      for (auto& p : pairs_from_absolute(it->second, policy)) {
        p.id = make_id(task, index++);
        out.push_back(std::move(p));
      }
    }
    if (auto it = rank_by_task.find(task); it != rank_by_task.end()) {
      for (const auto* record : it->second) {
        for (auto& p : pairs_from_ranking(*record)) {
          p.id = make_id(task, index++);
          out.push_back(std::move(p));
        }
      }
    }
  }
  return out;
}

RawRecords load_raw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open raw annotation file: " + path.string());

  RawRecords out;
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
    if (!obj.contains("kind") || !obj["kind"].is_string()) {
      throw ParseError(where + ": missing field \"kind\"");
    }
    std::string kind = obj["kind"].get<std::string>();
    auto read_elements = [&](const json& j) {
      std::vector<Element> elements;
      if (!j.contains("elements")) return elements;
      for (const auto& ej : j["elements"]) {
        elements.push_back(Element{ej.at("label").get<std::string>(),
                                   ej.at("text").get<std::string>()});
      }
      return elements;
    };
    try {
      if (kind == "absolute") {
        RawAbsolute r;
        r.task = obj.at("task").get<std::string>();
        r.elements = read_elements(obj);
        r.answer = obj.at("answer").get<std::string>();
        r.score = obj.at("score").get<double>();
        if (obj.contains("annotator_id") && !obj["annotator_id"].is_null()) {
          r.annotator_id = obj["annotator_id"].get<std::string>();
        }
        out.absolute.push_back(std::move(r));
      } else if (kind == "ranking") {
        RawRanking r;
        r.task = obj.at("task").get<std::string>();
        r.elements = read_elements(obj);
        r.answers = obj.at("answers").get<std::vector<std::string>>();
        r.ranks = obj.at("ranks").get<std::vector<int>>();
        out.ranking.push_back(std::move(r));
      } else {
        throw ParseError(where + ": unknown kind \"" + kind + "\"");
      }
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace prefscore
