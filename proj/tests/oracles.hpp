#pragma once

// Test-only brute-force oracles, written independently of the library's
// pair-expansion path: plain O(n^2) enumeration over raw records with the
// tie/scope/identity rules applied directly.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "prefscore/pair_builder.hpp"

namespace oracles {

inline std::string ctx_string(const std::vector<prefscore::Element>& elements) {
  std::string s;
  for (const auto& el : elements) s += "[" + el.label + "=" + el.text + "]";
  return s;
}

/// Canonical key of an emitted pair: good context/answer then bad
/// context/answer. Used to compare pair sets as multisets.
inline std::string pair_key(const prefscore::PreferencePair& p) {
  return ctx_string(p.good.elements) + "|" + p.good.answer + "||" +
         ctx_string(p.bad.elements) + "|" + p.bad.answer;
}

inline std::multiset<std::string> enumerate_absolute(
    const std::vector<prefscore::RawAbsolute>& records,
    const prefscore::PairingPolicy& policy) {
  struct Item {
    std::string ctx;
    const std::vector<prefscore::Element>* elements;
    std::string answer;
    double score;
  };
  std::vector<Item> items;
  if (policy.average_annotators) {
    std::map<std::string, std::pair<double, int>> sums;
    std::map<std::string, Item> reps;
    for (const auto& r : records) {
      std::string key = ctx_string(r.elements) + "\t" + r.answer;
      sums[key].first += r.score;
      sums[key].second += 1;
      reps.emplace(key, Item{ctx_string(r.elements), &r.elements, r.answer, 0.0});
    }
    for (auto& [key, rep] : reps) {
      rep.score = sums[key].first / sums[key].second;
      items.push_back(rep);
    }
  } else {
    for (const auto& r : records) {
      items.push_back(Item{ctx_string(r.elements), &r.elements, r.answer, r.score});
    }
  }

  std::multiset<std::string> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      const Item& a = items[i];
      const Item& b = items[j];
      if (policy.scope == prefscore::PairScope::SameContext && a.ctx != b.ctx) continue;
      if (std::abs(a.score - b.score) <= policy.min_gap) continue;
      if (a.ctx == b.ctx && a.answer == b.answer) continue;
      const Item& hi = a.score > b.score ? a : b;
      const Item& lo = a.score > b.score ? b : a;
      out.insert(hi.ctx + "|" + hi.answer + "||" + lo.ctx + "|" + lo.answer);
    }
  }
  return out;
}

inline std::multiset<std::string> enumerate_ranking(const prefscore::RawRanking& r) {
  std::multiset<std::string> out;
  const std::string ctx = ctx_string(r.elements);
  // Every ordered (i, j) with rank_i strictly better covers each unordered
  // pair exactly once.
  for (std::size_t i = 0; i < r.answers.size(); ++i) {
    for (std::size_t j = 0; j < r.answers.size(); ++j) {
      if (i == j) continue;
      if (r.ranks[i] >= r.ranks[j]) continue;
      if (r.answers[i] == r.answers[j]) continue;
      out.insert(ctx + "|" + r.answers[i] + "||" + ctx + "|" + r.answers[j]);
    }
  }
  return out;
}

}  // namespace oracles
