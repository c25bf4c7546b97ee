#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefscore/corpus.hpp"

namespace prefscore {

/// A raw human annotation assigning an absolute score to one answer.
struct RawAbsolute {
  std::string task;
  std::vector<Element> elements;
  std::string answer;
  double score = 0.0;
  std::optional<std::string> annotator_id;
};

/// A raw comparative annotation ranking several answers under one context
/// (rank 1 = best; equal ranks mean a tie).
struct RawRanking {
  std::string task;
  std::vector<Element> elements;
  std::vector<std::string> answers;
  std::vector<int> ranks;
};

enum class PairScope { SameContext, AnyContext };

struct PairingPolicy {
  PairScope scope = PairScope::SameContext;
  double min_gap = 0.0;            // score difference must exceed this
  bool average_annotators = true;  // average scores per (context, answer) first
};

/// Expand absolute scores into preference pairs: every candidate pair within
/// scope whose score difference exceeds min_gap yields one pair, higher score
/// as good. Ties emit nothing. All records must share one task. Output order
/// is canonical (sorted by generated id), so it does not depend on the input
/// record order.
std::vector<PreferencePair> pairs_from_absolute(std::span<const RawAbsolute> records,
                                                const PairingPolicy& policy);

/// Expand one ranking into pairs: (i, j) with rank_i < rank_j yields a pair
/// with answer i as good. Equal ranks emit nothing.
std::vector<PreferencePair> pairs_from_ranking(const RawRanking& record);

struct RawRecords {
  std::vector<RawAbsolute> absolute;
  std::vector<RawRanking> ranking;
};

/// JSON-lines raw annotation file with a "kind": "absolute" | "ranking"
/// discriminator per record.
RawRecords load_raw(const std::filesystem::path& path);

/// File-level expansion: absolute records grouped per task, every ranking
/// record expanded, ids renumbered per task. Tasks and rankings are ordered
/// canonically, so the result is invariant under record permutation.
std::vector<PreferencePair> build_pairs(const RawRecords& records,
                                        const PairingPolicy& policy);

}  // namespace prefscore
