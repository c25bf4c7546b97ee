#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "prefscore/corpus.hpp"

namespace prefscore {

/// Synthetic preference task with a known latent quality function. Tasks in
/// one family share the quality weights (and so transfer to each other).
struct SynthTaskSpec {
  std::string task_id = "syn";
  std::string family = "f0";
  int vocab_words = 200;  // size of the word sample space (50..3600)
  int pair_count = 1000;
  double noise = 0.0;  // label flip probability, must be < 0.5
  std::uint64_t seed = 0;

  void validate() const;
};

/// The latent quality function: a family-specific weighted sum of keyword
/// coverage, a length band, and a corruption penalty, recomputable from the
/// answer text alone.
double oracle_score(const SynthTaskSpec& spec, const Sample& sample);

/// The family's quality function laid bare (keyword surface forms, weights,
/// ideal length). Deterministic per family name.
struct FamilyTraits {
  std::vector<std::string> keywords;
  int ideal_len = 0;
  double w_keyword = 0.0, w_length = 0.0, w_corruption = 0.0, bias = 0.0;
};
FamilyTraits family_traits(const std::string& family);

struct SynthOutput {
  std::vector<PreferencePair> pairs;
  TaskSpec task;
  /// Latent q per sample, keyed "<pair id>#good" / "<pair id>#bad".
  std::map<std::string, double> latent_quality;
};

/// Deterministically sample pair_count preference pairs: two answers per
/// context, the higher-q answer labeled good, the label flipped with
/// probability `noise`. human_score carries each sample's exact q.
SynthOutput generate(const SynthTaskSpec& spec);

/// Sidecar JSON-lines file with the latent quality of both sides of each pair.
void save_latent_quality(const std::filesystem::path& path, const SynthOutput& output);

}  // namespace prefscore
