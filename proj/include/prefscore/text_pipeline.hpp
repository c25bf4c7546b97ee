#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prefscore/corpus.hpp"

namespace prefscore {

/// Lowercase and split on whitespace; punctuation characters become
/// single-character tokens. Multibyte UTF-8 sequences count as word
/// characters, with the common Unicode space codepoints treated as
/// whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// Frequency vocabulary with fixed special ids. Tokens outside the
/// vocabulary map to <unk>.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSep = 2;
  static constexpr int kCls = 3;
  static constexpr int kNumSpecials = 4;

  /// Keep the (cap - 4) most frequent tokens of the tokenized corpus,
  /// frequency ties broken lexicographically. cap must be >= 5.
  static Vocabulary build(std::span<const std::string> corpus, std::size_t cap);

  /// One token per line, line index = id (specials included).
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int id_of(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }

 private:
  Vocabulary();
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct AssemblyConfig {
  bool label_input = true;
  bool truncate_right = true;
  int max_len = 256;  // must be >= 8
};

struct TokenSequence {
  std::vector<int> ids;  // always max_len long, <pad> after true_len
  int true_len = 0;
};

/// Build the model input "<cls> instruction <sep> [label <sep>] text <sep> ...
/// [answer <sep>] answer-text", tokenize, truncate to max_len (from the right
/// when truncate_right, keeping the first max_len tokens), and pad.
TokenSequence assemble(std::string_view instruction, const Sample& sample,
                       const AssemblyConfig& cfg, const Vocabulary& vocab);

}  // namespace prefscore
