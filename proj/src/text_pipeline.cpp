#include "prefscore/text_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>

#include "prefscore/errors.hpp"

namespace prefscore {

namespace {

bool is_unicode_space(std::uint32_t cp) {
  if (cp == 0xA0 || cp == 0x1680 || cp == 0x2028 || cp == 0x2029 ||
      cp == 0x202F || cp == 0x205F || cp == 0x3000) {
    return true;
  }
  return cp >= 0x2000 && cp <= 0x200A;
}

// Decode one UTF-8 codepoint starting at i; advances i. Invalid bytes are
// passed through as Latin-1.
std::uint32_t next_codepoint(std::string_view s, std::size_t& i, std::size_t& len) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  std::size_t extra = 0;
  std::uint32_t cp = c;
  if ((c & 0x80u) == 0) {
    extra = 0;
  } else if ((c & 0xE0u) == 0xC0u) {
    extra = 1;
    cp = c & 0x1Fu;
  } else if ((c & 0xF0u) == 0xE0u) {
    extra = 2;
    cp = c & 0x0Fu;
  } else if ((c & 0xF8u) == 0xF0u) {
    extra = 3;
    cp = c & 0x07u;
  }
  if (i + extra >= s.size() + (extra == 0 ? 1 : 0)) extra = 0;
  for (std::size_t k = 1; k <= extra; ++k) {
    unsigned char cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xC0u) != 0x80u) {
      extra = k - 1;
      break;
    }
    cp = (cp << 6) | (cc & 0x3Fu);
  }
  len = extra + 1;
  i += len;
  return cp;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i, len = 0;
    std::uint32_t cp = next_codepoint(text, i, len);
    bool space = (cp < 0x80 && std::isspace(static_cast<int>(cp))) || is_unicode_space(cp);
    bool punct = cp < 0x80 && std::ispunct(static_cast<int>(cp));
    if (space || punct) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
      if (punct) tokens.emplace_back(text.substr(start, len));
      continue;
    }
    if (cp < 0x80) {
      current.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
    } else {
      current.append(text.substr(start, len));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<unk>", "<sep>", "<cls>"};
  for (int i = 0; i < kNumSpecials; ++i) index_[tokens_[i]] = i;
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, std::size_t cap) {
  if (cap < 5) throw ValidationError("build_vocab: cap must be >= 5");
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus) {
    for (auto& tok : tokenize(text)) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  std::size_t keep = std::min(ordered.size(), cap - kNumSpecials);
  for (std::size_t i = 0; i < keep; ++i) {
    v.index_[ordered[i].first] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(ordered[i].first);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open vocabulary file: " + path.string());
  Vocabulary v;
  std::string line;
  int id = 0;
  while (std::getline(in, line)) {
    if (id < kNumSpecials) {
      if (line != v.tokens_[id]) {
        throw ParseError("vocabulary file " + path.string() + ": line " +
                         std::to_string(id) + " must be \"" + v.tokens_[id] + "\"");
      }
    } else {
      if (v.index_.count(line)) {
        throw ParseError("vocabulary file " + path.string() + ": duplicate token \"" +
                         line + "\"");
      }
      v.index_[line] = static_cast<int>(v.tokens_.size());
      v.tokens_.push_back(line);
    }
    ++id;
  }
  if (id < kNumSpecials) {
    throw ParseError("vocabulary file " + path.string() + ": missing special tokens");
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path.string());
  for (const auto& tok : tokens_) out << tok << '\n';
  if (!out) throw std::runtime_error("failed writing vocabulary file: " + path.string());
}

int Vocabulary::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ValidationError("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSequence assemble(std::string_view instruction, const Sample& sample,
                       const AssemblyConfig& cfg, const Vocabulary& vocab) {
  if (cfg.max_len < 8) throw ValidationError("assemble: max_len must be >= 8");

  std::vector<int> ids;
  ids.push_back(Vocabulary::kCls);
  auto push_text = [&](std::string_view text) {
    for (const auto& tok : tokenize(text)) ids.push_back(vocab.id_of(tok));
  };
  push_text(instruction);
  ids.push_back(Vocabulary::kSep);
  for (const auto& el : sample.elements) {
    if (cfg.label_input) {
      push_text(el.label);
      ids.push_back(Vocabulary::kSep);
    }
    push_text(el.text);
    ids.push_back(Vocabulary::kSep);
  }
  if (cfg.label_input) {
    push_text("answer");
    ids.push_back(Vocabulary::kSep);
  }
  push_text(sample.answer);

  TokenSequence seq;
  const std::size_t max_len = static_cast<std::size_t>(cfg.max_len);
  if (ids.size() > max_len) {
    if (cfg.truncate_right) {
      ids.resize(max_len);
    } else {
      ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(max_len));
    }
  }
  seq.true_len = static_cast<int>(ids.size());
  ids.resize(max_len, Vocabulary::kPad);
  seq.ids = std::move(ids);
  return seq;
}

}  // namespace prefscore
