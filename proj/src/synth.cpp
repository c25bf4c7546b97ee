#include "prefscore/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "prefscore/rng.hpp"
#include "prefscore/text_pipeline.hpp"

namespace prefscore {

namespace {

constexpr int kKeywordPool = 40;   // keywords are drawn from the first 40 words
constexpr int kNumKeywords = 8;
constexpr double kPairMargin = 0.15;
constexpr double kLenSpan = 8.0;

const char* kConsonants[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t"};
const char* kVowels[] = {"a", "e", "i", "o", "u"};

std::string syllable(int i) {
  return std::string(kConsonants[(i / 5) % 12]) + kVowels[i % 5];
}

std::string word(int i) { return syllable(i % 60) + syllable((i / 60) % 60); }

// Corruption tokens live outside the word space ("xq" never starts a word).
std::string corruption_token(int i) { return "xq" + syllable(i % 60); }

struct FamilyParams {
  std::vector<int> keywords;
  double w_kw, w_len, w_corr, bias;
  int ideal_len;
};

FamilyParams family_params(const std::string& family) {
  DetRng rng(fnv1a(family));
  FamilyParams fp;
  std::vector<int> pool(kKeywordPool);
  for (int i = 0; i < kKeywordPool; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < kNumKeywords; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.bounded(pool.size() - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  fp.keywords.assign(pool.begin(), pool.begin() + kNumKeywords);
  std::sort(fp.keywords.begin(), fp.keywords.end());
  fp.w_kw = rng.uniform(2.0, 3.0);
  fp.w_len = rng.uniform(0.4, 0.8);
  fp.w_corr = rng.uniform(1.0, 2.0);
  fp.bias = rng.uniform(0.0, 0.25);
  fp.ideal_len = 7 + static_cast<int>(rng.bounded(4));
  return fp;
}

double quality_of_tokens(const FamilyParams& fp, const std::vector<std::string>& tokens) {
  if (tokens.empty()) return fp.bias;
  std::size_t distinct_kw = 0;
  for (int kw : fp.keywords) {
    const std::string w = word(kw);
    if (std::find(tokens.begin(), tokens.end(), w) != tokens.end()) ++distinct_kw;
  }
  std::size_t corrupted = 0;
  for (const auto& t : tokens) {
    if (t.rfind("xq", 0) == 0) ++corrupted;
  }
  const double n = static_cast<double>(tokens.size());
  const double f_kw = static_cast<double>(distinct_kw) / kNumKeywords;
  const double f_len = std::max(0.0, 1.0 - std::abs(n - fp.ideal_len) / kLenSpan);
  const double f_corr = static_cast<double>(corrupted) / n;
  return fp.bias + fp.w_kw * f_kw + fp.w_len * f_len - fp.w_corr * f_corr;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

void SynthTaskSpec::validate() const {
  if (task_id.empty()) throw ValidationError("synth spec: task_id must be non-empty");
  if (vocab_words < kKeywordPool + 10 || vocab_words > 3600) {
    throw ValidationError("synth spec: vocab_words must be in [50, 3600]");
  }
  if (pair_count < 1) throw ValidationError("synth spec: pair_count must be >= 1");
  if (noise < 0.0 || noise >= 0.5) {
    throw ValidationError("synth spec: noise must be in [0, 0.5)");
  }
}

double oracle_score(const SynthTaskSpec& spec, const Sample& sample) {
  spec.validate();
  return quality_of_tokens(family_params(spec.family), tokenize(sample.answer));
}

FamilyTraits family_traits(const std::string& family) {
  const FamilyParams fp = family_params(family);
  FamilyTraits t;
  for (int kw : fp.keywords) t.keywords.push_back(word(kw));
  t.ideal_len = fp.ideal_len;
  t.w_keyword = fp.w_kw;
  t.w_length = fp.w_len;
  t.w_corruption = fp.w_corr;
  t.bias = fp.bias;
  return t;
}

SynthOutput generate(const SynthTaskSpec& spec) {
  spec.validate();
  const FamilyParams fp = family_params(spec.family);
  DetRng rng(spec.seed ^ fnv1a(spec.task_id));

  auto filler = [&]() {
    return word(kKeywordPool +
                static_cast<int>(rng.bounded(static_cast<std::uint64_t>(
                    spec.vocab_words - kKeywordPool))));
  };

  auto sample_answer = [&](double level) {
    const int len = 5 + static_cast<int>(rng.bounded(8));
    int n_kw = static_cast<int>(std::lround(level * kNumKeywords));
    n_kw = std::min(n_kw, std::min(kNumKeywords, len));
    int n_corr = static_cast<int>(std::lround((1.0 - level) * 0.3 * len));
    n_corr = std::min(n_corr, len - n_kw);

    std::vector<int> kw_pool = fp.keywords;
    for (int i = 0; i < n_kw; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.bounded(kw_pool.size() - i));
      std::swap(kw_pool[static_cast<std::size_t>(i)], kw_pool[j]);
    }
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(len));
    for (int i = 0; i < n_kw; ++i) tokens.push_back(word(kw_pool[static_cast<std::size_t>(i)]));
    for (int i = 0; i < n_corr; ++i) {
      tokens.push_back(corruption_token(static_cast<int>(rng.bounded(60))));
    }
    while (static_cast<int>(tokens.size()) < len) tokens.push_back(filler());
    for (std::size_t i = tokens.size(); i > 1; --i) {
      std::swap(tokens[i - 1], tokens[rng.bounded(i)]);
    }
    return tokens;
  };

  SynthOutput out;
  out.task.id = spec.task_id;
  out.task.dataset_name = "synthetic";
  out.task.criterion = "latent answer quality";
  out.task.instructions = {
      {spec.task_id + "-i1",
       "Determine the quality of the answer given the prompt for " + spec.task_id + "."},
      {spec.task_id + "-i2",
       "Given a prompt, judge how good the answer for " + spec.task_id + " is."}};
  out.task.selected_instruction = spec.task_id + "-i1";
  out.task.preset = TrainConfig{};

  for (int pi = 0; pi < spec.pair_count; ++pi) {
    // context: a handful of filler words, almost surely unique per pair
    std::vector<std::string> prompt_tokens;
    const int plen = 4 + static_cast<int>(rng.bounded(5));
    for (int i = 0; i < plen; ++i) prompt_tokens.push_back(filler());
    const Element prompt{"prompt", join(prompt_tokens)};

    std::vector<std::string> ta, tb;
    double qa = 0.0, qb = 0.0;
    bool ok = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      ta = sample_answer(rng.uniform());
      tb = sample_answer(rng.uniform());
      qa = quality_of_tokens(fp, ta);
      qb = quality_of_tokens(fp, tb);
      if (ta != tb && std::abs(qa - qb) >= kPairMargin) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ValidationError("synth: could not sample a separated pair");

    Sample sa{{prompt}, join(ta), qa};
    Sample sb{{prompt}, join(tb), qb};
    bool a_good = qa > qb;
    if (spec.noise > 0.0 && rng.uniform() < spec.noise) a_good = !a_good;

    PreferencePair p;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", pi);
    p.id = spec.task_id + "-" + buf;
    p.task = spec.task_id;
    p.good = a_good ? sa : sb;
    p.bad = a_good ? sb : sa;
    out.latent_quality[p.id + "#good"] = *p.good.human_score;
    out.latent_quality[p.id + "#bad"] = *p.bad.human_score;
    out.pairs.push_back(std::move(p));
  }
  return out;
}

void save_latent_quality(const std::filesystem::path& path, const SynthOutput& output) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write latent quality file: " + path.string());
  for (const auto& p : output.pairs) {
    nlohmann::json obj{{"pair", p.id},
                       {"good", output.latent_quality.at(p.id + "#good")},
                       {"bad", output.latent_quality.at(p.id + "#bad")}};
    out << obj.dump() << '\n';
  }
}

}  // namespace prefscore
