#include <fstream>
#include <cmath>

#include "doctest.h"
#include "prefscore/evaluator.hpp"
#include "prefscore/synth.hpp"
#include "test_util.hpp"

using namespace prefscore;

namespace {

SynthTaskSpec spec_with(int pairs, double noise = 0.0, std::uint64_t seed = 5) {
  SynthTaskSpec s;
  s.task_id = "synX";
  s.family = "famX";
  s.pair_count = pairs;
  s.noise = noise;
  s.seed = seed;
  return s;
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

TEST_CASE("generation is deterministic per spec") {
  SynthOutput a = generate(spec_with(50));
  SynthOutput b = generate(spec_with(50));
  REQUIRE(a.pairs.size() == 50);
  REQUIRE(b.pairs.size() == 50);
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    CHECK(a.pairs[i].id == b.pairs[i].id);
    CHECK(a.pairs[i].good.answer == b.pairs[i].good.answer);
    CHECK(a.pairs[i].bad.answer == b.pairs[i].bad.answer);
    CHECK(a.pairs[i].good.elements[0].text == b.pairs[i].good.elements[0].text);
  }
  SynthOutput c = generate(spec_with(50, 0.0, 6));
  bool any_diff = false;
  for (std::size_t i = 0; i < c.pairs.size(); ++i) {
    if (c.pairs[i].good.answer != a.pairs[i].good.answer) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("noise-free labels agree with the oracle everywhere") {
  SynthTaskSpec spec = spec_with(300);
  SynthOutput out = generate(spec);
  for (const auto& p : out.pairs) {
    const double qg = oracle_score(spec, p.good);
    const double qb = oracle_score(spec, p.bad);
    CHECK(qg > qb);
    CHECK(*p.good.human_score == qg);  // stored scores are the latent q
    CHECK(*p.bad.human_score == qb);
    CHECK(out.latent_quality.at(p.id + "#good") == qg);
    CHECK(out.latent_quality.at(p.id + "#bad") == qb);
  }

  // an oracle scorer achieves perfect pairwise accuracy by construction
  std::vector<ScoredPair> scored;
  for (const auto& p : out.pairs) {
    scored.push_back({p.id, oracle_score(spec, p.good), oracle_score(spec, p.bad)});
  }
  CHECK(pairwise_accuracy(scored) == 1.0);

  // spearman(oracle q, stored human_score) is exactly 1
  std::vector<double> model_q, human_q;
  for (const auto& p : out.pairs) {
    model_q.push_back(oracle_score(spec, p.good));
    human_q.push_back(*p.good.human_score);
    model_q.push_back(oracle_score(spec, p.bad));
    human_q.push_back(*p.bad.human_score);
  }
  CHECK(*spearman(model_q, human_q) == 1.0);
}

TEST_CASE("label noise flips roughly the configured fraction") {
  SynthTaskSpec spec = spec_with(2000, 0.1, 9);
  SynthOutput out = generate(spec);
  int flipped = 0;
  for (const auto& p : out.pairs) {
    if (*p.good.human_score < *p.bad.human_score) ++flipped;
  }
  const double rate = static_cast<double>(flipped) / 2000.0;
  CHECK(rate > 0.07);
  CHECK(rate < 0.13);

  // the latent-q oracle tops out at 1 - noise on expectation
  std::vector<ScoredPair> scored;
  for (const auto& p : out.pairs) {
    scored.push_back({p.id, *p.good.human_score, *p.bad.human_score});
  }
  CHECK(pairwise_accuracy(scored) == doctest::Approx(1.0 - rate).epsilon(1e-12));
}

TEST_CASE("quality function shape") {
  SynthTaskSpec spec = spec_with(1);
  FamilyTraits traits = family_traits(spec.family);
  REQUIRE(traits.keywords.size() == 8);

  auto q_of = [&](const std::vector<std::string>& tokens) {
    Sample s;
    s.elements = {{"prompt", "p"}};
    s.answer = join(tokens);
    return oracle_score(spec, s);
  };

  SUBCASE("all keywords at ideal length with no corruption is maximal") {
    std::vector<std::string> best = traits.keywords;
    while (static_cast<int>(best.size()) < traits.ideal_len) best.push_back("tete");
    const double q_best = q_of(best);
    CHECK(q_best ==
          doctest::Approx(traits.bias + traits.w_keyword + traits.w_length).epsilon(1e-12));

    // any generated answer stays at or below the maximum
    SynthOutput out = generate(spec_with(100));
    for (const auto& p : out.pairs) {
      CHECK(*p.good.human_score <= q_best + 1e-12);
    }
  }
  SUBCASE("featureless answer scores the bias alone") {
    // no keywords, no corruption, length far outside the band
    std::vector<std::string> flat(static_cast<std::size_t>(traits.ideal_len + 8), "tete");
    CHECK(q_of(flat) == doctest::Approx(traits.bias).epsilon(1e-12));
  }
  SUBCASE("adding a keyword never decreases q") {
    const std::size_t len = std::max<std::size_t>(traits.keywords.size(),
                                                  static_cast<std::size_t>(traits.ideal_len));
    std::vector<std::string> base(len, "tete");
    double prev = q_of(base);
    for (std::size_t k = 0; k < traits.keywords.size(); ++k) {
      base[k] = traits.keywords[k];  // same length, one more distinct keyword
      const double now = q_of(base);
      CHECK(now > prev);
      prev = now;
    }
  }
  SUBCASE("corruption tokens lower q") {
    std::vector<std::string> clean(static_cast<std::size_t>(traits.ideal_len), "tete");
    std::vector<std::string> dirty = clean;
    dirty[0] = "xqba";
    CHECK(q_of(dirty) < q_of(clean));
  }
}

TEST_CASE("families share weights; different families differ") {
  FamilyTraits a1 = family_traits("famA");
  FamilyTraits a2 = family_traits("famA");
  CHECK(a1.keywords == a2.keywords);
  CHECK(a1.w_keyword == a2.w_keyword);
  CHECK(a1.ideal_len == a2.ideal_len);

  // two tasks of one family agree on every sample's q
  SynthTaskSpec t1 = spec_with(1);
  SynthTaskSpec t2 = spec_with(1);
  t2.task_id = "other";
  Sample s;
  s.elements = {{"prompt", "p"}};
  s.answer = a1.keywords[0] + " tete kaka";
  CHECK(oracle_score(t1, s) == oracle_score(t2, s));

  FamilyTraits b = family_traits("famB");
  CHECK((a1.w_keyword != b.w_keyword || a1.keywords != b.keywords));
}

TEST_CASE("spec validation") {
  SynthTaskSpec s = spec_with(10);
  s.noise = 0.5;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = spec_with(0);
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = spec_with(10);
  s.vocab_words = 10;
  CHECK_THROWS_AS(generate(s), ValidationError);
}

TEST_CASE("latent sidecar file matches the stored scores") {
  auto dir = make_temp_dir("latent");
  SynthOutput out = generate(spec_with(5));
  save_latent_quality(dir / "latent.jsonl", out);
  std::ifstream in(dir / "latent.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 5);
}
