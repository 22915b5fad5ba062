#include "crossrecipe/metrics.hpp"

#include <gtest/gtest.h>

#include "crossrecipe/util.hpp"
#include "oracles.hpp"

using namespace crossrecipe;
using nlohmann::json;

namespace {

std::vector<EvalPair> load_fixture_pairs(std::optional<Lang> only = std::nullopt) {
  std::vector<EvalPair> out;
  for (const auto& line : read_lines(std::string(CROSSRECIPE_FIXTURE_DIR) + "/metric_pairs.jsonl")) {
    if (line.empty()) continue;
    auto j = json::parse(line);
    EvalPair p{j["hypothesis"], j["references"].get<std::vector<std::string>>(),
               parse_lang(j["lang"].get<std::string>())};
    if (!only || p.lang == *only) out.push_back(std::move(p));
  }
  return out;
}

json expected() {
  return json::parse(read_file(std::string(CROSSRECIPE_FIXTURE_DIR) + "/metric_expected.json"));
}

const SegmenterDictionary& dict() {
  static const SegmenterDictionary d =
      SegmenterDictionary::load(std::string(CROSSRECIPE_DATA_DIR) + "/zh_words.txt");
  return d;
}

double rouge_oracle(const std::vector<EvalPair>& pairs) {
  double sum = 0;
  for (const auto& p : pairs) {
    auto h = metric_tokens(p.hypothesis, p.lang, &dict());
    double best = 0;
    for (const auto& r : p.references) {
      auto t = metric_tokens(r, p.lang, &dict());
      const double l = static_cast<double>(oracles::lcs_table(h, t));
      if (l == 0) continue;
      const double prec = l / static_cast<double>(h.size()), rec = l / static_cast<double>(t.size());
      best = std::max(best, 2 * prec * rec / (prec + rec));
    }
    sum += best;
  }
  return 100 * sum / static_cast<double>(pairs.size());
}

}  // namespace

TEST(Tokenize13a, MatchesReferenceBehaviour) {
  EXPECT_EQ(tokenize_13a("Hello, world."), "Hello , world .");
  EXPECT_EQ(tokenize_13a("It costs 3.50, or 5-6 (approx)!"), "It costs 3.50 , or 5 - 6 ( approx ) !");
  EXPECT_EQ(tokenize_13a("salt &amp; pepper"), "salt & pepper");
  EXPECT_EQ(tokenize_13a("don't"), "don't");
  EXPECT_EQ(tokenize_13a("a-\nb"), "ab");
  EXPECT_EQ(tokenize_13a("煮30分钟。"), "煮30分钟。");
}

TEST(Bleu, ReferenceScorerFixture) {
  auto exp = expected();
  EXPECT_NEAR(bleu(load_fixture_pairs(Lang::En)), exp["en"]["bleu"].get<double>(), 1e-9);
  EXPECT_NEAR(bleu(load_fixture_pairs(Lang::Zh), &dict()), exp["zh"]["bleu"].get<double>(), 1e-9);
  EXPECT_NEAR(bleu(load_fixture_pairs(), &dict()), exp["all"]["bleu"].get<double>(), 1e-9);
}

TEST(Chrf, ReferenceScorerFixture) {
  auto exp = expected();
  EXPECT_NEAR(chrf(load_fixture_pairs(Lang::En)), exp["en"]["chrf"].get<double>(), 1e-9);
  EXPECT_NEAR(chrf(load_fixture_pairs(Lang::Zh)), exp["zh"]["chrf"].get<double>(), 1e-9);
  EXPECT_NEAR(chrf(load_fixture_pairs()), exp["all"]["chrf"].get<double>(), 1e-9);
}

TEST(Metrics, RandomSinglePairsMatchReferenceScorer) {
  for (const auto& c : expected()["random_pairs"]) {
    std::vector<EvalPair> pairs = {
        {c["hypothesis"], c["references"].get<std::vector<std::string>>(), Lang::En}};
    EXPECT_NEAR(bleu(pairs), c["bleu"].get<double>(), 1e-9) << c.dump();
    EXPECT_NEAR(chrf(pairs), c["chrf"].get<double>(), 1e-9) << c.dump();
  }
}

TEST(Bleu, PerfectAndDisjoint) {
  std::vector<EvalPair> same = {{"Mix the flour with water.", {"Mix the flour with water."}}};
  EXPECT_DOUBLE_EQ(bleu(same), 100.0);
  EXPECT_DOUBLE_EQ(chrf(same), 100.0);
  EXPECT_DOUBLE_EQ(rouge_l(same), 100.0);
  std::vector<EvalPair> disjoint = {{"abc def", {"xyz uvw"}}};
  EXPECT_DOUBLE_EQ(bleu(disjoint), 0.0);
  EXPECT_DOUBLE_EQ(chrf(disjoint), 0.0);
  EXPECT_DOUBLE_EQ(rouge_l(disjoint), 0.0);
}

TEST(Metrics, EmptyInput) {
  for (auto fn : {+[](const std::vector<EvalPair>& p) { return bleu(p); },
                  +[](const std::vector<EvalPair>& p) { return chrf(p); },
                  +[](const std::vector<EvalPair>& p) { return rouge_l(p); }}) {
    try {
      fn({});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
    }
    EXPECT_THROW(fn({{"a", {}}}), Error);
  }
}

TEST(Metrics, ZhNeedsDictionaryForBleu) {
  std::vector<EvalPair> zh = {{"红豆汤", {"红豆汤"}, Lang::Zh}};
  EXPECT_THROW(bleu(zh), Error);
  EXPECT_NO_THROW(chrf(zh));
}

TEST(RougeL, HandComputedExample) {
  std::vector<EvalPair> p = {{"a b c d", {"a x c y"}}};
  EXPECT_DOUBLE_EQ(rouge_l(p), 50.0);
  // Multi-reference takes the best reference.
  p[0].references.push_back("a b c d");
  EXPECT_DOUBLE_EQ(rouge_l(p), 100.0);
}

TEST(RougeL, MatchesQuadraticOracleOnFixture) {
  auto pairs = load_fixture_pairs();
  EXPECT_DOUBLE_EQ(rouge_l(pairs, &dict()), rouge_oracle(pairs));
}

TEST(RougeL, BitParallelLcsMatchesTable) {
  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::string> a, b;
    const std::size_t alphabet = 2 + rng.below(6);
    for (std::size_t i = rng.below(150); i > 0; --i) a.push_back(std::to_string(rng.below(alphabet)));
    for (std::size_t i = rng.below(150); i > 0; --i) b.push_back(std::to_string(rng.below(alphabet)));
    EXPECT_EQ(lcs_length(a, b), oracles::lcs_table(a, b));
  }
}

TEST(Metrics, PermutationInvariant) {
  auto pairs = load_fixture_pairs();
  auto rev = pairs;
  std::reverse(rev.begin(), rev.end());
  EXPECT_DOUBLE_EQ(bleu(pairs, &dict()), bleu(rev, &dict()));
  EXPECT_NEAR(chrf(pairs), chrf(rev), 1e-12);
  EXPECT_NEAR(rouge_l(pairs, &dict()), rouge_l(rev, &dict()), 1e-9);
}

TEST(Metrics, IdenticalCorpusScoresHundred) {
  auto pairs = load_fixture_pairs();
  for (auto& p : pairs) p.hypothesis = p.references[0];
  EXPECT_NEAR(bleu(pairs, &dict()), 100.0, 1e-9);
  EXPECT_NEAR(chrf(pairs), 100.0, 1e-9);
  EXPECT_NEAR(rouge_l(pairs, &dict()), 100.0, 1e-9);
}

TEST(Chrf, AddingIdenticalPairNeverLowers) {
  auto pairs = load_fixture_pairs(Lang::En);
  double prev = chrf(pairs);
  for (const auto& text : {"Stir well.", "Bake 20 minutes at 200C.", "盐少许"}) {
    pairs.push_back({text, {text}});
    const double now = chrf(pairs);
    EXPECT_GE(now, prev - 1e-12);
    prev = now;
  }
}

TEST(ScoreReport, FieldsAndRanges) {
  auto pairs = load_fixture_pairs();
  auto r = score_system("retrieval", pairs, &dict());
  EXPECT_EQ(r.system, "retrieval");
  for (double v : {r.bleu, r.chrf, r.rouge_l}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 100.0);
  }
  EXPECT_GT(r.mean_tokens, 0.0);
  EXPECT_FALSE(r.smatch_f1);
  auto j = to_json(r);
  EXPECT_TRUE(j["smatch_f1"].is_null());
  EXPECT_NE(r.signature.find("13a"), std::string::npos);
  EXPECT_NE(format_reports({r}).find("retrieval"), std::string::npos);
}
