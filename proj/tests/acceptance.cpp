// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "crossrecipe/adapters.hpp"
#include "crossrecipe/alignment.hpp"
#include "crossrecipe/analysis.hpp"
#include "crossrecipe/embeddings.hpp"
#include "crossrecipe/matching.hpp"
#include "crossrecipe/metrics.hpp"
#include "crossrecipe/penman.hpp"
#include "crossrecipe/pipeline.hpp"
#include "crossrecipe/smatch.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace crossrecipe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- criteria ----

Outcome metric_fidelity() {
  Outcome o;
  const auto dict = SegmenterDictionary::load(fs::path(CROSSRECIPE_DATA_DIR) / "zh_words.txt");
  std::vector<EvalPair> pairs;
  for (const auto& line : read_lines(fs::path(CROSSRECIPE_FIXTURE_DIR) / "metric_pairs.jsonl")) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    pairs.push_back({j["hypothesis"], j["references"].get<std::vector<std::string>>(),
                     parse_lang(j["lang"].get<std::string>())});
  }
  o.require(pairs.size() == 20, "fixture has " + std::to_string(pairs.size()) + " pairs, expected 20");
  const auto expected = nlohmann::json::parse(read_file(fs::path(CROSSRECIPE_FIXTURE_DIR) / "metric_expected.json"));
  for (const char* subset : {"en", "zh", "all"}) {
    std::vector<EvalPair> sub;
    for (const auto& p : pairs)
      if (std::string(subset) == "all" || to_string(p.lang) == subset) sub.push_back(p);
    const double b = bleu(sub, &dict), c = chrf(sub);
    const double eb = expected[subset]["bleu"].get<double>(), ec = expected[subset]["chrf"].get<double>();
    o.require(std::abs(b - eb) <= 0.1, std::string(subset) + " BLEU " + fmt("%.4f", b) + " vs " + fmt("%.4f", eb));
    o.require(std::abs(c - ec) <= 0.1, std::string(subset) + " chrF " + fmt("%.4f", c) + " vs " + fmt("%.4f", ec));
  }
  double sum = 0;
  for (const auto& p : pairs) {
    const auto h = metric_tokens(p.hypothesis, p.lang, &dict);
    double best = 0;
    for (const auto& r : p.references) {
      const auto t = metric_tokens(r, p.lang, &dict);
      const double l = static_cast<double>(oracles::lcs_table(h, t));
      if (l == 0) continue;
      const double prec = l / static_cast<double>(h.size()), rec = l / static_cast<double>(t.size());
      best = std::max(best, 2 * prec * rec / (prec + rec));
    }
    sum += best;
  }
  const double oracle_rouge = 100 * sum / static_cast<double>(pairs.size());
  o.require(rouge_l(pairs, &dict) == oracle_rouge, "ROUGE-L differs from quadratic LCS oracle");
  if (o.pass)
    o.detail = "BLEU " + fmt("%.2f", bleu(pairs, &dict)) + ", chrF " + fmt("%.2f", chrf(pairs)) + ", ROUGE-L " +
               fmt("%.2f", oracle_rouge) + " (exact)";
  return o;
}

Outcome smatch_equivalence() {
  Outcome o;
  const auto hand = smatch(parse_penman("(b / bake-01 :ARG1 (c / cake))"), parse_penman("(b / bake-01 :ARG1 (p / pie))"));
  o.require(hand.exhaustive && hand.f1 == 2.0 / 3.0, "bake cake vs bake pie F1 " + fmt("%.6f", hand.f1));
  Rng rng(4);
  std::size_t agree = 0, oracle_ok = 0;
  const std::size_t cases = 200;
  for (std::size_t t = 0; t < cases; ++t) {
    auto a = fixtures::random_amr(rng, 6);
    auto b = t % 3 ? fixtures::perturb_amr(a, rng) : fixtures::random_amr(rng, 6);
    auto g1 = parse_penman(a.penman("v"));
    auto g2 = parse_penman(b.penman("x", oracles::shuffled_names(b.labels.size(), rng)));
    const auto exact = smatch_exhaustive(g1, g2);
    oracle_ok += exact.matched == oracles::smatch_brute_force(g1, g2);
    const auto climb = smatch_hill_climb(g1, g2, 4, t);
    agree += climb.matched == exact.matched;
  }
  o.require(oracle_ok == cases, "exhaustive mode disagrees with brute force on " + std::to_string(cases - oracle_ok));
  o.require(agree * 100 >= cases * 95, "hill climbing reached the optimum on " + std::to_string(agree) + "/200");
  if (o.pass) o.detail = "hill climbing optimal on " + std::to_string(agree) + "/200, F1(bake cake, bake pie) = 2/3";
  return o;
}

Outcome alignment_recovery() {
  Outcome o;
  Rng rng(8);
  auto src = fixtures::random_space(500, 50, rng, "s");
  const Matrix r = fixtures::random_orthogonal(50, rng);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < 500; ++i) words.push_back("t" + std::to_string(i));
  const EmbeddingSpace tgt{Vocabulary(words), src.vectors * r};
  WordPairs seed;
  for (std::size_t i = 0; i < 15; ++i) seed.emplace_back("s" + std::to_string(i), "t" + std::to_string(i));

  // Every intermediate fit: the run stopped after each iteration count.
  double worst_orth = 0;
  AlignmentResult result;
  for (std::size_t it = 0; it <= 10; ++it) {
    result = align_with_self_learning(src, tgt, seed, it);
    worst_orth = std::max(worst_orth, result.mapping.orthogonality_error());
  }
  const double err = (result.mapping.W - r).norm();
  o.require(err < 1e-6, "||W - R|| = " + fmt("%.3e", err));
  // 15 pairs leave a 50-dim map underdetermined; the direct fit needs n >= d.
  const auto direct = fit_orthogonal_map(src.vectors.topRows(60), tgt.vectors.topRows(60));
  o.require((direct.W - r).norm() < 1e-6, "direct fit on 60 pairs: ||W - R|| = " + fmt("%.3e", (direct.W - r).norm()));
  worst_orth = std::max(worst_orth, direct.orthogonality_error());
  o.require(worst_orth < 1e-8, "||W'W - I|| = " + fmt("%.3e", worst_orth));

  std::vector<std::string> queries;
  GoldTranslations gold;
  for (std::size_t i = 0; i < 500; ++i) {
    queries.push_back("s" + std::to_string(i));
    gold[queries.back()].insert("t" + std::to_string(i));
  }
  const auto eval = precision_at_k(induce_lexicon(result.mapping, src, tgt, queries, 1), gold, 1);
  o.require(eval.precision == 1.0, "P@1 = " + fmt("%.4f", eval.precision));
  if (o.pass)
    o.detail = "||W - R|| = " + fmt("%.1e", err) + ", max ||W'W - I|| = " + fmt("%.1e", worst_orth) + ", P@1 = 1.0";
  return o;
}

Outcome precision_arithmetic() {
  Outcome o;
  std::vector<InducedEntry> lexicon;
  GoldTranslations gold;
  for (int i = 0; i < 100; ++i) {
    const std::string q = "q" + std::to_string(i);
    gold[q].insert("gold" + std::to_string(i));
    std::vector<std::string> words = {"a", "b", "c", "d", "e", "f"};
    words[i < 68 ? static_cast<std::size_t>(i % 5) : 5] = "gold" + std::to_string(i);
    InducedEntry e{q, {}};
    for (std::size_t r = 0; r < words.size(); ++r) e.neighbors.push_back({words[r], r, 1.0 - 0.1 * static_cast<double>(r)});
    lexicon.push_back(std::move(e));
  }
  const auto eval = precision_at_k(lexicon, gold, 5);
  o.require(eval.hits == 68 && eval.total == 100 && eval.precision == 0.68,
            std::to_string(eval.hits) + "/" + std::to_string(eval.total) + " = " + fmt("%.17g", eval.precision));
  if (o.pass) o.detail = "68/100 = 0.68";
  return o;
}

class TableEmbedder : public SentenceEmbedder {
 public:
  std::unordered_map<std::string, Vector> table;
  Vector embed(const std::string& text) override { return table.at(text); }
  std::string name() const override { return "table"; }
};

class IdentityTranslator : public TitleTranslator {
 public:
  std::string translate(const std::string& title, Lang, Lang) override { return title; }
  std::string name() const override { return "identity"; }
};

Outcome matching_correctness() {
  Outcome o;
  Rng rng(11);
  const std::size_t n = 1000, d = 16;
  const Matrix centers = oracles::gaussian(rng, 40, d);
  const Matrix s = oracles::clustered(rng, n, d, centers, 0.3), t = oracles::clustered(rng, n, d, centers, 0.3);
  std::vector<Recipe> src, tgt;
  TableEmbedder embedder;
  IdentityTranslator translator;
  for (std::size_t i = 0; i < n; ++i) {
    char z[16], e[16];
    std::snprintf(z, sizeof z, "z%05zu", i);
    std::snprintf(e, sizeof e, "e%05zu", i);
    src.push_back({z, Lang::Zh, z, {}, {}});
    tgt.push_back({e, Lang::En, e, {}, {}});
    embedder.table[z] = s.row(static_cast<Eigen::Index>(i)).transpose();
    embedder.table[e] = t.row(static_cast<Eigen::Index>(i)).transpose();
  }
  const auto ds = match_recipes(src, tgt, translator, embedder);
  std::map<oracles::IndexPair, double> cos;
  const auto expected = oracles::knn_brute_force(s, t, 10, 0.85, cos);
  std::set<oracles::IndexPair> got;
  std::size_t below = 0, over_k = 0;
  double worst_cos = 0;
  for (const auto& e : ds.entries) {
    over_k += e.targets.size() > 10;
    for (const auto& c : e.targets) {
      below += c.cosine < 0.85;
      const oracles::IndexPair key{std::stoul(e.source_id.substr(1)), std::stoul(c.target_id.substr(1))};
      got.insert(key);
      if (auto it = cos.find(key); it != cos.end()) worst_cos = std::max(worst_cos, std::abs(it->second - c.cosine));
    }
  }
  o.require(got == expected, "pair set differs from brute-force scan");
  o.require(below == 0, std::to_string(below) + " pairs below 0.85");
  o.require(over_k == 0, std::to_string(over_k) + " sources with more than 10 pairs");
  o.require(worst_cos < 1e-12, "cosine deviates by " + fmt("%.2e", worst_cos));
  if (o.pass) o.detail = std::to_string(ds.pair_count()) + " pairs, identical to brute force";
  return o;
}

Outcome sgns_sanity() {
  Outcome o;
  SgnsConfig cfg;
  cfg.dim = 32;
  cfg.epochs = 5;
  cfg.min_count = 5;
  cfg.seed = 7;
  const auto fixture = fixtures::cooccurrence_corpus(10000, 11);
  const auto a = train_sgns(fixture.sentences, cfg);
  const Vector salt = *a.space.vector("salt");
  const double sp = cosine(salt, *a.space.vector("pepper"));
  Rng rng(99);
  std::size_t wins = 0;
  for (int i = 0; i < 100; ++i) {
    const auto& w = fixture.never_salt[rng.below(fixture.never_salt.size())];
    const auto v = a.space.vector(w);
    wins += v && sp > cosine(salt, *v);
  }
  o.require(wins == 100, "salt/pepper closer than random word in " + std::to_string(wins) + "/100");
  const auto b = train_sgns(fixture.sentences, cfg);
  const bool same = a.space.vocab.words() == b.space.vocab.words() && a.space.vectors.size() == b.space.vectors.size() &&
                    std::memcmp(a.space.vectors.data(), b.space.vectors.data(),
                                sizeof(double) * static_cast<std::size_t>(a.space.vectors.size())) == 0;
  o.require(same, "two single-threaded runs with one seed differ");
  if (o.pass) o.detail = "100/100 random words farther than pepper; rerun bitwise identical";
  return o;
}

Outcome kendall_oracle() {
  Outcome o;
  Rng rng(17);
  int checked = 0, mismatches = 0;
  while (checked < 100) {
    const std::size_t n = 2 + rng.below(49);
    const std::size_t range = 1 + rng.below(20);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.below(range));
      y[i] = static_cast<double>(rng.below(range));
    }
    auto constant = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
    };
    if (constant(x) || constant(y)) continue;
    ++checked;
    mismatches += kendall_tau(x, y).tau != oracles::tau_by_pairs(x, y);
  }
  o.require(mismatches == 0, std::to_string(mismatches) + "/100 fixtures differ from pair counting");
  std::vector<double> up = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, down(up.rbegin(), up.rend());
  o.require(kendall_tau(up, up).tau == 1.0, "tau(x, x) != 1");
  o.require(kendall_tau(up, down).tau == -1.0, "tau(x, reversed x) != -1");
  o.require(bonferroni_threshold(0.05, 5) == 0.05 / 5.0 && bonferroni_threshold(0.05, 25) == 0.05 / 25.0,
            "Bonferroni threshold arithmetic");
  if (o.pass) o.detail = "100/100 exact, extremes +1/-1, alpha/m exact";
  return o;
}

Outcome literal_rate_arithmetic() {
  Outcome o;
  const ConceptLexicon bake{"bake", Lang::En, Lang::Zh, {"bake", "roast", "broil", "oven"}, {"烤"}};
  const auto r = literal_rate(std::vector<std::string>{"Bake the cake for 30 minutes.",
                                                       "Preheat the oven. Roast the chicken.", "Broil for 5 minutes."},
                              std::vector<std::string>{"蛋糕烤30分钟。", "预热烤箱，烤鸡肉。", "大火蒸5分钟。"}, bake);
  o.require(r.c_source == 4 && r.c_target == 3 && r.rate == 0.75, "bake " + std::to_string(r.c_target) + "/" +
                                                                      std::to_string(r.c_source));
  const ConceptLexicon oil{"oil", Lang::En, Lang::Zh, {"oil"}, {"油"}};
  const auto q = literal_rate(std::vector<std::string>{"Heat the oil, then add more oil.", "Brush with Oil."},
                              std::vector<std::string>{"热油，再加点油。", "刷一层油。"}, oil);
  o.require(q.rate == 1.0, "oil rate " + fmt("%.4f", q.rate));
  bool undefined = false;
  try {
    literal_rate(std::vector<std::string>{"Boil water."}, std::vector<std::string>{"烧水。"}, bake);
  } catch (const Error& e) {
    undefined = e.code() == ErrorCode::UndefinedRate;
  }
  o.require(undefined, "zero denominator did not report UndefinedRate");
  if (o.pass) o.detail = "bake 3/4 = 0.75, oil 1.0, zero denominator UndefinedRate";
  return o;
}

Outcome prompt_bytes() {
  Outcome o;
  const std::map<std::pair<PromptStyle, Direction>, std::pair<std::string, std::string>> expected = {
      {{PromptStyle::Completion, Direction::EnToZh}, {oracles::kCompletionEnZh, "[English recipe]"}},
      {{PromptStyle::Completion, Direction::ZhToEn}, {oracles::kCompletionZhEn, "[Chinese recipe]"}},
      {{PromptStyle::Instruction, Direction::EnToZh}, {oracles::kInstructionEnZh, "[English recipe]"}},
      {{PromptStyle::Instruction, Direction::ZhToEn}, {oracles::kInstructionZhEn, "[Chinese recipe]"}},
  };
  o.require(bundled_templates().size() == 4, "expected four bundled templates");
  for (const auto& t : bundled_templates()) {
    const auto& [published, placeholder] = expected.at({t.style, t.direction});
    o.require(build_prompt(placeholder, t) == published,
              std::string(to_string(t.style)) + " " + std::string(to_string(t.direction)) + " differs");
  }
  if (o.pass) o.detail = "4/4 byte-identical";
  return o;
}

Outcome end_to_end_pipeline() {
  Outcome o;
  const auto out = fs::temp_directory_path() / "crossrecipe_acceptance_run";
  fs::remove_all(out);
  const EnvLookup no_env = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  RunConfig cfg = load_config(fs::path(CROSSRECIPE_DATA_DIR) / "fixture" / "fixture.ini", no_env);
  cfg.output_dir = out;
  const RunManifest first = run(cfg);
  const auto golden = nlohmann::ordered_json::parse(read_file(fs::path(CROSSRECIPE_FIXTURE_DIR) / "pipeline_golden.json"));
  o.require(output_digest(first) == golden, "output hashes differ from the golden manifest");
  for (const char* stage : {"clean", "embed", "align", "match", "split", "score"})
    o.require(first.stage(stage) != nullptr, std::string("stage ") + stage + " missing");
  const RunManifest second = run(cfg);
  std::size_t skipped = 0;
  for (const auto& s : second.stages) skipped += s.skipped;
  o.require(skipped == second.stages.size(), "second run re-ran " + std::to_string(second.stages.size() - skipped) +
                                                 " stages");
  try {
    report(out / kManifestName);
  } catch (const Error& e) {
    o.require(false, std::string("report failed: ") + e.what());
  }
  fs::remove_all(out);
  if (o.pass)
    o.detail = std::to_string(first.stages.size()) + " stages match golden hashes; rerun skipped " +
               std::to_string(skipped) + "/" + std::to_string(second.stages.size());
  return o;
}

struct Criterion {
  const char* name;
  double limit_seconds;  // 0 = no runtime bound
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"metric fidelity", 5, metric_fidelity},
      {"smatch oracle equivalence", 60, smatch_equivalence},
      {"alignment recovery", 10, alignment_recovery},
      {"precision@k arithmetic", 0, precision_arithmetic},
      {"matching correctness", 30, matching_correctness},
      {"sgns sanity", 0, sgns_sanity},
      {"kendall oracle", 0, kendall_oracle},
      {"literal-rate arithmetic", 0, literal_rate_arithmetic},
      {"prompt byte-equality", 0, prompt_bytes},
      {"end-to-end fixture pipeline", 180, end_to_end_pipeline},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0 && secs >= c.limit_seconds) {
      o.pass = false;
      o.detail += (o.detail.empty() ? "" : "; ") + std::string("over the ") + fmt("%.0f", c.limit_seconds) + " s limit";
    }
    failures += !o.pass;
    std::string timing = fmt("%.2f s", secs);
    if (c.limit_seconds > 0) timing += " < " + fmt("%.0f", c.limit_seconds) + " s";
    std::printf("%s  %-28s [%s]  %s\n", o.pass ? "PASS" : "FAIL", c.name, timing.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures ? 1 : 0;
}
