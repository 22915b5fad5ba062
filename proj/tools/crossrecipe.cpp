// Command-line front end. Run `crossrecipe <command> --help` for options.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "crossrecipe/adapters.hpp"
#include "crossrecipe/alignment.hpp"
#include "crossrecipe/analysis.hpp"
#include "crossrecipe/annotation.hpp"
#include "crossrecipe/corpus.hpp"
#include "crossrecipe/embeddings.hpp"
#include "crossrecipe/matching.hpp"
#include "crossrecipe/metrics.hpp"
#include "crossrecipe/penman.hpp"
#include "crossrecipe/pipeline.hpp"
#include "crossrecipe/smatch.hpp"

using namespace crossrecipe;
namespace fs = std::filesystem;

namespace {

/// Exit codes: 0 success, 1 runtime error, 2 invalid input or config,
/// 3 pipeline stage failure.
int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::ManifestMissing:
    case ErrorCode::IntegrityError:
      return 2;
    case ErrorCode::StageFailure:
      return 3;
    default:
      return 1;
  }
}

std::unique_ptr<SegmenterDictionary> maybe_dict(const std::string& path) {
  return std::make_unique<SegmenterDictionary>(
      SegmenterDictionary::load(path.empty() ? kBundledDataDir / "zh_words.txt" : fs::path(path)));
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") std::cout << text;
  else write_file(out_path, text);
}

std::vector<EvalPair> eval_pairs(const std::string& hyp, const std::vector<std::string>& refs, Lang lang) {
  const auto h = read_lines(hyp);
  std::vector<std::vector<std::string>> r;
  for (const auto& f : refs) {
    r.push_back(read_lines(f));
    if (r.back().size() != h.size())
      throw Error(ErrorCode::LengthMismatch, f + " has " + std::to_string(r.back().size()) + " lines, hypotheses " +
                                                 std::to_string(h.size()));
  }
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < h.size(); ++i) {
    EvalPair p{h[i], {}, lang};
    for (const auto& ref : r) p.references.push_back(ref[i]);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

WordPairs word_pairs_or_default(const std::string& path) {
  return path.empty() ? default_seed_dictionary() : load_word_pairs(path);
}

volatile std::sig_atomic_t g_stop = 0;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-cultural recipe corpus toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // ---- corpus ----
  auto* corpus = app.add_subcommand("corpus", "Clean, describe and filter recipe files");
  corpus->require_subcommand(1);
  std::string c_in, c_out, c_rej, c_dict, c_lang;
  std::size_t c_max = 0;
  bool c_json = false;
  auto* c_clean = corpus->add_subcommand("clean", "Strip emoji/special symbols and reject empty fields");
  c_clean->add_option("--in", c_in, "Raw recipe JSONL")->required()->check(CLI::ExistingFile);
  c_clean->add_option("--out", c_out, "Clean recipe JSONL")->required();
  c_clean->add_option("--rejections", c_rej, "Rejected records as JSONL");
  c_clean->add_option("--lang", c_lang, "Keep only this language (en|zh)");
  auto* c_stats = corpus->add_subcommand("stats", "Recipe count and mean tokens, ingredients, steps");
  c_stats->add_option("--in", c_in, "Clean recipe JSONL")->required()->check(CLI::ExistingFile);
  c_stats->add_option("--dict", c_dict, "Chinese word list (default: bundled)");
  c_stats->add_option("--lang", c_lang, "Keep only this language (en|zh)");
  c_stats->add_flag("--json", c_json, "Machine-readable output");
  auto* c_filter = corpus->add_subcommand("filter", "Drop recipes longer than --max-tokens");
  c_filter->add_option("--in", c_in, "Clean recipe JSONL")->required()->check(CLI::ExistingFile);
  c_filter->add_option("--out", c_out, "Output JSONL")->required();
  c_filter->add_option("--max-tokens", c_max, "Token limit")->required();
  c_filter->add_option("--dict", c_dict, "Chinese word list (default: bundled)");
  c_filter->add_option("--lang", c_lang, "Keep only this language (en|zh)");

  // ---- embed ----
  auto* embed = app.add_subcommand("embed", "Train and query skip-gram embeddings");
  embed->require_subcommand(1);
  std::string e_corpus, e_out, e_vectors, e_dict, e_word;
  SgnsConfig sgns;
  std::size_t e_k = 10;
  auto* e_train = embed->add_subcommand("train", "Train on a clean recipe file");
  e_train->add_option("--corpus", e_corpus, "Clean recipe JSONL (one language)")->required()->check(CLI::ExistingFile);
  e_train->add_option("--out", e_out, "Vector file")->required();
  e_train->add_option("--dim", sgns.dim, "Vector size")->capture_default_str();
  e_train->add_option("--epochs", sgns.epochs)->capture_default_str();
  e_train->add_option("--window", sgns.window)->capture_default_str();
  e_train->add_option("--neg", sgns.negatives, "Negative samples")->capture_default_str();
  e_train->add_option("--min-count", sgns.min_count)->capture_default_str();
  e_train->add_option("--lr", sgns.learning_rate)->capture_default_str();
  e_train->add_option("--subsample", sgns.subsample)->capture_default_str();
  e_train->add_option("--seed", sgns.seed)->capture_default_str();
  e_train->add_option("--threads", sgns.threads, "Sharded training; reproducible per thread count")->capture_default_str();
  e_train->add_option("--dict", e_dict, "Chinese word list (default: bundled)");
  auto* e_query = embed->add_subcommand("query", "Nearest neighbours of a word");
  e_query->add_option("--vectors", e_vectors)->required()->check(CLI::ExistingFile);
  e_query->add_option("--word", e_word)->required();
  e_query->add_option("--k", e_k)->capture_default_str();

  // ---- align ----
  auto* align = app.add_subcommand("align", "Cross-lingual alignment and lexicon induction");
  align->require_subcommand(1);
  std::string a_src, a_tgt, a_seed, a_mapping, a_dict_out, a_gold;
  std::vector<std::string> a_words;
  std::size_t a_iters = 10, a_k = 5, a_cutoff = 20000;
  bool a_swap = false;
  auto* a_fit = align->add_subcommand("fit", "Self-learning orthogonal map from a seed dictionary");
  a_fit->add_option("--src", a_src, "Source vectors")->required()->check(CLI::ExistingFile);
  a_fit->add_option("--tgt", a_tgt, "Target vectors")->required()->check(CLI::ExistingFile);
  a_fit->add_option("--seed", a_seed, "Seed pairs TSV (default: bundled en->zh pairs)");
  a_fit->add_flag("--swap", a_swap, "Seed file columns are target<TAB>source");
  a_fit->add_option("--iters", a_iters)->capture_default_str();
  a_fit->add_option("--vocab-cutoff", a_cutoff)->capture_default_str();
  a_fit->add_option("--out", a_mapping, "Mapping file")->required();
  a_fit->add_option("--dictionary-out", a_dict_out, "Final induced dictionary TSV");
  auto* a_induce = align->add_subcommand("induce", "Top-k translations of source words");
  auto* a_score = align->add_subcommand("score", "Precision@k against a gold TSV");
  for (auto* sc : {a_induce, a_score}) {
    sc->add_option("--mapping", a_mapping)->required()->check(CLI::ExistingFile);
    sc->add_option("--src", a_src)->required()->check(CLI::ExistingFile);
    sc->add_option("--tgt", a_tgt)->required()->check(CLI::ExistingFile);
    sc->add_option("--k", a_k)->capture_default_str();
  }
  a_induce->add_option("--words", a_words, "Source words")->required();
  a_score->add_option("--gold", a_gold, "source<TAB>target gold pairs")->required()->check(CLI::ExistingFile);

  // ---- match ----
  auto* match = app.add_subcommand("match", "Pair recipes across languages by title");
  match->require_subcommand(1);
  std::string m_src, m_tgt, m_titles, m_vectors, m_out, m_pairs, m_title, m_corpus, m_direction;
  MatchOptions mopts;
  double m_val = 0.1, m_floor = 0.3;
  std::uint64_t m_seed = 1;
  auto* m_run = match->add_subcommand("run", "k-NN over translated-title embeddings");
  m_run->add_option("--source", m_src, "Clean source recipes")->required()->check(CLI::ExistingFile);
  m_run->add_option("--target", m_tgt, "Clean target recipes")->required()->check(CLI::ExistingFile);
  m_run->add_option("--titles", m_titles, "zh title<TAB>English translation")->required()->check(CLI::ExistingFile);
  m_run->add_option("--vectors", m_vectors, "English word vectors")->required()->check(CLI::ExistingFile);
  m_run->add_option("--k", mopts.k)->capture_default_str();
  m_run->add_option("--threshold", mopts.threshold)->capture_default_str();
  m_run->add_option("--threads", mopts.threads)->capture_default_str();
  m_run->add_option("--direction", m_direction, "Expected direction (zh-en|en-zh); checked against the corpora");
  m_run->add_option("--out", m_out, "Pair file (default: stdout)");
  auto* m_split = match->add_subcommand("split", "Train/validation split by source recipe");
  m_split->add_option("--pairs", m_pairs)->required()->check(CLI::ExistingFile);
  m_split->add_option("--val-fraction", m_val)->capture_default_str();
  m_split->add_option("--seed", m_seed)->capture_default_str();
  m_split->add_option("--out", m_out, "Pair file (default: stdout)");
  auto* m_lookup = match->add_subcommand("lookup", "Find a recipe by title string similarity");
  m_lookup->add_option("--title", m_title)->required();
  m_lookup->add_option("--corpus", m_corpus)->required()->check(CLI::ExistingFile);
  m_lookup->add_option("--floor", m_floor)->capture_default_str();

  // ---- score ----
  auto* score = app.add_subcommand("score", "Reference-based evaluation");
  score->require_subcommand(1);
  std::string s_hyp, s_lang = "en", s_dict, s_system = "system", s_out;
  std::vector<std::string> s_refs, s_reports;
  std::size_t s_restarts = 4;
  auto* s_surface = score->add_subcommand("surface", "BLEU, chrF and ROUGE-L over line-aligned files");
  s_surface->add_option("--hyp", s_hyp)->required()->check(CLI::ExistingFile);
  s_surface->add_option("--refs", s_refs, "One or more reference files")->required()->check(CLI::ExistingFile);
  s_surface->add_option("--lang", s_lang, "Target language (en|zh)")->capture_default_str();
  s_surface->add_option("--dict", s_dict, "Chinese word list (default: bundled)");
  s_surface->add_option("--system", s_system)->capture_default_str();
  s_surface->add_option("--json", s_out, "Also write the report record here");
  auto* s_smatch = score->add_subcommand("smatch", "Smatch over blank-line separated PENMAN graphs");
  s_smatch->add_option("--hyp", s_hyp)->required()->check(CLI::ExistingFile);
  s_smatch->add_option("--refs", s_refs)->required()->expected(1)->check(CLI::ExistingFile);
  s_smatch->add_option("--restarts", s_restarts)->capture_default_str();
  auto* s_report = score->add_subcommand("report", "Table of saved report records");
  s_report->add_option("--reports", s_reports, "JSON files from `score surface --json`")->required()->check(CLI::ExistingFile);

  // ---- analyze ----
  auto* analyze = app.add_subcommand("analyze", "Metric correlation and literal-translation rate");
  analyze->require_subcommand(1);
  std::string n_ratings, n_scores, n_concepts, n_sources, n_targets, n_out;
  double n_alpha = 0.05;
  auto* n_corr = analyze->add_subcommand("correlate", "Kendall tau between ratings and metric scores");
  n_corr->add_option("--ratings", n_ratings)->required()->check(CLI::ExistingFile);
  n_corr->add_option("--scores", n_scores, "JSON {metric: {pair_id: score}}")->required()->check(CLI::ExistingFile);
  n_corr->add_option("--alpha", n_alpha)->capture_default_str();
  auto* n_lit = analyze->add_subcommand("literal-rate", "c_target / c_source per concept");
  n_lit->add_option("--sources", n_sources, "Source recipes JSONL")->required()->check(CLI::ExistingFile);
  n_lit->add_option("--targets", n_targets, "Aligned output recipes JSONL")->required()->check(CLI::ExistingFile);
  n_lit->add_option("--concepts", n_concepts, "Concept lexicon (default: bundled)");
  n_lit->add_option("--out", n_out, "TSV for plotting");

  // ---- adapt ----
  auto* adapt = app.add_subcommand("adapt", "Prompted and retrieval-based adaptation");
  adapt->require_subcommand(1);
  std::string d_direction = "zh-en", d_style = "instruction", d_template, d_recipes, d_out, d_cache, d_format = "chat",
              d_titles, d_vectors, d_targets;
  EndpointConfig endpoint;
  std::size_t d_threads = 4;
  auto* d_prompt = adapt->add_subcommand("prompt", "Build prompts and optionally send them to an endpoint");
  d_prompt->add_option("--recipes", d_recipes, "Source recipes JSONL")->required()->check(CLI::ExistingFile);
  d_prompt->add_option("--direction", d_direction)->capture_default_str();
  d_prompt->add_option("--style", d_style, "completion|instruction")->capture_default_str();
  d_prompt->add_option("--template", d_template, "Template file with one {recipe} slot");
  d_prompt->add_option("--endpoint", endpoint.url, "Completion URL; without it prompts are printed");
  d_prompt->add_option("--model", endpoint.model);
  d_prompt->add_option("--format", d_format, "chat|completion")->capture_default_str();
  d_prompt->add_option("--temperature", endpoint.temperature)->capture_default_str();
  d_prompt->add_option("--max-tokens", endpoint.max_tokens)->capture_default_str();
  d_prompt->add_option("--timeout", endpoint.timeout_seconds, "Seconds")->capture_default_str();
  d_prompt->add_option("--retries", endpoint.retries)->capture_default_str();
  d_prompt->add_option("--api-key-env", endpoint.api_key_env, "Environment variable with a bearer token");
  d_prompt->add_option("--cache", d_cache, "Response cache directory");
  d_prompt->add_option("--threads", d_threads)->capture_default_str();
  d_prompt->add_option("--out", d_out, "Output JSONL (required with --endpoint)");
  auto* d_retrieve = adapt->add_subcommand("retrieve", "Most similar target-language recipe by title");
  d_retrieve->add_option("--recipes", d_recipes, "Source recipes JSONL")->required()->check(CLI::ExistingFile);
  d_retrieve->add_option("--targets", d_targets, "Target corpus JSONL")->required()->check(CLI::ExistingFile);
  d_retrieve->add_option("--titles", d_titles)->required()->check(CLI::ExistingFile);
  d_retrieve->add_option("--vectors", d_vectors, "English word vectors")->required()->check(CLI::ExistingFile);
  d_retrieve->add_option("--out", d_out, "Output JSONL (default: stdout)");

  // ---- serve ----
  auto* serve = app.add_subcommand("serve", "Annotation service");
  std::string v_tasks, v_examples, v_log = "annotation.log.jsonl", v_static, v_host = "127.0.0.1";
  int v_port = 8080;
  std::size_t v_budget = 3;
  serve->add_option("--tasks", v_tasks, "Task JSONL")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", v_port)->capture_default_str();
  serve->add_option("--host", v_host)->capture_default_str();
  serve->add_option("--budget", v_budget, "Tasks per participant and mode")->capture_default_str();
  serve->add_option("--comprehension", v_examples, "Tutorial examples (default: bundled)");
  serve->add_option("--log", v_log, "Event log (replayed on start)")->capture_default_str();
  serve->add_option("--static", v_static, "UI bundle directory mounted at /");

  // ---- pipeline ----
  auto* pipeline = app.add_subcommand("pipeline", "End-to-end runs");
  pipeline->require_subcommand(1);
  std::string p_config, p_manifest;
  auto* p_run = pipeline->add_subcommand("run", "Run all enabled stages");
  p_run->add_option("--config", p_config)->required();
  auto* p_report = pipeline->add_subcommand("report", "Summarise a finished run");
  p_report->add_option("--config", p_config);
  p_report->add_option("--manifest", p_manifest);
  auto* p_digest = pipeline->add_subcommand("digest", "Output hashes per stage, for golden comparisons");
  p_digest->add_option("--config", p_config);
  p_digest->add_option("--manifest", p_manifest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto lang_filter = [](std::vector<Recipe> rs, const std::string& lang) {
      if (lang.empty()) return rs;
      const Lang l = parse_lang(lang);
      std::erase_if(rs, [&](const Recipe& r) { return r.lang != l; });
      return rs;
    };

    if (*c_clean) {
      auto loaded = load_corpus(c_in);
      const auto kept = lang_filter(loaded.recipes, c_lang);
      write_recipes(c_out, kept);
      if (!c_rej.empty()) {
        std::string text;
        for (const auto& r : loaded.rejections)
          text += nlohmann::ordered_json{{"id", r.id}, {"reason", std::string(to_string(r.reason))}, {"detail", r.detail}}
                      .dump() + "\n";
        write_file(c_rej, text);
      }
      std::cerr << kept.size() << " kept, " << loaded.rejections.size() << " rejected\n";
    } else if (*c_stats) {
      const auto recipes = lang_filter(read_recipes(c_in), c_lang);
      const auto dict = maybe_dict(c_dict);
      const auto s = corpus_stats(recipes, default_counter(dict.get()));
      std::cout << (c_json ? to_json(s).dump(2) + "\n" : format_stats(s));
    } else if (*c_filter) {
      const auto dict = maybe_dict(c_dict);
      const auto recipes = lang_filter(read_recipes(c_in), c_lang);
      const auto kept = filter_by_length(recipes, default_counter(dict.get()), c_max);
      write_recipes(c_out, kept);
      std::cerr << kept.size() << " of " << recipes.size() << " kept\n";
    } else if (*e_train) {
      const auto dict = maybe_dict(e_dict);
      Sentences sentences;
      for (const auto& r : read_recipes(e_corpus)) {
        auto toks = word_tokens(evaluation_text(r), r.lang, dict.get());
        if (!toks.empty()) sentences.push_back(std::move(toks));
      }
      const auto result = train_sgns(sentences, sgns);
      save_vectors(e_out, result.space);
      for (std::size_t i = 0; i < result.epoch_loss.size(); ++i)
        std::cerr << "epoch " << i + 1 << " loss " << result.epoch_loss[i] << "\n";
      std::cerr << result.space.size() << " words, dim " << result.space.dim() << "\n";
    } else if (*e_query) {
      const auto space = load_vectors(e_vectors);
      const auto v = space.vector(e_word);
      if (!v) throw Error(ErrorCode::UnknownQueryWord, "'" + e_word + "' not in vocabulary");
      for (const auto& n : nearest_neighbors(space, *v, e_k + 1))
        if (n.word != e_word) std::cout << n.word << '\t' << n.cosine << '\n';
    } else if (*a_fit) {
      WordPairs seed = word_pairs_or_default(a_seed);
      if (a_swap)
        for (auto& [x, y] : seed) std::swap(x, y);
      SelfLearningOptions opts;
      opts.vocab_cutoff = a_cutoff;
      const auto res = align_with_self_learning(load_vectors(a_src), load_vectors(a_tgt), seed, a_iters, opts);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
      save_mapping(a_mapping, res.mapping);
      if (!a_dict_out.empty()) write_file(a_dict_out, format_word_pairs(res.dictionary));
      std::cerr << res.iterations_run << " iterations, " << (res.converged ? "converged" : "not converged") << ", "
                << res.dictionary.size() << " dictionary pairs\n";
    } else if (*a_induce || *a_score) {
      const auto mapping = load_mapping(a_mapping);
      const auto src = load_vectors(a_src);
      const auto tgt = load_vectors(a_tgt);
      if (*a_induce) {
        for (const auto& e : induce_lexicon(mapping, src, tgt, a_words, a_k)) {
          std::cout << e.query;
          for (const auto& n : e.neighbors) std::cout << '\t' << n.word;
          std::cout << '\n';
        }
      } else {
        const auto gold = to_gold(load_word_pairs(a_gold));
        std::vector<std::string> queries;
        for (const auto& [q, t] : gold) queries.push_back(q);
        const auto eval = precision_at_k(induce_lexicon(mapping, src, tgt, queries, a_k), gold, a_k);
        std::cout << "P@" << eval.k << " = " << eval.hits << "/" << eval.total << " = " << eval.precision << "\n";
      }
    } else if (*m_run) {
      auto [translator, embedder] = english_title_providers(m_vectors, m_titles);
      const auto src = read_recipes(m_src);
      const auto tgt = read_recipes(m_tgt);
      const auto ds = match_recipes(src, tgt, *translator, *embedder, mopts);
      if (!m_direction.empty() && parse_direction(m_direction) != ds.direction)
        throw Error(ErrorCode::InvalidConfig, "corpora are " + std::string(to_string(ds.direction)) + ", not " +
                                                  m_direction);
      emit(m_out, pairs_to_jsonl(ds));
      std::cerr << ds.pair_count() << " pairs from " << ds.entries.size() << " source recipes\n";
    } else if (*m_split) {
      const auto ds = split_train_val(read_pairs(m_pairs), m_val, m_seed);
      emit(m_out, pairs_to_jsonl(ds));
    } else if (*m_lookup) {
      const auto corpus_r = read_recipes(m_corpus);
      const auto hit = lookup_gold_title(m_title, corpus_r, m_floor);
      std::cout << corpus_r[hit.index].id << '\t' << corpus_r[hit.index].title << '\t' << hit.similarity << '\n';
      for (const auto& c : hit.candidates)
        std::cerr << "  " << corpus_r[c.index].id << '\t' << corpus_r[c.index].title << '\t' << c.score << '\n';
    } else if (*s_surface) {
      const Lang lang = parse_lang(s_lang);
      const auto dict = maybe_dict(s_dict);
      const auto report = score_system(s_system, eval_pairs(s_hyp, s_refs, lang), dict.get());
      std::cout << format_reports({report});
      if (!s_out.empty()) write_file(s_out, to_json(report).dump(2) + "\n");
    } else if (*s_smatch) {
      SmatchOptions opts;
      opts.restarts = s_restarts;
      const auto r = smatch_corpus(parse_penman_blocks(read_file(s_hyp)), parse_penman_blocks(read_file(s_refs.at(0))),
                                   opts);
      std::cout << "precision " << r.precision << "\nrecall " << r.recall << "\nf1 " << r.f1 << "\n";
    } else if (*s_report) {
      std::vector<ScoreReport> reports;
      for (const auto& f : s_reports) {
        const auto j = nlohmann::json::parse(read_file(f));
        for (const auto& r : j.is_array() ? j : nlohmann::json::array({j})) {
          ScoreReport s;
          s.system = r.at("system").get<std::string>();
          s.bleu = r.at("bleu").get<double>();
          s.chrf = r.at("chrf").get<double>();
          s.rouge_l = r.at("rouge_l").get<double>();
          if (r.contains("smatch_f1") && !r["smatch_f1"].is_null()) s.smatch_f1 = r["smatch_f1"].get<double>();
          s.mean_tokens = r.at("mean_tokens").get<double>();
          reports.push_back(s);
        }
      }
      std::cout << format_reports(reports);
    } else if (*n_corr) {
      const auto j = nlohmann::json::parse(read_file(n_scores));
      const auto table = correlation_table(read_ratings(n_ratings), j.get<MetricScores>(), n_alpha);
      std::cout << format_table(table);
    } else if (*n_lit) {
      const auto sources = read_recipes(n_sources);
      const auto targets = read_recipes(n_targets);
      if (sources.empty() || targets.empty()) throw Error(ErrorCode::EmptyInput, "no recipes");
      std::string tsv = "concept\tc_source\tc_target\trate\n";
      for (const auto& lex : load_concepts(n_concepts.empty() ? kBundledDataDir / "concepts.txt" : fs::path(n_concepts))) {
        if (lex.source_lang != sources.front().lang || lex.target_lang != targets.front().lang) continue;
        try {
          const auto r = literal_rate(sources, targets, lex);
          std::printf("%-10s %zu/%zu = %.3f\n", lex.name.c_str(), r.c_target, r.c_source, r.rate);
          tsv += lex.name + "\t" + std::to_string(r.c_source) + "\t" + std::to_string(r.c_target) + "\t" +
                 std::to_string(r.rate) + "\n";
        } catch (const Error& e) {
          if (e.code() != ErrorCode::UndefinedRate) throw;
          std::printf("%-10s undefined (no source occurrences)\n", lex.name.c_str());
          tsv += lex.name + "\t0\t\tundefined\n";
        }
      }
      if (!n_out.empty()) write_file(n_out, tsv);
    } else if (*d_prompt) {
      const Direction dir = parse_direction(d_direction);
      const PromptStyle style = parse_prompt_style(d_style);
      const PromptTemplate tmpl = d_template.empty() ? bundled_template(style, dir) : load_template(d_template, style, dir);
      std::vector<BatchItem> items;
      for (const auto& r : read_recipes(d_recipes)) {
        if (r.lang != source_lang(dir))
          throw Error(ErrorCode::InvalidConfig, r.id + " is not a " + std::string(to_string(source_lang(dir))) + " recipe");
        items.push_back({r.id, build_prompt(serialize_recipe(r), tmpl)});
      }
      if (endpoint.url.empty()) {
        std::string text;
        for (const auto& it : items) text += nlohmann::ordered_json{{"id", it.id}, {"prompt", it.prompt}}.dump() + "\n";
        emit(d_out, text);
      } else {
        if (d_out.empty()) throw Error(ErrorCode::InvalidConfig, "--out is required with --endpoint");
        endpoint.format = parse_wire_format(d_format);
        BatchOptions opts;
        opts.threads = d_threads;
        if (!d_cache.empty()) opts.cache_dir = fs::path(d_cache);
        const auto records = adapt_batch(items, endpoint, d_out, opts);
        const auto failed = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.error.has_value(); });
        std::cerr << records.size() - failed << " adapted, " << failed << " failed\n";
        if (failed) return 1;
      }
    } else if (*d_retrieve) {
      auto [translator, embedder] = english_title_providers(d_vectors, d_titles);
      const auto sources = read_recipes(d_recipes);
      const auto targets = read_recipes(d_targets);
      std::string text;
      const auto hits = retrieval_adapt_all(sources, targets, *translator, *embedder);
      for (std::size_t i = 0; i < sources.size(); ++i)
        text += nlohmann::ordered_json{{"source_id", sources[i].id},
                                       {"target_id", targets[hits[i].index].id},
                                       {"cosine", hits[i].cosine},
                                       {"hypothesis", to_json(targets[hits[i].index])}}
                    .dump() + "\n";
      emit(d_out, text);
    } else if (*serve) {
      StoreOptions opts;
      opts.budget = v_budget;
      AnnotationStore store(read_tasks(v_tasks),
                            load_comprehension(v_examples.empty() ? kBundledDataDir / "comprehension.json" : fs::path(v_examples)),
                            v_log, opts);
      std::optional<fs::path> static_dir;
      if (!v_static.empty()) static_dir = fs::path(v_static);
      AnnotationServer server(store, static_dir);
      const int port = server.bind(v_host, v_port);
      std::cerr << "listening on http://" << v_host << ":" << port << "\n";
      static AnnotationServer* active = nullptr;
      active = &server;
      std::signal(SIGINT, [](int) {
        g_stop = 1;
        if (active) active->stop();
      });
      std::signal(SIGTERM, [](int) {
        g_stop = 1;
        if (active) active->stop();
      });
      server.listen();
    } else if (*p_run) {
      const RunConfig cfg = load_config(p_config);
      const RunManifest m = run(cfg);
      for (const auto& s : m.stages)
        std::cerr << s.name << (s.skipped ? " skipped" : " ran") << " (" << s.seconds << "s)\n";
      std::cerr << "manifest: " << (cfg.output_dir / kManifestName).string() << "\n";
    } else if (*p_report || *p_digest) {
      fs::path manifest = p_manifest;
      if (manifest.empty()) {
        if (p_config.empty()) throw Error(ErrorCode::InvalidConfig, "give --config or --manifest");
        manifest = load_config(p_config).output_dir / kManifestName;
      }
      if (*p_report) {
        std::cout << report(manifest);
      } else {
        const auto m = read_manifest(manifest);
        verify_manifest(m, manifest.parent_path());
        std::cout << output_digest(m).dump(2) << "\n";
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
