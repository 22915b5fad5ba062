#pragma once

// Cross-lingual recipe pairing by translated-title similarity, train/val
// splitting and fuzzy gold-title lookup.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "crossrecipe/corpus.hpp"
#include "crossrecipe/embeddings.hpp"
#include "crossrecipe/error.hpp"
#include "crossrecipe/http.hpp"
#include "crossrecipe/unicode.hpp"
#include "crossrecipe/util.hpp"

namespace crossrecipe {

enum class Direction { ZhToEn, EnToZh };

inline std::string_view to_string(Direction d) { return d == Direction::ZhToEn ? "zh-en" : "en-zh"; }

inline Direction parse_direction(std::string_view s) {
  if (s == "zh-en") return Direction::ZhToEn;
  if (s == "en-zh") return Direction::EnToZh;
  throw Error(ErrorCode::InvalidConfig, "direction must be zh-en or en-zh, got '" + std::string(s) + "'");
}

inline Lang source_lang(Direction d) { return d == Direction::ZhToEn ? Lang::Zh : Lang::En; }
inline Lang target_lang(Direction d) { return d == Direction::ZhToEn ? Lang::En : Lang::Zh; }

// ---- providers -------------------------------------------------------------

class TitleTranslator {
 public:
  virtual ~TitleTranslator() = default;
  virtual std::string translate(const std::string& title, Lang from, Lang to) = 0;
  /// Identifies the provider in cache keys and manifests.
  virtual std::string name() const = 0;
};

class SentenceEmbedder {
 public:
  virtual ~SentenceEmbedder() = default;
  virtual Vector embed(const std::string& text) = 0;
  virtual std::string name() const = 0;
};

/// Lookup table; every title must be present.
class StaticTranslator : public TitleTranslator {
 public:
  explicit StaticTranslator(std::unordered_map<std::string, std::string> table)
      : table_(std::move(table)) {}

  /// "title<TAB>translation" lines; blank lines and '#' comments skipped.
  static StaticTranslator from_file(const std::filesystem::path& path) {
    std::unordered_map<std::string, std::string> table;
    std::size_t n = 0;
    for (const auto& line : read_lines(path)) {
      ++n;
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw Error(ErrorCode::Unparseable, path.string() + ":" + std::to_string(n) + ": expected a tab");
      table[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return StaticTranslator(std::move(table));
  }

  std::string translate(const std::string& title, Lang, Lang) override {
    auto it = table_.find(title);
    if (it == table_.end()) throw Error(ErrorCode::ProviderFailure, "no translation for title '" + title + "'");
    return it->second;
  }

  std::string name() const override { return "static"; }

 private:
  std::unordered_map<std::string, std::string> table_;
};

/// POST text/plain; languages in X-Source-Lang / X-Target-Lang; the
/// response body is the translation.
class HttpTranslator : public TitleTranslator {
 public:
  explicit HttpTranslator(std::string url, RetryPolicy policy = {}) : url_(std::move(url)), policy_(policy) {}

  std::string translate(const std::string& title, Lang from, Lang to) override {
    std::string out;
    try {
      out = http_post(url_, title, "text/plain; charset=utf-8",
                      {{"X-Source-Lang", std::string(to_string(from))}, {"X-Target-Lang", std::string(to_string(to))}},
                      policy_);
    } catch (const Error& e) {
      throw Error(ErrorCode::ProviderFailure, std::string("translation endpoint: ") + e.what());
    }
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    if (out.empty()) throw Error(ErrorCode::ProviderFailure, "empty translation for '" + title + "'");
    return out;
  }

  std::string name() const override { return "http:" + url_; }

 private:
  std::string url_;
  RetryPolicy policy_;
};

namespace detail {

inline Vector parse_vector_text(std::string_view text) {
  std::vector<double> values;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != '\n' && text[j] != '\r') ++j;
    if (j > i) values.push_back(parse_double(text.substr(i, j - i)));
    i = j;
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline std::string format_vector_text(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    append_double(out, v(i));
  }
  return out;
}

inline void check_finite(const Vector& v, const std::string& text) {
  if (v.size() == 0 || !v.allFinite())
    throw Error(ErrorCode::ProviderFailure, "embedding for '" + text + "' is empty or non-finite");
}

}  // namespace detail

/// Precomputed vectors keyed by exact text.
class StaticEmbedder : public SentenceEmbedder {
 public:
  explicit StaticEmbedder(std::unordered_map<std::string, Vector> table) : table_(std::move(table)) {
    std::optional<Eigen::Index> d;
    for (const auto& [k, v] : table_) {
      if (d && v.size() != *d) throw Error(ErrorCode::DimensionMismatch, "vector for '" + k + "' has a different size");
      d = v.size();
    }
  }

  /// "text<TAB>v1 v2 ... vd" lines.
  static StaticEmbedder from_file(const std::filesystem::path& path) {
    std::unordered_map<std::string, Vector> table;
    std::size_t n = 0;
    for (const auto& line : read_lines(path)) {
      ++n;
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw Error(ErrorCode::Unparseable, path.string() + ":" + std::to_string(n) + ": expected a tab");
      table[line.substr(0, tab)] = detail::parse_vector_text(std::string_view(line).substr(tab + 1));
    }
    return StaticEmbedder(std::move(table));
  }

  Vector embed(const std::string& text) override {
    auto it = table_.find(text);
    if (it == table_.end()) throw Error(ErrorCode::ProviderFailure, "no vector for '" + text + "'");
    return it->second;
  }

  std::string name() const override { return "static"; }

 private:
  std::unordered_map<std::string, Vector> table_;
};

/// POST text/plain; the response is a JSON array of numbers.
class HttpEmbedder : public SentenceEmbedder {
 public:
  explicit HttpEmbedder(std::string url, RetryPolicy policy = {}) : url_(std::move(url)), policy_(policy) {}

  Vector embed(const std::string& text) override {
    std::vector<double> values;
    try {
      auto body = http_post(url_, text, "text/plain; charset=utf-8", {}, policy_);
      values = nlohmann::json::parse(body).get<std::vector<double>>();
    } catch (const Error& e) {
      throw Error(ErrorCode::ProviderFailure, std::string("embedding endpoint: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ProviderFailure, std::string("embedding endpoint returned bad JSON: ") + e.what());
    }
    Vector v = Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    detail::check_finite(v, text);
    return v;
  }

  std::string name() const override { return "http:" + url_; }

 private:
  std::string url_;
  RetryPolicy policy_;
};

/// Fallback: mean of the word vectors of the title's word tokens.
class WordAverageEmbedder : public SentenceEmbedder {
 public:
  WordAverageEmbedder(std::shared_ptr<const EmbeddingSpace> space, Lang lang,
                      std::shared_ptr<const SegmenterDictionary> dict = nullptr)
      : space_(std::move(space)), lang_(lang), dict_(std::move(dict)) {}

  Vector embed(const std::string& text) override {
    return average_vector(*space_, word_tokens(text, lang_, dict_.get()));
  }

  std::string name() const override { return "word-average"; }

 private:
  std::shared_ptr<const EmbeddingSpace> space_;
  Lang lang_;
  std::shared_ptr<const SegmenterDictionary> dict_;
};

/// Cache layout: <dir>/translate/<sha256>.txt holding the translation and
/// <dir>/embed/<sha256>.txt holding space-separated components. The key
/// hashes provider name, languages and the input text.
class CachingTranslator : public TitleTranslator {
 public:
  CachingTranslator(std::shared_ptr<TitleTranslator> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir) / "translate") {}

  std::string translate(const std::string& title, Lang from, Lang to) override {
    const auto key = sha256_hex(inner_->name() + "\n" + std::string(to_string(from)) + "\n" +
                                std::string(to_string(to)) + "\n" + title);
    const auto path = dir_ / (key + ".txt");
    if (std::filesystem::exists(path)) {
      ++hits_;
      return read_file(path);
    }
    auto out = inner_->translate(title, from, to);
    std::filesystem::create_directories(dir_);
    write_file_atomic(path, out);
    return out;
  }

  std::string name() const override { return inner_->name(); }
  std::size_t hits() const { return hits_; }

 private:
  std::shared_ptr<TitleTranslator> inner_;
  std::filesystem::path dir_;
  std::atomic<std::size_t> hits_{0};
};

class CachingEmbedder : public SentenceEmbedder {
 public:
  CachingEmbedder(std::shared_ptr<SentenceEmbedder> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir) / "embed") {}

  Vector embed(const std::string& text) override {
    const auto key = sha256_hex(inner_->name() + "\n" + text);
    const auto path = dir_ / (key + ".txt");
    if (std::filesystem::exists(path)) {
      ++hits_;
      return detail::parse_vector_text(read_file(path));
    }
    Vector v = inner_->embed(text);
    std::filesystem::create_directories(dir_);
    write_file_atomic(path, detail::format_vector_text(v));
    return v;
  }

  std::string name() const override { return inner_->name(); }
  std::size_t hits() const { return hits_; }

 private:
  std::shared_ptr<SentenceEmbedder> inner_;
  std::filesystem::path dir_;
  std::atomic<std::size_t> hits_{0};
};

// ---- nearest neighbours ----------------------------------------------------

struct ScoredIndex {
  std::size_t index = 0;
  double score = 0;
};

struct KnnOptions {
  std::size_t k = 10;
  double threshold = 0.85;
  std::size_t block = 256;
  std::size_t threads = 1;
};

/// Rows scaled to unit length; zero rows stay zero.
inline Matrix unit_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0) out.row(i) /= n;
  }
  return out;
}

/// Exact top-k cosine neighbours of every query row among the base rows,
/// keeping only cosine >= threshold. Sorted by cosine descending, ties by
/// base index. Queries are processed in blocks of matrix products.
inline std::vector<std::vector<ScoredIndex>> knn_threshold(const Matrix& queries, const Matrix& base,
                                                           const KnnOptions& opts = {}) {
  if (queries.rows() > 0 && base.rows() > 0 && queries.cols() != base.cols())
    throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(queries.cols()) +
                                                  " vs base " + std::to_string(base.cols()));
  if (opts.k == 0) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
  const Matrix q = unit_rows(queries), b = unit_rows(base);
  const std::size_t nq = static_cast<std::size_t>(q.rows());
  const std::size_t block = std::max<std::size_t>(1, opts.block);
  const std::size_t blocks = (nq + block - 1) / block;
  std::vector<std::vector<ScoredIndex>> out(nq);
  parallel_for(blocks, opts.threads, [&](std::size_t bi) {
    const auto start = static_cast<Eigen::Index>(bi * block);
    const auto rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(block), q.rows() - start);
    const Matrix sims = q.middleRows(start, rows) * b.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::vector<ScoredIndex> kept;
      for (Eigen::Index j = 0; j < sims.cols(); ++j) {
        const double c = std::clamp(sims(r, j), -1.0, 1.0);
        if (c >= opts.threshold) kept.push_back({static_cast<std::size_t>(j), c});
      }
      const std::size_t take = std::min(opts.k, kept.size());
      std::partial_sort(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(take), kept.end(),
                        [](const ScoredIndex& a, const ScoredIndex& x) {
                          return a.score != x.score ? a.score > x.score : a.index < x.index;
                        });
      kept.resize(take);
      out[static_cast<std::size_t>(start + r)] = std::move(kept);
    }
  });
  return out;
}

// ---- datasets --------------------------------------------------------------

enum class Split { None, Train, Val };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    default: return "none";
  }
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "none") return Split::None;
  throw Error(ErrorCode::Unparseable, "unknown split '" + std::string(s) + "'");
}

struct MatchCandidate {
  std::string target_id;
  double cosine = 0;

  bool operator==(const MatchCandidate&) const = default;
};

struct SourceMatches {
  std::string source_id;
  std::vector<MatchCandidate> targets;  // cosine descending
  Split split = Split::None;

  bool operator==(const SourceMatches&) const = default;
};

struct PairDataset {
  Direction direction = Direction::ZhToEn;
  std::vector<SourceMatches> entries;  // by source id; sources without matches omitted

  std::size_t pair_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.targets.size();
    return n;
  }

  bool operator==(const PairDataset&) const = default;
};

struct MatchOptions {
  std::size_t k = 10;
  double threshold = 0.85;
  std::size_t threads = 1;  // provider calls and retrieval
};

/// Embeds every title in parallel, translating Chinese titles into English
/// first. Output order follows the input.
inline Matrix embed_titles(const std::vector<Recipe>& recipes, TitleTranslator& translator,
                           SentenceEmbedder& embedder, std::size_t threads = 1) {
  std::vector<Vector> vecs(recipes.size());
  parallel_for(recipes.size(), threads, [&](std::size_t i) {
    const Recipe& r = recipes[i];
    const std::string text = r.lang == Lang::Zh ? translator.translate(r.title, Lang::Zh, Lang::En) : r.title;
    Vector v = embedder.embed(text);
    detail::check_finite(v, text);
    vecs[i] = std::move(v);
  });
  if (vecs.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(vecs.size()), vecs[0].size());
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    if (vecs[i].size() != m.cols())
      throw Error(ErrorCode::DimensionMismatch, "embedding of '" + recipes[i].title + "' has " +
                                                    std::to_string(vecs[i].size()) + " components, expected " +
                                                    std::to_string(m.cols()));
    m.row(static_cast<Eigen::Index>(i)) = vecs[i].transpose();
  }
  return m;
}

namespace detail {

inline Direction corpus_direction(const std::vector<Recipe>& src, const std::vector<Recipe>& tgt) {
  if (src.empty() || tgt.empty()) throw Error(ErrorCode::EmptyCorpus, "both corpora must be nonempty");
  const Lang sl = src[0].lang;
  for (const auto& r : src)
    if (r.lang != sl) throw Error(ErrorCode::InvalidConfig, "source corpus mixes languages");
  for (const auto& r : tgt)
    if (r.lang == sl) throw Error(ErrorCode::InvalidConfig, "target recipe " + r.id + " is in the source language");
  return sl == Lang::Zh ? Direction::ZhToEn : Direction::EnToZh;
}

inline PairDataset assemble(Direction dir, const std::vector<Recipe>& src, const std::vector<Recipe>& tgt,
                            const std::vector<std::vector<ScoredIndex>>& hits) {
  PairDataset ds{dir, {}};
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (hits[i].empty()) continue;
    SourceMatches m{src[i].id, {}, Split::None};
    for (const auto& h : hits[i]) m.targets.push_back({tgt[h.index].id, h.score});
    ds.entries.push_back(std::move(m));
  }
  std::stable_sort(ds.entries.begin(), ds.entries.end(),
                   [](const SourceMatches& a, const SourceMatches& b) { return a.source_id < b.source_id; });
  return ds;
}

}  // namespace detail

/// Pairs each source recipe with up to k target recipes whose (translated)
/// title embeddings have cosine >= threshold. Direction follows the source
/// corpus language.
inline PairDataset match_recipes(const std::vector<Recipe>& src, const std::vector<Recipe>& tgt,
                                 TitleTranslator& translator, SentenceEmbedder& embedder,
                                 const MatchOptions& opts = {}) {
  const Direction dir = detail::corpus_direction(src, tgt);
  const Matrix s = embed_titles(src, translator, embedder, opts.threads);
  const Matrix t = embed_titles(tgt, translator, embedder, opts.threads);
  auto hits = knn_threshold(s, t, {opts.k, opts.threshold, 256, opts.threads});
  return detail::assemble(dir, src, tgt, hits);
}

/// Same as match_recipes over precomputed title embeddings (row i belongs to
/// recipe i).
inline PairDataset match_embedded(const std::vector<Recipe>& src, const Matrix& src_vecs,
                                  const std::vector<Recipe>& tgt, const Matrix& tgt_vecs,
                                  const MatchOptions& opts = {}) {
  const Direction dir = detail::corpus_direction(src, tgt);
  if (static_cast<std::size_t>(src_vecs.rows()) != src.size() ||
      static_cast<std::size_t>(tgt_vecs.rows()) != tgt.size())
    throw Error(ErrorCode::ShapeMismatch, "one embedding row per recipe required");
  return detail::assemble(dir, src, tgt, knn_threshold(src_vecs, tgt_vecs, {opts.k, opts.threshold, 256, opts.threads}));
}

/// Assigns whole sources to val (round(fraction * sources) of them, chosen
/// by a seeded shuffle) and the rest to train.
inline PairDataset split_train_val(PairDataset ds, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0 && val_fraction < 1))
    throw Error(ErrorCode::InvalidConfig, "val_fraction must be in (0, 1)");
  std::vector<std::size_t> order(ds.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(order.size())));
  for (std::size_t i = 0; i < order.size(); ++i) ds.entries[order[i]].split = i < n_val ? Split::Val : Split::Train;
  return ds;
}

/// One record per pair: {source_id, target_id, cosine, split, direction}.
inline std::string pairs_to_jsonl(const PairDataset& ds) {
  std::string out;
  for (const auto& e : ds.entries) {
    for (const auto& t : e.targets) {
      nlohmann::ordered_json j;
      j["source_id"] = e.source_id;
      j["target_id"] = t.target_id;
      j["cosine"] = t.cosine;
      j["split"] = to_string(e.split);
      j["direction"] = to_string(ds.direction);
      out += j.dump() + "\n";
    }
  }
  return out;
}

inline PairDataset pairs_from_jsonl(std::string_view text, Direction fallback = Direction::ZhToEn) {
  PairDataset ds{fallback, {}};
  std::map<std::string, std::size_t> where;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.contains("direction")) ds.direction = parse_direction(j["direction"].get<std::string>());
      const auto sid = j.at("source_id").get<std::string>();
      auto [it, fresh] = where.emplace(sid, ds.entries.size());
      if (fresh) ds.entries.push_back({sid, {}, parse_split(j.value("split", "none"))});
      ds.entries[it->second].targets.push_back({j.at("target_id").get<std::string>(), j.at("cosine").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Unparseable, "pair record " + std::to_string(n) + ": " + e.what());
    }
  }
  return ds;
}

inline void write_pairs(const std::filesystem::path& path, const PairDataset& ds) {
  write_file(path, pairs_to_jsonl(ds));
}

inline PairDataset read_pairs(const std::filesystem::path& path) { return pairs_from_jsonl(read_file(path)); }

// ---- gold-title lookup -----------------------------------------------------

/// Lowercase, punctuation replaced by spaces, whitespace collapsed.
inline std::string normalize_title(std::string_view title) {
  std::u32string cps = unicode::decode(unicode::ascii_lower(std::string(title)));
  std::u32string out;
  bool space = false;
  for (char32_t c : cps) {
    if (unicode::is_punct(c) || unicode::is_space(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(U' ');
    space = false;
    out.push_back(c);
  }
  return unicode::encode(out);
}

namespace detail {

template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

inline std::set<std::u32string> title_trigrams(const std::vector<std::string>& tokens) {
  std::set<std::u32string> out;
  for (const auto& t : tokens) {
    const std::u32string padded = U"#" + unicode::decode(t) + U"#";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) out.insert(padded.substr(i, 3));
  }
  return out;
}

}  // namespace detail

/// max(token-set Jaccard, padded character-trigram Jaccard) of the
/// normalized titles; 1.0 when they normalize identically.
inline double title_similarity(std::string_view a, std::string_view b) {
  const auto ta = unicode::split_whitespace(normalize_title(a));
  const auto tb = unicode::split_whitespace(normalize_title(b));
  const std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
  return std::max(detail::jaccard(sa, sb), detail::jaccard(detail::title_trigrams(ta), detail::title_trigrams(tb)));
}

struct GoldLookup {
  std::size_t index = 0;  // into the corpus
  double similarity = 0;
  /// Best candidates for manual inspection, similarity descending.
  std::vector<ScoredIndex> candidates;
};

inline GoldLookup lookup_gold_title(std::string_view query, const std::vector<Recipe>& corpus,
                                    double floor = 0.3, std::size_t show = 5) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "gold lookup over an empty corpus");
  std::vector<ScoredIndex> scored;
  for (std::size_t i = 0; i < corpus.size(); ++i) scored.push_back({i, title_similarity(query, corpus[i].title)});
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredIndex& a, const ScoredIndex& b) { return a.score > b.score; });
  if (scored[0].score < floor)
    throw Error(ErrorCode::NoCandidateAboveFloor, "no title within similarity " + std::to_string(floor) + " of '" +
                                                      std::string(query) + "'");
  scored.resize(std::min(show, scored.size()));
  return {scored[0].index, scored[0].score, scored};
}

}  // namespace crossrecipe
