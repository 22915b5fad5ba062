#pragma once

// Cross-lingual alignment of two embedding spaces with a small seed
// dictionary, bilingual lexicon induction and Precision@k scoring.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "crossrecipe/embeddings.hpp"
#include "crossrecipe/error.hpp"
#include "crossrecipe/util.hpp"

namespace crossrecipe {

using WordPairs = std::vector<std::pair<std::string, std::string>>;

/// Fifteen culturally neutral English-Chinese pairs.
inline WordPairs default_seed_dictionary() {
  return {{"spinach", "菠菜"}, {"onion", "洋葱"}, {"flour", "面粉"}, {"potatoes", "土豆"},
          {"egg", "蛋"},       {"salt", "盐"},    {"sugar", "糖"},   {"apples", "苹果"},
          {"mix", "混合"},     {"chop", "劈"},    {"pour", "倒"},    {"knife", "刀"},
          {"bowl", "碗"},      {"pot", "锅"},     {"chicken", "鸡"}};
}

/// Two-column tab-separated pairs; blank lines and '#' comments skipped.
inline WordPairs load_word_pairs(const std::filesystem::path& path) {
  WordPairs out;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::Unparseable, path.string() + ": expected two tab-separated columns");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

inline std::string format_word_pairs(const WordPairs& pairs) {
  std::string out;
  for (const auto& [a, b] : pairs) out += a + '\t' + b + '\n';
  return out;
}

struct Normalization {
  bool mean_center = true;
  bool unit_length = true;
};

/// Optional mean-centering, then (optionally) unit length per row.
inline Matrix normalize_rows(const Matrix& vectors, const Normalization& norm) {
  Matrix out = vectors;
  if (norm.mean_center && out.rows() > 0) {
    const Eigen::RowVectorXd mean = out.colwise().mean();
    out.rowwise() -= mean;
  }
  if (norm.unit_length) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double n = out.row(i).norm();
      if (n == 0.0) throw Error(ErrorCode::ZeroVector, "row " + std::to_string(i) + " has zero norm");
      out.row(i) /= n;
    }
  }
  return out;
}

inline EmbeddingSpace normalize_space(const EmbeddingSpace& space, const Normalization& norm = {}) {
  return EmbeddingSpace{space.vocab, normalize_rows(space.vectors, norm)};
}

/// Source rows map into the target space as x * W.
struct CrossLingualMapping {
  Matrix W;
  Normalization normalization;

  Vector apply(const Vector& x) const { return W.transpose() * x; }

  double orthogonality_error() const {
    return (W.transpose() * W - Matrix::Identity(W.rows(), W.cols())).norm();
  }
};

/// argmin over orthogonal W of ||XW - Z||_F, from the SVD of X^T Z = U S V^T.
inline CrossLingualMapping fit_orthogonal_map(const Matrix& X, const Matrix& Z,
                                              const Normalization& norm = {}) {
  if (X.rows() != Z.rows() || X.cols() != Z.cols())
    throw Error(ErrorCode::ShapeMismatch, "X is " + std::to_string(X.rows()) + "x" +
                                              std::to_string(X.cols()) + ", Z is " +
                                              std::to_string(Z.rows()) + "x" +
                                              std::to_string(Z.cols()));
  if (X.rows() < 1 || X.cols() < 1) throw Error(ErrorCode::ShapeMismatch, "need at least one pair");
  const Eigen::MatrixXd m = X.transpose() * Z;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return CrossLingualMapping{svd.matrixU() * svd.matrixV().transpose(), norm};
}

struct SelfLearningOptions {
  Normalization normalization;
  /// Only the most frequent `vocab_cutoff` words take part in dictionary
  /// induction (0 = all).
  std::size_t vocab_cutoff = 20000;
};

struct AlignmentResult {
  CrossLingualMapping mapping;
  WordPairs dictionary;  // pairs used for the final fit
  std::size_t iterations_run = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

// Mutual nearest neighbours under plain dot product (rows are unit length).
inline std::vector<std::pair<std::size_t, std::size_t>> mutual_nearest(const Matrix& mapped_src,
                                                                       const Matrix& tgt) {
  const Eigen::Index n = mapped_src.rows(), m = tgt.rows();
  std::vector<Eigen::Index> row_best(static_cast<std::size_t>(n), -1);
  std::vector<double> col_score(static_cast<std::size_t>(m), -std::numeric_limits<double>::infinity());
  std::vector<Eigen::Index> col_best(static_cast<std::size_t>(m), -1);
  constexpr Eigen::Index kBlock = 256;
  for (Eigen::Index b = 0; b < n; b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - b);
    const Eigen::MatrixXd sims = mapped_src.middleRows(b, rows) * tgt.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      Eigen::Index arg = 0;
      double best = sims(i, 0);
      for (Eigen::Index j = 0; j < m; ++j) {
        const double s = sims(i, j);
        if (s > best) {
          best = s;
          arg = j;
        }
        auto& cs = col_score[static_cast<std::size_t>(j)];
        if (s > cs) {
          cs = s;
          col_best[static_cast<std::size_t>(j)] = b + i;
        }
      }
      row_best[static_cast<std::size_t>(b + i)] = arg;
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = row_best[static_cast<std::size_t>(i)];
    if (j >= 0 && col_best[static_cast<std::size_t>(j)] == i)
      out.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  return out;
}

}  // namespace detail

/// Iteration 0 fits the seed dictionary; each further iteration induces a
/// dictionary of mutual nearest neighbours under the current mapping and
/// refits, stopping early once the induced dictionary repeats. Seed pairs
/// with a word missing from either vocabulary are dropped with a warning.
inline AlignmentResult align_with_self_learning(const EmbeddingSpace& src,
                                                const EmbeddingSpace& tgt, const WordPairs& seed,
                                                std::size_t iterations,
                                                const SelfLearningOptions& opts = {}) {
  if (src.dim() != tgt.dim())
    throw Error(ErrorCode::DimensionMismatch, "source and target dimensions differ");
  AlignmentResult result;
  const Matrix xs = normalize_rows(src.vectors, opts.normalization);
  const Matrix zs = normalize_rows(tgt.vectors, opts.normalization);

  std::vector<std::size_t> src_rows, tgt_rows;
  for (const auto& [s, t] : seed) {
    auto i = src.vocab.find(s);
    auto j = tgt.vocab.find(t);
    if (!i || !j) {
      result.warnings.push_back("seed pair " + s + "/" + t + " dropped: not in vocabulary");
      continue;
    }
    src_rows.push_back(*i);
    tgt_rows.push_back(*j);
    result.dictionary.emplace_back(s, t);
  }
  if (src_rows.empty())
    throw Error(ErrorCode::UnknownQueryWord, "no seed pair is present in both vocabularies");

  result.mapping = fit_orthogonal_map(detail::gather_rows(xs, src_rows),
                                      detail::gather_rows(zs, tgt_rows), opts.normalization);

  const auto cut = [&](Eigen::Index rows) {
    return opts.vocab_cutoff == 0 ? rows
                                  : std::min<Eigen::Index>(rows, static_cast<Eigen::Index>(opts.vocab_cutoff));
  };
  const Matrix xs_cut = xs.topRows(cut(xs.rows()));
  const Matrix zs_cut = zs.topRows(cut(zs.rows()));

  std::vector<std::pair<std::size_t, std::size_t>> previous;
  for (std::size_t it = 1; it <= iterations; ++it) {
    auto induced = detail::mutual_nearest(xs_cut * result.mapping.W, zs_cut);
    result.iterations_run = it;
    if (induced.empty()) {
      result.warnings.push_back("iteration " + std::to_string(it) + " induced no pairs");
      break;
    }
    if (induced == previous) {
      result.converged = true;
      break;
    }
    src_rows.clear();
    tgt_rows.clear();
    result.dictionary.clear();
    for (auto [i, j] : induced) {
      src_rows.push_back(i);
      tgt_rows.push_back(j);
      result.dictionary.emplace_back(src.vocab.word(i), tgt.vocab.word(j));
    }
    result.mapping = fit_orthogonal_map(detail::gather_rows(xs, src_rows),
                                        detail::gather_rows(zs, tgt_rows), opts.normalization);
    previous = std::move(induced);
  }
  return result;
}

struct InducedEntry {
  std::string query;
  std::vector<Neighbor> neighbors;
};

/// Top-k target words for each query after mapping. Both spaces are
/// normalized with the mapping's recorded recipe first.
inline std::vector<InducedEntry> induce_lexicon(const CrossLingualMapping& mapping,
                                                const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                                                const std::vector<std::string>& queries,
                                                std::size_t k) {
  if (static_cast<std::size_t>(mapping.W.rows()) != src.dim() || src.dim() != tgt.dim())
    throw Error(ErrorCode::DimensionMismatch, "mapping does not match the spaces");
  const EmbeddingSpace src_n = normalize_space(src, mapping.normalization);
  const EmbeddingSpace tgt_n = normalize_space(tgt, mapping.normalization);
  std::vector<InducedEntry> out;
  for (const auto& q : queries) {
    auto row = src_n.vocab.find(q);
    if (!row) throw Error(ErrorCode::UnknownQueryWord, "'" + q + "' not in source vocabulary");
    const Vector v = src_n.vectors.row(static_cast<Eigen::Index>(*row)).transpose();
    out.push_back({q, nearest_neighbors(tgt_n, mapping.apply(v), k)});
  }
  return out;
}

struct LexiconEval {
  std::size_t total = 0;    // N
  std::size_t hits = 0;     // N@k
  std::size_t k = 0;
  double precision = 0.0;
};

using GoldTranslations = std::map<std::string, std::set<std::string>>;

inline GoldTranslations to_gold(const WordPairs& pairs) {
  GoldTranslations gold;
  for (const auto& [s, t] : pairs) gold[s].insert(t);
  return gold;
}

inline LexiconEval precision_at_k(const std::vector<InducedEntry>& lexicon,
                                  const GoldTranslations& gold, std::size_t k) {
  if (lexicon.empty()) throw Error(ErrorCode::EmptyQuerySet, "no queries to score");
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
  LexiconEval eval;
  eval.k = k;
  for (const auto& entry : lexicon) {
    auto it = gold.find(entry.query);
    if (it == gold.end() || it->second.empty())
      throw Error(ErrorCode::UnknownQueryWord, "no gold translation for '" + entry.query + "'");
    ++eval.total;
    const std::size_t limit = std::min(k, entry.neighbors.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (it->second.count(entry.neighbors[i].word)) {
        ++eval.hits;
        break;
      }
    }
  }
  eval.precision = static_cast<double>(eval.hits) / static_cast<double>(eval.total);
  return eval;
}

/// Three-way judgment: literal translation in top k, otherwise a listed
/// cultural equivalent in top k, otherwise an error.
struct LexiconBreakdown {
  std::size_t literal = 0;
  std::size_t cultural = 0;
  std::size_t error = 0;
};

inline LexiconBreakdown categorize_lexicon(const std::vector<InducedEntry>& lexicon,
                                           const GoldTranslations& literal,
                                           const GoldTranslations& cultural, std::size_t k) {
  LexiconBreakdown out;
  auto hit = [k](const InducedEntry& e, const GoldTranslations& gold) {
    auto it = gold.find(e.query);
    if (it == gold.end()) return false;
    const std::size_t limit = std::min(k, e.neighbors.size());
    for (std::size_t i = 0; i < limit; ++i)
      if (it->second.count(e.neighbors[i].word)) return true;
    return false;
  };
  for (const auto& e : lexicon) {
    if (hit(e, literal)) ++out.literal;
    else if (hit(e, cultural)) ++out.cultural;
    else ++out.error;
  }
  return out;
}

inline std::string format_mapping(const CrossLingualMapping& m) {
  std::string out = "# crossrecipe-mapping d=" + std::to_string(m.W.rows()) +
                    " mean_center=" + (m.normalization.mean_center ? "1" : "0") +
                    " unit_length=" + (m.normalization.unit_length ? "1" : "0") + "\n";
  for (Eigen::Index i = 0; i < m.W.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.W.cols(); ++j) {
      if (j) out += ' ';
      detail::append_double(out, m.W(i, j));
    }
    out += '\n';
  }
  return out;
}

inline CrossLingualMapping parse_mapping(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  if (header.rfind("# crossrecipe-mapping", 0) != 0)
    throw Error(ErrorCode::Unparseable, "missing mapping header");
  CrossLingualMapping m;
  std::size_t d = 0;
  std::istringstream fields(header.substr(21));
  for (std::string kv; fields >> kv;) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "d") d = std::stoul(value);
    else if (key == "mean_center") m.normalization.mean_center = value == "1";
    else if (key == "unit_length") m.normalization.unit_length = value == "1";
  }
  if (d == 0) throw Error(ErrorCode::Unparseable, "mapping header lacks d");
  m.W.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::Unparseable, "mapping truncated");
    auto parts = unicode::split_whitespace(line);
    if (parts.size() != d) throw Error(ErrorCode::DimensionMismatch, "mapping row width");
    for (std::size_t j = 0; j < d; ++j)
      m.W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = detail::parse_double(parts[j]);
  }
  return m;
}

inline void save_mapping(const std::filesystem::path& path, const CrossLingualMapping& m) {
  write_file(path, format_mapping(m));
}

inline CrossLingualMapping load_mapping(const std::filesystem::path& path) {
  return parse_mapping(read_file(path));
}

}  // namespace crossrecipe
