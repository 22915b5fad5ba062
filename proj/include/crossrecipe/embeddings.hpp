#pragma once

// Monolingual static word embeddings: skip-gram with negative sampling,
// vector queries and the conventional text vector format.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "crossrecipe/error.hpp"
#include "crossrecipe/unicode.hpp"
#include "crossrecipe/util.hpp"

namespace crossrecipe {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Sentences = std::vector<std::vector<std::string>>;

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Words must be distinct.
  explicit Vocabulary(std::vector<std::string> words, std::vector<long long> counts = {})
      : words_(std::move(words)), counts_(std::move(counts)) {
    if (counts_.empty()) counts_.assign(words_.size(), 0);
    if (counts_.size() != words_.size())
      throw Error(ErrorCode::ShapeMismatch, "vocabulary words/counts length differ");
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], i).second)
        throw Error(ErrorCode::Unparseable, "duplicate vocabulary word '" + words_[i] + "'");
    }
  }

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::string& word(std::size_t i) const { return words_.at(i); }
  long long count(std::size_t i) const { return counts_.at(i); }
  const std::vector<std::string>& words() const { return words_; }

  std::optional<std::size_t> find(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> words_;
  std::vector<long long> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Frequency descending, ties lexicographic; words under min_count dropped.
inline Vocabulary build_vocab(const Sentences& corpus, long long min_count) {
  std::map<std::string, long long> freq;
  for (const auto& sentence : corpus)
    for (const auto& w : sentence) ++freq[w];
  std::vector<std::pair<std::string, long long>> kept;
  for (auto& [w, c] : freq)
    if (c >= min_count) kept.emplace_back(w, c);
  if (kept.empty()) throw Error(ErrorCode::EmptyVocabulary, "no word reaches min_count");
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  std::vector<long long> counts;
  for (auto& [w, c] : kept) {
    words.push_back(w);
    counts.push_back(c);
  }
  return Vocabulary(std::move(words), std::move(counts));
}

struct EmbeddingSpace {
  Vocabulary vocab;
  Matrix vectors;  // |V| x d

  std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
  std::size_t size() const { return vocab.size(); }

  std::optional<Vector> vector(const std::string& word) const {
    auto i = vocab.find(word);
    if (!i) return std::nullopt;
    return Vector(vectors.row(static_cast<Eigen::Index>(*i)).transpose());
  }

  void validate() const {
    if (vectors.rows() != static_cast<Eigen::Index>(vocab.size()))
      throw Error(ErrorCode::ShapeMismatch, "one vector row per vocabulary entry required");
    if (vectors.cols() <= 0) throw Error(ErrorCode::ShapeMismatch, "dimension must be positive");
    if (!vectors.allFinite()) throw Error(ErrorCode::Unparseable, "non-finite embedding value");
  }
};

struct SgnsConfig {
  int dim = 300;
  int epochs = 5;
  int window = 5;
  int negatives = 10;
  long long min_count = 10;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  /// Frequent-word subsampling threshold; 0 disables it.
  double subsample = 0.0;
  /// >1 trains shards in parallel and averages them after each epoch;
  /// results are reproducible for a fixed thread count only.
  int threads = 1;

  void validate() const {
    if (dim <= 0 || epochs <= 0 || window <= 0 || negatives <= 0 || min_count <= 0 ||
        learning_rate <= 0 || threads <= 0 || subsample < 0)
      throw Error(ErrorCode::InvalidConfig, "SGNS parameters must be positive");
  }
};

struct SgnsResult {
  EmbeddingSpace space;
  /// Mean negative log-likelihood per (context, center) pair, per epoch.
  std::vector<double> epoch_loss;
};

namespace detail {

class NegativeSampler {
 public:
  explicit NegativeSampler(const Vocabulary& vocab) {
    cumulative_.reserve(vocab.size());
    double total = 0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      total += std::pow(static_cast<double>(std::max<long long>(vocab.count(i), 1)), 0.75);
      cumulative_.push_back(total);
    }
  }

  std::size_t draw(Rng& rng) const {
    const double x = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                 cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

struct SgnsState {
  Matrix input;
  Matrix output;
};

struct ShardStats {
  double loss = 0;
  std::size_t pairs = 0;
};

// One pass over `ids` starting from word position `processed_before`.
inline ShardStats train_shard(SgnsState& st, const std::vector<std::vector<std::size_t>>& ids,
                              std::size_t begin, std::size_t end, const SgnsConfig& cfg,
                              const NegativeSampler& sampler, const std::vector<double>& keep_prob,
                              Rng& rng, std::size_t processed_before, double total_steps) {
  ShardStats stats;
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  Vector grad(d);
  std::size_t processed = processed_before;
  std::vector<std::size_t> sentence;
  for (std::size_t s = begin; s < end; ++s) {
    sentence.clear();
    for (std::size_t w : ids[s]) {
      if (keep_prob.empty() || rng.uniform() < keep_prob[w]) sentence.push_back(w);
    }
    for (std::size_t pos = 0; pos < sentence.size(); ++pos) {
      const double lr = cfg.learning_rate *
                        std::max(1.0 - static_cast<double>(processed) / total_steps, 1e-4);
      ++processed;
      const std::size_t center = sentence[pos];
      const int shrink = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.window)));
      const int reach = cfg.window - shrink;
      const std::size_t lo = pos >= static_cast<std::size_t>(reach) ? pos - reach : 0;
      const std::size_t hi = std::min(sentence.size() - 1, pos + static_cast<std::size_t>(reach));
      for (std::size_t c = lo; c <= hi; ++c) {
        if (c == pos) continue;
        const auto ctx = static_cast<Eigen::Index>(sentence[c]);
        grad.setZero();
        for (int k = 0; k <= cfg.negatives; ++k) {
          std::size_t target;
          double label;
          if (k == 0) {
            target = center;
            label = 1.0;
          } else {
            target = sampler.draw(rng);
            if (target == center) continue;
            label = 0.0;
          }
          const auto t = static_cast<Eigen::Index>(target);
          const double f = st.input.row(ctx).dot(st.output.row(t));
          stats.loss -= label > 0 ? log_sigmoid(f) : log_sigmoid(-f);
          const double g = (label - sigmoid(f)) * lr;
          grad += g * st.output.row(t).transpose();
          st.output.row(t) += g * st.input.row(ctx);
        }
        st.input.row(ctx) += grad.transpose();
        ++stats.pairs;
      }
    }
  }
  return stats;
}

}  // namespace detail

/// Skip-gram with negative sampling. Unigram^(3/4) noise distribution,
/// linear learning-rate decay across all epochs, word2vec-style dynamic
/// window. Bit-reproducible for a given seed with threads == 1.
inline SgnsResult train_sgns(const Sentences& corpus, const SgnsConfig& cfg) {
  cfg.validate();
  std::size_t token_total = 0;
  for (const auto& s : corpus) token_total += s.size();
  if (token_total == 0) throw Error(ErrorCode::EmptyCorpus, "no tokens to train on");

  Vocabulary vocab = build_vocab(corpus, cfg.min_count);
  std::vector<std::vector<std::size_t>> ids;
  ids.reserve(corpus.size());
  std::size_t kept_tokens = 0;
  for (const auto& s : corpus) {
    std::vector<std::size_t> row;
    for (const auto& w : s)
      if (auto i = vocab.find(w)) row.push_back(*i);
    kept_tokens += row.size();
    ids.push_back(std::move(row));
  }

  std::vector<double> keep_prob;
  if (cfg.subsample > 0) {
    const double threshold = cfg.subsample * static_cast<double>(kept_tokens);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      const double f = static_cast<double>(vocab.count(i));
      keep_prob.push_back(std::min(1.0, (std::sqrt(f / threshold) + 1.0) * threshold / f));
    }
  }

  const auto n = static_cast<Eigen::Index>(vocab.size());
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  detail::SgnsState state{Matrix(n, d), Matrix::Zero(n, d)};
  Rng init_rng(cfg.seed);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      state.input(i, j) = (init_rng.uniform() - 0.5) / static_cast<double>(cfg.dim);

  detail::NegativeSampler sampler(vocab);
  const double total_steps = static_cast<double>(cfg.epochs) * static_cast<double>(kept_tokens) + 1;
  SgnsResult result;
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads),
                                                    std::max<std::size_t>(ids.size(), 1));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::size_t epoch_start = static_cast<std::size_t>(epoch) * kept_tokens;
    if (threads <= 1) {
      Rng rng(cfg.seed * 0x100000001B3ULL + static_cast<std::uint64_t>(epoch) + 1);
      auto stats = detail::train_shard(state, ids, 0, ids.size(), cfg, sampler, keep_prob, rng,
                                       epoch_start, total_steps);
      result.epoch_loss.push_back(stats.pairs ? stats.loss / static_cast<double>(stats.pairs) : 0);
      continue;
    }
    std::vector<detail::SgnsState> shards(threads, state);
    std::vector<detail::ShardStats> stats(threads);
    std::vector<std::thread> workers;
    std::size_t offset = epoch_start;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = ids.size() * t / threads;
      const std::size_t e = ids.size() * (t + 1) / threads;
      workers.emplace_back([&, t, b, e, offset] {
        Rng rng(cfg.seed * 0x100000001B3ULL + static_cast<std::uint64_t>(epoch) * 1315423911ULL +
                t + 1);
        stats[t] = detail::train_shard(shards[t], ids, b, e, cfg, sampler, keep_prob, rng, offset,
                                       total_steps);
      });
      for (std::size_t s = b; s < e; ++s) offset += ids[s].size();
    }
    for (auto& w : workers) w.join();
    state.input.setZero();
    state.output.setZero();
    double loss = 0;
    std::size_t pairs = 0;
    for (std::size_t t = 0; t < threads; ++t) {
      state.input += shards[t].input;
      state.output += shards[t].output;
      loss += stats[t].loss;
      pairs += stats[t].pairs;
    }
    state.input /= static_cast<double>(threads);
    state.output /= static_cast<double>(threads);
    result.epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0);
  }

  result.space.vocab = std::move(vocab);
  result.space.vectors = std::move(state.input);
  return result;
}

/// Cosine similarity; zero vectors have similarity 0 with everything.
inline double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

struct Neighbor {
  std::string word;
  std::size_t index = 0;
  double cosine = 0;
};

/// Descending cosine, ties by vocabulary index.
inline std::vector<Neighbor> nearest_neighbors(const EmbeddingSpace& space, const Vector& query,
                                               std::size_t k) {
  if (static_cast<std::size_t>(query.size()) != space.dim())
    throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                                  " vs space " + std::to_string(space.dim()));
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
  const double qn = query.norm();
  const Vector sims = space.vectors * query;
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double rn = space.vectors.row(static_cast<Eigen::Index>(i)).norm();
    const double c = (qn == 0 || rn == 0)
                         ? 0.0
                         : std::clamp(sims(static_cast<Eigen::Index>(i)) / (qn * rn), -1.0, 1.0);
    scored.emplace_back(c, i);
  }
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < take; ++i)
    out.push_back({space.vocab.word(scored[i].second), scored[i].second, scored[i].first});
  return out;
}

/// Mean of the known words' vectors; zero vector when none is known.
inline Vector average_vector(const EmbeddingSpace& space, const std::vector<std::string>& words) {
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(space.dim()));
  std::size_t hits = 0;
  for (const auto& w : words) {
    if (auto i = space.vocab.find(w)) {
      sum += space.vectors.row(static_cast<Eigen::Index>(*i)).transpose();
      ++hits;
    }
  }
  if (hits) sum /= static_cast<double>(hits);
  return sum;
}

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::Unparseable, "bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

/// Text format: "|V| d" header, then "word v1 ... vd" per line. Values are
/// written in shortest round-trip form.
inline std::string format_vectors(const EmbeddingSpace& space) {
  std::string out = std::to_string(space.size()) + " " + std::to_string(space.dim()) + "\n";
  for (std::size_t i = 0; i < space.size(); ++i) {
    out += space.vocab.word(i);
    for (Eigen::Index j = 0; j < space.vectors.cols(); ++j) {
      out += ' ';
      detail::append_double(out, space.vectors(static_cast<Eigen::Index>(i), j));
    }
    out += '\n';
  }
  return out;
}

inline void save_vectors(const std::filesystem::path& path, const EmbeddingSpace& space) {
  write_file(path, format_vectors(space));
}

inline EmbeddingSpace load_vectors(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw Error(ErrorCode::Unparseable, path.string() + ": empty vector file");
  std::istringstream header(lines[0]);
  std::size_t n = 0, d = 0;
  if (!(header >> n >> d) || d == 0)
    throw Error(ErrorCode::Unparseable, path.string() + ": bad header");
  if (lines.size() < n + 1) throw Error(ErrorCode::Unparseable, path.string() + ": truncated");
  std::vector<std::string> words;
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    auto parts = unicode::split_whitespace(lines[i + 1]);
    if (parts.size() != d + 1)
      throw Error(ErrorCode::DimensionMismatch,
                  path.string() + ": line " + std::to_string(i + 2) + " has wrong width");
    words.push_back(parts[0]);
    for (std::size_t j = 0; j < d; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          detail::parse_double(parts[j + 1]);
  }
  EmbeddingSpace space{Vocabulary(std::move(words)), std::move(m)};
  space.validate();
  return space;
}

}  // namespace crossrecipe
