#pragma once

// Smatch: triple-overlap F1 under the best one-to-one variable alignment.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "crossrecipe/penman.hpp"
#include "crossrecipe/util.hpp"

namespace crossrecipe {

struct SmatchResult {
  std::size_t matched = 0;
  std::size_t left_triples = 0;   // |triples(g1)|
  std::size_t right_triples = 0;  // |triples(g2)|
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool exhaustive = false;
};

struct SmatchOptions {
  /// Random starts after the first, concept-guided one.
  std::size_t restarts = 4;
  /// Search every alignment when either graph has at most this many variables.
  std::size_t exhaustive_limit = 6;
  std::uint64_t seed = 0;
};

inline SmatchResult smatch_scores(std::size_t matched, std::size_t left, std::size_t right) {
  SmatchResult r;
  r.matched = matched;
  r.left_triples = left;
  r.right_triples = right;
  r.precision = left ? static_cast<double>(matched) / static_cast<double>(left) : 0.0;
  r.recall = right ? static_cast<double>(matched) / static_cast<double>(right) : 0.0;
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

namespace detail {

struct IndexedAmr {
  std::vector<std::string> labels;
  // Single-variable triples: (label, var, constant); instances use "instance".
  std::vector<std::tuple<std::string, int, std::string>> unary;
  // Variable-to-variable relations.
  std::vector<std::tuple<std::string, int, int>> binary;

  std::size_t size() const { return labels.size(); }
  std::size_t triple_count() const { return unary.size() + binary.size(); }

  explicit IndexedAmr(const AmrGraph& g) {
    std::map<std::string, int> index;
    for (const auto& [v, c] : g.instances) {
      index[v] = static_cast<int>(labels.size());
      labels.push_back(c);
      unary.emplace_back("instance", index[v], c);
    }
    for (const auto& e : g.edges) {
      if (e.target_is_var) binary.emplace_back(e.role, index.at(e.source), index.at(e.target));
      else unary.emplace_back(e.role, index.at(e.source), e.target);
    }
  }
};

// Branch and bound over injective maps from `a` variables into `b`
// variables (or nothing), counting matched triples directly.
class ExhaustiveAligner {
 public:
  ExhaustiveAligner(const IndexedAmr& a, const IndexedAmr& b) : a_(a), b_(b) {
    for (const auto& [l, v, c] : b.unary) b_unary_.emplace(l, v, c);
    for (const auto& [l, s, t] : b.binary) b_binary_.emplace(l, s, t);
    // Variables with more triples first tighten the bound early.
    order_.resize(a.size());
    std::iota(order_.begin(), order_.end(), 0);
    std::vector<int> degree(a.size(), 0);
    for (const auto& t : a.unary) ++degree[static_cast<std::size_t>(std::get<1>(t))];
    for (const auto& t : a.binary) {
      ++degree[static_cast<std::size_t>(std::get<1>(t))];
      ++degree[static_cast<std::size_t>(std::get<2>(t))];
    }
    std::stable_sort(order_.begin(), order_.end(),
                     [&](int x, int y) { return degree[static_cast<std::size_t>(x)] > degree[static_cast<std::size_t>(y)]; });
    std::vector<int> rank(a.size());
    for (std::size_t i = 0; i < order_.size(); ++i) rank[static_cast<std::size_t>(order_[i])] = static_cast<int>(i);
    closes_unary_.resize(a.size());
    closes_binary_.resize(a.size());
    for (std::size_t k = 0; k < a.unary.size(); ++k)
      closes_unary_[static_cast<std::size_t>(rank[static_cast<std::size_t>(std::get<1>(a.unary[k]))])].push_back(k);
    for (std::size_t k = 0; k < a.binary.size(); ++k) {
      const auto& [l, s, t] = a.binary[k];
      const int last = std::max(rank[static_cast<std::size_t>(s)], rank[static_cast<std::size_t>(t)]);
      closes_binary_[static_cast<std::size_t>(last)].push_back(k);
    }
    remaining_.assign(a.size() + 1, 0);
    for (std::size_t d = a.size(); d-- > 0;)
      remaining_[d] = remaining_[d + 1] + closes_unary_[d].size() + closes_binary_[d].size();
    candidates_.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j)
        if (compatible(static_cast<int>(i), static_cast<int>(j))) candidates_[i].push_back(static_cast<int>(j));
    }
  }

  std::size_t run() {
    map_.assign(a_.size(), -1);
    used_.assign(b_.size(), false);
    best_ = 0;
    search(0, 0);
    return best_;
  }

 private:
  // Could mapping i to j match at least one triple?
  bool compatible(int i, int j) const {
    for (const auto& [l, v, c] : a_.unary)
      if (v == i && b_unary_.count({l, j, c})) return true;
    for (const auto& [l, s, t] : a_.binary) {
      for (const auto& [bl, bs, bt] : b_.binary) {
        if (l != bl) continue;
        if ((s == i && bs == j) || (t == i && bt == j)) return true;
      }
    }
    return false;
  }

  void search(std::size_t depth, std::size_t score) {
    if (score + remaining_[depth] <= best_ && depth > 0) return;
    if (depth == a_.size()) {
      best_ = std::max(best_, score);
      return;
    }
    const int var = order_[depth];
    auto gain_for = [&]() {
      std::size_t gain = 0;
      const int j = map_[static_cast<std::size_t>(var)];
      if (j < 0) return gain;
      for (std::size_t k : closes_unary_[depth]) {
        const auto& [l, v, c] = a_.unary[k];
        if (b_unary_.count({l, j, c})) ++gain;
      }
      for (std::size_t k : closes_binary_[depth]) {
        const auto& [l, s, t] = a_.binary[k];
        const int ms = map_[static_cast<std::size_t>(s)], mt = map_[static_cast<std::size_t>(t)];
        if (ms >= 0 && mt >= 0 && b_binary_.count({l, ms, mt})) ++gain;
      }
      return gain;
    };
    for (int j : candidates_[static_cast<std::size_t>(var)]) {
      if (used_[static_cast<std::size_t>(j)]) continue;
      used_[static_cast<std::size_t>(j)] = true;
      map_[static_cast<std::size_t>(var)] = j;
      search(depth + 1, score + gain_for());
      used_[static_cast<std::size_t>(j)] = false;
    }
    map_[static_cast<std::size_t>(var)] = -1;
    search(depth + 1, score);
  }

  const IndexedAmr& a_;
  const IndexedAmr& b_;
  std::set<std::tuple<std::string, int, std::string>> b_unary_;
  std::set<std::tuple<std::string, int, int>> b_binary_;
  std::vector<int> order_;
  std::vector<std::vector<std::size_t>> closes_unary_, closes_binary_;
  std::vector<std::size_t> remaining_;
  std::vector<std::vector<int>> candidates_;
  std::vector<int> map_;
  std::vector<bool> used_;
  std::size_t best_ = 0;
};

// Alignment weights: a per-(i, j) count of single-variable triples matched
// when i maps to j, and pair weights between two mappings for relations.
class HillClimber {
 public:
  HillClimber(const IndexedAmr& a, const IndexedAmr& b) : n_(a.size()), m_(b.size()) {
    node_.assign(n_ * m_, 0);
    std::map<std::pair<std::string, std::string>, std::vector<int>> b_by_label;
    for (const auto& [l, v, c] : b.unary) b_by_label[{l, c}].push_back(v);
    for (const auto& [l, v, c] : a.unary) {
      auto it = b_by_label.find({l, c});
      if (it == b_by_label.end()) continue;
      for (int j : it->second) ++node_[key(v, j)];
    }
    std::map<std::string, std::vector<std::pair<int, int>>> b_rel;
    for (const auto& [l, s, t] : b.binary) b_rel[l].emplace_back(s, t);
    for (const auto& [l, s, t] : a.binary) {
      auto it = b_rel.find(l);
      if (it == b_rel.end()) continue;
      for (auto [bs, bt] : it->second) {
        if (s == t) {
          if (bs == bt) ++node_[key(s, bs)];
          continue;
        }
        if (bs == bt) continue;
        add_pair(key(s, bs), key(t, bt));
      }
    }
    candidates_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < m_; ++j) {
        const std::size_t k = i * m_ + j;
        if (node_[k] > 0 || pairs_.count(k)) candidates_[i].push_back(static_cast<int>(j));
      }
  }

  std::size_t run(std::size_t restarts, Rng& rng) {
    std::size_t best = 0;
    for (std::size_t r = 0; r <= restarts; ++r) {
      std::vector<int> map = r == 0 ? smart_start() : random_start(rng);
      best = std::max(best, climb(map));
    }
    return best;
  }

  std::size_t score(const std::vector<int>& map) const {
    std::size_t nodes = 0, pairs = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (map[i] < 0) continue;
      nodes += node_[key(static_cast<int>(i), map[i])];
      auto it = pairs_.find(key(static_cast<int>(i), map[i]));
      if (it == pairs_.end()) continue;
      for (const auto& [other, w] : it->second)
        if (map[other / m_] == static_cast<int>(other % m_)) pairs += w;
    }
    // Each pair is seen from both ends.
    return nodes + pairs / 2;
  }

 private:
  std::size_t key(int i, int j) const { return static_cast<std::size_t>(i) * m_ + static_cast<std::size_t>(j); }

  void add_pair(std::size_t k1, std::size_t k2) {
    auto bump = [&](std::size_t from, std::size_t to) {
      auto& list = pairs_[from];
      for (auto& [o, w] : list)
        if (o == to) {
          ++w;
          return;
        }
      list.emplace_back(to, 1);
    };
    bump(k1, k2);
    bump(k2, k1);
  }

  std::size_t pair_weight(std::size_t k1, std::size_t k2) const {
    auto it = pairs_.find(k1);
    if (it == pairs_.end()) return 0;
    for (const auto& [o, w] : it->second)
      if (o == k2) return w;
    return 0;
  }

  // Triples gained by mapping i to j, given everyone else's mapping.
  long contribution(int i, int j, const std::vector<int>& map) const {
    if (j < 0) return 0;
    long total = node_[key(i, j)];
    auto it = pairs_.find(key(i, j));
    if (it == pairs_.end()) return total;
    for (const auto& [other, w] : it->second) {
      const std::size_t oi = other / m_;
      if (static_cast<int>(oi) != i && map[oi] == static_cast<int>(other % m_)) total += static_cast<long>(w);
    }
    return total;
  }

  std::vector<int> smart_start() const {
    std::vector<int> map(n_, -1);
    std::vector<bool> used(m_, false);
    for (std::size_t i = 0; i < n_; ++i) {
      int best = -1;
      std::size_t best_w = 0;
      for (int j : candidates_[i]) {
        const std::size_t w = node_[key(static_cast<int>(i), j)];
        if (!used[static_cast<std::size_t>(j)] && w > best_w) {
          best = j;
          best_w = w;
        }
      }
      if (best >= 0) {
        map[i] = best;
        used[static_cast<std::size_t>(best)] = true;
      }
    }
    return map;
  }

  std::vector<int> random_start(Rng& rng) const {
    std::vector<int> map(n_, -1);
    std::vector<bool> used(m_, false);
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i : order) {
      std::vector<int> free;
      for (int j : candidates_[i])
        if (!used[static_cast<std::size_t>(j)]) free.push_back(j);
      if (free.empty()) continue;
      const int j = free[rng.below(free.size())];
      map[i] = j;
      used[static_cast<std::size_t>(j)] = true;
    }
    return map;
  }

  std::size_t climb(std::vector<int>& map) const {
    std::vector<int> owner(m_, -1);
    for (std::size_t i = 0; i < n_; ++i)
      if (map[i] >= 0) owner[static_cast<std::size_t>(map[i])] = static_cast<int>(i);
    for (;;) {
      long best_gain = 0;
      int kind = 0, bi = -1, bj = -1;
      for (std::size_t i = 0; i < n_; ++i) {
        const int ii = static_cast<int>(i);
        const long current = contribution(ii, map[i], map);
        // Move to a free candidate or to nothing.
        if (map[i] >= 0 && -current > best_gain) {
          best_gain = -current;
          kind = 1;
          bi = ii;
          bj = -1;
        }
        for (int j : candidates_[i]) {
          if (owner[static_cast<std::size_t>(j)] >= 0) continue;
          const long gain = contribution(ii, j, map) - current;
          if (gain > best_gain) {
            best_gain = gain;
            kind = 1;
            bi = ii;
            bj = j;
          }
        }
        // Swap targets with a later variable.
        for (std::size_t k = i + 1; k < n_; ++k) {
          const int kk = static_cast<int>(k);
          if (map[i] < 0 && map[k] < 0) continue;
          const long before = current + contribution(kk, map[k], map) -
                              (map[i] >= 0 && map[k] >= 0
                                   ? static_cast<long>(pair_weight(key(ii, map[i]), key(kk, map[k])))
                                   : 0);
          std::swap(map[i], map[k]);
          const long after = contribution(ii, map[i], map) + contribution(kk, map[k], map) -
                             (map[i] >= 0 && map[k] >= 0
                                  ? static_cast<long>(pair_weight(key(ii, map[i]), key(kk, map[k])))
                                  : 0);
          std::swap(map[i], map[k]);
          if (after - before > best_gain) {
            best_gain = after - before;
            kind = 2;
            bi = ii;
            bj = kk;
          }
        }
      }
      if (kind == 0) break;
      if (kind == 1) {
        if (map[static_cast<std::size_t>(bi)] >= 0) owner[static_cast<std::size_t>(map[static_cast<std::size_t>(bi)])] = -1;
        map[static_cast<std::size_t>(bi)] = bj;
        if (bj >= 0) owner[static_cast<std::size_t>(bj)] = bi;
      } else {
        std::swap(map[static_cast<std::size_t>(bi)], map[static_cast<std::size_t>(bj)]);
        for (int v : {bi, bj})
          if (map[static_cast<std::size_t>(v)] >= 0) owner[static_cast<std::size_t>(map[static_cast<std::size_t>(v)])] = v;
      }
    }
    return score(map);
  }

  std::size_t n_, m_;
  std::vector<std::size_t> node_;
  std::unordered_map<std::size_t, std::vector<std::pair<std::size_t, std::size_t>>> pairs_;
  std::vector<std::vector<int>> candidates_;
};

}  // namespace detail

/// Best alignment over all injective variable maps.
inline SmatchResult smatch_exhaustive(const AmrGraph& g1, const AmrGraph& g2) {
  const detail::IndexedAmr a(g1), b(g2);
  // Enumerate from the smaller side; the matched count is symmetric.
  const std::size_t matched = a.size() <= b.size() ? detail::ExhaustiveAligner(a, b).run()
                                                   : detail::ExhaustiveAligner(b, a).run();
  auto r = smatch_scores(matched, a.triple_count(), b.triple_count());
  r.exhaustive = true;
  return r;
}

/// Steepest-ascent hill climbing with reassign and swap moves from one
/// concept-guided start plus `restarts` random starts.
inline SmatchResult smatch_hill_climb(const AmrGraph& g1, const AmrGraph& g2,
                                      std::size_t restarts = 4, std::uint64_t seed = 0) {
  const detail::IndexedAmr a(g1), b(g2);
  Rng rng(seed);
  const std::size_t matched = detail::HillClimber(a, b).run(restarts, rng);
  return smatch_scores(matched, a.triple_count(), b.triple_count());
}

inline SmatchResult smatch(const AmrGraph& g1, const AmrGraph& g2, const SmatchOptions& opts = {}) {
  if (opts.restarts < 1) throw Error(ErrorCode::InvalidConfig, "restarts must be at least 1");
  if (std::min(g1.instances.size(), g2.instances.size()) <= opts.exhaustive_limit)
    return smatch_exhaustive(g1, g2);
  return smatch_hill_climb(g1, g2, opts.restarts, opts.seed);
}

/// Corpus score from summed counts over aligned graph pairs.
inline SmatchResult smatch_corpus(const std::vector<AmrGraph>& left, const std::vector<AmrGraph>& right,
                                  const SmatchOptions& opts = {}) {
  if (left.size() != right.size())
    throw Error(ErrorCode::LengthMismatch, "graph lists differ in length");
  if (left.empty()) throw Error(ErrorCode::EmptyInput, "no graphs to score");
  std::size_t matched = 0, l = 0, r = 0;
  bool all_exhaustive = true;
  for (std::size_t i = 0; i < left.size(); ++i) {
    auto s = smatch(left[i], right[i], opts);
    matched += s.matched;
    l += s.left_triples;
    r += s.right_triples;
    all_exhaustive = all_exhaustive && s.exhaustive;
  }
  auto out = smatch_scores(matched, l, r);
  out.exhaustive = all_exhaustive;
  return out;
}

}  // namespace crossrecipe
