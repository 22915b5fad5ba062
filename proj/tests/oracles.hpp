#pragma once

// Slow, obviously-correct reference computations shared by the unit tests
// and the acceptance runner. None of these call the code under test.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "crossrecipe/embeddings.hpp"
#include "crossrecipe/penman.hpp"
#include "crossrecipe/util.hpp"

namespace crossrecipe::oracles {

/// Published prompt strings, verbatim, with the recipe slot shown as the
/// bracketed placeholder.
inline const std::string kCompletionEnZh = "[English recipe] 中文菜谱，适合中国人的:";
inline const std::string kCompletionZhEn =
    "[Chinese recipe] Recipe in English, adapted to an English-speaking audience:";
inline const std::string kInstructionEnZh =
    "Convert the provided English recipe into a Chinese recipe so that it fits within Chinese cooking culture, is "
    "consistent with Chinese cooking knowledge, and meets a Chinese recipe's style. [English recipe]";
inline const std::string kInstructionZhEn =
    "Convert the provided Chinese recipe into an English recipe so that it fits within Western cooking culture, is "
    "consistent with Western cooking knowledge, and meets a Western recipe's style. [Chinese recipe]";

/// Textbook quadratic LCS table.
inline std::size_t lcs_table(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
  return t[a.size()][b.size()];
}

/// Tau-b by straight pair counting over all i < j.
inline double tau_by_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  long long s = 0, untied_x = 0, untied_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const int a = (x[i] > x[j]) - (x[i] < x[j]);
      const int b = (y[i] > y[j]) - (y[i] < y[j]);
      s += a * b;
      untied_x += a != 0;
      untied_y += b != 0;
    }
  return static_cast<double>(s) / std::sqrt(static_cast<double>(untied_x) * static_cast<double>(untied_y));
}

/// Best triple overlap over every injective partial map from g1 variables
/// into g2 variables, scored by renaming g1's triples and intersecting sets.
inline std::size_t smatch_brute_force(const AmrGraph& g1, const AmrGraph& g2) {
  const auto v1 = g1.variables(), v2 = g2.variables();
  const auto target = g2.triples();
  std::size_t best = 0;
  std::vector<int> map(v1.size(), -1);
  std::vector<bool> used(v2.size(), false);
  auto rec = [&](auto&& self, std::size_t i) -> void {
    if (i == v1.size()) {
      std::map<std::string, std::string> rename;
      for (std::size_t k = 0; k < v1.size(); ++k)
        rename[v1[k]] = map[k] < 0 ? "<none>" + v1[k] : v2[static_cast<std::size_t>(map[k])];
      std::size_t hit = 0;
      for (const auto& [label, s, t] : g1.triples()) {
        std::string rt = t;
        bool is_var = false;
        for (const auto& e : g1.edges)
          if (e.role == label && e.source == s && e.target == t) is_var = e.target_is_var;
        if (is_var) rt = rename[t];
        if (target.count({label, rename[s], rt})) ++hit;
      }
      best = std::max(best, hit);
      return;
    }
    map[i] = -1;
    self(self, i + 1);
    for (std::size_t j = 0; j < v2.size(); ++j) {
      if (used[j]) continue;
      used[j] = true;
      map[i] = static_cast<int>(j);
      self(self, i + 1);
      used[j] = false;
    }
    map[i] = -1;
  };
  rec(rec, 0);
  return best;
}

inline std::vector<int> shuffled_names(std::size_t n, Rng& rng) {
  std::vector<int> names(n);
  std::iota(names.begin(), names.end(), 0);
  rng.shuffle(names);
  return names;
}

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Cosine scan over every pair without matrix products; keeps the k best
/// per source at or above the threshold, ties by lower target index.
inline std::set<IndexPair> knn_brute_force(const Matrix& s, const Matrix& t, std::size_t k, double threshold,
                                           std::map<IndexPair, double>& cos) {
  std::set<IndexPair> out;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    std::vector<std::pair<double, std::size_t>> row;
    for (Eigen::Index j = 0; j < t.rows(); ++j) {
      double dot = 0, na = 0, nb = 0;
      for (Eigen::Index c = 0; c < s.cols(); ++c) {
        dot += s(i, c) * t(j, c);
        na += s(i, c) * s(i, c);
        nb += t(j, c) * t(j, c);
      }
      const double c = dot / std::sqrt(na * nb);
      if (c >= threshold) row.emplace_back(-c, static_cast<std::size_t>(j));
    }
    std::sort(row.begin(), row.end());
    for (std::size_t r = 0; r < std::min(k, row.size()); ++r) {
      out.emplace(static_cast<std::size_t>(i), row[r].second);
      cos[{static_cast<std::size_t>(i), row[r].second}] = -row[r].first;
    }
  }
  return out;
}

inline Matrix gaussian(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
  return m;
}

/// Rows scattered around randomly chosen centers, so that many pairs clear
/// a high cosine threshold and many sources have more than k candidates.
inline Matrix clustered(Rng& rng, std::size_t n, std::size_t d, const Matrix& centers, double noise) {
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(centers.rows())));
    for (std::size_t j = 0; j < d; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          centers(c, static_cast<Eigen::Index>(j)) + noise * rng.normal();
  }
  return m;
}

}  // namespace crossrecipe::oracles
