#pragma once

// Meta-evaluation (Kendall tau-b between metric scores and human ratings,
// Bonferroni-adjusted significance) and literal-translation rates.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "crossrecipe/corpus.hpp"
#include "crossrecipe/error.hpp"
#include "crossrecipe/unicode.hpp"
#include "crossrecipe/util.hpp"

namespace crossrecipe {

struct KendallResult {
  double tau = 0.0;
  double p_value = 1.0;
  bool exact_p = false;
};

namespace detail {

struct TieStats {
  long long pairs = 0;      // sum t(t-1)/2
  double cubic = 0.0;       // sum t(t-1)(t-2)
  double spread = 0.0;      // sum t(t-1)(2t+5)
};

inline TieStats tie_stats(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  TieStats s;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double t = static_cast<double>(j - i);
    s.pairs += static_cast<long long>((j - i) * (j - i - 1) / 2);
    s.cubic += t * (t - 1) * (t - 2);
    s.spread += t * (t - 1) * (2 * t + 5);
    i = j;
  }
  return s;
}

// Merge sort counting exchanges (pairs out of order).
inline long long merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                             std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<long>(lo), buf.begin() + static_cast<long>(hi),
            v.begin() + static_cast<long>(lo));
  return swaps;
}

struct KendallCounts {
  long long concordant_minus_discordant = 0;
  long long untied_x = 0;  // pairs not tied in x
  long long untied_y = 0;
};

// Knight's O(n log n) counting.
inline KendallCounts kendall_counts(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  const long long n0 = static_cast<long long>(n * (n - 1) / 2);
  long long n1 = 0, n3 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[idx[j]] == x[idx[i]]) ++j;
    n1 += static_cast<long long>((j - i) * (j - i - 1) / 2);
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && y[idx[b]] == y[idx[a]]) ++b;
      n3 += static_cast<long long>((b - a) * (b - a - 1) / 2);
      a = b;
    }
    i = j;
  }
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const long long swaps = merge_count(ys, buf, 0, n);
  long long n2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && ys[j] == ys[i]) ++j;
    n2 += static_cast<long long>((j - i) * (j - i - 1) / 2);
    i = j;
  }
  return {n0 - n1 - n2 + n3 - 2 * swaps, n0 - n1, n0 - n2};
}

inline double tau_from_counts(const KendallCounts& c) {
  return static_cast<double>(c.concordant_minus_discordant) /
         std::sqrt(static_cast<double>(c.untied_x) * static_cast<double>(c.untied_y));
}

}  // namespace detail

inline constexpr std::size_t kExactKendallLimit = 8;

/// Tau-b with tie correction. Two-sided p-value by enumerating every
/// permutation of y when n <= 8, otherwise the tie-corrected normal
/// approximation.
inline KendallResult kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::LengthMismatch, "lists have " + std::to_string(x.size()) + " and " +
                                               std::to_string(y.size()) + " elements");
  if (x.size() < 2) throw Error(ErrorCode::DegenerateInput, "need at least two observations");
  const auto counts = detail::kendall_counts(x, y);
  if (counts.untied_x == 0 || counts.untied_y == 0)
    throw Error(ErrorCode::DegenerateInput, "all values tied in one list");
  KendallResult r;
  r.tau = std::clamp(detail::tau_from_counts(counts), -1.0, 1.0);
  const std::size_t n = x.size();
  if (n <= kExactKendallLimit) {
    std::vector<double> perm = y;
    std::sort(perm.begin(), perm.end());
    const long long observed = std::llabs(counts.concordant_minus_discordant);
    std::size_t extreme = 0, total = 0;
    do {
      ++total;
      if (std::llabs(detail::kendall_counts(x, perm).concordant_minus_discordant) >= observed) ++extreme;
    } while (std::next_permutation(perm.begin(), perm.end()));
    // Distinct arrangements of tied values are counted once, which leaves
    // the proportion unchanged.
    r.p_value = static_cast<double>(extreme) / static_cast<double>(total);
    r.exact_p = true;
  } else {
    const auto tx = detail::tie_stats(x), ty = detail::tie_stats(y);
    const double nn = static_cast<double>(n);
    const double m = nn * (nn - 1);
    const double var = (m * (2 * nn + 5) - tx.spread - ty.spread) / 18 +
                       2.0 * static_cast<double>(tx.pairs) * static_cast<double>(ty.pairs) / m +
                       tx.cubic * ty.cubic / (9 * m * (nn - 2));
    const double z = static_cast<double>(counts.concordant_minus_discordant) / std::sqrt(var);
    r.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
  }
  return r;
}

inline double bonferroni_threshold(double alpha, std::size_t m) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidConfig, "alpha must be in (0, 1)");
  if (m < 1) throw Error(ErrorCode::InvalidConfig, "m must be at least 1");
  return alpha / static_cast<double>(m);
}

// --- human ratings ---------------------------------------------------------

inline constexpr std::array<std::string_view, 5> kCriteria = {"GRA", "CON", "PRE", "CUL", "avg"};

struct RatingRecord {
  std::string pair_id;
  std::string evaluator_id;
  int gra = 0, con = 0, pre = 0, cul = 0;
};

inline void validate(const RatingRecord& r) {
  for (int v : {r.gra, r.con, r.pre, r.cul})
    if (v < 1 || v > 7)
      throw Error(ErrorCode::OutOfRange, "rating " + std::to_string(v) + " for pair " + r.pair_id +
                                             " is outside 1..7");
}

inline RatingRecord rating_from_json(const nlohmann::json& j) {
  try {
    RatingRecord r{j.at("pair_id").get<std::string>(), j.at("evaluator_id").get<std::string>(),
                   j.at("gra").get<int>(), j.at("con").get<int>(), j.at("pre").get<int>(),
                   j.at("cul").get<int>()};
    validate(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ValidationFailed, std::string("rating record: ") + e.what());
  }
}

inline std::vector<RatingRecord> read_ratings(const std::filesystem::path& path) {
  std::vector<RatingRecord> out;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    out.push_back(rating_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

/// Per pair: mean over evaluators of GRA, CON, PRE, CUL, then their average.
inline std::map<std::string, std::array<double, 5>> mean_ratings(const std::vector<RatingRecord>& ratings) {
  std::map<std::string, std::array<double, 5>> sums;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : ratings) {
    validate(r);
    auto& s = sums[r.pair_id];
    s[0] += r.gra;
    s[1] += r.con;
    s[2] += r.pre;
    s[3] += r.cul;
    ++counts[r.pair_id];
  }
  for (auto& [id, s] : sums) {
    const double n = static_cast<double>(counts[id]);
    for (std::size_t k = 0; k < 4; ++k) s[k] /= n;
    s[4] = (s[0] + s[1] + s[2] + s[3]) / 4.0;
  }
  return sums;
}

/// metric name -> pair id -> score
using MetricScores = std::map<std::string, std::map<std::string, double>>;

struct CorrelationCell {
  std::optional<KendallResult> result;
  bool significant = false;
  std::string error;  // set when the cell could not be computed
};

struct CorrelationTable {
  std::vector<std::string> metrics;
  std::size_t comparisons = 0;
  double alpha = 0.05;
  double threshold = 0.0;
  std::array<std::vector<CorrelationCell>, 5> rows;  // indexed like kCriteria
};

/// `comparisons` of 0 means the table's own grid size (criteria x metrics).
inline CorrelationTable correlation_table(const std::vector<RatingRecord>& ratings,
                                          const MetricScores& scores, double alpha = 0.05,
                                          std::size_t comparisons = 0) {
  if (scores.empty()) throw Error(ErrorCode::MissingScores, "no metric scores supplied");
  const auto means = mean_ratings(ratings);
  CorrelationTable t;
  for (const auto& [name, per_pair] : scores) t.metrics.push_back(name);
  t.alpha = alpha;
  t.comparisons = comparisons ? comparisons : kCriteria.size() * t.metrics.size();
  t.threshold = bonferroni_threshold(alpha, t.comparisons);

  const auto& reference = scores.begin()->second;
  std::vector<std::string> pairs;
  for (const auto& [id, v] : reference) pairs.push_back(id);
  for (const auto& [name, per_pair] : scores) {
    if (per_pair.size() != pairs.size())
      throw Error(ErrorCode::MissingScores, "metric " + name + " covers a different set of pairs");
    for (const auto& id : pairs)
      if (!per_pair.count(id)) throw Error(ErrorCode::MissingScores, "metric " + name + " lacks pair " + id);
  }
  for (const auto& id : pairs)
    if (!means.count(id)) throw Error(ErrorCode::MissingScores, "pair " + id + " has no rating");

  for (std::size_t c = 0; c < kCriteria.size(); ++c) {
    std::vector<double> human;
    for (const auto& id : pairs) human.push_back(means.at(id)[c]);
    for (const auto& name : t.metrics) {
      std::vector<double> metric;
      for (const auto& id : pairs) metric.push_back(scores.at(name).at(id));
      CorrelationCell cell;
      try {
        cell.result = kendall_tau(human, metric);
        cell.significant = cell.result->p_value < t.threshold;
      } catch (const Error& e) {
        cell.error = to_string(e.code());
      }
      t.rows[c].push_back(cell);
    }
  }
  return t;
}

inline std::string format_table(const CorrelationTable& t) {
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-6s", "");
  out += buf;
  for (const auto& m : t.metrics) {
    std::snprintf(buf, sizeof buf, " %12s", m.c_str());
    out += buf;
  }
  out += "\n";
  for (std::size_t c = 0; c < kCriteria.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%-6s", std::string(kCriteria[c]).c_str());
    out += buf;
    for (const auto& cell : t.rows[c]) {
      if (cell.result)
        std::snprintf(buf, sizeof buf, " %11.3f%s", cell.result->tau, cell.significant ? "*" : " ");
      else
        std::snprintf(buf, sizeof buf, " %12s", cell.error.c_str());
      out += buf;
    }
    out += "\n";
  }
  std::snprintf(buf, sizeof buf, "* p < %.6g (alpha %.3g / m %zu)\n", t.threshold, t.alpha, t.comparisons);
  out += buf;
  return out;
}

inline nlohmann::ordered_json to_json(const CorrelationTable& t) {
  nlohmann::ordered_json j;
  j["alpha"] = t.alpha;
  j["comparisons"] = t.comparisons;
  j["threshold"] = t.threshold;
  j["cells"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < kCriteria.size(); ++c) {
    for (std::size_t m = 0; m < t.metrics.size(); ++m) {
      const auto& cell = t.rows[c][m];
      nlohmann::ordered_json e{{"criterion", kCriteria[c]}, {"metric", t.metrics[m]}};
      if (cell.result) {
        e["tau"] = cell.result->tau;
        e["p_value"] = cell.result->p_value;
        e["significant"] = cell.significant;
      } else {
        e["error"] = cell.error;
      }
      j["cells"].push_back(e);
    }
  }
  return j;
}

// --- literal translation rate ----------------------------------------------

struct ConceptLexicon {
  std::string name;
  Lang source_lang = Lang::En;
  Lang target_lang = Lang::Zh;
  std::vector<std::string> source_terms;
  std::vector<std::string> target_terms;
};

namespace detail {

inline std::vector<std::string> split_terms(const std::string& value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t end = value.find(',', start);
    if (end == std::string::npos) end = value.size();
    auto parts = unicode::split_whitespace(value.substr(start, end - start));
    if (!parts.empty()) out.push_back(unicode::join(parts, " "));
    start = end + 1;
  }
  return out;
}

}  // namespace detail

/// Sectioned file: one [name] per concept with source_lang, target_lang,
/// source and target (comma-separated terms).
inline std::vector<ConceptLexicon> load_concepts(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::Unparseable, e.what());
  }
  std::vector<ConceptLexicon> out;
  for (const auto& [name, section] : tree) {
    ConceptLexicon c;
    c.name = name;
    c.source_lang = parse_lang(section.get<std::string>("source_lang", "en"));
    c.target_lang = parse_lang(section.get<std::string>("target_lang", "zh"));
    c.source_terms = detail::split_terms(section.get<std::string>("source", ""));
    c.target_terms = detail::split_terms(section.get<std::string>("target", ""));
    if (c.source_terms.empty() || c.target_terms.empty())
      throw Error(ErrorCode::InvalidConfig, "concept " + name + " needs source and target terms");
    out.push_back(std::move(c));
  }
  return out;
}

/// Occurrences of any term: whole words, case-insensitive for en;
/// substrings for zh.
inline std::size_t count_terms(std::string_view text, const std::vector<std::string>& terms, Lang lang) {
  const std::string hay = lang == Lang::En ? unicode::ascii_lower(std::string(text)) : std::string(text);
  auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  std::size_t total = 0;
  for (const auto& raw : terms) {
    const std::string term = lang == Lang::En ? unicode::ascii_lower(raw) : raw;
    if (term.empty()) continue;
    std::size_t pos = 0;
    while ((pos = hay.find(term, pos)) != std::string::npos) {
      const std::size_t end = pos + term.size();
      const bool bounded = lang == Lang::Zh ||
                           ((pos == 0 || !word_char(hay[pos - 1])) && (end == hay.size() || !word_char(hay[end])));
      if (bounded) {
        ++total;
        pos = end;
      } else {
        ++pos;
      }
    }
  }
  return total;
}

struct ConceptRateReport {
  std::string concept_name;
  std::size_t c_source = 0;
  std::size_t c_target = 0;      // capped per source occurrence
  std::size_t raw_target = 0;    // uncapped
  double rate = 0.0;
  double raw_rate = 0.0;
};

/// Pair i contributes min(source hits, target hits) to c_target.
inline ConceptRateReport literal_rate(const std::vector<std::string>& sources,
                                      const std::vector<std::string>& targets,
                                      const ConceptLexicon& lexicon) {
  if (sources.size() != targets.size())
    throw Error(ErrorCode::LengthMismatch, "source and target lists differ in length");
  ConceptRateReport r;
  r.concept_name = lexicon.name;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const std::size_t s = count_terms(sources[i], lexicon.source_terms, lexicon.source_lang);
    const std::size_t t = count_terms(targets[i], lexicon.target_terms, lexicon.target_lang);
    r.c_source += s;
    r.c_target += std::min(s, t);
    r.raw_target += t;
  }
  if (r.c_source == 0)
    throw Error(ErrorCode::UndefinedRate, "concept " + lexicon.name + " never occurs in the sources");
  r.rate = static_cast<double>(r.c_target) / static_cast<double>(r.c_source);
  r.raw_rate = static_cast<double>(r.raw_target) / static_cast<double>(r.c_source);
  return r;
}

inline ConceptRateReport literal_rate(const std::vector<Recipe>& sources,
                                      const std::vector<Recipe>& targets,
                                      const ConceptLexicon& lexicon) {
  std::vector<std::string> s, t;
  for (const auto& r : sources) s.push_back(strip_meta(serialize_recipe(r)));
  for (const auto& r : targets) t.push_back(strip_meta(serialize_recipe(r)));
  return literal_rate(s, t, lexicon);
}

inline nlohmann::ordered_json to_json(const ConceptRateReport& r) {
  return {{"concept", r.concept_name}, {"c_source", r.c_source}, {"c_target", r.c_target},
          {"raw_target", r.raw_target}, {"rate", r.rate},       {"raw_rate", r.raw_rate}};
}

}  // namespace crossrecipe
