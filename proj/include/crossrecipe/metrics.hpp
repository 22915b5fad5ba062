#pragma once

// Surface metrics over hypothesis/reference pairs: corpus BLEU, chrF and
// ROUGE-L. BLEU and chrF reproduce sacrebleu 2.3.1 defaults.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <unordered_map>
#include <vector>

#include "crossrecipe/corpus.hpp"
#include "crossrecipe/error.hpp"
#include "crossrecipe/unicode.hpp"

namespace crossrecipe {

struct EvalPair {
  std::string hypothesis;
  std::vector<std::string> references;
  Lang lang = Lang::En;
};

namespace detail {

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

inline std::string rstrip(std::string_view s) {
  std::u32string cps = unicode::decode(s);
  while (!cps.empty() && unicode::is_space(cps.back())) cps.pop_back();
  return unicode::encode(cps);
}

inline void check_pairs(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no pairs to score");
  for (const auto& p : pairs)
    if (p.references.empty()) throw Error(ErrorCode::EmptyInput, "pair without references");
}

}  // namespace detail

/// The mteval-v13a tokenizer.
inline std::string tokenize_13a(std::string_view text) {
  static const std::regex kSymbols(R"(([\x7B-\x7E\x5B-\x60\x20-\x26\x28-\x2B\x3A-\x40\x2F]))");
  static const std::regex kPeriodCommaAfter(R"(([^0-9])([.,]))");
  static const std::regex kPeriodCommaBefore(R"(([.,])([^0-9]))");
  static const std::regex kDashAfterDigit(R"(([0-9])(-))");
  std::string line = detail::replace_all(std::string(text), "<skipped>", "");
  line = detail::replace_all(line, "-\n", "");
  line = detail::replace_all(line, "\n", " ");
  if (line.find('&') != std::string::npos) {
    line = detail::replace_all(line, "&quot;", "\"");
    line = detail::replace_all(line, "&amp;", "&");
    line = detail::replace_all(line, "&lt;", "<");
    line = detail::replace_all(line, "&gt;", ">");
  }
  line = " " + line + " ";
  line = std::regex_replace(line, kSymbols, " $1 ");
  line = std::regex_replace(line, kPeriodCommaAfter, "$1 $2 ");
  line = std::regex_replace(line, kPeriodCommaBefore, " $1 $2");
  line = std::regex_replace(line, kDashAfterDigit, "$1 $2 ");
  return unicode::join(unicode::split_whitespace(line), " ");
}

/// Tokens that BLEU and ROUGE-L count: 13a for en, dictionary segments for zh.
inline std::vector<std::string> metric_tokens(std::string_view text, Lang lang,
                                              const SegmenterDictionary* dict) {
  const std::string flat = detail::rstrip(flatten(text));
  if (lang == Lang::En) return unicode::split_whitespace(tokenize_13a(flat));
  return surface_tokens(flat, Lang::Zh, dict);
}

struct BleuStats {
  std::size_t sys_len = 0;
  std::size_t ref_len = 0;
  std::array<std::size_t, 4> correct{};
  std::array<std::size_t, 4> total{};

  BleuStats& operator+=(const BleuStats& o) {
    sys_len += o.sys_len;
    ref_len += o.ref_len;
    for (std::size_t n = 0; n < 4; ++n) {
      correct[n] += o.correct[n];
      total[n] += o.total[n];
    }
    return *this;
  }
};

namespace detail {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

inline NgramCounts word_ngrams(const std::vector<std::string>& toks, std::size_t max_order) {
  NgramCounts out;
  for (std::size_t n = 1; n <= max_order; ++n) {
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      std::string key = std::to_string(n);
      for (std::size_t j = i; j < i + n; ++j) key += ' ' + toks[j];
      ++out[key];
    }
  }
  return out;
}

}  // namespace detail

inline BleuStats bleu_segment_stats(const std::vector<std::string>& hyp,
                                    const std::vector<std::vector<std::string>>& refs) {
  BleuStats s;
  detail::NgramCounts ref_max;
  long closest_diff = -1;
  std::size_t closest_len = 0;
  for (const auto& ref : refs) {
    for (const auto& [ng, c] : detail::word_ngrams(ref, 4)) ref_max[ng] = std::max(ref_max[ng], c);
    const long diff = std::labs(static_cast<long>(hyp.size()) - static_cast<long>(ref.size()));
    if (closest_diff == -1 || diff < closest_diff) {
      closest_diff = diff;
      closest_len = ref.size();
    } else if (diff == closest_diff && ref.size() < closest_len) {
      closest_len = ref.size();
    }
  }
  s.sys_len = hyp.size();
  s.ref_len = closest_len;
  for (const auto& [ng, c] : detail::word_ngrams(hyp, 4)) {
    const std::size_t n = static_cast<std::size_t>(ng[0] - '1');
    s.total[n] += c;
    auto it = ref_max.find(ng);
    if (it != ref_max.end()) s.correct[n] += std::min(c, it->second);
  }
  return s;
}

/// Exponential ("exp") smoothing, no effective order.
inline double bleu_from_stats(const BleuStats& s) {
  double bp = 1.0;
  if (s.sys_len < s.ref_len)
    bp = s.sys_len > 0 ? std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.sys_len))
                       : 0.0;
  if (std::all_of(s.correct.begin(), s.correct.end(), [](std::size_t c) { return c == 0; }))
    return 0.0;
  std::array<double, 4> precisions{};
  double smooth = 1.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (s.total[n] == 0) break;
    if (s.correct[n] == 0) {
      smooth *= 2.0;
      precisions[n] = 100.0 / (smooth * static_cast<double>(s.total[n]));
    } else {
      precisions[n] = 100.0 * static_cast<double>(s.correct[n]) / static_cast<double>(s.total[n]);
    }
  }
  double log_sum = 0.0;
  for (double p : precisions) log_sum += p == 0.0 ? -9999999999.0 : std::log(p);
  return bp * std::exp(log_sum / 4.0);
}

inline BleuStats bleu_corpus_stats(const std::vector<EvalPair>& pairs,
                                   const SegmenterDictionary* dict = nullptr) {
  detail::check_pairs(pairs);
  BleuStats total;
  for (const auto& p : pairs) {
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : p.references) refs.push_back(metric_tokens(r, p.lang, dict));
    total += bleu_segment_stats(metric_tokens(p.hypothesis, p.lang, dict), refs);
  }
  return total;
}

inline double bleu(const std::vector<EvalPair>& pairs, const SegmenterDictionary* dict = nullptr) {
  return bleu_from_stats(bleu_corpus_stats(pairs, dict));
}

inline constexpr std::size_t kChrfOrder = 6;
inline constexpr double kChrfBeta = 2.0;

/// Per order: hypothesis n-grams, reference n-grams, matches.
using ChrfStats = std::array<std::array<std::size_t, 3>, kChrfOrder>;

namespace detail {

using CharNgrams = std::array<std::unordered_map<std::u32string, std::size_t>, kChrfOrder>;

inline CharNgrams char_ngrams(std::string_view text) {
  std::u32string chars;
  for (char32_t c : unicode::decode(text))
    if (!unicode::is_space(c)) chars.push_back(c);
  CharNgrams out;
  for (std::size_t n = 1; n <= kChrfOrder; ++n)
    for (std::size_t i = 0; i + n <= chars.size(); ++i) ++out[n - 1][chars.substr(i, n)];
  return out;
}

}  // namespace detail

inline double chrf_from_stats(const ChrfStats& stats) {
  const double factor = kChrfBeta * kChrfBeta;
  double avg_prec = 0.0, avg_rec = 0.0;
  std::size_t effective = 0;
  for (const auto& [n_hyp, n_ref, n_match] : stats) {
    if (n_hyp > 0 && n_ref > 0) {
      avg_prec += static_cast<double>(n_match) / static_cast<double>(n_hyp);
      avg_rec += static_cast<double>(n_match) / static_cast<double>(n_ref);
      ++effective;
    }
  }
  if (effective == 0) return 0.0;
  avg_prec /= static_cast<double>(effective);
  avg_rec /= static_cast<double>(effective);
  if (avg_prec + avg_rec == 0.0) return 0.0;
  return 100.0 * (1 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec);
}

/// Statistics against the reference with the best sentence-level score.
inline ChrfStats chrf_segment_stats(std::string_view hypothesis,
                                    const std::vector<std::string>& references) {
  const auto hyp = detail::char_ngrams(hypothesis);
  ChrfStats best{};
  double best_f = -1.0;
  for (const auto& ref_text : references) {
    const auto ref = detail::char_ngrams(ref_text);
    ChrfStats stats{};
    for (std::size_t n = 0; n < kChrfOrder; ++n) {
      std::size_t hyp_count = 0, match = 0, ref_count = 0;
      for (const auto& [ng, c] : hyp[n]) {
        hyp_count += c;
        auto it = ref[n].find(ng);
        if (it != ref[n].end()) match += std::min(c, it->second);
      }
      for (const auto& [ng, c] : ref[n]) ref_count += c;
      stats[n] = {ref[n].empty() ? 0 : hyp_count, ref_count, match};
    }
    const double f = chrf_from_stats(stats);
    if (f > best_f) {
      best_f = f;
      best = stats;
    }
  }
  return best;
}

inline double chrf(const std::vector<EvalPair>& pairs) {
  detail::check_pairs(pairs);
  ChrfStats total{};
  for (const auto& p : pairs) {
    std::vector<std::string> refs;
    for (const auto& r : p.references) refs.push_back(flatten(r));
    const auto s = chrf_segment_stats(flatten(p.hypothesis), refs);
    for (std::size_t n = 0; n < kChrfOrder; ++n)
      for (std::size_t j = 0; j < 3; ++j) total[n][j] += s[n][j];
  }
  return chrf_from_stats(total);
}

/// LCS length by the bit-parallel recurrence over the reference positions.
inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  const std::size_t words = (b.size() + 63) / 64;
  std::unordered_map<std::string, std::vector<std::uint64_t>> masks;
  for (std::size_t j = 0; j < b.size(); ++j) {
    auto& m = masks[b[j]];
    if (m.empty()) m.assign(words, 0);
    m[j / 64] |= std::uint64_t{1} << (j % 64);
  }
  std::vector<std::uint64_t> v(words, ~std::uint64_t{0});
  const std::vector<std::uint64_t> none(words, 0);
  for (const auto& tok : a) {
    auto it = masks.find(tok);
    const auto& m = it == masks.end() ? none : it->second;
    std::uint64_t carry = 0, borrow = 0;
    for (std::size_t w = 0; w < words; ++w) {
      const std::uint64_t u = v[w] & m[w];
      const std::uint64_t sum = v[w] + u;
      const std::uint64_t sum_c = sum + carry;
      const std::uint64_t next_carry = (sum < v[w]) || (sum_c < sum) ? 1 : 0;
      const std::uint64_t diff = v[w] - u;
      const std::uint64_t diff_b = diff - borrow;
      const std::uint64_t next_borrow = (v[w] < u) || (diff < borrow) ? 1 : 0;
      v[w] = sum_c | diff_b;
      carry = next_carry;
      borrow = next_borrow;
    }
  }
  std::size_t zeros = 0;
  for (std::size_t j = 0; j < b.size(); ++j)
    if (!((v[j / 64] >> (j % 64)) & 1)) ++zeros;
  return zeros;
}

/// LCS F-measure (beta 1) in [0, 1].
inline double rouge_l_sentence(const std::vector<std::string>& hyp,
                               const std::vector<std::string>& ref) {
  const std::size_t lcs = lcs_length(hyp, ref);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(hyp.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

/// Mean over pairs of the best reference, scaled to [0, 100].
inline double rouge_l(const std::vector<EvalPair>& pairs, const SegmenterDictionary* dict = nullptr) {
  detail::check_pairs(pairs);
  double sum = 0.0;
  for (const auto& p : pairs) {
    const auto hyp = metric_tokens(p.hypothesis, p.lang, dict);
    double best = 0.0;
    for (const auto& r : p.references)
      best = std::max(best, rouge_l_sentence(hyp, metric_tokens(r, p.lang, dict)));
    sum += best;
  }
  return 100.0 * sum / static_cast<double>(pairs.size());
}

inline constexpr std::string_view kMetricSignature =
    "bleu:case.mixed|tok.en:13a|tok.zh:dict-seg|smooth:exp|order:4;"
    "chrf:char6|word0|beta2|ws:no;rouge_l:lcs-f1|refs:max|corpus:mean;compat:sacrebleu-2.3.1";

struct ScoreReport {
  std::string system;
  double bleu = 0.0;
  double chrf = 0.0;
  double rouge_l = 0.0;
  std::optional<double> smatch_f1;
  double mean_tokens = 0.0;
  std::string signature{kMetricSignature};
};

inline ScoreReport score_system(const std::string& system, const std::vector<EvalPair>& pairs,
                                const SegmenterDictionary* dict = nullptr) {
  ScoreReport r;
  r.system = system;
  r.bleu = bleu(pairs, dict);
  r.chrf = chrf(pairs);
  r.rouge_l = rouge_l(pairs, dict);
  double tokens = 0.0;
  for (const auto& p : pairs) tokens += static_cast<double>(token_count(flatten(p.hypothesis), p.lang, dict));
  r.mean_tokens = tokens / static_cast<double>(pairs.size());
  return r;
}

inline nlohmann::ordered_json to_json(const ScoreReport& r) {
  nlohmann::ordered_json j{{"system", r.system},   {"bleu", r.bleu},
                           {"chrf", r.chrf},       {"rouge_l", r.rouge_l},
                           {"smatch_f1", nullptr}, {"mean_tokens", r.mean_tokens},
                           {"signature", r.signature}};
  if (r.smatch_f1) j["smatch_f1"] = *r.smatch_f1;
  return j;
}

/// Fixed-width text table, one row per system.
inline std::string format_reports(const std::vector<ScoreReport>& reports) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %8s %8s\n", "system", "BLEU", "chrF", "R-L",
                "Smatch", "tokens");
  out += line;
  for (const auto& r : reports) {
    char smatch[32] = "-";
    if (r.smatch_f1) std::snprintf(smatch, sizeof smatch, "%.4f", *r.smatch_f1);
    std::snprintf(line, sizeof line, "%-24s %8.2f %8.2f %8.2f %8s %8.1f\n", r.system.c_str(), r.bleu,
                  r.chrf, r.rouge_l, smatch, r.mean_tokens);
    out += line;
  }
  return out;
}

}  // namespace crossrecipe
