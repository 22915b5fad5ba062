#pragma once

// Recipe ingestion: cleaning, the Title/Ingredients/Steps serialization,
// language-aware token counting and corpus statistics.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"

#include "crossrecipe/error.hpp"
#include "crossrecipe/unicode.hpp"
#include "crossrecipe/util.hpp"

namespace crossrecipe {

enum class Lang { En, Zh };

inline std::string_view to_string(Lang lang) { return lang == Lang::En ? "en" : "zh"; }

inline Lang parse_lang(std::string_view s) {
  if (s == "en") return Lang::En;
  if (s == "zh") return Lang::Zh;
  throw Error(ErrorCode::Unparseable, "unknown language tag '" + std::string(s) + "'");
}

struct Recipe {
  std::string id;
  Lang lang = Lang::En;
  std::string title;
  std::vector<std::string> ingredients;
  std::vector<std::string> steps;

  bool operator==(const Recipe&) const = default;
};

struct Rejection {
  std::string id;
  ErrorCode reason = ErrorCode::Unparseable;
  std::string detail;
};

struct CleanOptions {
  /// Code points removed in addition to the emoji table.
  std::vector<unicode::Range> special_symbols = default_special_symbols();

  static std::vector<unicode::Range> default_special_symbols() {
    return {
        {0x0000, 0x0008}, {0x000E, 0x001F}, {0x007F, 0x009F},  // control characters
        {0x00A9, 0x00A9}, {0x00AE, 0x00AE}, {0x2122, 0x2122},  // (c) (R) TM
        {0x200B, 0x200C}, {0x2060, 0x2060}, {0xFEFF, 0xFEFF},  // zero-width marks
        {0xE000, 0xF8FF},                                      // private use area
        {0xFFFC, 0xFFFD},                                      // replacement characters
    };
  }
};

/// Strips emoji and special symbols, collapses whitespace runs (including
/// newlines) into one space and trims.
inline std::string clean_text(std::string_view text, const CleanOptions& opts = {}) {
  std::u32string out;
  bool pending_space = false;
  for (char32_t c : unicode::decode(text)) {
    if (unicode::is_emoji(c) || unicode::in_ranges(c, opts.special_symbols)) continue;
    if (unicode::is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return unicode::encode(out);
}

namespace detail {

inline std::optional<std::vector<std::string>> string_list(const nlohmann::json& v) {
  std::vector<std::string> out;
  if (v.is_string()) {
    std::istringstream in(v.get<std::string>());
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }
  if (!v.is_array()) return std::nullopt;
  for (const auto& item : v) {
    if (!item.is_string()) return std::nullopt;
    out.push_back(item.get<std::string>());
  }
  return out;
}

inline std::vector<std::string> clean_lines(const std::vector<std::string>& lines,
                                            const CleanOptions& opts) {
  std::vector<std::string> out;
  for (const auto& line : lines) {
    std::string c = clean_text(line, opts);
    if (!c.empty()) out.push_back(std::move(c));
  }
  return out;
}

}  // namespace detail

/// Validates and cleans one raw record. Lines that are empty after cleaning
/// are dropped; a field left with nothing is an EmptyField rejection.
inline std::variant<Recipe, Rejection> clean_recipe(const nlohmann::json& raw,
                                                    const CleanOptions& opts = {}) {
  Rejection rej;
  if (!raw.is_object()) {
    rej.detail = "record is not an object";
    return rej;
  }
  if (auto it = raw.find("id"); it != raw.end()) {
    if (it->is_string()) rej.id = it->get<std::string>();
    else if (it->is_number_integer()) rej.id = std::to_string(it->get<long long>());
  }
  if (rej.id.empty()) {
    rej.detail = "missing id";
    return rej;
  }
  for (const char* field : {"lang", "title", "ingredients", "steps"}) {
    if (!raw.contains(field)) {
      rej.detail = std::string("missing field ") + field;
      return rej;
    }
  }
  Recipe r;
  r.id = rej.id;
  if (!raw["lang"].is_string() || !raw["title"].is_string()) {
    rej.detail = "lang and title must be strings";
    return rej;
  }
  try {
    r.lang = parse_lang(raw["lang"].get<std::string>());
  } catch (const Error& e) {
    rej.detail = e.what();
    return rej;
  }
  auto ingredients = detail::string_list(raw["ingredients"]);
  auto steps = detail::string_list(raw["steps"]);
  if (!ingredients || !steps) {
    rej.detail = "ingredients and steps must be lists of strings";
    return rej;
  }
  r.title = clean_text(raw["title"].get<std::string>(), opts);
  r.ingredients = detail::clean_lines(*ingredients, opts);
  r.steps = detail::clean_lines(*steps, opts);
  rej.reason = ErrorCode::EmptyField;
  if (r.title.empty()) rej.detail = "title";
  else if (r.ingredients.empty()) rej.detail = "ingredients";
  else if (r.steps.empty()) rej.detail = "steps";
  if (!rej.detail.empty()) return rej;
  return r;
}

inline nlohmann::ordered_json to_json(const Recipe& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["lang"] = std::string(to_string(r.lang));
  j["title"] = r.title;
  j["ingredients"] = r.ingredients;
  j["steps"] = r.steps;
  return j;
}

/// Strict conversion for already-clean records (no cleaning applied).
inline Recipe recipe_from_json(const nlohmann::json& j) {
  try {
    Recipe r;
    r.id = j.at("id").is_string() ? j.at("id").get<std::string>()
                                  : std::to_string(j.at("id").get<long long>());
    r.lang = parse_lang(j.at("lang").get<std::string>());
    r.title = j.at("title").get<std::string>();
    r.ingredients = j.at("ingredients").get<std::vector<std::string>>();
    r.steps = j.at("steps").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Unparseable, e.what());
  }
}

// Headings are language-invariant meta-text.
inline constexpr std::string_view kTitleHeading = "Title:";
inline constexpr std::string_view kIngredientsHeading = "Ingredients:";
inline constexpr std::string_view kStepsHeading = "Steps:";

inline std::string serialize_recipe(const Recipe& r) {
  std::string out;
  out += kTitleHeading;
  out += ' ';
  out += r.title;
  out += '\n';
  out += kIngredientsHeading;
  out += '\n';
  for (const auto& line : r.ingredients) out += line + '\n';
  out += kStepsHeading;
  out += '\n';
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    out += r.steps[i];
    if (i + 1 < r.steps.size()) out += '\n';
  }
  return out;
}

/// Inverse of serialize_recipe.
inline Recipe parse_recipe(std::string_view text, Lang lang, std::string id = {}) {
  std::vector<std::string> lines;
  {
    std::string s(text);
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
  }
  auto fail = [](const std::string& why) { return Error(ErrorCode::Unparseable, why); };
  if (lines.empty() || lines[0].rfind(kTitleHeading, 0) != 0) throw fail("missing Title: heading");
  Recipe r;
  r.id = std::move(id);
  r.lang = lang;
  r.title = lines[0].substr(kTitleHeading.size());
  if (!r.title.empty() && r.title[0] == ' ') r.title.erase(0, 1);
  std::size_t i = 1;
  if (i >= lines.size() || lines[i] != kIngredientsHeading) throw fail("missing Ingredients: heading");
  for (++i; i < lines.size() && lines[i] != kStepsHeading; ++i) r.ingredients.push_back(lines[i]);
  if (i >= lines.size()) throw fail("missing Steps: heading");
  for (++i; i < lines.size(); ++i) r.steps.push_back(lines[i]);
  return r;
}

/// Removes the three section headings wherever they occur as whole tokens,
/// then drops lines left empty.
inline std::string strip_meta(std::string_view text) {
  std::string out;
  std::string s(text);
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) {
    std::string rebuilt;
    std::size_t pos = 0;
    while (pos < line.size()) {
      std::size_t start = line.find_first_not_of(' ', pos);
      if (start == std::string::npos) break;
      std::size_t end = line.find(' ', start);
      if (end == std::string::npos) end = line.size();
      std::string_view tok(line.data() + start, end - start);
      if (tok != kTitleHeading && tok != kIngredientsHeading && tok != kStepsHeading) {
        if (!rebuilt.empty()) rebuilt += ' ';
        rebuilt += tok;
      }
      pos = end;
    }
    if (rebuilt.empty()) continue;
    if (!out.empty()) out += '\n';
    out += rebuilt;
  }
  return out;
}

/// Newlines become spaces before scoring.
inline std::string flatten(std::string_view text) {
  std::string out(text);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

/// Chinese word list for greedy longest-match segmentation. Accepts the
/// common "word [freq [tag]]" line format; '#' starts a comment line.
class SegmenterDictionary {
 public:
  SegmenterDictionary() = default;

  static SegmenterDictionary load(const std::filesystem::path& path) {
    SegmenterDictionary dict;
    for (const auto& line : read_lines(path)) {
      if (line.empty() || line[0] == '#') continue;
      auto parts = unicode::split_whitespace(line);
      if (parts.empty()) continue;
      long long freq = 1;
      if (parts.size() > 1) {
        try {
          freq = std::stoll(parts[1]);
        } catch (const std::exception&) {
        }
      }
      dict.add(parts[0], freq);
    }
    return dict;
  }

  void add(const std::string& word, long long freq = 1) {
    if (word.empty()) return;
    std::u32string cps = unicode::decode(word);
    max_len_ = std::max(max_len_, cps.size());
    entries_[cps] += freq;
  }

  bool contains(const std::u32string& word) const { return entries_.count(word) > 0; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  std::size_t max_word_length() const { return max_len_; }

  long long frequency(const std::string& word) const {
    auto it = entries_.find(unicode::decode(word));
    return it == entries_.end() ? 0 : it->second;
  }

  /// Greedy longest match. Runs of ASCII letters/digits form one token;
  /// any other unmatched character is its own token; whitespace separates.
  std::vector<std::string> segment(std::string_view text) const {
    std::vector<std::string> out;
    std::u32string cps = unicode::decode(text);
    std::size_t i = 0;
    while (i < cps.size()) {
      if (unicode::is_space(cps[i])) {
        ++i;
        continue;
      }
      std::size_t best = 0;
      const std::size_t limit = std::min(max_len_, cps.size() - i);
      for (std::size_t len = limit; len >= 1; --len) {
        if (entries_.count(cps.substr(i, len))) {
          best = len;
          break;
        }
      }
      if (best == 0) {
        best = 1;
        if (unicode::is_ascii_alnum(cps[i])) {
          while (i + best < cps.size() && unicode::is_ascii_alnum(cps[i + best])) ++best;
        }
      }
      out.push_back(unicode::encode(cps.substr(i, best)));
      i += best;
    }
    return out;
  }

 private:
  struct U32Hash {
    std::size_t operator()(const std::u32string& s) const {
      return std::hash<std::u32string>{}(s);
    }
  };
  std::unordered_map<std::u32string, long long, U32Hash> entries_;
  std::size_t max_len_ = 0;
};

/// Whitespace tokens for en; dictionary segments for zh.
inline std::size_t token_count(std::string_view text, Lang lang,
                               const SegmenterDictionary* dict = nullptr) {
  if (lang == Lang::En) return unicode::split_whitespace(text).size();
  if (dict == nullptr || dict->empty())
    throw Error(ErrorCode::MissingDictionary, "zh token counting requires a segmenter dictionary");
  return dict->segment(text).size();
}

/// Surface tokens used by the metrics (punctuation kept).
inline std::vector<std::string> surface_tokens(std::string_view text, Lang lang,
                                               const SegmenterDictionary* dict = nullptr) {
  if (lang == Lang::En) return unicode::split_whitespace(text);
  if (dict == nullptr || dict->empty())
    throw Error(ErrorCode::MissingDictionary, "zh segmentation requires a segmenter dictionary");
  return dict->segment(text);
}

/// Word tokens for distributional training: lowercased, punctuation
/// stripped from token edges, punctuation-only tokens dropped.
inline std::vector<std::string> word_tokens(std::string_view text, Lang lang,
                                            const SegmenterDictionary* dict = nullptr) {
  std::vector<std::string> out;
  for (auto& tok : surface_tokens(text, lang, dict)) {
    std::u32string cps = unicode::decode(unicode::ascii_lower(tok));
    std::size_t b = 0, e = cps.size();
    while (b < e && unicode::is_punct(cps[b])) ++b;
    while (e > b && unicode::is_punct(cps[e - 1])) --e;
    if (b == e) continue;
    out.push_back(unicode::encode(cps.substr(b, e - b)));
  }
  return out;
}

using TokenCounter = std::function<std::size_t(const Recipe&)>;

/// Counts tokens of the recipe content (headings excluded).
inline TokenCounter default_counter(const SegmenterDictionary* dict = nullptr) {
  return [dict](const Recipe& r) {
    return token_count(strip_meta(serialize_recipe(r)), r.lang, dict);
  };
}

/// Precomputed per-recipe counts ("id<TAB>count" lines), e.g. subword
/// lengths from an external tokenizer. Unknown ids count as zero.
inline TokenCounter counts_from_file(const std::filesystem::path& path) {
  auto counts = std::make_shared<std::unordered_map<std::string, std::size_t>>();
  for (const auto& line : read_lines(path)) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    (*counts)[line.substr(0, tab)] = std::stoull(line.substr(tab + 1));
  }
  return [counts](const Recipe& r) {
    auto it = counts->find(r.id);
    return it == counts->end() ? std::size_t{0} : it->second;
  };
}

inline std::vector<Recipe> filter_by_length(const std::vector<Recipe>& corpus,
                                            const TokenCounter& counter, std::size_t max_tokens) {
  std::vector<Recipe> out;
  std::copy_if(corpus.begin(), corpus.end(), std::back_inserter(out),
               [&](const Recipe& r) { return counter(r) <= max_tokens; });
  return out;
}

struct CorpusStats {
  std::size_t recipe_count = 0;
  double mean_tokens = 0.0;
  double mean_ingredients = 0.0;
  double mean_steps = 0.0;
};

inline CorpusStats corpus_stats(const std::vector<Recipe>& corpus, const TokenCounter& counter) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus_stats on empty corpus");
  CorpusStats s;
  s.recipe_count = corpus.size();
  double tokens = 0, ingredients = 0, steps = 0;
  for (const auto& r : corpus) {
    tokens += static_cast<double>(counter(r));
    ingredients += static_cast<double>(r.ingredients.size());
    steps += static_cast<double>(r.steps.size());
  }
  const double n = static_cast<double>(corpus.size());
  s.mean_tokens = tokens / n;
  s.mean_ingredients = ingredients / n;
  s.mean_steps = steps / n;
  return s;
}

inline std::string format_stats(const CorpusStats& s) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "recipe_count=" << s.recipe_count << '\n'
      << "mean_tokens=" << s.mean_tokens << '\n'
      << "mean_ingredients=" << s.mean_ingredients << '\n'
      << "mean_steps=" << s.mean_steps << '\n';
  return out.str();
}

inline nlohmann::ordered_json to_json(const CorpusStats& s) {
  nlohmann::ordered_json j;
  j["recipe_count"] = s.recipe_count;
  j["mean_tokens"] = s.mean_tokens;
  j["mean_ingredients"] = s.mean_ingredients;
  j["mean_steps"] = s.mean_steps;
  return j;
}

struct LoadedCorpus {
  std::vector<Recipe> recipes;
  std::vector<Rejection> rejections;
};

/// Reads a line-delimited recipe file, cleaning each record.
inline LoadedCorpus load_corpus(const std::filesystem::path& path, const CleanOptions& opts = {}) {
  LoadedCorpus out;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json raw = nlohmann::json::parse(line, nullptr, false);
    if (raw.is_discarded()) {
      out.rejections.push_back({"line:" + std::to_string(lineno), ErrorCode::Unparseable, "invalid JSON"});
      continue;
    }
    auto result = clean_recipe(raw, opts);
    if (auto* r = std::get_if<Recipe>(&result)) out.recipes.push_back(std::move(*r));
    else out.rejections.push_back(std::get<Rejection>(result));
  }
  return out;
}

/// Reads an already-clean recipe file without re-cleaning.
inline std::vector<Recipe> read_recipes(const std::filesystem::path& path) {
  std::vector<Recipe> out;
  for (const auto& line : read_lines(path)) {
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(recipe_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Unparseable, path.string() + ": " + e.what());
    }
  }
  return out;
}

inline std::string recipes_to_jsonl(const std::vector<Recipe>& recipes) {
  std::string out;
  for (const auto& r : recipes) out += to_json(r).dump() + '\n';
  return out;
}

inline void write_recipes(const std::filesystem::path& path, const std::vector<Recipe>& recipes) {
  write_file(path, recipes_to_jsonl(recipes));
}

}  // namespace crossrecipe
