#pragma once

// Adaptation baselines: prompt templates, chat/completion endpoint clients
// with response caching and resumable batches, and nearest-title retrieval.

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crossrecipe/corpus.hpp"
#include "crossrecipe/error.hpp"
#include "crossrecipe/http.hpp"
#include "crossrecipe/matching.hpp"
#include "crossrecipe/util.hpp"

namespace crossrecipe {

enum class PromptStyle { Completion, Instruction };

inline std::string_view to_string(PromptStyle s) { return s == PromptStyle::Completion ? "completion" : "instruction"; }

inline PromptStyle parse_prompt_style(std::string_view s) {
  if (s == "completion") return PromptStyle::Completion;
  if (s == "instruction") return PromptStyle::Instruction;
  throw Error(ErrorCode::InvalidConfig, "prompt style must be completion or instruction, got '" + std::string(s) + "'");
}

inline constexpr std::string_view kRecipeSlot = "{recipe}";

struct PromptTemplate {
  PromptStyle style = PromptStyle::Completion;
  Direction direction = Direction::ZhToEn;
  std::string text;  // exactly one kRecipeSlot
};

/// The four baseline prompts. Completion prompts end with a cue for the
/// model to continue; instruction prompts put the recipe last.
inline const std::array<PromptTemplate, 4>& bundled_templates() {
  static const std::array<PromptTemplate, 4> templates{{
      {PromptStyle::Completion, Direction::EnToZh, "{recipe} 中文菜谱，适合中国人的:"},
      {PromptStyle::Completion, Direction::ZhToEn, "{recipe} Recipe in English, adapted to an English-speaking audience:"},
      {PromptStyle::Instruction, Direction::EnToZh,
       "Convert the provided English recipe into a Chinese recipe so that it fits within Chinese cooking culture, is "
       "consistent with Chinese cooking knowledge, and meets a Chinese recipe's style. {recipe}"},
      {PromptStyle::Instruction, Direction::ZhToEn,
       "Convert the provided Chinese recipe into an English recipe so that it fits within Western cooking culture, is "
       "consistent with Western cooking knowledge, and meets a Western recipe's style. {recipe}"},
  }};
  return templates;
}

inline const PromptTemplate& bundled_template(PromptStyle style, Direction direction) {
  for (const auto& t : bundled_templates())
    if (t.style == style && t.direction == direction) return t;
  throw Error(ErrorCode::InvalidConfig, "no bundled template");
}

/// Custom template text from a file; a single trailing newline is dropped.
inline PromptTemplate load_template(const std::filesystem::path& path, PromptStyle style, Direction direction) {
  std::string text = read_file(path);
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return {style, direction, std::move(text)};
}

/// Substitutes recipe_text into the template's single slot.
inline std::string build_prompt(std::string_view recipe_text, const PromptTemplate& tmpl) {
  const auto at = tmpl.text.find(kRecipeSlot);
  if (at == std::string::npos) throw Error(ErrorCode::SlotMissing, "template has no " + std::string(kRecipeSlot) + " slot");
  if (tmpl.text.find(kRecipeSlot, at + 1) != std::string::npos)
    throw Error(ErrorCode::InvalidConfig, "template has more than one recipe slot");
  std::string out = tmpl.text.substr(0, at);
  out += recipe_text;
  out += tmpl.text.substr(at + kRecipeSlot.size());
  return out;
}

/// Local seq2seq decoding settings from the finetuned baselines. Recorded for
/// reference only; nothing here runs local models.
struct Seq2SeqDecoding {
  static constexpr int beam_size = 3;
  static constexpr double repetition_penalty = 1.2;
  static constexpr int no_repeat_ngram_size = 5;
};

/// Settings reported for the open instruction-tuned model.
struct InstructionModelDefaults {
  static constexpr double temperature = 0.7;
  static constexpr int max_length = 1024;
};

// ---- endpoint client -------------------------------------------------------

enum class WireFormat { Chat, Completion };

inline std::string_view to_string(WireFormat f) { return f == WireFormat::Chat ? "chat" : "completion"; }

inline WireFormat parse_wire_format(std::string_view s) {
  if (s == "chat") return WireFormat::Chat;
  if (s == "completion") return WireFormat::Completion;
  throw Error(ErrorCode::InvalidConfig, "wire format must be chat or completion, got '" + std::string(s) + "'");
}

struct EndpointConfig {
  std::string url;  // full URL of the completions route
  std::string model;
  double temperature = InstructionModelDefaults::temperature;
  int max_tokens = InstructionModelDefaults::max_length;
  double timeout_seconds = 120;
  int retries = 3;  // attempts after the first
  WireFormat format = WireFormat::Chat;
  /// Environment variable holding a bearer token; empty for none.
  std::string api_key_env;

  void validate() const {
    if (url.empty()) throw Error(ErrorCode::InvalidConfig, "endpoint URL is empty");
    if (!(temperature >= 0)) throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0");
    if (!(timeout_seconds > 0)) throw Error(ErrorCode::InvalidConfig, "timeout must be > 0");
    if (retries < 0 || max_tokens <= 0) throw Error(ErrorCode::InvalidConfig, "retries >= 0 and max_tokens > 0 required");
  }
};

namespace detail {

inline std::string format_temperature(double t) {
  std::string s;
  append_double(s, t);
  return s;
}

inline nlohmann::ordered_json request_body(const std::string& prompt, const EndpointConfig& cfg) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  if (cfg.format == WireFormat::Chat)
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  else
    body["prompt"] = prompt;
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_tokens;
  return body;
}

inline std::string extract_completion(const std::string& response, WireFormat format) {
  try {
    auto j = nlohmann::json::parse(response);
    const auto& choice = j.at("choices").at(0);
    const auto& value = format == WireFormat::Chat ? choice.at("message").at("content") : choice.at("text");
    return value.is_null() ? std::string() : value.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::HttpError, std::string("unexpected response shape: ") + e.what());
  }
}

}  // namespace detail

/// Whitespace trimmed at both ends and CRLF folded to LF, so the text stays
/// in the serialized recipe layout.
inline std::string clean_completion(std::string_view raw) {
  std::string out;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (!(raw[i] == '\r' && i + 1 < raw.size() && raw[i + 1] == '\n')) out += raw[i];
  const auto first = out.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = out.find_last_not_of(" \t\r\n");
  return out.substr(first, last - first + 1);
}

/// Cache key: prompt hash, model and temperature.
inline std::string completion_key(const std::string& prompt, const EndpointConfig& cfg) {
  return sha256_hex(sha256_hex(prompt) + "\n" + cfg.model + "\n" + detail::format_temperature(cfg.temperature));
}

struct Completion {
  std::string text;  // cleaned
  std::string raw;
  std::string key;
  bool cached = false;
};

/// Sends one prompt. Throws Timeout or HttpError once retries are spent and
/// EmptyCompletion when the cleaned text is empty. With a cache directory,
/// responses are stored as <dir>/<key>.json and reused.
inline Completion adapt_via_endpoint(const std::string& prompt, const EndpointConfig& cfg,
                                     const std::optional<std::filesystem::path>& cache_dir = std::nullopt) {
  cfg.validate();
  Completion out;
  out.key = completion_key(prompt, cfg);
  std::optional<std::filesystem::path> cache_file;
  if (cache_dir) cache_file = *cache_dir / (out.key + ".json");
  if (cache_file && std::filesystem::exists(*cache_file)) {
    out.raw = nlohmann::json::parse(read_file(*cache_file)).at("completion").get<std::string>();
    out.cached = true;
  } else {
    HeaderList headers;
    if (!cfg.api_key_env.empty()) {
      if (const char* key = std::getenv(cfg.api_key_env.c_str())) headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    RetryPolicy policy;
    policy.attempts = cfg.retries + 1;
    policy.timeout = std::chrono::milliseconds(static_cast<long long>(cfg.timeout_seconds * 1000));
    const auto response = http_post(cfg.url, detail::request_body(prompt, cfg).dump(), "application/json", headers, policy);
    out.raw = detail::extract_completion(response, cfg.format);
  }
  out.text = clean_completion(out.raw);
  if (out.text.empty()) throw Error(ErrorCode::EmptyCompletion, "endpoint returned an empty completion");
  if (cache_file && !out.cached) {
    std::filesystem::create_directories(*cache_dir);
    nlohmann::ordered_json rec;
    rec["model"] = cfg.model;
    rec["temperature"] = cfg.temperature;
    rec["prompt_sha256"] = sha256_hex(prompt);
    rec["completion"] = out.raw;
    write_file_atomic(*cache_file, rec.dump() + "\n");
  }
  return out;
}

// ---- batches ---------------------------------------------------------------

struct BatchItem {
  std::string id;
  std::string prompt;
};

struct BatchRecord {
  std::string id;
  std::optional<std::string> text;
  std::optional<ErrorCode> error;
  std::string message;
  std::string key;
};

struct BatchOptions {
  std::size_t threads = 4;
  std::optional<std::filesystem::path> cache_dir;
};

namespace detail {

inline nlohmann::ordered_json to_json(const BatchRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  if (r.text) j["text"] = *r.text;
  if (r.error) {
    j["error"] = to_string(*r.error);
    j["message"] = r.message;
  }
  j["key"] = r.key;
  return j;
}

}  // namespace detail

/// Runs every prompt, writing one JSON line per item in input order to
/// `out` ({id, text} or {id, error, message}) and the failures alone to
/// `out` + ".failures.jsonl". When `out` already exists, items it holds
/// text for are kept and only the rest are sent again. A run log of
/// request keys is appended to `out` + ".log.jsonl".
inline std::vector<BatchRecord> adapt_batch(const std::vector<BatchItem>& items, const EndpointConfig& cfg,
                                            const std::filesystem::path& out, const BatchOptions& opts = {}) {
  cfg.validate();
  std::map<std::string, std::string> done;
  if (std::filesystem::exists(out)) {
    for (const auto& line : read_lines(out)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      if (j.contains("text")) done[j.at("id").get<std::string>()] = j.at("text").get<std::string>();
    }
  }
  std::vector<BatchRecord> records(items.size());
  std::vector<bool> reused(items.size(), false);
  parallel_for(items.size(), opts.threads, [&](std::size_t i) {
    BatchRecord& r = records[i];
    r.id = items[i].id;
    r.key = completion_key(items[i].prompt, cfg);
    if (auto it = done.find(r.id); it != done.end()) {
      r.text = it->second;
      reused[i] = true;
      return;
    }
    try {
      r.text = adapt_via_endpoint(items[i].prompt, cfg, opts.cache_dir).text;
    } catch (const Error& e) {
      r.error = e.code();
      r.message = e.what();
    }
  });
  std::string lines, failures, log;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto j = detail::to_json(records[i]).dump() + "\n";
    lines += j;
    if (records[i].error) failures += j;
    if (!reused[i]) {
      nlohmann::ordered_json entry;
      entry["id"] = records[i].id;
      entry["key"] = records[i].key;
      entry["model"] = cfg.model;
      entry["temperature"] = cfg.temperature;
      entry["max_tokens"] = cfg.max_tokens;
      entry["format"] = to_string(cfg.format);
      entry["ok"] = !records[i].error;
      if (records[i].text) entry["response_sha256"] = sha256_hex(*records[i].text);
      log += entry.dump() + "\n";
    }
  }
  write_file(out, lines);
  auto failures_path = out;
  failures_path += ".failures.jsonl";
  write_file(failures_path, failures);
  auto log_path = out;
  log_path += ".log.jsonl";
  std::ofstream(log_path, std::ios::app) << log;
  return records;
}

// ---- retrieval baseline ----------------------------------------------------

struct Retrieved {
  std::size_t index = 0;  // into the target corpus
  double cosine = 0;
};

/// For every source recipe, the target recipe with the most similar title
/// (k = 1, no threshold). Titles are embedded as in match_recipes.
inline std::vector<Retrieved> retrieval_adapt_all(const std::vector<Recipe>& sources, const std::vector<Recipe>& targets,
                                                  TitleTranslator& translator, SentenceEmbedder& embedder,
                                                  std::size_t threads = 1) {
  if (targets.empty()) throw Error(ErrorCode::EmptyTargetCorpus, "retrieval needs at least one target recipe");
  if (sources.empty()) return {};
  const Matrix s = embed_titles(sources, translator, embedder, threads);
  const Matrix t = embed_titles(targets, translator, embedder, threads);
  KnnOptions o;
  o.k = 1;
  o.threshold = -std::numeric_limits<double>::infinity();
  o.threads = threads;
  std::vector<Retrieved> out;
  for (const auto& hits : knn_threshold(s, t, o)) out.push_back({hits.at(0).index, hits.at(0).score});
  return out;
}

inline std::pair<Recipe, double> retrieval_adapt(const Recipe& source, const std::vector<Recipe>& targets,
                                                 TitleTranslator& translator, SentenceEmbedder& embedder) {
  auto r = retrieval_adapt_all({source}, targets, translator, embedder).at(0);
  return {targets[r.index], r.cosine};
}

}  // namespace crossrecipe
