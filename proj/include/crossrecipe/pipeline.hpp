#pragma once

// End-to-end runs: clean -> stats -> embed -> align -> match -> split ->
// retrieve -> score -> analyze, with content-addressed stage directories
// and a hash manifest.

#include <openssl/opensslv.h>

#include <Eigen/Core>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossrecipe/adapters.hpp"
#include "crossrecipe/alignment.hpp"
#include "crossrecipe/analysis.hpp"
#include "crossrecipe/corpus.hpp"
#include "crossrecipe/embeddings.hpp"
#include "crossrecipe/error.hpp"
#include "crossrecipe/matching.hpp"
#include "crossrecipe/metrics.hpp"
#include "crossrecipe/util.hpp"

namespace crossrecipe {

inline constexpr std::string_view kVersion = "0.1.0";

#ifdef CROSSRECIPE_DATA_DIR
inline const std::filesystem::path kBundledDataDir{CROSSRECIPE_DATA_DIR};
#else
inline const std::filesystem::path kBundledDataDir{"data"};
#endif

// ---- configuration ---------------------------------------------------------

struct ConfigKey {
  std::string section;
  std::string key;
  std::string fallback;
  std::string doc;
};

/// Every recognised key. Unknown keys in a config file are rejected.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"run", "direction", "zh-en", "zh-en or en-zh"},
      {"run", "output_dir", "runs", "run directory (stage outputs and manifest)"},
      {"run", "threads", "1", "worker threads for title embedding and retrieval"},
      {"corpus", "source", "", "raw source-language recipe file (JSONL)"},
      {"corpus", "target", "", "raw target-language recipe file (JSONL)"},
      {"corpus", "segmenter", "", "Chinese word list; empty = bundled"},
      {"corpus", "max_tokens", "0", "drop recipes longer than this; 0 keeps all"},
      {"embed", "dim", "300", "vector size (published setting: 300)"},
      {"embed", "epochs", "5", "published setting: 5"},
      {"embed", "window", "5", "context window (published setting: 5)"},
      {"embed", "negatives", "10", "negative samples (published setting: 10)"},
      {"embed", "min_count", "10", "published setting: 10"},
      {"embed", "learning_rate", "0.025", "not published; word2vec default"},
      {"embed", "subsample", "0", "frequent-word subsampling threshold; 0 disables"},
      {"embed", "seed", "1", "training seed"},
      {"align", "seed_dictionary", "", "en<TAB>zh seed pairs; empty = bundled 15 pairs"},
      {"align", "iterations", "10", "self-learning iterations"},
      {"align", "vocab_cutoff", "20000", "most frequent words used for induction"},
      {"match", "titles", "", "zh title<TAB>English translation"},
      {"match", "k", "10", "neighbours kept per source (published setting: 10)"},
      {"match", "threshold", "0.85", "minimum title cosine (published setting: 0.85)"},
      {"split", "val_fraction", "0.1", "share of source recipes in validation"},
      {"split", "seed", "1", "shuffle seed"},
      {"score", "test_set", "", "JSONL of {id, source, references}"},
      {"analyze", "concepts", "", "concept lexicon file; empty = bundled"},
      {"stages", "clean", "true", ""},
      {"stages", "stats", "true", ""},
      {"stages", "embed", "true", ""},
      {"stages", "align", "true", ""},
      {"stages", "match", "true", ""},
      {"stages", "split", "true", ""},
      {"stages", "retrieve", "true", ""},
      {"stages", "score", "true", ""},
      {"stages", "analyze", "true", ""},
  };
  return keys;
}

/// CROSSRECIPE_<SECTION>_<KEY>, upper case.
inline std::string env_var_name(const ConfigKey& k) {
  std::string name = "CROSSRECIPE_" + k.section + "_" + k.key;
  for (auto& c : name) c = (c == '-') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

inline const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order = {"clean", "stats",    "embed", "align",  "match",
                                                 "split", "retrieve", "score", "analyze"};
  return order;
}

/// Stages each stage reads from.
inline const std::map<std::string, std::vector<std::string>>& stage_dependencies() {
  static const std::map<std::string, std::vector<std::string>> deps = {
      {"clean", {}},          {"stats", {"clean"}},         {"embed", {"clean"}},
      {"align", {"embed"}},   {"match", {"clean", "embed"}}, {"split", {"match"}},
      {"retrieve", {"clean", "embed"}}, {"score", {"retrieve"}}, {"analyze", {"retrieve"}},
  };
  return deps;
}

struct RunConfig {
  Direction direction = Direction::ZhToEn;
  std::filesystem::path output_dir = "runs";
  std::size_t threads = 1;

  std::filesystem::path source_corpus;
  std::filesystem::path target_corpus;
  std::filesystem::path segmenter;
  std::size_t max_tokens = 0;

  SgnsConfig sgns;

  std::filesystem::path seed_dictionary;
  std::size_t align_iterations = 10;
  std::size_t vocab_cutoff = 20000;

  std::filesystem::path titles;
  std::size_t k = 10;
  double threshold = 0.85;

  double val_fraction = 0.1;
  std::uint64_t split_seed = 1;

  std::filesystem::path test_set;
  std::filesystem::path concepts;

  std::map<std::string, bool> stages;

  bool enabled(const std::string& stage) const {
    auto it = stages.find(stage);
    return it == stages.end() || it->second;
  }
};

namespace detail {

template <typename T>
T parse_number(const ConfigKey& k, const std::string& v) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>) out = static_cast<T>(std::stod(v, &used));
    else if constexpr (std::is_signed_v<T>) out = static_cast<T>(std::stoll(v, &used));
    else {
      if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, k.section + "." + k.key + ": not a valid number: '" + v + "'");
  }
}

inline bool parse_bool(const ConfigKey& k, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::InvalidConfig, k.section + "." + k.key + ": expected true/false, got '" + v + "'");
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Resolved key values after defaults, file and environment layers.
struct ConfigValues {
  std::map<std::string, std::string> values;     // "section.key" -> value
  std::map<std::string, std::string> origin;     // "default" | "file" | env var name
  std::filesystem::path base_dir;                // for relative file paths
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

/// Layers defaults, the INI text and environment overrides. Relative paths
/// from the file resolve against `base_dir`; those from the environment
/// against the working directory.
inline ConfigValues layer_config(const std::string& ini_text, const std::filesystem::path& base_dir,
                                 const EnvLookup& env = process_env()) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(ini_text);
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  ConfigValues cv;
  cv.base_dir = base_dir;
  std::set<std::string> known;
  for (const auto& k : config_keys()) {
    const std::string id = k.section + "." + k.key;
    known.insert(id);
    cv.values[id] = k.fallback;
    cv.origin[id] = "default";
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw Error(ErrorCode::InvalidConfig, "key outside a section: " + section);
    for (const auto& [key, value] : body) {
      const std::string id = section + "." + key;
      if (!known.count(id)) throw Error(ErrorCode::InvalidConfig, "unknown config key " + id);
      cv.values[id] = detail::trim(value.data());
      cv.origin[id] = "file";
    }
  }
  for (const auto& k : config_keys()) {
    const std::string name = env_var_name(k);
    if (auto v = env(name)) {
      cv.values[k.section + "." + k.key] = detail::trim(*v);
      cv.origin[k.section + "." + k.key] = name;
    }
  }
  return cv;
}

inline RunConfig to_run_config(const ConfigValues& cv) {
  std::map<std::string, const ConfigKey*> spec;
  for (const auto& k : config_keys()) spec[k.section + "." + k.key] = &k;
  auto str = [&](const std::string& id) { return cv.values.at(id); };
  auto path = [&](const std::string& id) -> std::filesystem::path {
    const std::string v = str(id);
    if (v.empty()) return {};
    std::filesystem::path p(v);
    if (p.is_absolute()) return p.lexically_normal();
    const bool from_file = cv.origin.at(id) == "file";
    return ((from_file ? cv.base_dir : std::filesystem::current_path()) / p).lexically_normal();
  };
  auto num = [&]<typename T>(const std::string& id, T) { return detail::parse_number<T>(*spec.at(id), str(id)); };

  RunConfig c;
  try {
    c.direction = parse_direction(str("run.direction"));
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("run.direction: ") + e.what());
  }
  c.output_dir = path("run.output_dir");
  if (c.output_dir.empty()) throw Error(ErrorCode::InvalidConfig, "run.output_dir must not be empty");
  c.threads = num("run.threads", std::size_t{});
  c.source_corpus = path("corpus.source");
  c.target_corpus = path("corpus.target");
  c.segmenter = path("corpus.segmenter");
  if (c.segmenter.empty()) c.segmenter = kBundledDataDir / "zh_words.txt";
  c.max_tokens = num("corpus.max_tokens", std::size_t{});

  c.sgns.dim = num("embed.dim", int{});
  c.sgns.epochs = num("embed.epochs", int{});
  c.sgns.window = num("embed.window", int{});
  c.sgns.negatives = num("embed.negatives", int{});
  c.sgns.min_count = num("embed.min_count", 0LL);
  c.sgns.learning_rate = num("embed.learning_rate", double{});
  c.sgns.subsample = num("embed.subsample", double{});
  c.sgns.seed = num("embed.seed", std::uint64_t{});
  c.sgns.threads = 1;

  c.seed_dictionary = path("align.seed_dictionary");
  if (c.seed_dictionary.empty()) c.seed_dictionary = kBundledDataDir / "seed_dictionary.tsv";
  c.align_iterations = num("align.iterations", std::size_t{});
  c.vocab_cutoff = num("align.vocab_cutoff", std::size_t{});

  c.titles = path("match.titles");
  c.k = num("match.k", std::size_t{});
  c.threshold = num("match.threshold", double{});
  c.val_fraction = num("split.val_fraction", double{});
  c.split_seed = num("split.seed", std::uint64_t{});
  c.test_set = path("score.test_set");
  c.concepts = path("analyze.concepts");
  if (c.concepts.empty()) c.concepts = kBundledDataDir / "concepts.txt";
  for (const auto& s : stage_order()) c.stages[s] = detail::parse_bool(*spec.at("stages." + s), str("stages." + s));
  return c;
}

/// Checks values and that every referenced input exists. Throws
/// InvalidConfig listing all problems at once.
inline void validate(const RunConfig& c) {
  std::vector<std::string> problems;
  auto need = [&](const std::string& what, const std::filesystem::path& p) {
    if (p.empty()) problems.push_back(what + " is not set");
    else if (!std::filesystem::is_regular_file(p)) problems.push_back(what + " not found: " + p.string());
  };
  for (const auto& [stage, deps] : stage_dependencies()) {
    if (!c.enabled(stage)) continue;
    for (const auto& d : deps)
      if (!c.enabled(d)) problems.push_back("stage " + stage + " needs disabled stage " + d);
  }
  if (c.enabled("clean")) {
    need("corpus.source", c.source_corpus);
    need("corpus.target", c.target_corpus);
    need("corpus.segmenter", c.segmenter);
  }
  if (c.enabled("align")) need("align.seed_dictionary", c.seed_dictionary);
  if (c.enabled("match") || c.enabled("retrieve")) need("match.titles", c.titles);
  if (c.enabled("retrieve")) need("score.test_set", c.test_set);
  if (c.enabled("analyze")) need("analyze.concepts", c.concepts);
  try {
    c.sgns.validate();
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  if (c.k == 0) problems.push_back("match.k must be at least 1");
  if (!(c.threshold >= -1.0 && c.threshold <= 1.0)) problems.push_back("match.threshold must be in [-1, 1]");
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) problems.push_back("split.val_fraction must be in (0, 1)");
  if (c.threads == 0) problems.push_back("run.threads must be at least 1");
  if (c.align_iterations == 0) problems.push_back("align.iterations must be at least 1");
  if (!problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw Error(ErrorCode::InvalidConfig, msg);
  }
}

inline RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env()) {
  if (!std::filesystem::is_regular_file(path))
    throw Error(ErrorCode::InvalidConfig, "config file not found: " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  return to_run_config(layer_config(read_file(path), base, env));
}

/// Location-independent description of a run: values plus input file
/// hashes instead of paths. The output directory is excluded.
inline nlohmann::ordered_json config_identity(const RunConfig& c) {
  auto file = [](const std::filesystem::path& p) -> nlohmann::ordered_json {
    if (p.empty() || !std::filesystem::is_regular_file(p)) return nullptr;
    return sha256_file(p);
  };
  nlohmann::ordered_json j;
  j["direction"] = std::string(to_string(c.direction));
  j["source"] = file(c.source_corpus);
  j["target"] = file(c.target_corpus);
  j["segmenter"] = file(c.segmenter);
  j["max_tokens"] = c.max_tokens;
  j["embed"] = {{"dim", c.sgns.dim},           {"epochs", c.sgns.epochs},
                {"window", c.sgns.window},     {"negatives", c.sgns.negatives},
                {"min_count", c.sgns.min_count}, {"learning_rate", c.sgns.learning_rate},
                {"subsample", c.sgns.subsample}, {"seed", c.sgns.seed}};
  j["seed_dictionary"] = file(c.seed_dictionary);
  j["align"] = {{"iterations", c.align_iterations}, {"vocab_cutoff", c.vocab_cutoff}};
  j["titles"] = file(c.titles);
  j["match"] = {{"k", c.k}, {"threshold", c.threshold}};
  j["split"] = {{"val_fraction", c.val_fraction}, {"seed", c.split_seed}};
  j["test_set"] = file(c.test_set);
  j["concepts"] = file(c.concepts);
  j["stages"] = c.stages;
  return j;
}

inline std::string config_hash(const RunConfig& c) { return sha256_hex(config_identity(c).dump()); }

// ---- manifest --------------------------------------------------------------

struct StageRecord {
  std::string name;
  std::string key;                                // content address
  std::string dir;                                // relative to the run directory
  bool skipped = false;
  double seconds = 0.0;
  std::map<std::string, std::string> inputs;      // label -> sha256
  std::map<std::string, std::string> outputs;     // file name -> sha256
};

struct RunManifest {
  std::string config_hash;
  std::map<std::string, std::string> tool_versions;
  std::vector<StageRecord> stages;

  const StageRecord* stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }
};

inline std::map<std::string, std::string> tool_versions() {
  return {
      {"crossrecipe", std::string(kVersion)},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
      {"openssl", OPENSSL_VERSION_TEXT},
      {"boost", BOOST_LIB_VERSION},
      {"compiler", __VERSION__},
  };
}

inline nlohmann::ordered_json to_json(const StageRecord& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["key"] = s.key;
  j["dir"] = s.dir;
  j["skipped"] = s.skipped;
  j["seconds"] = s.seconds;
  j["inputs"] = s.inputs;
  j["outputs"] = s.outputs;
  return j;
}

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["config_hash"] = m.config_hash;
  j["tool_versions"] = m.tool_versions;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : m.stages) j["stages"].push_back(to_json(s));
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.config_hash = j.at("config_hash").get<std::string>();
    m.tool_versions = j.at("tool_versions").get<std::map<std::string, std::string>>();
    for (const auto& s : j.at("stages")) {
      StageRecord r;
      r.name = s.at("name").get<std::string>();
      r.key = s.at("key").get<std::string>();
      r.dir = s.at("dir").get<std::string>();
      r.skipped = s.at("skipped").get<bool>();
      r.seconds = s.at("seconds").get<double>();
      r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
      r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
      m.stages.push_back(std::move(r));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Unparseable, std::string("manifest: ") + e.what());
  }
}

inline constexpr std::string_view kManifestName = "manifest.json";

inline RunManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path))
    throw Error(ErrorCode::ManifestMissing, "no manifest at " + path.string());
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::Unparseable, "manifest is not valid JSON: " + path.string());
  return manifest_from_json(j);
}

/// Re-hashes every listed output; throws IntegrityError naming the first
/// missing or altered file.
inline void verify_manifest(const RunManifest& m, const std::filesystem::path& run_dir) {
  for (const auto& s : m.stages) {
    for (const auto& [file, hash] : s.outputs) {
      const auto p = run_dir / s.dir / file;
      const std::string rel = (std::filesystem::path(s.dir) / file).generic_string();
      if (!std::filesystem::is_regular_file(p)) throw Error(ErrorCode::IntegrityError, rel + ": missing");
      if (sha256_file(p) != hash) throw Error(ErrorCode::IntegrityError, rel + ": hash mismatch");
    }
  }
}

// ---- test set --------------------------------------------------------------

struct TestItem {
  std::string id;
  Recipe source;
  std::vector<Recipe> references;
};

inline std::vector<TestItem> read_test_set(const std::filesystem::path& path) {
  std::vector<TestItem> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      TestItem t;
      t.id = j.at("id").get<std::string>();
      t.source = recipe_from_json(j.at("source"));
      for (const auto& r : j.at("references")) t.references.push_back(recipe_from_json(r));
      if (t.references.empty()) throw Error(ErrorCode::EmptyInput, "test item " + t.id + " has no reference");
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Unparseable, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptyInput, "empty test set: " + path.string());
  return out;
}

/// Evaluation text of a recipe: headings removed, one line.
inline std::string evaluation_text(const Recipe& r) { return flatten(strip_meta(serialize_recipe(r))); }

/// Title providers used by matching and retrieval. Titles are compared in
/// English: zh titles go through the translation table, then every title is
/// a mean of English word vectors. Centering the space first removes the
/// direction shared by all words, without which every title average lands
/// near the same point.
struct TitleProviders {
  std::unique_ptr<StaticTranslator> translator;
  std::unique_ptr<WordAverageEmbedder> embedder;
};

inline TitleProviders english_title_providers(const std::filesystem::path& en_vectors,
                                              const std::filesystem::path& titles) {
  auto space = std::make_shared<EmbeddingSpace>(normalize_space(load_vectors(en_vectors), Normalization{true, true}));
  return {std::make_unique<StaticTranslator>(StaticTranslator::from_file(titles)),
          std::make_unique<WordAverageEmbedder>(space, Lang::En)};
}

// ---- stage runner ----------------------------------------------------------

namespace detail {

struct StageSpec {
  std::string name;
  nlohmann::ordered_json params;
  std::map<std::string, std::filesystem::path> inputs;  // label -> file
  std::vector<std::string> outputs;
  std::function<void(const std::filesystem::path& dir)> body;
};

class StageRunner {
 public:
  explicit StageRunner(std::filesystem::path run_dir) : run_dir_(std::move(run_dir)) {}

  const StageRecord& run(const StageSpec& spec) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    StageRecord rec;
    rec.name = spec.name;
    for (const auto& [label, path] : spec.inputs) rec.inputs[label] = sha256_file(path);
    nlohmann::ordered_json id;
    id["stage"] = spec.name;
    id["version"] = kVersion;
    id["params"] = spec.params;
    id["inputs"] = rec.inputs;
    id["outputs"] = spec.outputs;
    rec.key = sha256_hex(id.dump());
    rec.dir = (std::filesystem::path("stages") / (spec.name + "-" + rec.key.substr(0, 16))).generic_string();
    const auto dir = run_dir_ / rec.dir;

    if (auto done = completed(dir, spec.outputs)) {
      rec.outputs = *done;
      rec.skipped = true;
    } else {
      const auto tmp = run_dir_ / "stages" / (".tmp-" + spec.name + "-" + rec.key.substr(0, 16));
      std::filesystem::remove_all(tmp);
      std::filesystem::create_directories(tmp);
      try {
        spec.body(tmp);
        for (const auto& f : spec.outputs) {
          if (!std::filesystem::is_regular_file(tmp / f))
            throw Error(ErrorCode::Io, "stage did not produce " + f);
          rec.outputs[f] = sha256_file(tmp / f);
        }
        nlohmann::ordered_json done_j;
        done_j["stage"] = spec.name;
        done_j["key"] = rec.key;
        done_j["outputs"] = rec.outputs;
        write_file(tmp / "stage.json", done_j.dump(2) + "\n");
        std::filesystem::remove_all(dir);
        std::filesystem::rename(tmp, dir);
      } catch (const std::exception& e) {
        std::error_code ignored;
        std::filesystem::remove_all(tmp, ignored);
        throw Error(ErrorCode::StageFailure, spec.name + ": " + e.what());
      }
    }
    rec.seconds = std::chrono::duration<double>(clock::now() - start).count();
    records_.push_back(std::move(rec));
    return records_.back();
  }

  std::filesystem::path output(const std::string& stage, const std::string& file) const {
    for (const auto& r : records_)
      if (r.name == stage) return run_dir_ / r.dir / file;
    throw Error(ErrorCode::StageFailure, "stage " + stage + " has not run");
  }

  std::vector<StageRecord> records() const { return records_; }

 private:
  /// Output hashes if the directory holds a finished, unaltered run.
  static std::optional<std::map<std::string, std::string>> completed(const std::filesystem::path& dir,
                                                                     const std::vector<std::string>& outputs) {
    if (!std::filesystem::is_regular_file(dir / "stage.json")) return std::nullopt;
    auto j = nlohmann::json::parse(read_file(dir / "stage.json"), nullptr, false);
    if (j.is_discarded() || !j.contains("outputs")) return std::nullopt;
    std::map<std::string, std::string> hashes;
    for (const auto& f : outputs) {
      if (!j["outputs"].contains(f) || !std::filesystem::is_regular_file(dir / f)) return std::nullopt;
      const std::string h = sha256_file(dir / f);
      if (h != j["outputs"][f].get<std::string>()) return std::nullopt;
      hashes[f] = h;
    }
    return hashes;
  }

  std::filesystem::path run_dir_;
  std::vector<StageRecord> records_;
};

inline Sentences recipe_sentences(const std::vector<Recipe>& recipes, const SegmenterDictionary& dict) {
  Sentences out;
  for (const auto& r : recipes) {
    const auto toks = word_tokens(evaluation_text(r), r.lang, r.lang == Lang::Zh ? &dict : nullptr);
    if (!toks.empty()) out.push_back(toks);
  }
  return out;
}

inline std::string json_lines(const std::vector<nlohmann::ordered_json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

}  // namespace detail

/// Validates, runs enabled stages in order and writes <output_dir>/manifest.json.
/// A stage whose inputs and parameters are unchanged is skipped.
inline RunManifest run(const RunConfig& cfg) {
  validate(cfg);
  const Lang src_lang = source_lang(cfg.direction);
  const Lang tgt_lang = target_lang(cfg.direction);
  const std::string src_name(to_string(src_lang));
  const std::string tgt_name(to_string(tgt_lang));
  std::filesystem::create_directories(cfg.output_dir / "stages");
  detail::StageRunner runner(cfg.output_dir);

  auto dict = std::make_shared<SegmenterDictionary>(SegmenterDictionary::load(cfg.segmenter));
  auto dict_for = [&](Lang l) -> const SegmenterDictionary* { return l == Lang::Zh ? dict.get() : nullptr; };

  if (cfg.enabled("clean")) {
    runner.run({"clean",
                {{"max_tokens", cfg.max_tokens}, {"direction", std::string(to_string(cfg.direction))}},
                {{"source", cfg.source_corpus}, {"target", cfg.target_corpus}, {"segmenter", cfg.segmenter}},
                {"source.jsonl", "target.jsonl", "rejections.jsonl"},
                [&](const std::filesystem::path& dir) {
                  std::vector<nlohmann::ordered_json> rejected;
                  auto one = [&](const std::filesystem::path& in, Lang lang, const std::string& side) {
                    auto loaded = load_corpus(in);
                    std::vector<Recipe> kept;
                    for (auto& r : loaded.recipes) {
                      if (r.lang != lang) {
                        loaded.rejections.push_back({r.id, ErrorCode::InvalidConfig,
                                                     "language " + std::string(to_string(r.lang)) + " in " + side + " corpus"});
                        continue;
                      }
                      kept.push_back(std::move(r));
                    }
                    if (cfg.max_tokens > 0) kept = filter_by_length(kept, default_counter(dict_for(lang)), cfg.max_tokens);
                    if (kept.empty()) throw Error(ErrorCode::EmptyCorpus, side + " corpus is empty after cleaning");
                    for (const auto& rej : loaded.rejections)
                      rejected.push_back({{"side", side},
                                          {"id", rej.id},
                                          {"reason", std::string(to_string(rej.reason))},
                                          {"detail", rej.detail}});
                    write_recipes(dir / (side + ".jsonl"), kept);
                  };
                  one(cfg.source_corpus, src_lang, "source");
                  one(cfg.target_corpus, tgt_lang, "target");
                  write_file(dir / "rejections.jsonl", detail::json_lines(rejected));
                }});
  }

  if (cfg.enabled("stats")) {
    runner.run({"stats",
                {{"source_lang", src_name}, {"target_lang", tgt_name}},
                {{"source", runner.output("clean", "source.jsonl")},
                 {"target", runner.output("clean", "target.jsonl")},
                 {"rejections", runner.output("clean", "rejections.jsonl")},
                 {"segmenter", cfg.segmenter}},
                {"stats.json", "stats.txt"},
                [&](const std::filesystem::path& dir) {
                  nlohmann::ordered_json j;
                  std::string text;
                  std::map<std::string, std::size_t> rejected;
                  for (const auto& line : read_lines(runner.output("clean", "rejections.jsonl")))
                    if (!line.empty()) ++rejected[nlohmann::json::parse(line).at("side").get<std::string>()];
                  for (const auto& [side, lang] : {std::pair{std::string("source"), src_lang},
                                                   std::pair{std::string("target"), tgt_lang}}) {
                    const auto recipes = read_recipes(runner.output("clean", side + ".jsonl"));
                    const auto s = corpus_stats(recipes, default_counter(dict_for(lang)));
                    auto row = to_json(s);
                    row["lang"] = std::string(to_string(lang));
                    row["rejected"] = rejected[side];
                    j[side] = row;
                    text += "[" + side + " " + std::string(to_string(lang)) + "]\n" + format_stats(s) +
                            "rejected=" + std::to_string(rejected[side]) + "\n";
                  }
                  write_file(dir / "stats.json", j.dump(2) + "\n");
                  write_file(dir / "stats.txt", text);
                }});
  }

  if (cfg.enabled("embed")) {
    runner.run({"embed",
                {{"dim", cfg.sgns.dim},
                 {"epochs", cfg.sgns.epochs},
                 {"window", cfg.sgns.window},
                 {"negatives", cfg.sgns.negatives},
                 {"min_count", cfg.sgns.min_count},
                 {"learning_rate", cfg.sgns.learning_rate},
                 {"subsample", cfg.sgns.subsample},
                 {"seed", cfg.sgns.seed}},
                {{"source", runner.output("clean", "source.jsonl")},
                 {"target", runner.output("clean", "target.jsonl")},
                 {"segmenter", cfg.segmenter}},
                {"en.vec", "zh.vec", "loss.json"},
                [&](const std::filesystem::path& dir) {
                  nlohmann::ordered_json loss;
                  for (const auto& side : {std::string("source"), std::string("target")}) {
                    const auto recipes = read_recipes(runner.output("clean", side + ".jsonl"));
                    const Lang lang = side == "source" ? src_lang : tgt_lang;
                    auto result = train_sgns(detail::recipe_sentences(recipes, *dict), cfg.sgns);
                    save_vectors(dir / (std::string(to_string(lang)) + ".vec"), result.space);
                    loss[std::string(to_string(lang))] = result.epoch_loss;
                  }
                  write_file(dir / "loss.json", loss.dump(2) + "\n");
                }});
  }

  if (cfg.enabled("align")) {
    runner.run({"align",
                {{"iterations", cfg.align_iterations},
                 {"vocab_cutoff", cfg.vocab_cutoff},
                 {"direction", std::string(to_string(cfg.direction))}},
                {{"source_vectors", runner.output("embed", src_name + ".vec")},
                 {"target_vectors", runner.output("embed", tgt_name + ".vec")},
                 {"seed_dictionary", cfg.seed_dictionary}},
                {"mapping.txt", "dictionary.tsv", "align.json"},
                [&](const std::filesystem::path& dir) {
                  WordPairs seed = load_word_pairs(cfg.seed_dictionary);  // en -> zh
                  if (src_lang == Lang::Zh)
                    for (auto& [a, b] : seed) std::swap(a, b);
                  const auto src = load_vectors(runner.output("embed", src_name + ".vec"));
                  const auto tgt = load_vectors(runner.output("embed", tgt_name + ".vec"));
                  SelfLearningOptions opts;
                  opts.vocab_cutoff = cfg.vocab_cutoff;
                  auto res = align_with_self_learning(src, tgt, seed, cfg.align_iterations, opts);
                  save_mapping(dir / "mapping.txt", res.mapping);
                  write_file(dir / "dictionary.tsv", format_word_pairs(res.dictionary));
                  nlohmann::ordered_json j;
                  j["iterations_run"] = res.iterations_run;
                  j["converged"] = res.converged;
                  j["dictionary_size"] = res.dictionary.size();
                  j["warnings"] = res.warnings;
                  write_file(dir / "align.json", j.dump(2) + "\n");
                }});
  }

  if (cfg.enabled("match")) {
    runner.run({"match",
                {{"k", cfg.k}, {"threshold", cfg.threshold}},
                {{"source", runner.output("clean", "source.jsonl")},
                 {"target", runner.output("clean", "target.jsonl")},
                 {"titles", cfg.titles},
                 {"vectors", runner.output("embed", "en.vec")}},
                {"pairs.jsonl"},
                [&](const std::filesystem::path& dir) {
                  auto [translator, embedder] = english_title_providers(runner.output("embed", "en.vec"), cfg.titles);
                  MatchOptions o;
                  o.k = cfg.k;
                  o.threshold = cfg.threshold;
                  o.threads = cfg.threads;
                  const auto ds = match_recipes(read_recipes(runner.output("clean", "source.jsonl")),
                                                read_recipes(runner.output("clean", "target.jsonl")), *translator,
                                                *embedder, o);
                  write_pairs(dir / "pairs.jsonl", ds);
                }});
  }

  if (cfg.enabled("split")) {
    runner.run({"split",
                {{"val_fraction", cfg.val_fraction}, {"seed", cfg.split_seed}},
                {{"pairs", runner.output("match", "pairs.jsonl")}},
                {"pairs.jsonl", "split.json"},
                [&](const std::filesystem::path& dir) {
                  auto ds = read_pairs(runner.output("match", "pairs.jsonl"));
                  if (ds.entries.empty()) throw Error(ErrorCode::EmptyInput, "no matched pairs to split");
                  ds = split_train_val(std::move(ds), cfg.val_fraction, cfg.split_seed);
                  write_pairs(dir / "pairs.jsonl", ds);
                  std::map<std::string, std::size_t> sources, pairs;
                  for (const auto& e : ds.entries) {
                    ++sources[std::string(to_string(e.split))];
                    pairs[std::string(to_string(e.split))] += e.targets.size();
                  }
                  nlohmann::ordered_json j;
                  j["direction"] = std::string(to_string(ds.direction));
                  j["sources"] = sources;
                  j["pairs"] = pairs;
                  write_file(dir / "split.json", j.dump(2) + "\n");
                }});
  }

  if (cfg.enabled("retrieve")) {
    runner.run({"retrieve",
                nlohmann::ordered_json::object(),
                {{"test_set", cfg.test_set},
                 {"target", runner.output("clean", "target.jsonl")},
                 {"titles", cfg.titles},
                 {"vectors", runner.output("embed", "en.vec")}},
                {"hypotheses.jsonl", "hypotheses.txt"},
                [&](const std::filesystem::path& dir) {
                  auto [translator, embedder] = english_title_providers(runner.output("embed", "en.vec"), cfg.titles);
                  const auto test = read_test_set(cfg.test_set);
                  const auto targets = read_recipes(runner.output("clean", "target.jsonl"));
                  std::vector<Recipe> sources;
                  for (const auto& t : test) {
                    if (t.source.lang != src_lang)
                      throw Error(ErrorCode::InvalidConfig, "test item " + t.id + " source is not " + src_name);
                    sources.push_back(t.source);
                  }
                  const auto hits = retrieval_adapt_all(sources, targets, *translator, *embedder, cfg.threads);
                  std::vector<nlohmann::ordered_json> rows;
                  std::string text;
                  for (std::size_t i = 0; i < test.size(); ++i) {
                    const Recipe& h = targets[hits[i].index];
                    rows.push_back({{"id", test[i].id},
                                    {"source_id", test[i].source.id},
                                    {"target_id", h.id},
                                    {"cosine", hits[i].cosine},
                                    {"hypothesis", to_json(h)}});
                    text += evaluation_text(h) + "\n";
                  }
                  write_file(dir / "hypotheses.jsonl", detail::json_lines(rows));
                  write_file(dir / "hypotheses.txt", text);
                }});
  }

  auto read_hypotheses = [&]() {
    std::vector<Recipe> out;
    for (const auto& line : read_lines(runner.output("retrieve", "hypotheses.jsonl")))
      if (!line.empty()) out.push_back(recipe_from_json(nlohmann::json::parse(line).at("hypothesis")));
    return out;
  };

  if (cfg.enabled("score")) {
    runner.run({"score",
                {{"system", "retrieval"}},
                {{"test_set", cfg.test_set},
                 {"hypotheses", runner.output("retrieve", "hypotheses.jsonl")},
                 {"segmenter", cfg.segmenter}},
                {"scores.json", "scores.txt"},
                [&](const std::filesystem::path& dir) {
                  const auto test = read_test_set(cfg.test_set);
                  const auto hyps = read_hypotheses();
                  if (hyps.size() != test.size())
                    throw Error(ErrorCode::LengthMismatch, "hypotheses and test set differ in length");
                  std::vector<EvalPair> pairs;
                  for (std::size_t i = 0; i < test.size(); ++i) {
                    EvalPair p{evaluation_text(hyps[i]), {}, tgt_lang};
                    for (const auto& r : test[i].references) p.references.push_back(evaluation_text(r));
                    pairs.push_back(std::move(p));
                  }
                  const auto report = score_system("retrieval", pairs, dict_for(tgt_lang));
                  nlohmann::ordered_json j = nlohmann::ordered_json::array();
                  j.push_back(to_json(report));
                  write_file(dir / "scores.json", j.dump(2) + "\n");
                  write_file(dir / "scores.txt", format_reports({report}));
                }});
  }

  if (cfg.enabled("analyze")) {
    runner.run({"analyze",
                {{"system", "retrieval"}},
                {{"test_set", cfg.test_set},
                 {"hypotheses", runner.output("retrieve", "hypotheses.jsonl")},
                 {"concepts", cfg.concepts}},
                {"literal_rate.json", "literal_rate.tsv"},
                [&](const std::filesystem::path& dir) {
                  const auto test = read_test_set(cfg.test_set);
                  const auto hyps = read_hypotheses();
                  std::vector<Recipe> sources;
                  for (const auto& t : test) sources.push_back(t.source);
                  nlohmann::ordered_json j = nlohmann::ordered_json::array();
                  std::string tsv = "concept\tc_source\tc_target\trate\n";
                  for (const auto& lex : load_concepts(cfg.concepts)) {
                    if (lex.source_lang != src_lang || lex.target_lang != tgt_lang) continue;
                    nlohmann::ordered_json row;
                    row["concept"] = lex.name;
                    try {
                      const auto r = literal_rate(sources, hyps, lex);
                      row["c_source"] = r.c_source;
                      row["c_target"] = r.c_target;
                      row["rate"] = r.rate;
                      tsv += lex.name + "\t" + std::to_string(r.c_source) + "\t" + std::to_string(r.c_target) +
                             "\t" + std::to_string(r.rate) + "\n";
                    } catch (const Error& e) {
                      if (e.code() != ErrorCode::UndefinedRate) throw;
                      row["c_source"] = 0;
                      row["rate"] = nullptr;
                      tsv += lex.name + "\t0\t\tundefined\n";
                    }
                    j.push_back(row);
                  }
                  write_file(dir / "literal_rate.json", j.dump(2) + "\n");
                  write_file(dir / "literal_rate.tsv", tsv);
                }});
  }

  RunManifest m;
  m.config_hash = config_hash(cfg);
  m.tool_versions = tool_versions();
  m.stages = runner.records();
  const std::string text = to_json(m).dump(2) + "\n";
  write_file_atomic(cfg.output_dir / kManifestName, text);
  std::filesystem::create_directories(cfg.output_dir / "manifests");
  write_file_atomic(cfg.output_dir / "manifests" / (m.config_hash.substr(0, 16) + ".json"), text);
  return m;
}

// ---- report ----------------------------------------------------------------

/// Dataset and score tables from a finished run. Verifies every output
/// hash first.
inline std::string report(const std::filesystem::path& manifest_path) {
  const RunManifest m = read_manifest(manifest_path);
  const auto run_dir = manifest_path.parent_path();
  verify_manifest(m, run_dir);
  std::string out;
  char buf[256];
  auto file = [&](const StageRecord& s, const std::string& f) { return run_dir / s.dir / f; };

  if (const auto* s = m.stage("stats")) {
    const auto j = nlohmann::json::parse(read_file(file(*s, "stats.json")));
    out += "Dataset\n";
    std::snprintf(buf, sizeof buf, "%-8s %-4s %8s %12s %12s %10s %9s\n", "side", "lang", "recipes", "mean_tokens",
                  "ingredients", "steps", "rejected");
    out += buf;
    for (const auto* side : {"source", "target"}) {
      const auto& r = j.at(side);
      std::snprintf(buf, sizeof buf, "%-8s %-4s %8zu %12.2f %12.2f %10.2f %9zu\n", side,
                    r.at("lang").get<std::string>().c_str(), r.at("recipe_count").get<std::size_t>(),
                    r.at("mean_tokens").get<double>(), r.at("mean_ingredients").get<double>(),
                    r.at("mean_steps").get<double>(), r.at("rejected").get<std::size_t>());
      out += buf;
    }
  }
  if (const auto* s = m.stage("split")) {
    const auto j = nlohmann::json::parse(read_file(file(*s, "split.json")));
    out += "\nPairs (" + j.at("direction").get<std::string>() + ")\n";
    std::snprintf(buf, sizeof buf, "%-6s %8s %8s\n", "split", "sources", "pairs");
    out += buf;
    for (const auto* split : {"train", "val"}) {
      std::snprintf(buf, sizeof buf, "%-6s %8zu %8zu\n", split, j.at("sources").value(split, std::size_t{0}),
                    j.at("pairs").value(split, std::size_t{0}));
      out += buf;
    }
  } else if (const auto* s = m.stage("match")) {
    const auto ds = read_pairs(file(*s, "pairs.jsonl"));
    out += "\nPairs: " + std::to_string(ds.pair_count()) + " from " + std::to_string(ds.entries.size()) +
           " source recipes\n";
  }
  if (const auto* s = m.stage("score")) {
    const auto j = nlohmann::json::parse(read_file(file(*s, "scores.json")));
    out += "\nScores\n";
    std::snprintf(buf, sizeof buf, "%-12s %8s %8s %8s %8s %12s\n", "system", "BLEU", "ChrF", "R-L", "Smatch",
                  "mean_tokens");
    out += buf;
    for (const auto& r : j) {
      const std::string smatch =
          r.contains("smatch_f1") && !r["smatch_f1"].is_null() ? std::to_string(r["smatch_f1"].get<double>()).substr(0, 5) : "-";
      std::snprintf(buf, sizeof buf, "%-12s %8.2f %8.2f %8.2f %8s %12.2f\n", r.at("system").get<std::string>().c_str(),
                    r.at("bleu").get<double>(), r.at("chrf").get<double>(), r.at("rouge_l").get<double>(),
                    smatch.c_str(), r.at("mean_tokens").get<double>());
      out += buf;
    }
  }
  if (const auto* s = m.stage("analyze")) {
    const auto j = nlohmann::json::parse(read_file(file(*s, "literal_rate.json")));
    if (!j.empty()) {
      out += "\nLiteral translation rate\n";
      for (const auto& r : j) {
        if (r.at("rate").is_null()) std::snprintf(buf, sizeof buf, "%-10s undefined (no source occurrences)\n",
                                                  r.at("concept").get<std::string>().c_str());
        else std::snprintf(buf, sizeof buf, "%-10s %zu/%zu = %.2f\n", r.at("concept").get<std::string>().c_str(),
                           r.at("c_target").get<std::size_t>(), r.at("c_source").get<std::size_t>(),
                           r.at("rate").get<double>());
        out += buf;
      }
    }
  }
  out += "\nStages\n";
  for (const auto& s : m.stages) {
    std::snprintf(buf, sizeof buf, "%-9s %-8s %8.2fs  %s\n", s.name.c_str(), s.skipped ? "skipped" : "ran", s.seconds,
                  s.dir.c_str());
    out += buf;
  }
  return out;
}

/// Output hashes per stage, the part of a manifest that must be stable
/// across machines and run directories.
inline nlohmann::ordered_json output_digest(const RunManifest& m) {
  nlohmann::ordered_json j;
  for (const auto& s : m.stages) j[s.name] = s.outputs;
  return j;
}

}  // namespace crossrecipe
