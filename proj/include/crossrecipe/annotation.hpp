#pragma once

// Human annotation service: task leasing, adaptation and rating submissions,
// a comprehension gate, an append-only event log, and the HTTP front end.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unistd.h>
#include <vector>

#include "crossrecipe/analysis.hpp"
#include "crossrecipe/corpus.hpp"
#include "crossrecipe/error.hpp"
#include "crossrecipe/http.hpp"
#include "crossrecipe/matching.hpp"
#include "crossrecipe/util.hpp"

namespace crossrecipe {

enum class TaskMode { Adapt, Rate };
enum class TaskStatus { Open, Done, Skipped };

inline std::string_view to_string(TaskMode m) { return m == TaskMode::Adapt ? "adapt" : "rate"; }

inline TaskMode parse_task_mode(std::string_view s) {
  if (s == "adapt") return TaskMode::Adapt;
  if (s == "rate") return TaskMode::Rate;
  throw Error(ErrorCode::ValidationFailed, "mode must be adapt or rate, got '" + std::string(s) + "'");
}

inline std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Done: return "done";
    case TaskStatus::Skipped: return "skipped";
    default: return "open";
  }
}

struct Task {
  std::string task_id;
  TaskMode mode = TaskMode::Adapt;
  Direction direction = Direction::ZhToEn;
  Recipe source;
  std::optional<Recipe> candidate;  // rate tasks only
  std::string pair_id;              // rate tasks; ratings reference it
  TaskStatus status = TaskStatus::Open;
};

inline nlohmann::ordered_json to_json(const Task& t) {
  nlohmann::ordered_json j;
  j["task_id"] = t.task_id;
  j["mode"] = to_string(t.mode);
  j["direction"] = to_string(t.direction);
  j["source"] = to_json(t.source);
  if (t.candidate) j["candidate"] = to_json(*t.candidate);
  if (t.mode == TaskMode::Rate) j["pair_id"] = t.pair_id;
  j["status"] = to_string(t.status);
  return j;
}

/// Rate tasks need exactly one candidate, adapt tasks none. pair_id
/// defaults to task_id.
inline Task task_from_json(const nlohmann::json& j) {
  try {
    Task t;
    t.task_id = j.at("task_id").get<std::string>();
    t.mode = parse_task_mode(j.at("mode").get<std::string>());
    t.direction = parse_direction(j.at("direction").get<std::string>());
    t.source = recipe_from_json(j.at("source"));
    if (j.contains("candidate")) t.candidate = recipe_from_json(j.at("candidate"));
    t.pair_id = j.value("pair_id", t.task_id);
    if ((t.mode == TaskMode::Rate) != t.candidate.has_value())
      throw Error(ErrorCode::ValidationFailed, "task " + t.task_id + ": rate tasks carry one candidate, adapt tasks none");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Unparseable, std::string("task record: ") + e.what());
  }
}

inline std::vector<Task> read_tasks(const std::filesystem::path& path) {
  std::vector<Task> out;
  std::set<std::string> ids;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    out.push_back(task_from_json(nlohmann::json::parse(line)));
    if (!ids.insert(out.back().task_id).second)
      throw Error(ErrorCode::ValidationFailed, "duplicate task id " + out.back().task_id);
  }
  return out;
}

struct ComprehensionExample {
  std::string pair_id;
  Direction direction = Direction::ZhToEn;
  Recipe source, candidate;
  std::array<int, 4> gold{};  // GRA, CON, PRE, CUL
};

inline std::vector<ComprehensionExample> load_comprehension(const std::filesystem::path& path) {
  std::vector<ComprehensionExample> out;
  try {
    for (const auto& j : nlohmann::json::parse(read_file(path))) {
      const auto& g = j.at("gold");
      out.push_back({j.at("pair_id").get<std::string>(), parse_direction(j.at("direction").get<std::string>()),
                     recipe_from_json(j.at("source")), recipe_from_json(j.at("candidate")),
                     {g.at("gra").get<int>(), g.at("con").get<int>(), g.at("pre").get<int>(), g.at("cul").get<int>()}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Unparseable, path.string() + ": " + e.what());
  }
  return out;
}

struct AdaptationSubmission {
  std::string task_id;
  std::string participant_id;
  std::string submission_id;  // client generated; repeats are acknowledged once
  std::string title;
  std::vector<std::string> ingredients;
  std::vector<std::string> steps;
  double elapsed_seconds = 0;
};

struct RatingSubmission {
  RatingRecord rating;  // evaluator_id is the participant
  std::string submission_id;
  double elapsed_seconds = 0;
};

struct LeasedTask {
  Task task;
  std::chrono::system_clock::time_point lease_expires;
};

using Clock = std::function<std::chrono::system_clock::time_point()>;

struct StoreOptions {
  std::size_t budget = 3;  // completed tasks per participant and mode
  std::chrono::seconds lease{30 * 60};
  int tolerance = 1;  // comprehension answers within this many points of gold
  Clock clock = [] { return std::chrono::system_clock::now(); };
};

/// In-memory state rebuilt from an append-only JSONL event log. Every
/// accepted write is appended and flushed to disk before it is acknowledged.
/// Leases are not logged; after a restart leased tasks are open again.
class AnnotationStore {
 public:
  AnnotationStore(std::vector<Task> tasks, std::vector<ComprehensionExample> examples, std::filesystem::path log_path,
                  StoreOptions opts = {})
      : tasks_(std::move(tasks)), examples_(std::move(examples)), log_path_(std::move(log_path)), opts_(std::move(opts)) {
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (!task_index_.emplace(tasks_[i].task_id, i).second)
        throw Error(ErrorCode::ValidationFailed, "duplicate task id " + tasks_[i].task_id);
      if (tasks_[i].mode == TaskMode::Rate) pair_index_[tasks_[i].pair_id] = i;
    }
    replay();
    if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
    log_ = std::fopen(log_path_.c_str(), "ab");
    if (!log_) throw Error(ErrorCode::Io, "cannot open log " + log_path_.string());
  }

  ~AnnotationStore() {
    if (log_) std::fclose(log_);
  }

  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  const std::vector<ComprehensionExample>& examples() const { return examples_; }
  std::size_t budget() const { return opts_.budget; }

  /// Leases the least-served eligible task. A participant asking again in
  /// the same mode gets their current lease back.
  LeasedTask next_task(const std::string& participant, TaskMode mode) {
    std::unique_lock lock(mutex_);
    require_participant_id(participant);
    Participant& p = participants_[participant];
    if (mode == TaskMode::Rate && !p.comprehension_passed)
      throw Error(ErrorCode::ComprehensionRequired, "complete the comprehension check before rating");
    if (p.completed[static_cast<int>(mode)] >= opts_.budget)
      throw Error(ErrorCode::NoneAvailable, "task budget reached");
    const auto now = opts_.clock();
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      const Task& t = tasks_[i];
      if (t.mode != mode || t.status != TaskStatus::Open) continue;
      auto lease = leases_.find(t.task_id);
      const bool leased = lease != leases_.end() && lease->second.expires > now;
      if (leased && lease->second.participant == participant) {
        lease->second.expires = now + opts_.lease;
        return {t, lease->second.expires};
      }
      if (leased || p.excluded.count(t.task_id)) continue;
      if (!best || served_[i] < served_[*best]) best = i;
    }
    if (!best) throw Error(ErrorCode::NoneAvailable, "no open " + std::string(to_string(mode)) + " task");
    Lease& l = leases_[tasks_[*best].task_id];
    l = {participant, now + opts_.lease};
    return {tasks_[*best], l.expires};
  }

  std::string submit_adaptation(const AdaptationSubmission& sub) {
    std::unique_lock lock(mutex_);
    if (auto dup = duplicate(sub.submission_id)) return *dup;
    require_participant_id(sub.participant_id);
    const std::size_t i = task_position(sub.task_id);
    Task& t = tasks_[i];
    if (t.mode != TaskMode::Adapt) throw Error(ErrorCode::ValidationFailed, "task " + t.task_id + " is not an adapt task");
    require_lease(t, sub.participant_id);
    AdaptationSubmission clean = sub;
    clean.title = trimmed(sub.title);
    clean.ingredients = nonblank(sub.ingredients);
    clean.steps = nonblank(sub.steps);
    if (clean.title.empty()) throw Error(ErrorCode::ValidationFailed, "title is empty");
    if (clean.ingredients.empty()) throw Error(ErrorCode::ValidationFailed, "ingredients are empty");
    if (clean.steps.empty()) throw Error(ErrorCode::ValidationFailed, "steps are empty");
    if (!(clean.elapsed_seconds >= 0)) throw Error(ErrorCode::ValidationFailed, "elapsed_seconds must be >= 0");

    nlohmann::ordered_json e;
    e["event"] = "adaptation";
    e["stored_id"] = "a" + std::to_string(adaptations_.size() + 1);
    e["submission_id"] = clean.submission_id;
    e["task_id"] = t.task_id;
    e["participant_id"] = clean.participant_id;
    e["direction"] = to_string(t.direction);
    e["source_id"] = t.source.id;
    e["lang"] = to_string(target_lang(t.direction));
    e["title"] = clean.title;
    e["ingredients"] = clean.ingredients;
    e["steps"] = clean.steps;
    e["elapsed_seconds"] = clean.elapsed_seconds;
    e["curation_status"] = "pending";
    append(e);
    apply(e);
    return e["stored_id"];
  }

  /// Adapt tasks become skipped for everyone; rate tasks are only dropped
  /// for this participant.
  void skip(const std::string& task_id, const std::string& participant) {
    std::unique_lock lock(mutex_);
    require_participant_id(participant);
    Task& t = tasks_[task_position(task_id)];
    require_lease(t, participant);
    nlohmann::ordered_json e{{"event", "skip"}, {"task_id", task_id}, {"participant_id", participant}};
    append(e);
    apply(e);
  }

  std::string submit_rating(const RatingSubmission& sub) {
    std::unique_lock lock(mutex_);
    if (auto dup = duplicate(sub.submission_id)) return *dup;
    const RatingRecord& r = sub.rating;
    require_participant_id(r.evaluator_id);
    auto& p = participants_[r.evaluator_id];
    if (!p.comprehension_passed)
      throw Error(ErrorCode::ComprehensionRequired, "complete the comprehension check before rating");
    validate(r);
    auto it = pair_index_.find(r.pair_id);
    if (it == pair_index_.end()) throw Error(ErrorCode::UnknownTask, "no rating task for pair " + r.pair_id);
    const Task& t = tasks_[it->second];
    if (p.rated.count(r.pair_id)) throw Error(ErrorCode::ValidationFailed, "pair " + r.pair_id + " already rated");
    if (p.completed[static_cast<int>(TaskMode::Rate)] >= opts_.budget)
      throw Error(ErrorCode::NoneAvailable, "task budget reached");

    nlohmann::ordered_json e;
    e["event"] = "rating";
    e["stored_id"] = "r" + std::to_string(ratings_.size() + 1);
    e["submission_id"] = sub.submission_id;
    e["task_id"] = t.task_id;
    e["pair_id"] = r.pair_id;
    e["evaluator_id"] = r.evaluator_id;
    e["gra"] = r.gra;
    e["con"] = r.con;
    e["pre"] = r.pre;
    e["cul"] = r.cul;
    e["elapsed_seconds"] = sub.elapsed_seconds;
    append(e);
    apply(e);
    return e["stored_id"];
  }

  /// Passes when every answer is within the tolerance of the gold rating on
  /// every dimension. A pass is permanent; failed attempts may be retried.
  bool submit_comprehension(const std::string& participant, const std::map<std::string, std::array<int, 4>>& answers) {
    std::unique_lock lock(mutex_);
    require_participant_id(participant);
    bool passed = true;
    for (const auto& ex : examples_) {
      auto it = answers.find(ex.pair_id);
      if (it == answers.end()) throw Error(ErrorCode::ValidationFailed, "missing answer for " + ex.pair_id);
      for (std::size_t d = 0; d < 4; ++d) {
        if (it->second[d] < 1 || it->second[d] > 7) throw Error(ErrorCode::OutOfRange, "answers must be in 1..7");
        if (std::abs(it->second[d] - ex.gold[d]) > opts_.tolerance) passed = false;
      }
    }
    nlohmann::ordered_json e{{"event", "comprehension"}, {"participant_id", participant}, {"passed", passed}};
    append(e);
    apply(e);
    return participants_[participant].comprehension_passed;
  }

  /// One JSON line per accepted adaptation, in acceptance order.
  std::string export_adaptations() const {
    std::shared_lock lock(mutex_);
    return join_records(adaptations_);
  }

  /// One JSON line per accepted rating; readable by read_ratings.
  std::string export_ratings() const {
    std::shared_lock lock(mutex_);
    return join_records(ratings_);
  }

  nlohmann::ordered_json progress(const std::optional<std::string>& participant = std::nullopt) const {
    std::shared_lock lock(mutex_);
    nlohmann::ordered_json j;
    if (participant) {
      auto it = participants_.find(*participant);
      if (it == participants_.end()) throw Error(ErrorCode::UnknownParticipant, "unknown participant " + *participant);
      j["participant_id"] = *participant;
      j["comprehension_passed"] = it->second.comprehension_passed;
      j["completed"] = {{"adapt", it->second.completed[0]}, {"rate", it->second.completed[1]}};
      j["budget"] = opts_.budget;
      return j;
    }
    std::map<std::string, std::size_t> status;
    for (const auto& t : tasks_) ++status[std::string(to_string(t.mode)) + "_" + std::string(to_string(t.status))];
    j["tasks"] = status;
    j["adaptations"] = adaptations_.size();
    j["ratings"] = ratings_.size();
    j["participants"] = participants_.size();
    return j;
  }

  TaskStatus status(const std::string& task_id) const {
    std::shared_lock lock(mutex_);
    return tasks_[task_position(task_id)].status;
  }

 private:
  struct Lease {
    std::string participant;
    std::chrono::system_clock::time_point expires;
  };

  struct Participant {
    bool comprehension_passed = false;
    std::array<std::size_t, 2> completed{};
    std::set<std::string> excluded;  // tasks done or skipped by this participant
    std::set<std::string> rated;     // pair ids
  };

  static void require_participant_id(const std::string& id) {
    if (id.empty()) throw Error(ErrorCode::ValidationFailed, "participant id is empty");
  }

  static std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
  }

  static std::vector<std::string> nonblank(const std::vector<std::string>& rows) {
    std::vector<std::string> out;
    for (const auto& r : rows)
      if (auto t = trimmed(r); !t.empty()) out.push_back(t);
    return out;
  }

  static std::string join_records(const std::vector<nlohmann::ordered_json>& records) {
    std::string out;
    for (const auto& r : records) out += r.dump() + "\n";
    return out;
  }

  std::size_t task_position(const std::string& task_id) const {
    auto it = task_index_.find(task_id);
    if (it == task_index_.end()) throw Error(ErrorCode::UnknownTask, "unknown task " + task_id);
    return it->second;
  }

  void require_lease(const Task& t, const std::string& participant) const {
    if (t.status != TaskStatus::Open) throw Error(ErrorCode::StaleLease, "task " + t.task_id + " is no longer open");
    auto it = leases_.find(t.task_id);
    if (it == leases_.end() || it->second.participant != participant || it->second.expires <= opts_.clock())
      throw Error(ErrorCode::StaleLease, "task " + t.task_id + " is not leased to " + participant);
  }

  std::optional<std::string> duplicate(const std::string& submission_id) const {
    if (submission_id.empty()) return std::nullopt;
    auto it = submissions_.find(submission_id);
    if (it == submissions_.end()) return std::nullopt;
    return it->second;
  }

  void append(const nlohmann::ordered_json& e) {
    const std::string line = e.dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), log_) != line.size() || std::fflush(log_) != 0 ||
        ::fsync(::fileno(log_)) != 0)
      throw Error(ErrorCode::Io, "cannot append to " + log_path_.string());
  }

  // State transition shared by live writes and replay; no validation here.
  void apply(const nlohmann::ordered_json& e) {
    const std::string kind = e.at("event");
    if (kind == "comprehension") {
      auto& p = participants_[e.at("participant_id").get<std::string>()];
      p.comprehension_passed = p.comprehension_passed || e.at("passed").get<bool>();
      return;
    }
    const std::string task_id = e.at("task_id");
    const std::size_t i = task_position(task_id);
    Task& t = tasks_[i];
    if (kind == "adaptation") {
      auto& p = participants_[e.at("participant_id").get<std::string>()];
      t.status = TaskStatus::Done;
      ++p.completed[static_cast<int>(TaskMode::Adapt)];
      p.excluded.insert(task_id);
      ++served_[i];
      leases_.erase(task_id);
      remember(e);
      auto record = e;
      record.erase("event");
      adaptations_.push_back(std::move(record));
    } else if (kind == "rating") {
      auto& p = participants_[e.at("evaluator_id").get<std::string>()];
      ++p.completed[static_cast<int>(TaskMode::Rate)];
      p.excluded.insert(task_id);
      p.rated.insert(e.at("pair_id").get<std::string>());
      ++served_[i];
      auto lease = leases_.find(task_id);
      if (lease != leases_.end() && lease->second.participant == e.at("evaluator_id")) leases_.erase(lease);
      remember(e);
      auto record = e;
      record.erase("event");
      ratings_.push_back(std::move(record));
    } else if (kind == "skip") {
      auto& p = participants_[e.at("participant_id").get<std::string>()];
      p.excluded.insert(task_id);
      if (t.mode == TaskMode::Adapt) t.status = TaskStatus::Skipped;
      leases_.erase(task_id);
    } else {
      throw Error(ErrorCode::Unparseable, "unknown event '" + kind + "'");
    }
  }

  void remember(const nlohmann::ordered_json& e) {
    const std::string sid = e.value("submission_id", "");
    if (!sid.empty()) submissions_[sid] = e.at("stored_id");
  }

  // A torn final line (crash mid-append, never acknowledged) is dropped.
  void replay() {
    if (!std::filesystem::exists(log_path_)) return;
    auto lines = read_lines(log_path_);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      if (lines[n].empty()) continue;
      nlohmann::ordered_json e;
      try {
        e = nlohmann::ordered_json::parse(lines[n]);
      } catch (const nlohmann::json::exception&) {
        if (n + 1 == lines.size()) {
          torn_tail_ = true;
          break;
        }
        throw Error(ErrorCode::Unparseable, log_path_.string() + ":" + std::to_string(n + 1) + ": corrupt event");
      }
      apply(e);
    }
    if (torn_tail_) {
      std::string kept;
      for (std::size_t n = 0; n + 1 < lines.size(); ++n) kept += lines[n] + "\n";
      write_file_atomic(log_path_, kept);
    }
  }

  std::vector<Task> tasks_;
  std::vector<ComprehensionExample> examples_;
  std::filesystem::path log_path_;
  StoreOptions opts_;
  std::map<std::string, std::size_t> task_index_, pair_index_;
  std::map<std::size_t, std::size_t> served_;
  std::map<std::string, Lease> leases_;
  std::map<std::string, Participant> participants_;
  std::map<std::string, std::string> submissions_;
  std::vector<nlohmann::ordered_json> adaptations_, ratings_;
  std::FILE* log_ = nullptr;
  bool torn_tail_ = false;
  mutable std::shared_mutex mutex_;
};

// ---- HTTP ------------------------------------------------------------------

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Unparseable: return 400;
    case ErrorCode::ComprehensionRequired: return 403;
    case ErrorCode::NoneAvailable:
    case ErrorCode::UnknownTask:
    case ErrorCode::UnknownParticipant: return 404;
    case ErrorCode::StaleLease: return 409;
    case ErrorCode::ValidationFailed:
    case ErrorCode::OutOfRange: return 422;
    default: return 500;
  }
}

/// JSON API under /api and, optionally, a static directory served at /.
///   GET  /api/tasks/next?participant=&mode=adapt|rate
///   POST /api/adaptations           {task_id, participant_id, submission_id, title, ingredients, steps, elapsed_seconds}
///   POST /api/tasks/{id}/skip       {participant_id}
///   POST /api/ratings               {pair_id, evaluator_id, gra, con, pre, cul, submission_id, elapsed_seconds}
///   GET  /api/comprehension         example pairs without gold ratings
///   POST /api/comprehension         {participant_id, answers: [{pair_id, gra, con, pre, cul}]}
///   GET  /api/export?kind=adaptations|ratings   JSON lines
///   GET  /api/progress[?participant=]
/// Errors come back as {error, message} with a matching status code.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt)
      : store_(store) {
    routes();
    if (static_dir) {
      if (!std::filesystem::is_directory(*static_dir))
        throw Error(ErrorCode::InvalidConfig, "static directory " + static_dir->string() + " does not exist");
      server_.set_mount_point("/", static_dir->string());
    }
  }

  /// Binds and returns the port (an ephemeral one when port is 0).
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  void listen() { server_.listen_after_bind(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  void stop() { server_.stop(); }

 private:
  using Json = nlohmann::ordered_json;

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      Json out = fn();
      res.set_content(out.dump(), "application/json");
    } catch (const Error& e) {
      res.status = http_status(e.code());
      res.set_content(Json{{"error", to_string(e.code())}, {"message", e.what()}}.dump(), "application/json");
    } catch (const nlohmann::json::exception& e) {
      res.status = 400;
      res.set_content(Json{{"error", "Unparseable"}, {"message", e.what()}}.dump(), "application/json");
    }
  }

  static std::string param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) throw Error(ErrorCode::ValidationFailed, std::string("missing query parameter ") + name);
    return req.get_param_value(name);
  }

  static Json task_payload(const LeasedTask& t) {
    Json j = to_json(t.task);
    j.erase("status");
    j["lease_expires"] =
        std::chrono::duration_cast<std::chrono::seconds>(t.lease_expires.time_since_epoch()).count();
    return j;
  }

  void routes() {
    server_.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { return task_payload(store_.next_task(param(req, "participant"), parse_task_mode(param(req, "mode")))); });
    });
    server_.Post("/api/adaptations", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto j = nlohmann::json::parse(req.body);
        AdaptationSubmission s{j.at("task_id"), j.at("participant_id"), j.value("submission_id", ""),
                               j.value("title", ""), j.value("ingredients", std::vector<std::string>{}),
                               j.value("steps", std::vector<std::string>{}), j.value("elapsed_seconds", 0.0)};
        return Json{{"stored_id", store_.submit_adaptation(s)}};
      });
    });
    server_.Post(R"(/api/tasks/([^/]+)/skip)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto j = nlohmann::json::parse(req.body);
        const std::string id = req.matches[1];
        store_.skip(id, j.at("participant_id"));
        return Json{{"task_id", id}, {"status", to_string(store_.status(id))}};
      });
    });
    server_.Post("/api/ratings", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto j = nlohmann::json::parse(req.body);
        RatingSubmission s;
        s.rating = {j.at("pair_id"), j.contains("evaluator_id") ? j.at("evaluator_id") : j.at("participant_id"),
                    j.at("gra"), j.at("con"), j.at("pre"), j.at("cul")};
        s.submission_id = j.value("submission_id", "");
        s.elapsed_seconds = j.value("elapsed_seconds", 0.0);
        return Json{{"stored_id", store_.submit_rating(s)}};
      });
    });
    server_.Get("/api/comprehension", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        Json out = Json::array();
        for (const auto& ex : store_.examples())
          out.push_back({{"pair_id", ex.pair_id}, {"direction", to_string(ex.direction)},
                         {"source", to_json(ex.source)}, {"candidate", to_json(ex.candidate)}});
        return out;
      });
    });
    server_.Post("/api/comprehension", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto j = nlohmann::json::parse(req.body);
        std::map<std::string, std::array<int, 4>> answers;
        for (const auto& a : j.at("answers"))
          answers[a.at("pair_id")] = {a.at("gra").get<int>(), a.at("con").get<int>(), a.at("pre").get<int>(),
                                      a.at("cul").get<int>()};
        return Json{{"passed", store_.submit_comprehension(j.at("participant_id"), answers)}};
      });
    });
    server_.Get("/api/export", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto kind = param(req, "kind");
        if (kind == "adaptations") res.set_content(store_.export_adaptations(), "application/x-ndjson");
        else if (kind == "ratings") res.set_content(store_.export_ratings(), "application/x-ndjson");
        else throw Error(ErrorCode::ValidationFailed, "kind must be adaptations or ratings");
      } catch (const Error& e) {
        res.status = http_status(e.code());
        res.set_content(Json{{"error", to_string(e.code())}, {"message", e.what()}}.dump(), "application/json");
      }
    });
    server_.Get("/api/progress", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        return store_.progress(req.has_param("participant") ? std::optional(req.get_param_value("participant"))
                                                            : std::nullopt);
      });
    });
  }

  AnnotationStore& store_;
  httplib::Server server_;
};

}  // namespace crossrecipe
