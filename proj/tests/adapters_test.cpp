#include "crossrecipe/adapters.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

#include <atomic>
#include <thread>

using namespace crossrecipe;

namespace {

// The four prompts exactly as printed, with their recipe placeholders.
const char* kRecipe = "Title: 番茄炒蛋\nIngredients: 番茄 2 个\n鸡蛋 3 个\nSteps: 打蛋。\n炒。";

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("crossrecipe_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Chat and completion routes on a loopback server.
class MockEndpoint {
 public:
  std::atomic<int> calls{0};
  nlohmann::json last_request;
  std::mutex mutex;

  MockEndpoint() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      auto body = nlohmann::json::parse(req.body);
      {
        std::lock_guard lock(mutex);
        last_request = body;
        last_auth = req.get_header_value("Authorization");
      }
      const std::string prompt = body["messages"][0]["content"];
      if (prompt.find("FAIL") != std::string::npos) {
        res.status = 500;
        return;
      }
      if (prompt.find("SLOW") != std::string::npos) std::this_thread::sleep_for(std::chrono::milliseconds(600));
      std::string reply = prompt.find("EMPTY") != std::string::npos ? "  \n" : "\r\nTitle: Tomato eggs\r\nSteps: Fry.\n\n";
      res.set_content(nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", reply}}}}}}}.dump(),
                      "application/json");
    });
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      auto body = nlohmann::json::parse(req.body);
      res.set_content(nlohmann::json{{"choices", {{{"text", " continued " + body["prompt"].get<std::string>().substr(0, 5)}}}}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }

  EndpointConfig config(WireFormat format = WireFormat::Chat) const {
    EndpointConfig c;
    c.url = "http://127.0.0.1:" + std::to_string(port_) +
            (format == WireFormat::Chat ? "/v1/chat/completions" : "/v1/completions");
    c.model = "mock-model";
    c.format = format;
    c.retries = 1;
    c.timeout_seconds = 0.3;
    return c;
  }

  std::string last_auth;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST(Prompts, BundledTemplatesMatchPublishedPrompts) {
  const std::map<std::pair<PromptStyle, Direction>, std::pair<std::string, std::string>> expected = {
      {{PromptStyle::Completion, Direction::EnToZh}, {oracles::kCompletionEnZh, "[English recipe]"}},
      {{PromptStyle::Completion, Direction::ZhToEn}, {oracles::kCompletionZhEn, "[Chinese recipe]"}},
      {{PromptStyle::Instruction, Direction::EnToZh}, {oracles::kInstructionEnZh, "[English recipe]"}},
      {{PromptStyle::Instruction, Direction::ZhToEn}, {oracles::kInstructionZhEn, "[Chinese recipe]"}},
  };
  ASSERT_EQ(bundled_templates().size(), 4u);
  for (const auto& t : bundled_templates()) {
    const auto& [published, placeholder] = expected.at({t.style, t.direction});
    EXPECT_EQ(build_prompt(placeholder, t), published);
  }
}

TEST(Prompts, SlotSubstitutionOnly) {
  for (const auto& t : bundled_templates()) {
    const std::string prompt = build_prompt(kRecipe, t);
    const auto at = t.text.find(kRecipeSlot);
    EXPECT_EQ(prompt.substr(0, at), t.text.substr(0, at));
    EXPECT_EQ(prompt.substr(at, std::strlen(kRecipe)), kRecipe);
    EXPECT_EQ(prompt.substr(at + std::strlen(kRecipe)), t.text.substr(at + kRecipeSlot.size()));
  }
  const auto& zh_en = bundled_template(PromptStyle::Completion, Direction::ZhToEn);
  EXPECT_EQ(build_prompt("[Chinese recipe]", zh_en),
            "[Chinese recipe] Recipe in English, adapted to an English-speaking audience:");
  EXPECT_TRUE(build_prompt(kRecipe, bundled_template(PromptStyle::Instruction, Direction::ZhToEn))
                  .starts_with("Convert the provided Chinese recipe into an English recipe"));
  EXPECT_TRUE(build_prompt(kRecipe, bundled_template(PromptStyle::Completion, Direction::EnToZh))
                  .ends_with("中文菜谱，适合中国人的:"));
}

TEST(Prompts, SlotErrorsAndCustomTemplates) {
  EXPECT_EQ(code_of([] { build_prompt("x", {PromptStyle::Instruction, Direction::ZhToEn, "no slot"}); }),
            ErrorCode::SlotMissing);
  EXPECT_EQ(code_of([] { build_prompt("x", {PromptStyle::Instruction, Direction::ZhToEn, "{recipe}{recipe}"}); }),
            ErrorCode::InvalidConfig);
  auto dir = scratch("template");
  write_file(dir / "t.txt", "Adapt: {recipe}\n");
  auto t = load_template(dir / "t.txt", PromptStyle::Instruction, Direction::EnToZh);
  EXPECT_EQ(build_prompt("R", t), "Adapt: R");
  std::filesystem::remove_all(dir);
}

TEST(Decoding, RecordedConstants) {
  EXPECT_EQ(Seq2SeqDecoding::beam_size, 3);
  EXPECT_DOUBLE_EQ(Seq2SeqDecoding::repetition_penalty, 1.2);
  EXPECT_EQ(Seq2SeqDecoding::no_repeat_ngram_size, 5);
  EXPECT_DOUBLE_EQ(InstructionModelDefaults::temperature, 0.7);
  EXPECT_EQ(InstructionModelDefaults::max_length, 1024);
}

TEST(Endpoint, ConfigValidation) {
  EndpointConfig c;
  c.url = "http://localhost:1/x";
  c.temperature = -0.1;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidConfig);
  c.temperature = 0;
  c.timeout_seconds = 0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidConfig);
}

TEST(Endpoint, ChatEchoIsStoredVerbatimAfterCleanup) {
  MockEndpoint mock;
  auto cfg = mock.config();
  cfg.api_key_env = "CROSSRECIPE_TEST_KEY";
  ::setenv("CROSSRECIPE_TEST_KEY", "sekret", 1);
  auto out = adapt_via_endpoint("hello", cfg);
  EXPECT_EQ(out.text, "Title: Tomato eggs\nSteps: Fry.");
  EXPECT_FALSE(out.cached);
  EXPECT_EQ(mock.last_request["model"], "mock-model");
  EXPECT_EQ(mock.last_request["messages"][0]["role"], "user");
  EXPECT_DOUBLE_EQ(mock.last_request["temperature"].get<double>(), 0.7);
  EXPECT_EQ(mock.last_auth, "Bearer sekret");
  EXPECT_EQ(out.key, completion_key("hello", cfg));

  auto completion = adapt_via_endpoint("abcdefgh", mock.config(WireFormat::Completion));
  EXPECT_EQ(completion.text, "continued abcde");
}

TEST(Endpoint, FailuresAreDistinct) {
  MockEndpoint mock;
  EXPECT_EQ(code_of([&] { adapt_via_endpoint("SLOW", mock.config()); }), ErrorCode::Timeout);
  const int before = mock.calls;
  EXPECT_EQ(code_of([&] { adapt_via_endpoint("FAIL", mock.config()); }), ErrorCode::HttpError);
  EXPECT_EQ(mock.calls - before, 2);  // one retry
  EXPECT_EQ(code_of([&] { adapt_via_endpoint("EMPTY", mock.config()); }), ErrorCode::EmptyCompletion);
}

TEST(Endpoint, ResponsesCachedByPromptModelTemperature) {
  MockEndpoint mock;
  auto dir = scratch("completion_cache");
  auto cfg = mock.config();
  adapt_via_endpoint("p", cfg, dir);
  auto again = adapt_via_endpoint("p", cfg, dir);
  EXPECT_TRUE(again.cached);
  EXPECT_EQ(mock.calls, 1);
  cfg.temperature = 0.2;
  EXPECT_FALSE(adapt_via_endpoint("p", cfg, dir).cached);
  cfg.model = "other";
  EXPECT_FALSE(adapt_via_endpoint("p", cfg, dir).cached);
  EXPECT_EQ(mock.calls, 3);
  std::filesystem::remove_all(dir);
}

TEST(Batch, OneFailureLeavesOthersAndResumes) {
  MockEndpoint mock;
  auto dir = scratch("batch");
  const auto out = dir / "hyp.jsonl";
  std::vector<BatchItem> items = {{"r1", "one"}, {"r2", "FAIL two"}, {"r3", "three"}};
  auto recs = adapt_batch(items, mock.config(), out);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_TRUE(recs[0].text && recs[2].text);
  EXPECT_EQ(recs[1].error, ErrorCode::HttpError);
  auto lines = read_lines(out);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(nlohmann::json::parse(lines[1])["id"], "r2");
  EXPECT_EQ(nlohmann::json::parse(lines[1])["error"], "HttpError");
  auto fail_path = out;
  fail_path += ".failures.jsonl";
  EXPECT_EQ(read_lines(fail_path).size(), 1u);

  // Resume: only the failed item is sent again.
  items[1].prompt = "two";
  const int before = mock.calls;
  recs = adapt_batch(items, mock.config(), out);
  EXPECT_EQ(mock.calls - before, 1);
  EXPECT_TRUE(recs[1].text);
  EXPECT_TRUE(read_file(fail_path).empty());
  auto log_path = out;
  log_path += ".log.jsonl";
  EXPECT_EQ(read_lines(log_path).size(), 4u);
  std::filesystem::remove_all(dir);
}

namespace {

class Table : public SentenceEmbedder {
 public:
  std::map<std::string, Vector> vectors;
  Vector embed(const std::string& text) override { return vectors.at(text); }
  std::string name() const override { return "table"; }
};

class Tag : public TitleTranslator {
 public:
  std::string translate(const std::string& title, Lang, Lang) override { return "en:" + title; }
  std::string name() const override { return "tag"; }
};

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

}  // namespace

TEST(Retrieval, ReturnsHighestCosineTarget) {
  Table emb;
  Tag tr;
  emb.vectors = {{"en:红烧肉", v2(1, 1)}, {"Pork roast", v2(0.9, 1.1)}, {"Braised pork", v2(2, 2)}, {"Salad", v2(1, -1)}};
  std::vector<Recipe> targets = {{"e1", Lang::En, "Pork roast", {}, {}},
                                 {"e2", Lang::En, "Braised pork", {}, {}},
                                 {"e3", Lang::En, "Salad", {}, {}}};
  auto [best, cos] = retrieval_adapt({"z1", Lang::Zh, "红烧肉", {}, {}}, targets, tr, emb);
  EXPECT_EQ(best.id, "e2");
  EXPECT_DOUBLE_EQ(cos, 1.0);
  // A single target is returned however dissimilar.
  auto [only, low] = retrieval_adapt({"z1", Lang::Zh, "红烧肉", {}, {}}, {targets[2]}, tr, emb);
  EXPECT_EQ(only.id, "e3");
  EXPECT_LT(low, 0.1);
  EXPECT_EQ(code_of([&] { retrieval_adapt({"z1", Lang::Zh, "红烧肉", {}, {}}, {}, tr, emb); }),
            ErrorCode::EmptyTargetCorpus);
}
