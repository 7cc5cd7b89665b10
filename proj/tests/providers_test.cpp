#include <cstdlib>
#include <fstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gmem/embedding.hpp"
#include "gmem/providers.hpp"
#include "support/temp_dir.hpp"

using namespace gmem;
using namespace gmem::providers;
using nlohmann::json;

namespace {

ChatRequest user_says(std::string text) {
  ChatRequest r;
  r.messages.push_back({Role::System, "system text", {}});
  r.messages.push_back({Role::User, std::move(text), {}});
  return r;
}

/// Local server that fails the first `failures` requests with `fail_status`.
class FaultServer {
 public:
  FaultServer(int failures, int fail_status, std::string success_body) {
    auto handler = [this, failures, fail_status, success_body](const httplib::Request& req,
                                                               httplib::Response& res) {
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      if (hits++ < failures) {
        res.status = fail_status;
        res.set_content("{\"error\":\"injected\"}", "application/json");
        return;
      }
      res.set_content(success_body, "application/json");
    };
    server_.Post("/v1/chat/completions", handler);
    server_.Post("/v1/embeddings", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FaultServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  std::atomic<int> hits{0};
  std::string last_body;
  std::string last_auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

const std::string kChatOk =
    R"({"choices":[{"message":{"role":"assistant","content":"hello"},"finish_reason":"stop"}],)"
    R"("usage":{"prompt_tokens":3,"completion_tokens":1,"total_tokens":4}})";

struct LiveFixture : ::testing::Test {
  void SetUp() override {
    ::unsetenv("MEM_HERMETIC");
    set_hermetic_mode(false);
  }
  void TearDown() override { set_hermetic_mode(false); }

  ClientConfig config_for(const FaultServer& server) {
    ClientConfig cfg;
    cfg.base_url = server.base_url();
    cfg.api_key = "test-key";
    cfg.retry.sleep = [this](std::chrono::milliseconds d) { slept.push_back(d); };
    return cfg;
  }

  std::vector<std::chrono::milliseconds> slept;
};

}  // namespace

TEST(ScriptedChatStub, FirstMatchingRuleWins) {
  ScriptedChatStub stub({{"floor", false, "on the floor"}, {"^how (many|much)", true, "a number"},
                         {"floor", false, "never reached"}},
                        std::string("fallthrough"));
  EXPECT_EQ(stub.chat(user_says("who is on the floor?")).content, "on the floor");
  EXPECT_EQ(stub.chat(user_says("how many cups")).content, "a number");
  EXPECT_EQ(stub.chat(user_says("so how many cups")).content, "fallthrough");
  EXPECT_EQ(stub.calls(), 3u);
}

TEST(ScriptedChatStub, MatchesOnlyTheLastUserMessage) {
  ScriptedChatStub stub({{"secret", false, "hit"}}, std::string("miss"));
  ChatRequest r;
  r.messages.push_back({Role::User, "secret", {}});
  r.messages.push_back({Role::Assistant, "ok", {}});
  r.messages.push_back({Role::User, "plain", {}});
  EXPECT_EQ(stub.chat(r).content, "miss");
  EXPECT_EQ(last_user_text(r), "plain");
  EXPECT_EQ(last_user_text(ChatRequest{}), "");
}

TEST(ScriptedChatStub, CallableFallthroughSeesTheRequest) {
  ScriptedChatStub stub({}, ScriptedChatStub::Fallthrough(
                                [](const ChatRequest& r) { return std::to_string(r.messages.size()); }));
  EXPECT_EQ(stub.chat(user_says("x")).content, "2");
}

TEST(ScriptedChatStub, LoadsRulesFromFile) {
  test::TempDir dir;
  const auto path = dir.path() / "script.json";
  std::ofstream(path) << R"([{"match": "cup", "response": "a cup"}, {"match": "^x+$", "regex": true, "response": "xs"}])";
  const auto rules = ScriptedChatStub::load_rules(path);
  ASSERT_EQ(rules.size(), 2u);
  EXPECT_FALSE(rules[0].regex);
  EXPECT_TRUE(rules[1].regex);
  ScriptedChatStub stub(rules, std::string(""));
  EXPECT_EQ(stub.chat(user_says("xxx")).content, "xs");

  std::ofstream(path) << R"([{"match": "cup"}])";
  try {
    ScriptedChatStub::load_rules(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
  try {
    ScriptedChatStub::load_rules(dir.path() / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoFailure);
  }
}

TEST(StubEmbedder, AgreesWithStubEmbed) {
  StubEmbedder e;
  const auto out = e.embed({{"a cup", "a dog"}, ""});
  ASSERT_EQ(out.vectors.size(), 2u);
  EXPECT_EQ(out.vectors[1], embedding::stub_embed("a dog"));
}

TEST(WireFormat, ChatBodyCarriesModelMessagesAndImages) {
  ChatRequest r = user_says("describe");
  r.messages.back().images.push_back({"image/png", "QUJD"});
  const auto body = json::parse(OpenAICompatibleClient::build_chat_body(r, "default-model"));
  EXPECT_EQ(body["model"], "default-model");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"], "system text");
  const auto& parts = body["messages"][1]["content"];
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0]["text"], "describe");
  EXPECT_EQ(parts[1]["image_url"]["url"], "data:image/png;base64,QUJD");
  r.model = "override";
  EXPECT_EQ(json::parse(OpenAICompatibleClient::build_chat_body(r, "default-model"))["model"], "override");
}

TEST(WireFormat, ParsesChatAndEmbedResponses) {
  const auto chat = OpenAICompatibleClient::parse_chat_body(kChatOk);
  EXPECT_EQ(chat.content, "hello");
  EXPECT_EQ(chat.usage.total_tokens, 4);
  const auto emb = OpenAICompatibleClient::parse_embed_body(
      R"({"data":[{"index":1,"embedding":[0,1]},{"index":0,"embedding":[1,0]}]})", 2);
  EXPECT_EQ(emb.vectors[0], (std::vector<double>{1, 0}));
  EXPECT_EQ(emb.vectors[1], (std::vector<double>{0, 1}));
}

TEST(WireFormat, MalformedResponsesAreTyped) {
  auto code = [](const std::function<void()>& fn) {
    try {
      fn();
    } catch (const ProviderError& e) {
      return e.code();
    }
    return ErrorCode::InvalidConfig;
  };
  EXPECT_EQ(code([] { OpenAICompatibleClient::parse_chat_body("not json"); }), ErrorCode::MalformedResponse);
  EXPECT_EQ(code([] { OpenAICompatibleClient::parse_chat_body(R"({"choices":[]})"); }),
            ErrorCode::MalformedResponse);
  EXPECT_EQ(code([] { OpenAICompatibleClient::parse_embed_body(R"({"data":[]})", 1); }),
            ErrorCode::MalformedResponse);
  EXPECT_EQ(code([] {
              OpenAICompatibleClient::parse_embed_body(R"({"data":[{"embedding":[1]},{"embedding":[1,2]}]})", 2);
            }),
            ErrorCode::DimensionMismatch);
}

TEST_F(LiveFixture, HermeticModeForbidsLiveClients) {
  set_hermetic_mode(true);
  try {
    OpenAICompatibleClient client(ClientConfig{});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.code(), ErrorCode::HermeticViolation);
  }
  ProviderSettings live;
  live.mode = ProviderMode::Live;
  EXPECT_THROW(make_providers(live), ProviderError);
  EXPECT_NO_THROW(make_providers(ProviderSettings{}));
  set_hermetic_mode(false);
  ::setenv("MEM_HERMETIC", "1", 1);
  EXPECT_TRUE(hermetic_mode());
  ::unsetenv("MEM_HERMETIC");
  EXPECT_FALSE(hermetic_mode());
}

TEST_F(LiveFixture, SettingsFromEnvironment) {
  ::setenv("MEM_PROVIDER_MODE", "live", 1);
  ::setenv("MEM_CHAT_MODEL", "chat-x", 1);
  auto s = ProviderSettings::from_env();
  EXPECT_EQ(s.mode, ProviderMode::Live);
  EXPECT_EQ(s.chat_model, "chat-x");
  ::setenv("MEM_PROVIDER_MODE", "bogus", 1);
  EXPECT_THROW(ProviderSettings::from_env(), Error);
  ::unsetenv("MEM_PROVIDER_MODE");
  ::unsetenv("MEM_CHAT_MODEL");
  EXPECT_EQ(ProviderSettings::from_env().mode, ProviderMode::Stub);
}

TEST_F(LiveFixture, ServerErrorsExhaustRetriesAsRateLimited) {
  FaultServer server(100, 500, kChatOk);
  OpenAICompatibleClient client(config_for(server));
  try {
    client.chat(user_says("hi"));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.code(), ErrorCode::RateLimited);
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(server.hits.load(), 3);
  EXPECT_EQ(slept, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500),
                                                           std::chrono::milliseconds(1000)}));
}

TEST_F(LiveFixture, RecoversAfterTransientFailures) {
  FaultServer server(2, 429, kChatOk);
  OpenAICompatibleClient client(config_for(server));
  EXPECT_EQ(client.chat(user_says("hi")).content, "hello");
  EXPECT_EQ(server.hits.load(), 3);
  EXPECT_EQ(server.last_auth, "Bearer test-key");
  EXPECT_EQ(json::parse(server.last_body)["model"], "gpt-4o");
}

TEST_F(LiveFixture, ClientErrorsAreNotRetried) {
  FaultServer server(100, 400, kChatOk);
  OpenAICompatibleClient client(config_for(server));
  try {
    client.chat(user_says("hi"));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.code(), ErrorCode::ProviderUnavailable);
    EXPECT_EQ(e.attempts(), 1);
  }
  EXPECT_EQ(server.hits.load(), 1);
}

TEST_F(LiveFixture, EmbeddingsRoundTrip) {
  FaultServer server(0, 500, R"({"data":[{"index":0,"embedding":[0.5,0.5]}]})");
  OpenAICompatibleClient client(config_for(server));
  const auto out = client.embed({{"a cup"}, ""});
  ASSERT_EQ(out.vectors.size(), 1u);
  EXPECT_EQ(out.vectors[0], (std::vector<double>{0.5, 0.5}));
  const auto sent = json::parse(server.last_body);
  EXPECT_EQ(sent["model"], "text-embedding-3-small");
  EXPECT_EQ(sent["input"], json::array({"a cup"}));
}

TEST_F(LiveFixture, UnreachableHostIsATimeout) {
  ClientConfig cfg;
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.timeout = std::chrono::seconds(1);
  cfg.retry.sleep = [](std::chrono::milliseconds) {};
  OpenAICompatibleClient client(cfg);
  try {
    client.chat(user_says("hi"));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Timeout);
    EXPECT_EQ(e.attempts(), 3);
  }
}
