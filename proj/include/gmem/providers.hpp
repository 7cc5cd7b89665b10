#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "gmem/error.hpp"

namespace gmem::providers {

enum class Role { System, User, Assistant };
std::string_view to_string(Role role);

struct ImageAttachment {
  std::string mime_type = "image/jpeg";
  std::string base64_data;
};

struct ChatMessage {
  Role role = Role::User;
  std::string content;
  std::vector<ImageAttachment> images;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  std::string model;
  double temperature = 0.0;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int total_tokens = 0;
};

struct ChatResponse {
  std::string content;
  std::string finish_reason = "stop";
  TokenUsage usage;
};

struct EmbedRequest {
  std::vector<std::string> texts;
  std::string model;
};

struct EmbedResponse {
  std::vector<std::vector<double>> vectors;
};

/// Provider failure with the number of attempts made.
class ProviderError : public Error {
 public:
  ProviderError(ErrorCode code, const std::string& message, int attempts = 1)
      : Error(code, message), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
  virtual bool is_live() const { return false; }
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbedResponse embed(const EmbedRequest& request) = 0;
  virtual bool is_live() const { return false; }
};

/// Text of the last user message, or empty.
std::string last_user_text(const ChatRequest& request);

struct StubRule {
  std::string match;   // substring of the last user message, or a regex
  bool regex = false;  // ECMAScript syntax when true
  std::string response;
};

/// Deterministic chat stub: the first rule whose matcher hits the last user
/// message wins; otherwise the fallthrough produces the reply.
class ScriptedChatStub : public ChatProvider {
 public:
  using Fallthrough = std::function<std::string(const ChatRequest&)>;

  ScriptedChatStub(std::vector<StubRule> rules, std::string fallthrough);
  ScriptedChatStub(std::vector<StubRule> rules, Fallthrough fallthrough);

  /// Script file: JSON list of {"match": ..., "response": ..., "regex"?: bool}.
  static std::vector<StubRule> load_rules(const std::filesystem::path& path);

  ChatResponse chat(const ChatRequest& request) override;

  std::size_t calls() const { return calls_.load(); }

 private:
  std::vector<StubRule> rules_;
  std::vector<std::optional<std::regex>> compiled_;
  Fallthrough fallthrough_;
  std::atomic<std::size_t> calls_{0};
};

/// Embeds through embedding::stub_embed.
class StubEmbedder : public EmbeddingProvider {
 public:
  EmbedResponse embed(const EmbedRequest& request) override;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::vector<std::chrono::milliseconds> delays{std::chrono::milliseconds(500),
                                                std::chrono::milliseconds(1000),
                                                std::chrono::milliseconds(2000)};
  /// Replaceable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct ClientConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string chat_model = "gpt-4o";
  std::string embed_model = "text-embedding-3-small";
  std::chrono::seconds timeout{60};
  int max_concurrent = 4;
  RetryPolicy retry;
};

/// Client for hosted chat-completions / embeddings endpoints
/// (POST {base}/chat/completions, POST {base}/embeddings).
class OpenAICompatibleClient : public ChatProvider, public EmbeddingProvider {
 public:
  /// Throws HermeticViolation when hermetic mode is on.
  explicit OpenAICompatibleClient(ClientConfig config);
  ~OpenAICompatibleClient() override;

  ChatResponse chat(const ChatRequest& request) override;
  EmbedResponse embed(const EmbedRequest& request) override;
  bool is_live() const override { return true; }

  static std::string build_chat_body(const ChatRequest& request, const std::string& default_model);
  static ChatResponse parse_chat_body(const std::string& body);
  static EmbedResponse parse_embed_body(const std::string& body, std::size_t expected);

 private:
  struct Impl;
  std::string post_json(const std::string& path, const std::string& body);

  ClientConfig config_;
  std::unique_ptr<Impl> impl_;
};

/// Hermetic mode forbids constructing live clients. Enabled by
/// set_hermetic_mode(true) or MEM_HERMETIC=1 in the environment.
void set_hermetic_mode(bool on);
bool hermetic_mode();

enum class ProviderMode { Live, Stub };

struct ProviderSettings {
  ProviderMode mode = ProviderMode::Stub;
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string chat_model = "gpt-4o";
  std::string embed_model = "text-embedding-3-small";
  std::optional<std::filesystem::path> stub_script;

  /// Reads MEM_PROVIDER_MODE, MEM_PROVIDER_BASE_URL, MEM_PROVIDER_API_KEY,
  /// MEM_CHAT_MODEL, MEM_EMBED_MODEL over the defaults.
  static ProviderSettings from_env();
};

struct ProviderSet {
  std::shared_ptr<ChatProvider> chat;
  std::shared_ptr<EmbeddingProvider> embed;
  bool live = false;
};

/// Stub mode: scripted chat (rules from stub_script, if any) whose
/// fallthrough is `stub_fallthrough`, plus StubEmbedder.
ProviderSet make_providers(const ProviderSettings& settings,
                           ScriptedChatStub::Fallthrough stub_fallthrough = {});

}  // namespace gmem::providers
