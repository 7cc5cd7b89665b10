#include <atomic>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gmem/embedding.hpp"
#include "gmem/providers.hpp"

namespace gmem::providers {

namespace {
std::atomic<bool> g_hermetic{false};
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

void set_hermetic_mode(bool on) { g_hermetic = on; }

bool hermetic_mode() {
  if (g_hermetic) return true;
  const char* env = std::getenv("MEM_HERMETIC");
  return env != nullptr && std::string_view(env) == "1";
}

std::string last_user_text(const ChatRequest& request) {
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == Role::User) return it->content;
  }
  return {};
}

ScriptedChatStub::ScriptedChatStub(std::vector<StubRule> rules, std::string fallthrough)
    : ScriptedChatStub(std::move(rules),
                       Fallthrough([text = std::move(fallthrough)](const ChatRequest&) { return text; })) {}

ScriptedChatStub::ScriptedChatStub(std::vector<StubRule> rules, Fallthrough fallthrough)
    : rules_(std::move(rules)), fallthrough_(std::move(fallthrough)) {
  for (const auto& r : rules_) {
    compiled_.push_back(r.regex ? std::optional<std::regex>(std::regex(r.match)) : std::nullopt);
  }
}

std::vector<StubRule> ScriptedChatStub::load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read stub script " + path.string());
  std::vector<StubRule> rules;
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& r : doc) {
      rules.push_back(StubRule{r.at("match").get<std::string>(), r.value("regex", false),
                               r.at("response").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, fmt::format("stub script {}: {}", path.string(), e.what()));
  }
  return rules;
}

ChatResponse ScriptedChatStub::chat(const ChatRequest& request) {
  ++calls_;
  const std::string text = last_user_text(request);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const bool hit = compiled_[i] ? std::regex_search(text, *compiled_[i])
                                  : text.find(rules_[i].match) != std::string::npos;
    if (hit) return ChatResponse{rules_[i].response, "stop", {}};
  }
  return ChatResponse{fallthrough_ ? fallthrough_(request) : std::string(), "stop", {}};
}

EmbedResponse StubEmbedder::embed(const EmbedRequest& request) {
  EmbedResponse out;
  out.vectors.reserve(request.texts.size());
  for (const auto& t : request.texts) out.vectors.push_back(embedding::stub_embed(t));
  return out;
}

ProviderSettings ProviderSettings::from_env() {
  ProviderSettings s;
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("MEM_PROVIDER_MODE")) {
    if (*v == "live") {
      s.mode = ProviderMode::Live;
    } else if (*v == "stub") {
      s.mode = ProviderMode::Stub;
    } else {
      throw Error(ErrorCode::InvalidConfig,
                  fmt::format("MEM_PROVIDER_MODE must be live or stub, got '{}'", *v));
    }
  }
  if (auto v = env("MEM_PROVIDER_BASE_URL")) s.base_url = *v;
  if (auto v = env("MEM_PROVIDER_API_KEY")) s.api_key = *v;
  if (auto v = env("MEM_CHAT_MODEL")) s.chat_model = *v;
  if (auto v = env("MEM_EMBED_MODEL")) s.embed_model = *v;
  return s;
}

ProviderSet make_providers(const ProviderSettings& settings,
                           ScriptedChatStub::Fallthrough stub_fallthrough) {
  ProviderSet set;
  if (settings.mode == ProviderMode::Live) {
    ClientConfig cfg;
    cfg.base_url = settings.base_url;
    cfg.api_key = settings.api_key;
    cfg.chat_model = settings.chat_model;
    cfg.embed_model = settings.embed_model;
    auto client = std::make_shared<OpenAICompatibleClient>(std::move(cfg));
    set.chat = client;
    set.embed = client;
    set.live = true;
    return set;
  }
  std::vector<StubRule> rules;
  if (settings.stub_script) rules = ScriptedChatStub::load_rules(*settings.stub_script);
  set.chat = std::make_shared<ScriptedChatStub>(std::move(rules), std::move(stub_fallthrough));
  set.embed = std::make_shared<StubEmbedder>();
  return set;
}

}  // namespace gmem::providers
