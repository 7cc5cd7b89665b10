#include <semaphore>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gmem/providers.hpp"

namespace gmem::providers {

using nlohmann::json;

struct OpenAICompatibleClient::Impl {
  explicit Impl(int max_concurrent) : slots(max_concurrent) {}

  std::string origin;       // scheme://host[:port]
  std::string path_prefix;  // e.g. /v1
  std::counting_semaphore<1024> slots;
};

namespace {

void split_base_url(const std::string& url, std::string& origin, std::string& prefix) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "provider base URL needs a scheme: " + url);
  }
  const auto path = url.find('/', scheme + 3);
  origin = url.substr(0, path);
  prefix = path == std::string::npos ? "" : url.substr(path);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
}

[[noreturn]] void malformed(const std::string& why) {
  throw ProviderError(ErrorCode::MalformedResponse, "malformed provider response: " + why);
}

}  // namespace

OpenAICompatibleClient::OpenAICompatibleClient(ClientConfig config) : config_(std::move(config)) {
  if (hermetic_mode()) {
    throw ProviderError(ErrorCode::HermeticViolation,
                        "live provider client constructed while hermetic mode is on", 0);
  }
  impl_ = std::make_unique<Impl>(std::max(1, config_.max_concurrent));
  split_base_url(config_.base_url, impl_->origin, impl_->path_prefix);
  if (!config_.retry.sleep) {
    config_.retry.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

OpenAICompatibleClient::~OpenAICompatibleClient() = default;

std::string OpenAICompatibleClient::build_chat_body(const ChatRequest& request,
                                                    const std::string& default_model) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    json msg = {{"role", to_string(m.role)}};
    if (m.images.empty()) {
      msg["content"] = m.content;
    } else {
      json parts = json::array({{{"type", "text"}, {"text", m.content}}});
      for (const auto& img : m.images) {
        parts.push_back({{"type", "image_url"},
                         {"image_url",
                          {{"url", fmt::format("data:{};base64,{}", img.mime_type, img.base64_data)}}}});
      }
      msg["content"] = std::move(parts);
    }
    messages.push_back(std::move(msg));
  }
  json body = {{"model", request.model.empty() ? default_model : request.model},
               {"messages", std::move(messages)},
               {"temperature", request.temperature}};
  return body.dump();
}

ChatResponse OpenAICompatibleClient::parse_chat_body(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  try {
    const auto& choice = doc.at("choices").at(0);
    ChatResponse out;
    const auto& content = choice.at("message").at("content");
    out.content = content.is_null() ? "" : content.get<std::string>();
    out.finish_reason = choice.value("finish_reason", "stop");
    if (doc.contains("usage")) {
      const auto& u = doc["usage"];
      out.usage = {u.value("prompt_tokens", 0), u.value("completion_tokens", 0),
                   u.value("total_tokens", 0)};
    }
    return out;
  } catch (const json::exception& e) {
    malformed(e.what());
  }
}

EmbedResponse OpenAICompatibleClient::parse_embed_body(const std::string& body, std::size_t expected) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  EmbedResponse out;
  try {
    const auto& data = doc.at("data");
    if (data.size() != expected) {
      malformed(fmt::format("{} embeddings for {} inputs", data.size(), expected));
    }
    out.vectors.resize(expected);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t idx = data[i].value("index", i);
      if (idx >= expected || !out.vectors[idx].empty()) malformed("bad embedding index");
      out.vectors[idx] = data[i].at("embedding").get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  for (const auto& v : out.vectors) {
    if (v.size() != out.vectors.front().size()) {
      throw ProviderError(ErrorCode::DimensionMismatch,
                          fmt::format("mixed embedding dims {} and {}", out.vectors.front().size(),
                                      v.size()));
    }
  }
  return out;
}

std::string OpenAICompatibleClient::post_json(const std::string& path, const std::string& body) {
  impl_->slots.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{impl_->slots};

  httplib::Client client(impl_->origin);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const int attempts = std::max(1, config_.retry.max_attempts);
  std::string last;
  bool last_was_transport = false;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      const auto& d = config_.retry.delays;
      if (!d.empty()) config_.retry.sleep(d[std::min<std::size_t>(attempt - 2, d.size() - 1)]);
    }
    auto res = client.Post(impl_->path_prefix + path, headers, body, "application/json");
    if (!res) {
      last = httplib::to_string(res.error());
      last_was_transport = true;
      continue;
    }
    last_was_transport = false;
    if (res->status >= 200 && res->status < 300) return res->body;
    if (res->status == 429 || res->status >= 500) {
      last = fmt::format("status {}", res->status);
      continue;
    }
    throw ProviderError(ErrorCode::ProviderUnavailable,
                        fmt::format("provider rejected request with status {}: {}", res->status,
                                    res->body.substr(0, 200)),
                        attempt);
  }
  if (last_was_transport) {
    throw ProviderError(ErrorCode::Timeout,
                        fmt::format("provider unreachable after {} attempts ({})", attempts, last),
                        attempts);
  }
  throw ProviderError(ErrorCode::RateLimited,
                      fmt::format("provider still failing after {} attempts (last {})", attempts, last),
                      attempts);
}

ChatResponse OpenAICompatibleClient::chat(const ChatRequest& request) {
  if (request.messages.empty()) {
    throw ProviderError(ErrorCode::MalformedResponse, "chat request without messages", 0);
  }
  return parse_chat_body(post_json("/chat/completions", build_chat_body(request, config_.chat_model)));
}

EmbedResponse OpenAICompatibleClient::embed(const EmbedRequest& request) {
  if (request.texts.empty()) return {};
  const json body = {{"model", request.model.empty() ? config_.embed_model : request.model},
                     {"input", request.texts}};
  return parse_embed_body(post_json("/embeddings", body.dump()), request.texts.size());
}

}  // namespace gmem::providers
