#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>

#include <fmt/format.h>

#include "gmem/service.hpp"

namespace gmem::service {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, fmt::format("invalid config key '{}': {}", key, why));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad(key, fmt::format("'{}' is not a number", value));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

using Setter = std::function<void(ServiceConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data_dir", [](ServiceConfig& c, const auto&, const auto& v) { c.data_dir = v; }},
      {"host", [](ServiceConfig& c, const auto&, const auto& v) { c.host = v; }},
      {"port", [](ServiceConfig& c, const auto& k, const auto& v) { c.port = parse_number<int>(k, v); }},
      {"static_dir", [](ServiceConfig& c, const auto&, const auto& v) { c.static_dir = v; }},
      {"files_dir", [](ServiceConfig& c, const auto&, const auto& v) { c.files_dir = v; }},
      {"provider.mode",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         if (v == "live") {
           c.providers.mode = providers::ProviderMode::Live;
         } else if (v == "stub") {
           c.providers.mode = providers::ProviderMode::Stub;
         } else {
           bad(k, fmt::format("expected live or stub, got '{}'", v));
         }
       }},
      {"provider.base_url", [](ServiceConfig& c, const auto&, const auto& v) { c.providers.base_url = v; }},
      {"provider.api_key", [](ServiceConfig& c, const auto&, const auto& v) { c.providers.api_key = v; }},
      {"provider.chat_model", [](ServiceConfig& c, const auto&, const auto& v) { c.providers.chat_model = v; }},
      {"provider.embed_model",
       [](ServiceConfig& c, const auto&, const auto& v) { c.providers.embed_model = v; }},
      {"provider.stub_script",
       [](ServiceConfig& c, const auto&, const auto& v) {
         if (v.empty()) {
           c.providers.stub_script.reset();
         } else {
           c.providers.stub_script = v;
         }
       }},
      {"perception.sample_rate_hz",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.perception.sample_rate_hz = parse_number<double>(k, v);
       }},
      {"perception.every_nth",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.perception.every_nth = parse_number<std::size_t>(k, v);
       }},
      {"perception.window_size",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.perception.window_size = parse_number<std::size_t>(k, v);
       }},
      {"expansion.damping",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.retrieval.expansion.damping = parse_number<double>(k, v);
       }},
      {"expansion.tol",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.retrieval.expansion.tol = parse_number<double>(k, v);
       }},
      {"expansion.max_iter",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.retrieval.expansion.max_iter = parse_number<int>(k, v);
       }},
      {"expansion.top_m",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.retrieval.expansion.top_m = parse_number<std::size_t>(k, v);
       }},
      {"retrieval.top_k",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.retrieval.top_k = parse_number<std::size_t>(k, v);
       }},
      {"retrieval.max_context_notes",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.retrieval.max_context_notes = parse_number<std::size_t>(k, v);
       }},
      {"retrieval.max_context_chars",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.retrieval.max_context_chars = parse_number<std::size_t>(k, v);
       }},
      {"retrieval.rerank_threshold",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.retrieval.rerank_threshold = parse_number<double>(k, v);
       }},
      {"retrieval.rerank_blend",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         c.retrieval.rerank_blend = parse_number<double>(k, v);
       }},
      {"ingest.chunk_chars",
       [](ServiceConfig& c, const auto& k, const auto& v) { c.chunk_chars = parse_number<std::size_t>(k, v); }},
      {"ingest.stream_start",
       [](ServiceConfig& c, const auto& k, const auto& v) {
         if (!parse_rfc3339(v)) bad(k, fmt::format("'{}' is not an RFC 3339 UTC timestamp", v));
         c.stream_start = v;
       }},
  };
  return table;
}

}  // namespace

void ServiceConfig::set(const std::string& key, const std::string& value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) bad(key, "unknown key");
  it->second(*this, key, value);
}

std::vector<std::string> ServiceConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

void ServiceConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig,
                  fmt::format("{}:{}: expected key = value", path.string(), lineno));
    }
    set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
}

void ServiceConfig::load_env() {
  for (const auto& key : keys()) {
    std::string name = "MEM_";
    for (char c : key) name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') set(key, v);
  }
  if (const char* v = std::getenv("MEM_CHAT_MODEL"); v != nullptr && *v != '\0') {
    set("provider.chat_model", v);
  }
  if (const char* v = std::getenv("MEM_EMBED_MODEL"); v != nullptr && *v != '\0') {
    set("provider.embed_model", v);
  }
}

void ServiceConfig::validate() const {
  if (data_dir.empty()) bad("data_dir", "must not be empty");
  if (port < 0 || port > 65535) bad("port", fmt::format("{} is out of range", port));
  if (!(perception.sample_rate_hz > 0.0) || !std::isfinite(perception.sample_rate_hz)) {
    bad("perception.sample_rate_hz", "must be positive");
  }
  if (perception.every_nth < 1) bad("perception.every_nth", "must be at least 1");
  if (perception.window_size < 2) bad("perception.window_size", "must be at least 2");
  const auto& ex = retrieval.expansion;
  if (!(ex.damping > 0.0 && ex.damping < 1.0)) bad("expansion.damping", "must be in (0, 1)");
  if (!(ex.tol > 0.0)) bad("expansion.tol", "must be positive");
  if (ex.max_iter < 1) bad("expansion.max_iter", "must be at least 1");
  if (retrieval.top_k < 1) bad("retrieval.top_k", "must be at least 1");
  if (retrieval.max_context_notes < 1) bad("retrieval.max_context_notes", "must be at least 1");
  if (retrieval.max_context_chars < 1) bad("retrieval.max_context_chars", "must be at least 1");
  if (retrieval.rerank_threshold < 0.0 || retrieval.rerank_threshold > 1.0) {
    bad("retrieval.rerank_threshold", "must be in [0, 1]");
  }
  if (retrieval.rerank_blend < 0.0) bad("retrieval.rerank_blend", "must not be negative");
  if (chunk_chars < embedding::kMinChunkChars) {
    bad("ingest.chunk_chars", fmt::format("must be at least {}", embedding::kMinChunkChars));
  }
  if (providers.mode == providers::ProviderMode::Live) {
    if (providers.base_url.find("://") == std::string::npos) {
      bad("provider.base_url", "needs a scheme such as https://");
    }
  }
  if (providers.stub_script && !std::filesystem::exists(*providers.stub_script)) {
    bad("provider.stub_script", fmt::format("{} does not exist", providers.stub_script->string()));
  }
}

}  // namespace gmem::service
