#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmem/agent.hpp"
#include "gmem/embedding.hpp"
#include "gmem/memory_graph.hpp"
#include "gmem/perception.hpp"
#include "gmem/providers.hpp"

namespace httplib {
class Server;
}

namespace gmem::service {

struct ServiceConfig {
  std::filesystem::path data_dir = "gmem-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path static_dir;  // served under GET /; empty: built-in page
  std::filesystem::path files_dir;   // served under GET /files; empty: <data_dir>/files
  providers::ProviderSettings providers;
  perception::PerceptionParams perception;
  agent::AgentConfig retrieval;
  std::size_t chunk_chars = embedding::kDefaultChunkChars;
  std::string stream_start = "2024-01-01T00:00:00Z";

  /// Sets one key ("port", "provider.mode", "expansion.damping", ...).
  /// Throws Error(InvalidConfig) naming the key on an unknown key or bad value.
  void set(const std::string& key, const std::string& value);

  /// Lines of `key = value`; `#` starts a comment.
  void load_file(const std::filesystem::path& path);

  /// MEM_<KEY> with dots as underscores, e.g. MEM_PROVIDER_MODE, MEM_PORT.
  /// MEM_CHAT_MODEL and MEM_EMBED_MODEL are accepted as aliases.
  void load_env();

  /// Throws Error(InvalidConfig) naming the first offending key.
  void validate() const;

  std::filesystem::path snapshot_path() const { return data_dir / "graph.json"; }
  std::filesystem::path resolved_files_dir() const {
    return files_dir.empty() ? data_dir / "files" : files_dir;
  }

  static std::vector<std::string> keys();
};

/// Client-side mistake; maps to HTTP 400 and CLI exit code 1.
class BadRequest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Another ingestion is running; maps to HTTP 409.
class Busy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IngestItem {
  enum class Kind { Image, Note };
  Kind kind = Kind::Image;
  std::string caption;
  std::vector<std::string> data_files;
  std::optional<std::uint64_t> anchor_index;  // frame index, for timestamps
};

struct IngestFailure {
  std::size_t index = 0;
  std::string code;
  std::string message;
};

struct IngestReport {
  std::size_t notes_created = 0;
  std::size_t entities_created = 0;
  std::vector<IngestFailure> errors;
};

/// Parses a JSON-lines caption fixture. Each line is an object with
/// "caption" (or "note" for a free-standing memory note) and optional
/// "anchor_index" and "data_files".
std::vector<IngestItem> read_fixture(const std::filesystem::path& path);

/// Parses an item list from a JSON array of strings or objects shaped like
/// fixture lines. Throws BadRequest.
std::vector<IngestItem> items_from_json(const nlohmann::json& list);

/// The memory store behind the CLI and the HTTP API: one writer at a time,
/// concurrent readers.
class MemoryService {
 public:
  /// Restores the snapshot in data_dir when present.
  explicit MemoryService(ServiceConfig config);
  /// Uses `providers` instead of building them from config.providers.
  MemoryService(ServiceConfig config, providers::ProviderSet providers);

  /// Runs caption parsing, chunked embedding, image-note creation and entity
  /// linking per item. A failing item is skipped and reported. One call is one
  /// temporal stream. Throws Busy when another ingestion is in flight.
  IngestReport ingest(const std::vector<IngestItem>& items);

  /// Throws BadRequest on an empty question.
  agent::Answer ask(const std::string& question) const;

  std::optional<nlohmann::ordered_json> note_view(const std::string& id) const;
  nlohmann::ordered_json ask_json(const agent::Answer& answer) const;
  nlohmann::ordered_json stats_json() const;
  GraphStats stats() const;
  std::uint64_t graph_hash() const;
  std::size_t export_vault(const std::filesystem::path& dir) const;

  const ServiceConfig& config() const { return config_; }
  bool live() const { return providers_.live; }

  /// Copy of the graph under the read lock.
  MemoryGraph graph_copy() const;

 private:
  std::vector<EmbeddedChunk> embed_chunks(const std::string& plain) const;
  void persist() const;

  ServiceConfig config_;
  providers::ProviderSet providers_;
  Timestamp stream_start_{};
  mutable std::shared_mutex graph_mutex_;
  std::mutex ingest_mutex_;
  MemoryGraph graph_;
  embedding::EmbeddingIndex index_;
};

/// Registers every route on a fresh server.
std::unique_ptr<httplib::Server> make_http_server(MemoryService& service);

}  // namespace gmem::service
