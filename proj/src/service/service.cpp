#include <fstream>

#include <fmt/format.h>

#include "gmem/caption.hpp"
#include "gmem/service.hpp"
#include "gmem/vault.hpp"

namespace gmem::service {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::size_t kSnippetChars = 160;

IngestItem item_from_json(const json& j) {
  IngestItem item;
  if (j.is_string()) {
    item.caption = j.get<std::string>();
    return item;
  }
  if (!j.is_object()) throw BadRequest("each item must be a string or an object");
  if (j.contains("caption") == j.contains("note")) {
    throw BadRequest("each item needs exactly one of \"caption\" or \"note\"");
  }
  try {
    if (j.contains("note")) {
      item.kind = IngestItem::Kind::Note;
      item.caption = j.at("note").get<std::string>();
    } else {
      item.caption = j.at("caption").get<std::string>();
    }
    if (j.contains("anchor_index")) item.anchor_index = j.at("anchor_index").get<std::uint64_t>();
    if (j.contains("data_files")) item.data_files = j.at("data_files").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw BadRequest(fmt::format("bad item field: {}", e.what()));
  }
  return item;
}

std::string snippet(const std::string& text) {
  if (text.size() <= kSnippetChars) return text;
  std::size_t cut = kSnippetChars;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return text.substr(0, cut) + "...";
}

}  // namespace

std::vector<IngestItem> items_from_json(const json& list) {
  if (!list.is_array()) throw BadRequest("captions must be a JSON array");
  std::vector<IngestItem> items;
  for (const auto& j : list) items.push_back(item_from_json(j));
  return items;
}

std::vector<IngestItem> read_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BadRequest(fmt::format("cannot read fixture {}", path.string()));
  std::vector<IngestItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw BadRequest(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
    try {
      items.push_back(item_from_json(j));
    } catch (const BadRequest& e) {
      throw BadRequest(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return items;
}

namespace {

providers::ProviderSet providers_for(const ServiceConfig& config) {
  config.validate();
  return providers::make_providers(config.providers, agent::stub_reply);
}

}  // namespace

MemoryService::MemoryService(ServiceConfig config) : MemoryService(config, providers_for(config)) {}

MemoryService::MemoryService(ServiceConfig config, providers::ProviderSet providers)
    : config_(std::move(config)), providers_(std::move(providers)) {
  config_.validate();
  stream_start_ = *parse_rfc3339(config_.stream_start);
  if (std::filesystem::exists(config_.snapshot_path())) {
    graph_ = load_snapshot(config_.snapshot_path());
    index_ = embedding::EmbeddingIndex::from_graph(graph_);
  }
}

std::vector<EmbeddedChunk> MemoryService::embed_chunks(const std::string& plain) const {
  auto pieces = embedding::chunk_text(plain, config_.chunk_chars);
  if (pieces.empty()) return {};
  auto vectors = providers_.embed->embed({pieces, {}}).vectors;
  if (vectors.size() != pieces.size()) {
    throw providers::ProviderError(ErrorCode::MalformedResponse, "embedding count mismatch");
  }
  std::vector<EmbeddedChunk> chunks;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    chunks.push_back({static_cast<std::uint32_t>(i), std::move(pieces[i]), std::move(vectors[i])});
  }
  return chunks;
}

IngestReport MemoryService::ingest(const std::vector<IngestItem>& items) {
  std::unique_lock ingest_lock(ingest_mutex_, std::try_to_lock);
  if (!ingest_lock.owns_lock()) throw Busy("another ingestion is in progress");

  IngestReport report;
  std::size_t entities_before = 0;
  {
    std::unique_lock lock(graph_mutex_);
    entities_before = graph_.entities().size();
    graph_.begin_stream();
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    try {
      // Entity extraction first so a malformed caption costs no embedding call.
      const auto parsed = caption::parse_caption(item.caption);
      auto chunks = embed_chunks(parsed.plain);

      std::unique_lock lock(graph_mutex_);
      Timestamp ts = stream_start_;
      if (item.anchor_index) {
        ts += std::chrono::seconds(static_cast<std::int64_t>(
            static_cast<double>(*item.anchor_index) / config_.perception.sample_rate_hz));
      } else {
        ts += std::chrono::seconds(static_cast<std::int64_t>(graph_.note_count()));
      }
      const NoteId id = item.kind == IngestItem::Kind::Image
                            ? graph_.ingest_image(item.caption, item.data_files, ts, chunks)
                            : graph_.add_memory_note(item.caption, item.data_files, ts, chunks);
      for (auto& c : chunks) index_.add({id, c.ordinal, std::move(c.text), std::move(c.vector)});
      ++report.notes_created;
    } catch (const Error& e) {
      report.errors.push_back({i, std::string(to_string(e.code())), e.what()});
    }
  }
  {
    std::shared_lock lock(graph_mutex_);
    report.entities_created = graph_.entities().size() - entities_before;
    if (report.notes_created > 0) persist();
  }
  return report;
}

void MemoryService::persist() const {
  std::filesystem::create_directories(config_.data_dir);
  save_snapshot(graph_, config_.snapshot_path());
}

agent::Answer MemoryService::ask(const std::string& question) const {
  if (question.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw BadRequest("question must not be empty");
  }
  std::shared_lock lock(graph_mutex_);
  agent::RetrievalAgent agent(graph_, index_, providers_, config_.retrieval);
  return agent.answer(question);
}

ordered_json MemoryService::ask_json(const agent::Answer& answer) const {
  std::shared_lock lock(graph_mutex_);
  ordered_json sources = ordered_json::array();
  for (const auto& id : answer.sources) {
    const Note* note = graph_.find_note(id);
    if (!note) continue;
    sources.push_back({{"note_id", id}, {"snippet", snippet(note->plain_caption)}, {"data_files", note->data_files}});
  }
  ordered_json trace = ordered_json::array();
  for (const auto& r : answer.trace) {
    ordered_json t = {{"tool", agent::to_string(r.tool)}, {"detail", agent::describe(r)}};
    if (r.generated_query) t["query"] = *r.generated_query;
    trace.push_back(std::move(t));
  }
  return {{"answer", answer.text}, {"sources", std::move(sources)}, {"trace", std::move(trace)}};
}

std::optional<ordered_json> MemoryService::note_view(const std::string& id) const {
  std::shared_lock lock(graph_mutex_);
  const Note* note = graph_.find_note(id);
  if (!note) return std::nullopt;
  ordered_json entities = ordered_json::array();
  for (const auto& label : graph_.entities_of(id)) {
    const EntityNode* e = graph_.find_entity(label);
    entities.push_back({{"label", label}, {"type", to_string(e->entity_type)}});
  }
  auto opt = [](const std::optional<NoteId>& v) -> ordered_json {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  return ordered_json{{"id", note->id},
                      {"kind", to_string(note->kind)},
                      {"plain_caption", note->plain_caption},
                      {"raw_caption", note->caption},
                      {"data_files", note->data_files},
                      {"created_at", format_rfc3339(note->created_at)},
                      {"entities", std::move(entities)},
                      {"neighbors", {{"previous", opt(graph_.previous_of(id))}, {"next", opt(graph_.next_of(id))}}}};
}

GraphStats MemoryService::stats() const {
  std::shared_lock lock(graph_mutex_);
  return graph_stats(graph_);
}

ordered_json MemoryService::stats_json() const {
  const auto s = stats();
  ordered_json entities = ordered_json::object();
  for (auto t : {EntityType::Agent, EntityType::Object, EntityType::Action}) {
    auto it = s.entity_counts_by_type.find(t);
    entities[std::string(to_string(t))] = it == s.entity_counts_by_type.end() ? 0 : it->second;
  }
  ordered_json edges = ordered_json::object();
  for (auto k : {EdgeKind::HasPrevious, EdgeKind::HasElement}) {
    auto it = s.edge_counts_by_kind.find(k);
    edges[std::string(to_string(k))] = it == s.edge_counts_by_kind.end() ? 0 : it->second;
  }
  return {{"image_count", s.image_count},
          {"memory_note_count", s.memory_note_count},
          {"entity_counts", std::move(entities)},
          {"edge_counts", std::move(edges)},
          {"chain_count", s.chain_count}};
}

std::uint64_t MemoryService::graph_hash() const {
  std::shared_lock lock(graph_mutex_);
  return content_hash(graph_);
}

std::size_t MemoryService::export_vault(const std::filesystem::path& dir) const {
  std::shared_lock lock(graph_mutex_);
  return gmem::export_vault(graph_, dir);
}

MemoryGraph MemoryService::graph_copy() const {
  std::shared_lock lock(graph_mutex_);
  return graph_;
}

}  // namespace gmem::service
