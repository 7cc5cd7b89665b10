#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gmem/memory_graph.hpp"
#include "restorer.hpp"

namespace gmem {

using nlohmann::json;

namespace {

constexpr int kSnapshotVersion = 1;

[[noreturn]] void corrupt(const std::string& why) {
  throw Error(ErrorCode::CorruptSnapshot, "corrupt snapshot: " + why);
}

json graph_body(const MemoryGraph& graph) {
  json nodes = json::array();
  for (const auto& [id, note] : graph.notes()) nodes.push_back(note_to_json(note));
  for (const auto& [label, e] : graph.entities()) {
    nodes.push_back({{"id", label},
                     {"kind", "entity"},
                     {"entity_type", to_string(e.entity_type)},
                     {"first_seen", e.first_seen},
                     {"mention_count", e.mention_count}});
  }
  json edges = json::array();
  for (const auto& e : graph.edges()) {
    edges.push_back({{"source", e.source}, {"kind", to_string(e.kind)}, {"target", e.target}});
  }
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

json note_to_json(const Note& note) {
  json chunks = json::array();
  for (const auto& c : note.chunks) {
    chunks.push_back({{"ordinal", c.ordinal}, {"text", c.text}, {"vector", c.vector}});
  }
  json j = {{"id", note.id},
            {"kind", to_string(note.kind)},
            {"caption", note.caption},
            {"plain_caption", note.plain_caption},
            {"data_files", note.data_files},
            {"created_at", format_rfc3339(note.created_at)},
            {"chunks", std::move(chunks)}};
  if (note.sequence_index) j["sequence_index"] = *note.sequence_index;
  return j;
}

Note note_from_json(const json& j) {
  Note note;
  note.id = j.at("id").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "image" && kind != "note") corrupt("unknown note kind " + kind);
  note.kind = kind == "image" ? NoteKind::Image : NoteKind::Memory;
  note.caption = j.at("caption").get<std::string>();
  note.plain_caption = j.at("plain_caption").get<std::string>();
  note.data_files = j.at("data_files").get<std::vector<std::string>>();
  const auto ts = parse_rfc3339(j.at("created_at").get<std::string>());
  if (!ts) corrupt("bad created_at on " + note.id);
  note.created_at = *ts;
  if (j.contains("sequence_index")) note.sequence_index = j["sequence_index"].get<std::uint64_t>();
  for (const auto& c : j.at("chunks")) {
    note.chunks.push_back(EmbeddedChunk{c.at("ordinal").get<std::uint32_t>(),
                                        c.at("text").get<std::string>(),
                                        c.at("vector").get<std::vector<double>>()});
  }
  return note;
}

void GraphRestorer::add_note(Note note) {
  if (note.id.empty() || graph_.contains(note.id)) corrupt("duplicate or empty note id");
  if ((note.kind == NoteKind::Image) != note.sequence_index.has_value()) {
    corrupt("sequence_index must be present exactly on image notes: " + note.id);
  }
  if (note.kind == NoteKind::Image) {
    ++graph_.image_count_;
  } else {
    ++graph_.memory_count_;
  }
  NoteId id = note.id;
  graph_.notes_.emplace(std::move(id), std::move(note));
}

void GraphRestorer::add_entity(EntityNode entity) {
  if (entity.label.empty() || graph_.contains(entity.label)) corrupt("duplicate entity label");
  if (!caption::is_valid_label(entity.label)) corrupt("invalid entity label " + entity.label);
  std::string label = entity.label;
  graph_.entities_.emplace(std::move(label), std::move(entity));
}

void GraphRestorer::add_edge(const Edge& edge) {
  if (!graph_.contains(edge.source) || !graph_.contains(edge.target)) {
    corrupt(fmt::format("edge {} -> {} references a missing node", edge.source, edge.target));
  }
  if (graph_.has_edge(edge.source, edge.kind, edge.target)) corrupt("duplicate edge");
  graph_.add_edge(edge.source, edge.kind, edge.target);
}

MemoryGraph GraphRestorer::finish() {
  for (const auto& [id, note] : graph_.notes_) {
    if (note.kind == NoteKind::Image && id != image_note_id(*note.sequence_index)) {
      corrupt("image id does not match its sequence_index: " + id);
    }
  }
  if (auto bad = check_invariants(graph_); !bad.empty()) corrupt(bad.front());
  return std::move(graph_);
}

std::uint64_t content_hash(const MemoryGraph& graph) {
  return fnv1a64(graph_body(graph).dump());
}

void save_snapshot(const MemoryGraph& graph, const std::filesystem::path& path) {
  json body = graph_body(graph);
  const std::string canonical = body.dump();
  json doc = {{"version", kSnapshotVersion},
              {"checksum", fmt::format("{:016x}", fnv1a64(canonical))},
              {"nodes", std::move(body["nodes"])},
              {"edges", std::move(body["edges"])}};
  // Write to a sibling temp file and rename so readers never see a partial file.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + tmp.string() + " for writing");
    out << doc.dump();
    if (!out.flush()) throw Error(ErrorCode::IoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "rename to " + path.string() + ": " + ec.message());
}

MemoryGraph load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open snapshot " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();

  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::exception& e) {
    corrupt(e.what());
  }
  try {
    if (!doc.is_object() || doc.value("version", 0) != kSnapshotVersion) {
      corrupt("unsupported version");
    }
    json body = {{"nodes", doc.at("nodes")}, {"edges", doc.at("edges")}};
    if (doc.at("checksum").get<std::string>() != fmt::format("{:016x}", fnv1a64(body.dump()))) {
      corrupt("checksum mismatch");
    }
    GraphRestorer restorer;
    for (const auto& n : doc["nodes"]) {
      if (n.at("kind") == "entity") {
        const auto type = parse_entity_type(n.at("entity_type").get<std::string>());
        if (!type) corrupt("bad entity_type");
        restorer.add_entity(EntityNode{n.at("id").get<std::string>(), *type,
                                       n.at("first_seen").get<std::string>(),
                                       n.at("mention_count").get<std::size_t>()});
      } else {
        restorer.add_note(note_from_json(n));
      }
    }
    for (const auto& e : doc["edges"]) {
      const auto kind = parse_edge_kind(e.at("kind").get<std::string>());
      if (!kind) corrupt("bad edge kind");
      restorer.add_edge(Edge{e.at("source").get<std::string>(), *kind,
                             e.at("target").get<std::string>()});
    }
    return restorer.finish();
  } catch (const json::exception& e) {
    corrupt(e.what());
  }
}

}  // namespace gmem
