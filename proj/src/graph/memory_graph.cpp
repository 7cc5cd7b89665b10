#include "gmem/memory_graph.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace gmem {

namespace {

const std::vector<std::size_t> kNoEdges;

std::string memory_note_id(std::size_t ordinal) { return fmt::format("note_{:04}", ordinal); }

}  // namespace

std::string_view to_string(NoteKind kind) {
  return kind == NoteKind::Image ? "image" : "note";
}

std::string_view to_string(EdgeKind kind) {
  return kind == EdgeKind::HasPrevious ? "HAS_PREVIOUS" : "HAS_ELEMENT";
}

std::optional<EdgeKind> parse_edge_kind(std::string_view text) {
  if (text == "HAS_PREVIOUS") return EdgeKind::HasPrevious;
  if (text == "HAS_ELEMENT") return EdgeKind::HasElement;
  return std::nullopt;
}

std::string image_note_id(std::uint64_t sequence_index) {
  return fmt::format("img_{:04}", sequence_index);
}

NoteId MemoryGraph::add_image_note(std::string_view caption, std::vector<std::string> data_files,
                                   Timestamp created_at) {
  auto parsed = caption::parse_caption(caption);
  const std::uint64_t seq = image_count_;
  Note note;
  note.id = image_note_id(seq);
  note.kind = NoteKind::Image;
  note.caption = std::move(parsed.raw);
  note.plain_caption = std::move(parsed.plain);
  note.data_files = std::move(data_files);
  note.created_at = created_at;
  note.sequence_index = seq;
  if (contains(note.id)) {
    throw Error(ErrorCode::TypeConflict, fmt::format("node id '{}' already in use", note.id));
  }
  const NoteId id = note.id;
  notes_.emplace(id, std::move(note));
  ++image_count_;
  if (stream_tail_) add_edge(id, EdgeKind::HasPrevious, *stream_tail_);
  stream_tail_ = id;
  return id;
}

std::string MemoryGraph::upsert_entity_mention(const NoteId& image, const std::string& label,
                                               EntityType entity_type) {
  if (!notes_.contains(image)) {
    throw Error(ErrorCode::UnknownNote, fmt::format("unknown note '{}'", image));
  }
  if (notes_.contains(label)) {
    throw Error(ErrorCode::TypeConflict,
                fmt::format("entity label '{}' collides with a note id", label));
  }
  auto it = entities_.find(label);
  if (it == entities_.end()) {
    it = entities_.emplace(label, EntityNode{label, entity_type, image, 0}).first;
  } else if (it->second.entity_type != entity_type) {
    throw Error(ErrorCode::TypeConflict,
                fmt::format("entity '{}' is {} but was mentioned as {}", label,
                            to_string(it->second.entity_type), to_string(entity_type)));
  }
  if (!has_edge(image, EdgeKind::HasElement, label)) {
    add_edge(image, EdgeKind::HasElement, label);
    ++it->second.mention_count;
  }
  return label;
}

void MemoryGraph::check_mentions(const caption::ParsedCaption& parsed) const {
  std::map<std::string_view, EntityType> local;
  for (const auto& m : parsed.mentions) {
    if (notes_.contains(m.label)) {
      throw Error(ErrorCode::TypeConflict,
                  fmt::format("entity label '{}' collides with a note id", m.label));
    }
    EntityType expected = m.entity_type;
    if (const auto* e = find_entity(m.label)) expected = e->entity_type;
    if (auto [pos, inserted] = local.emplace(m.label, expected); !inserted) {
      expected = pos->second;
    }
    if (expected != m.entity_type) {
      throw Error(ErrorCode::TypeConflict,
                  fmt::format("entity '{}' is {} but was mentioned as {}", m.label,
                              to_string(expected), to_string(m.entity_type)));
    }
  }
}

void MemoryGraph::link_mentions(const NoteId& note, const caption::ParsedCaption& parsed) {
  for (const auto& m : parsed.mentions) upsert_entity_mention(note, m.label, m.entity_type);
}

NoteId MemoryGraph::ingest_image(std::string_view caption, std::vector<std::string> data_files,
                                 Timestamp created_at, std::vector<EmbeddedChunk> chunks) {
  const auto parsed = caption::parse_caption(caption);
  check_mentions(parsed);
  const NoteId id = add_image_note(caption, std::move(data_files), created_at);
  notes_.find(id)->second.chunks = std::move(chunks);
  link_mentions(id, parsed);
  return id;
}

NoteId MemoryGraph::add_memory_note(std::string_view text, std::vector<std::string> data_files,
                                    Timestamp created_at, std::vector<EmbeddedChunk> chunks) {
  auto parsed = caption::parse_caption(text);
  check_mentions(parsed);
  Note note;
  note.id = memory_note_id(memory_count_);
  if (contains(note.id)) {
    throw Error(ErrorCode::TypeConflict, fmt::format("node id '{}' already in use", note.id));
  }
  note.kind = NoteKind::Memory;
  note.caption = parsed.raw;
  note.plain_caption = parsed.plain;
  note.data_files = std::move(data_files);
  note.created_at = created_at;
  note.chunks = std::move(chunks);
  const NoteId id = note.id;
  notes_.emplace(id, std::move(note));
  ++memory_count_;
  link_mentions(id, parsed);
  return id;
}

void MemoryGraph::set_chunks(const NoteId& id, std::vector<EmbeddedChunk> chunks) {
  auto it = notes_.find(id);
  if (it == notes_.end()) throw Error(ErrorCode::UnknownNote, fmt::format("unknown note '{}'", id));
  it->second.chunks = std::move(chunks);
}

const Note* MemoryGraph::find_note(std::string_view id) const {
  auto it = notes_.find(id);
  return it == notes_.end() ? nullptr : &it->second;
}

const EntityNode* MemoryGraph::find_entity(std::string_view label) const {
  auto it = entities_.find(label);
  return it == entities_.end() ? nullptr : &it->second;
}

bool MemoryGraph::contains(std::string_view node_id) const {
  return notes_.contains(node_id) || entities_.contains(node_id);
}

const std::vector<std::size_t>& MemoryGraph::out_edges(std::string_view node_id) const {
  auto it = out_.find(node_id);
  return it == out_.end() ? kNoEdges : it->second;
}

const std::vector<std::size_t>& MemoryGraph::in_edges(std::string_view node_id) const {
  auto it = in_.find(node_id);
  return it == in_.end() ? kNoEdges : it->second;
}

std::optional<NoteId> MemoryGraph::previous_of(std::string_view image) const {
  for (std::size_t e : out_edges(image)) {
    if (edges_[e].kind == EdgeKind::HasPrevious) return edges_[e].target;
  }
  return std::nullopt;
}

std::optional<NoteId> MemoryGraph::next_of(std::string_view image) const {
  for (std::size_t e : in_edges(image)) {
    if (edges_[e].kind == EdgeKind::HasPrevious) return edges_[e].source;
  }
  return std::nullopt;
}

std::vector<std::string> MemoryGraph::entities_of(std::string_view note) const {
  std::vector<std::string> out;
  for (std::size_t e : out_edges(note)) {
    if (edges_[e].kind == EdgeKind::HasElement) out.push_back(edges_[e].target);
  }
  return out;
}

void MemoryGraph::add_edge(const std::string& source, EdgeKind kind, const std::string& target) {
  if (source == target) {
    throw Error(ErrorCode::TypeConflict, fmt::format("self-loop on '{}'", source));
  }
  if (!edge_set_.emplace(source, kind, target).second) return;
  out_[source].push_back(edges_.size());
  in_[target].push_back(edges_.size());
  edges_.push_back(Edge{source, kind, target});
}

bool MemoryGraph::has_edge(const std::string& source, EdgeKind kind,
                           const std::string& target) const {
  return edge_set_.contains({source, kind, target});
}

bool operator==(const MemoryGraph& a, const MemoryGraph& b) {
  if (a.notes_ != b.notes_ || a.entities_ != b.entities_) return false;
  if (a.edges_.size() != b.edges_.size()) return false;
  std::vector<Edge> ea = a.edges_;
  std::vector<Edge> eb = b.edges_;
  std::sort(ea.begin(), ea.end());
  std::sort(eb.begin(), eb.end());
  return ea == eb;
}

GraphStats graph_stats(const MemoryGraph& graph) {
  GraphStats s;
  for (auto t : {EntityType::Agent, EntityType::Object, EntityType::Action}) {
    s.entity_counts_by_type[t] = 0;
  }
  s.edge_counts_by_kind[EdgeKind::HasPrevious] = 0;
  s.edge_counts_by_kind[EdgeKind::HasElement] = 0;
  for (const auto& [id, note] : graph.notes()) {
    if (note.kind == NoteKind::Image) {
      ++s.image_count;
      if (!graph.previous_of(id)) ++s.chain_count;
    } else {
      ++s.memory_note_count;
    }
  }
  for (const auto& [label, entity] : graph.entities()) ++s.entity_counts_by_type[entity.entity_type];
  for (const auto& edge : graph.edges()) ++s.edge_counts_by_kind[edge.kind];
  return s;
}

std::vector<std::string> check_invariants(const MemoryGraph& graph) {
  std::vector<std::string> bad;
  std::map<std::string, int, std::less<>> prev_out, prev_in;
  std::map<std::string, std::size_t, std::less<>> element_in;
  std::set<std::tuple<std::string, EdgeKind, std::string>> seen;
  for (const auto& e : graph.edges()) {
    if (e.source == e.target) bad.push_back(fmt::format("self-loop on {}", e.source));
    if (!seen.emplace(e.source, e.kind, e.target).second) {
      bad.push_back(fmt::format("duplicate edge {} {} {}", e.source, to_string(e.kind), e.target));
    }
    const Note* src = graph.find_note(e.source);
    if (e.kind == EdgeKind::HasPrevious) {
      const Note* dst = graph.find_note(e.target);
      if (!src || !dst || src->kind != NoteKind::Image || dst->kind != NoteKind::Image) {
        bad.push_back(fmt::format("HAS_PREVIOUS {} -> {} not image to image", e.source, e.target));
      } else if (*src->sequence_index <= *dst->sequence_index) {
        bad.push_back(fmt::format("sequence not increasing along {} -> {}", e.source, e.target));
      }
      if (++prev_out[e.source] > 1) bad.push_back(fmt::format("{} has two predecessors", e.source));
      if (++prev_in[e.target] > 1) bad.push_back(fmt::format("{} has two successors", e.target));
    } else {
      if (!src || !graph.find_entity(e.target)) {
        bad.push_back(fmt::format("HAS_ELEMENT {} -> {} not note to entity", e.source, e.target));
      }
      ++element_in[e.target];
    }
  }
  for (const auto& [label, entity] : graph.entities()) {
    const auto it = element_in.find(label);
    const std::size_t n = it == element_in.end() ? 0 : it->second;
    if (entity.mention_count != n) {
      bad.push_back(fmt::format("{} mention_count {} != {} incident edges", label,
                                entity.mention_count, n));
    }
  }
  return bad;
}

}  // namespace gmem
