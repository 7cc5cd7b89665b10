#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "gmem/caption.hpp"
#include "gmem/error.hpp"
#include "gmem/types.hpp"

namespace gmem {

/// Image notes carry a caption and sit on a HAS_PREVIOUS chain. Memory notes
/// are free-standing (diary entries, agent profiles) and only link to the
/// entities they mention.
enum class NoteKind { Image, Memory };

enum class EdgeKind { HasPrevious, HasElement };

std::string_view to_string(NoteKind kind);
std::string_view to_string(EdgeKind kind);
std::optional<EdgeKind> parse_edge_kind(std::string_view text);

struct EmbeddedChunk {
  std::uint32_t ordinal = 0;
  std::string text;
  std::vector<double> vector;

  friend bool operator==(const EmbeddedChunk&, const EmbeddedChunk&) = default;
};

struct Note {
  NoteId id;
  NoteKind kind = NoteKind::Image;
  std::string caption;        // annotated source text
  std::string plain_caption;  // annotations stripped
  std::vector<std::string> data_files;
  Timestamp created_at{};
  std::optional<std::uint64_t> sequence_index;  // images only
  std::vector<EmbeddedChunk> chunks;            // empty until embedded

  friend bool operator==(const Note&, const Note&) = default;
};

struct EntityNode {
  std::string label;
  EntityType entity_type = EntityType::Object;
  NoteId first_seen;
  std::size_t mention_count = 0;

  friend bool operator==(const EntityNode&, const EntityNode&) = default;
};

struct Edge {
  std::string source;
  EdgeKind kind = EdgeKind::HasPrevious;
  std::string target;

  friend auto operator<=>(const Edge&, const Edge&) = default;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct GraphStats {
  std::size_t image_count = 0;
  std::size_t memory_note_count = 0;
  std::map<EntityType, std::size_t> entity_counts_by_type;
  std::map<EdgeKind, std::size_t> edge_counts_by_kind;
  std::size_t chain_count = 0;

  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

class GraphRestorer;

/// Embedded property graph of notes and entities. Not internally
/// synchronized: callers serialize mutations (see MemoryService).
class MemoryGraph {
 public:
  /// Starts a new temporal stream: the next image note gets no predecessor.
  void begin_stream() { stream_tail_.reset(); }

  /// Appends an image note to the current stream. Mentions in the caption are
  /// not linked; use ingest_image for the full step.
  NoteId add_image_note(std::string_view caption, std::vector<std::string> data_files,
                        Timestamp created_at);

  /// Links `image` to the entity `label`, creating the entity on first use.
  std::string upsert_entity_mention(const NoteId& image, const std::string& label,
                                    EntityType entity_type);

  /// Adds an image note and links every mention in its caption. Validates all
  /// mentions against existing entity types first so a conflict leaves the
  /// graph untouched.
  NoteId ingest_image(std::string_view caption, std::vector<std::string> data_files,
                      Timestamp created_at, std::vector<EmbeddedChunk> chunks = {});

  /// Adds a free-standing memory note and links its mentions (atomic).
  NoteId add_memory_note(std::string_view text, std::vector<std::string> data_files,
                         Timestamp created_at, std::vector<EmbeddedChunk> chunks = {});

  void set_chunks(const NoteId& id, std::vector<EmbeddedChunk> chunks);

  const Note* find_note(std::string_view id) const;
  const EntityNode* find_entity(std::string_view label) const;
  bool contains(std::string_view node_id) const;

  const std::map<NoteId, Note, std::less<>>& notes() const { return notes_; }
  const std::map<std::string, EntityNode, std::less<>>& entities() const { return entities_; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Edge indices leaving / entering a node.
  const std::vector<std::size_t>& out_edges(std::string_view node_id) const;
  const std::vector<std::size_t>& in_edges(std::string_view node_id) const;

  std::optional<NoteId> previous_of(std::string_view image) const;
  std::optional<NoteId> next_of(std::string_view image) const;
  /// Entity labels linked from a note, in edge insertion order.
  std::vector<std::string> entities_of(std::string_view note) const;

  std::size_t image_count() const { return image_count_; }
  std::size_t note_count() const { return notes_.size(); }
  bool empty() const { return notes_.empty() && entities_.empty(); }

  /// Graph equality: same notes, entities, and edge multiset. Stream state
  /// is ignored.
  friend bool operator==(const MemoryGraph& a, const MemoryGraph& b);

 private:
  friend class GraphRestorer;

  void add_edge(const std::string& source, EdgeKind kind, const std::string& target);
  bool has_edge(const std::string& source, EdgeKind kind, const std::string& target) const;
  void check_mentions(const caption::ParsedCaption& parsed) const;
  void link_mentions(const NoteId& note, const caption::ParsedCaption& parsed);

  std::map<NoteId, Note, std::less<>> notes_;
  std::map<std::string, EntityNode, std::less<>> entities_;
  std::vector<Edge> edges_;
  std::set<std::tuple<std::string, EdgeKind, std::string>> edge_set_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> out_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> in_;
  std::optional<NoteId> stream_tail_;
  std::size_t image_count_ = 0;
  std::size_t memory_count_ = 0;
};

GraphStats graph_stats(const MemoryGraph& graph);

/// Stable 64-bit content hash over the canonical snapshot encoding.
std::uint64_t content_hash(const MemoryGraph& graph);

/// Full scan of the structural invariants; returns human-readable violations.
std::vector<std::string> check_invariants(const MemoryGraph& graph);

std::string image_note_id(std::uint64_t sequence_index);

// Snapshot file: {"version": 1, "checksum": "<hex>", "nodes": [...], "edges": [...]}
void save_snapshot(const MemoryGraph& graph, const std::filesystem::path& path);
MemoryGraph load_snapshot(const std::filesystem::path& path);

}  // namespace gmem
