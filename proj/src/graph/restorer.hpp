#pragma once

#include <nlohmann/json.hpp>

#include "gmem/memory_graph.hpp"

namespace gmem {

/// Rebuilds a graph from persisted records (snapshot, vault). Records are
/// inserted verbatim; finish() rejects anything that breaks an invariant.
class GraphRestorer {
 public:
  void add_note(Note note);
  void add_entity(EntityNode entity);
  void add_edge(const Edge& edge);
  MemoryGraph finish();

 private:
  MemoryGraph graph_;
};

std::uint64_t fnv1a64(std::string_view bytes);

nlohmann::json note_to_json(const Note& note);
Note note_from_json(const nlohmann::json& j);

}  // namespace gmem
