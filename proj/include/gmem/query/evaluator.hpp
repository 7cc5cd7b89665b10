#pragma once

#include <string>
#include <vector>

#include "gmem/memory_graph.hpp"
#include "gmem/query/ast.hpp"

namespace gmem::query {

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
  /// Vocabulary problems (unknown labels or edge kinds). They match nothing.
  std::vector<std::string> warnings;
};

// Node labels: Image, MemoryNote (every note, images included), Agent,
// Object, Action. Edge kinds: HAS_PREVIOUS, HAS_ELEMENT.
//
// Node properties:
//   notes:    id, kind ("image"|"note"), caption, plain_caption, created_at,
//             sequence_index (images only)
//   entities: id, label, kind ("entity"), type, first_seen, mention_count
// A bare variable evaluates to the node id. Missing properties are null.
//
// Matching is homomorphic over nodes; within one path pattern every
// relationship binds a distinct edge. Comparisons involving null are false.
// Without ORDER BY rows are sorted lexicographically; ORDER BY ties fall back
// to the same order. LIMIT applies last.
ResultTable evaluate(const QueryAst& ast, const MemoryGraph& graph);

/// Plan text: one numbered stage per line.
std::string explain(const QueryAst& ast);
/// Same, with binding estimates from label and edge counts in `graph`.
std::string explain(const QueryAst& ast, const MemoryGraph& graph);

std::vector<std::string> known_labels();
std::vector<std::string> known_edge_kinds();

}  // namespace gmem::query
