#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gmem/memory_graph.hpp"

namespace gmem::expansion {

struct ExpansionParams {
  double damping = 0.85;
  double tol = 1e-8;  // L1 change between iterations
  int max_iter = 100;
  std::size_t top_m = 10;
};

/// Undirected multigraph over dense node indices. A parallel edge appears
/// once per edge in both endpoint lists.
using AdjacencyList = std::vector<std::vector<std::size_t>>;

/// Personalized PageRank with uniform teleport over `seeds`:
///   r <- (1-d) p + d W^T r,  W row-normalized adjacency,
/// with the mass of isolated nodes sent back to p. Stops when the L1 change
/// drops below tol or after max_iter sweeps.
std::vector<double> personalized_pagerank(const AdjacencyList& adjacency,
                                          std::span<const std::size_t> seeds,
                                          const ExpansionParams& params = {});

using RankScores = std::map<std::string, double>;

/// Same over a memory graph, with every edge treated as undirected.
RankScores personalized_pagerank(const MemoryGraph& graph, const std::vector<std::string>& seeds,
                                 const ExpansionParams& params = {});

/// Seeds (original order, deduplicated) followed by the top_m highest-scoring
/// other notes. Entity nodes carry rank but are never returned.
std::vector<NoteId> expand(const MemoryGraph& graph, const std::vector<NoteId>& seed_notes,
                           const ExpansionParams& params = {});

}  // namespace gmem::expansion
