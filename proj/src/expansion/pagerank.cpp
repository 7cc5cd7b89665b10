#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "gmem/expansion.hpp"

namespace gmem::expansion {

std::vector<double> personalized_pagerank(const AdjacencyList& adjacency,
                                          std::span<const std::size_t> seeds,
                                          const ExpansionParams& params) {
  const std::size_t n = adjacency.size();
  if (n == 0) throw Error(ErrorCode::EmptyGraph, "PageRank over an empty graph");
  if (seeds.empty()) throw Error(ErrorCode::EmptySeedSet, "PageRank needs at least one seed");

  const std::set<std::size_t> unique(seeds.begin(), seeds.end());
  if (*unique.rbegin() >= n) throw Error(ErrorCode::UnknownNote, "seed index out of range");
  std::vector<double> teleport(n, 0.0);
  for (std::size_t s : unique) teleport[s] = 1.0 / static_cast<double>(unique.size());

  const double d = params.damping;
  std::vector<double> rank = teleport;
  std::vector<double> next(n);
  for (int iter = 0; iter < params.max_iter; ++iter) {
    double dangling = 0.0;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t u = 0; u < n; ++u) {
      if (rank[u] == 0.0) continue;
      const auto& nbrs = adjacency[u];
      if (nbrs.empty()) {
        dangling += rank[u];
        continue;
      }
      const double share = d * rank[u] / static_cast<double>(nbrs.size());
      for (std::size_t v : nbrs) next[v] += share;
    }
    double delta = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      next[v] += ((1.0 - d) + d * dangling) * teleport[v];
      delta += std::abs(next[v] - rank[v]);
    }
    rank.swap(next);
    if (delta < params.tol) break;
  }
  return rank;
}

namespace {

struct IndexedGraph {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;
  AdjacencyList adjacency;
};

IndexedGraph index_graph(const MemoryGraph& graph) {
  IndexedGraph g;
  for (const auto& [id, note] : graph.notes()) g.ids.push_back(id);
  for (const auto& [label, entity] : graph.entities()) g.ids.push_back(label);
  std::sort(g.ids.begin(), g.ids.end());
  for (std::size_t i = 0; i < g.ids.size(); ++i) g.index.emplace(g.ids[i], i);
  g.adjacency.resize(g.ids.size());
  for (const auto& e : graph.edges()) {
    const std::size_t a = g.index.at(e.source);
    const std::size_t b = g.index.at(e.target);
    g.adjacency[a].push_back(b);
    g.adjacency[b].push_back(a);
  }
  return g;
}

}  // namespace

RankScores personalized_pagerank(const MemoryGraph& graph, const std::vector<std::string>& seeds,
                                 const ExpansionParams& params) {
  const IndexedGraph g = index_graph(graph);
  if (g.ids.empty()) throw Error(ErrorCode::EmptyGraph, "PageRank over an empty graph");
  std::vector<std::size_t> seed_idx;
  for (const auto& s : seeds) {
    auto it = g.index.find(s);
    if (it == g.index.end()) throw Error(ErrorCode::UnknownNote, fmt::format("unknown seed '{}'", s));
    seed_idx.push_back(it->second);
  }
  const auto rank = personalized_pagerank(g.adjacency, seed_idx, params);
  RankScores scores;
  for (std::size_t i = 0; i < g.ids.size(); ++i) scores.emplace(g.ids[i], rank[i]);
  return scores;
}

std::vector<NoteId> expand(const MemoryGraph& graph, const std::vector<NoteId>& seed_notes,
                           const ExpansionParams& params) {
  const RankScores scores = personalized_pagerank(graph, seed_notes, params);
  std::vector<NoteId> out;
  std::set<std::string_view> taken;
  for (const auto& s : seed_notes) {
    if (taken.insert(s).second) out.push_back(s);
  }
  std::vector<std::pair<double, std::string_view>> candidates;
  for (const auto& [id, note] : graph.notes()) {
    if (taken.contains(id)) continue;
    const double score = scores.at(id);
    if (score > 0.0) candidates.emplace_back(score, id);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (candidates.size() > params.top_m) candidates.resize(params.top_m);
  for (const auto& [score, id] : candidates) out.emplace_back(id);
  return out;
}

}  // namespace gmem::expansion
