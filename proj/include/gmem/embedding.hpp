#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gmem/memory_graph.hpp"
#include "gmem/types.hpp"

namespace gmem::embedding {

inline constexpr std::size_t kStubDim = 64;
inline constexpr std::size_t kDefaultChunkChars = 2000;
inline constexpr std::size_t kMinChunkChars = 32;

using Vector = std::vector<double>;

/// Greedy split into chunks of at most `max_chars` bytes, breaking at the last
/// whitespace before the limit when there is one. The breaking whitespace
/// character is dropped; everything else is kept in order.
std::vector<std::string> chunk_text(std::string_view text, std::size_t max_chars);

/// Lowercase ASCII alphanumeric runs.
std::vector<std::string> tokenize(std::string_view text);

/// Deterministic signed feature-hashing embedder (dim 64, L2-normalized).
Vector stub_embed(std::string_view text);

/// Cosine similarity; 0 when either side is the zero vector.
double cosine(std::span<const double> a, std::span<const double> b);

struct IndexEntry {
  NoteId note_id;
  std::uint32_t chunk_ordinal = 0;
  std::string text;
  Vector vector;
};

struct SearchHit {
  NoteId note_id;
  double score = 0.0;
  std::uint32_t chunk_ordinal = 0;

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Exhaustive-scan vector index. All vectors share one dimension, fixed by
/// the first insertion.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  explicit EmbeddingIndex(std::size_t dim) : dim_(dim) {}

  /// Replaces an existing (note_id, chunk_ordinal) entry.
  void add(IndexEntry entry);

  /// Hits sorted by (score desc, note_id asc); one hit per note using its best
  /// chunk. Throws DimensionMismatch when the query dim differs.
  std::vector<SearchHit> search_top_k(std::span<const double> query, std::size_t k) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return entries_.empty(); }
  const std::vector<IndexEntry>& entries() const { return entries_; }

  /// Index over every embedded chunk stored in the graph.
  static EmbeddingIndex from_graph(const MemoryGraph& graph);

 private:
  std::size_t dim_ = 0;
  std::vector<IndexEntry> entries_;
};

}  // namespace gmem::embedding
