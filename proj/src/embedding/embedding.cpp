#include "gmem/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

namespace gmem::embedding {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint32_t fnv1a32(std::string_view s) {
  std::uint32_t h = 0x811c9dc5u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x01000193u;
  }
  return h;
}

}  // namespace

std::vector<std::string> chunk_text(std::string_view text, std::size_t max_chars) {
  max_chars = std::max(max_chars, kMinChunkChars);
  std::vector<std::string> chunks;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text.size() - pos <= max_chars) {
      chunks.emplace_back(text.substr(pos));
      break;
    }
    std::size_t split = std::string_view::npos;
    for (std::size_t i = pos + max_chars; i > pos; --i) {
      if (is_space(text[i])) {
        split = i;
        break;
      }
    }
    if (split != std::string_view::npos) {
      chunks.emplace_back(text.substr(pos, split - pos));
      pos = split + 1;
    } else {
      std::size_t len = max_chars;
      while (len > 1 && is_continuation(text[pos + len])) --len;
      chunks.emplace_back(text.substr(pos, len));
      pos += len;
    }
  }
  return chunks;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vector stub_embed(std::string_view text) {
  Vector v(kStubDim, 0.0);
  for (const auto& token : tokenize(text)) {
    const std::size_t bucket = fnv1a64(token) % kStubDim;
    const double sign = ((fnv1a32(token) >> 16) & 1u) ? -1.0 : 1.0;
    v[bucket] += sign;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("cosine over dims {} and {}", a.size(), b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void EmbeddingIndex::add(IndexEntry entry) {
  if (entry.vector.empty()) throw std::invalid_argument("empty embedding vector");
  if (dim_ == 0) dim_ = entry.vector.size();
  if (entry.vector.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("vector for {} has dim {}, index dim is {}", entry.note_id,
                            entry.vector.size(), dim_));
  }
  for (double x : entry.vector) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite embedding value");
  }
  for (auto& existing : entries_) {
    if (existing.note_id == entry.note_id && existing.chunk_ordinal == entry.chunk_ordinal) {
      existing = std::move(entry);
      return;
    }
  }
  entries_.push_back(std::move(entry));
}

std::vector<SearchHit> EmbeddingIndex::search_top_k(std::span<const double> query,
                                                    std::size_t k) const {
  if (entries_.empty() || k == 0) return {};
  if (query.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("query dim {} does not match index dim {}", query.size(), dim_));
  }
  std::map<std::string_view, SearchHit> best;
  for (const auto& e : entries_) {
    const double score = cosine(query, e.vector);
    auto [it, inserted] = best.try_emplace(e.note_id, SearchHit{e.note_id, score, e.chunk_ordinal});
    if (!inserted) {
      SearchHit& h = it->second;
      if (score > h.score || (score == h.score && e.chunk_ordinal < h.chunk_ordinal)) {
        h.score = score;
        h.chunk_ordinal = e.chunk_ordinal;
      }
    }
  }
  std::vector<SearchHit> hits;
  hits.reserve(best.size());
  for (auto& [id, hit] : best) hits.push_back(std::move(hit));
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.note_id < b.note_id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

EmbeddingIndex EmbeddingIndex::from_graph(const MemoryGraph& graph) {
  EmbeddingIndex index;
  for (const auto& [id, note] : graph.notes()) {
    for (const auto& chunk : note.chunks) {
      index.add(IndexEntry{id, chunk.ordinal, chunk.text, chunk.vector});
    }
  }
  return index;
}

}  // namespace gmem::embedding
