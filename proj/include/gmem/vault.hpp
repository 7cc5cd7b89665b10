#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <vector>

#include "gmem/memory_graph.hpp"

namespace gmem {

// Markdown note vault. One `<id>.md` per node: image and memory notes carry
// their plain caption as the body; entity nodes get a page with an empty body
// so vault browsers can link them. Front matter is YAML between `---` lines:
//
//   id, type (image|note|agent|object|action), created_at (RFC 3339),
//   data_files (list), entities (list of label:Type),
//   plus caption, sequence_index, previous for notes and
//   first_seen, mention_count for entities.
//
// Embedding vectors are not written; import can recompute them.

/// Returns the number of files written.
std::size_t export_vault(const MemoryGraph& graph, const std::filesystem::path& directory);

using ReEmbedFn = std::function<std::vector<EmbeddedChunk>(const Note&)>;

MemoryGraph import_vault(const std::filesystem::path& directory, const ReEmbedFn& re_embed = {});

}  // namespace gmem
