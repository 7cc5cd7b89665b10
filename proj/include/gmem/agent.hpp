#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmem/embedding.hpp"
#include "gmem/expansion.hpp"
#include "gmem/memory_graph.hpp"
#include "gmem/providers.hpp"
#include "gmem/query/evaluator.hpp"

namespace gmem::agent {

enum class ToolName { SemanticSearch, GraphExpansion, StructuredQuery };
std::string_view to_string(ToolName tool);
std::optional<ToolName> parse_tool_name(std::string_view text);

struct ContextNote {
  NoteId note_id;
  std::string text;
  double score = 0.0;         // semantic or rank score
  double rerank_score = 0.0;  // token overlap, or provider relevance

  friend bool operator==(const ContextNote&, const ContextNote&) = default;
};

struct ToolResult {
  ToolName tool = ToolName::SemanticSearch;
  std::vector<ContextNote> context_notes;
  std::optional<query::ResultTable> table;
  std::optional<std::string> generated_query;
  /// Notes that exhibit the rows behind a structured result.
  std::vector<NoteId> witnesses;
  /// Set when the tool failed; the answer proceeds with the other tools.
  std::optional<std::string> error;
};

/// One-line summary of a tool result for traces.
std::string describe(const ToolResult& result);

struct Answer {
  std::string text;
  std::vector<NoteId> sources;
  std::vector<ToolResult> trace;
  bool no_context = false;
};

struct AgentConfig {
  std::size_t top_k = 5;
  expansion::ExpansionParams expansion;
  std::size_t max_context_notes = 12;
  std::size_t max_context_chars = 4000;
  double rerank_threshold = 0.05;
  double rerank_blend = 0.2;
};

/// Share of distinct question tokens that occur in `text`, in [0, 1].
double token_overlap(std::string_view question, std::string_view text);

/// Drops hits whose rerank_score is below `threshold`, then lets a hit move
/// ahead of its predecessor only when its rerank_score is higher by more than
/// `blend`. Otherwise the incoming order is kept.
std::vector<ContextNote> apply_rerank(std::vector<ContextNote> hits, double threshold, double blend);

/// Token-overlap reranker.
std::vector<ContextNote> rerank(std::string_view question, std::vector<ContextNote> hits,
                                double threshold = 0.05, double blend = 0.2);

/// Deterministic router: counting cues pick StructuredQuery, background or
/// preference cues pick GraphExpansion, anything else SemanticSearch.
std::vector<ToolName> heuristic_route(std::string_view question);

/// Count query for "how many <images|people|persons|objects|actions>".
std::optional<std::string> template_query(std::string_view question);

/// Tool descriptions (name, purpose, argument schema) as a JSON document.
std::string tool_descriptions_json();

/// Reply generator for a stub chat provider that understands the agent's
/// prompts: template queries for text2cypher, "count=N" or a first-context
/// summary for answers, the heuristic route for routing.
std::string stub_reply(const providers::ChatRequest& request);

/// Answer text when no tool produced usable context.
inline constexpr std::string_view kNoContextAnswer =
    "I do not have enough in memory to answer that question.";

/// Question answering over a read-only graph and its embedding index.
class RetrievalAgent {
 public:
  RetrievalAgent(const MemoryGraph& graph, const embedding::EmbeddingIndex& index,
                 providers::ProviderSet providers, AgentConfig config = {});

  ToolResult semantic_search(std::string_view question, std::size_t k) const;
  ToolResult graph_expansion(std::string_view question, std::size_t k) const;
  /// Throws Error(UnparseableQuery) when neither generation nor the template
  /// fallback yields a valid query.
  ToolResult structured(std::string_view question) const;
  /// Never empty. Live mode asks the provider and falls back to heuristics.
  std::vector<ToolName> route(std::string_view question) const;

  Answer answer(std::string_view question) const;

  const AgentConfig& config() const { return config_; }

 private:
  std::vector<ContextNote> rerank_hits(std::string_view question,
                                       std::vector<ContextNote> hits) const;
  ToolResult run_tool(ToolName tool, std::string_view question) const;

  const MemoryGraph& graph_;
  const embedding::EmbeddingIndex& index_;
  providers::ProviderSet providers_;
  AgentConfig config_;
};

}  // namespace gmem::agent
