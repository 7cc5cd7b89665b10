#include "gmem/agent.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gmem/query/parser.hpp"

namespace gmem::agent {

using nlohmann::json;

namespace {

constexpr std::string_view kTaskText2Query = "task: text2query";
constexpr std::string_view kTaskAnswer = "task: answer";
constexpr std::string_view kTaskRoute = "task: route";
constexpr std::string_view kTaskRerank = "task: rerank";
constexpr std::size_t kMaxTableRows = 50;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string graph_schema_text() {
  return "Node labels: Image (captioned video frames), MemoryNote (every note), Agent, Object, "
         "Action.\n"
         "Edge kinds: (:Image)-[:HAS_PREVIOUS]->(:Image) points to the earlier image; "
         "(:MemoryNote)-[:HAS_ELEMENT]->(entity) links a note to each entity it mentions.\n"
         "Note properties: id, kind, caption, plain_caption, created_at, sequence_index.\n"
         "Entity properties: id, label, type, first_seen, mention_count.\n"
         "Supported: MATCH paths of up to 3 relationships, WHERE with = and <> joined by AND, "
         "RETURN [DISTINCT] expressions or count(...), ORDER BY, LIMIT. Read-only.";
}

std::string system_text(const providers::ChatRequest& request) {
  for (const auto& m : request.messages) {
    if (m.role == providers::Role::System) return m.content;
  }
  return {};
}

std::string field_after(std::string_view text, std::string_view key) {
  const auto pos = text.find(key);
  if (pos == std::string_view::npos) return {};
  const auto start = pos + key.size();
  const auto end = text.find('\n', start);
  return std::string(text.substr(start, end == std::string_view::npos ? end : end - start));
}

std::string strip_fences(std::string text) {
  const auto open = text.find("```");
  if (open != std::string::npos) {
    auto body = text.find('\n', open);
    const auto close = text.find("```", body == std::string::npos ? open + 3 : body);
    if (body != std::string::npos && close != std::string::npos) {
      text = text.substr(body + 1, close - body - 1);
    }
  }
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

std::string table_text(const query::ResultTable& table) {
  std::string out = fmt::format("Columns: {}\n", fmt::join(table.columns, ", "));
  const std::size_t n = std::min(table.rows.size(), kMaxTableRows);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> cells;
    for (const auto& v : table.rows[i]) cells.push_back(query::value_to_text(v));
    out += fmt::format("Row {}: {}\n", i + 1, fmt::join(cells, ", "));
  }
  if (table.rows.size() > n) out += fmt::format("({} more rows)\n", table.rows.size() - n);
  if (table.rows.empty()) out += "(no rows)\n";
  return out;
}

// Notes that exhibit the matches behind a structured result: every pattern
// variable is returned, note ids are kept, and entities contribute the notes
// that mention them.
std::vector<NoteId> witness_notes(const query::QueryAst& ast, const MemoryGraph& graph,
                                  std::size_t limit) {
  query::QueryAst w;
  w.patterns = ast.patterns;
  w.where = ast.where;
  w.distinct = true;
  std::set<std::string> vars;
  std::size_t anon = 0;
  auto name = [&](query::NodePattern& n) {
    if (n.variable.empty()) n.variable = fmt::format("__w{}", anon++);
    if (vars.insert(n.variable).second) {
      w.items.push_back({query::ReturnItem::Kind::Expression, query::Operand::var(n.variable), false, {}});
    }
  };
  for (auto& p : w.patterns) {
    name(p.start);
    for (auto& s : p.steps) name(s.node);
  }
  std::vector<NoteId> out;
  std::set<NoteId> seen;
  auto push = [&](const std::string& id) {
    if (out.size() < limit && seen.insert(id).second) out.push_back(id);
  };
  if (w.items.empty()) return out;
  const auto table = query::evaluate(w, graph);
  for (const auto& row : table.rows) {
    for (const auto& v : row) {
      const auto* s = std::get_if<std::string>(&v);
      if (!s) continue;
      if (graph.find_note(*s)) {
        push(*s);
      } else if (graph.find_entity(*s)) {
        for (std::size_t e : graph.in_edges(*s)) {
          const auto& edge = graph.edges()[e];
          if (graph.find_note(edge.source)) push(edge.source);
        }
      }
      if (out.size() >= limit) return out;
    }
  }
  return out;
}

std::string note_text(const Note& note) { return note.plain_caption; }

}  // namespace

std::string_view to_string(ToolName tool) {
  switch (tool) {
    case ToolName::SemanticSearch: return "SemanticSearch";
    case ToolName::GraphExpansion: return "GraphExpansion";
    case ToolName::StructuredQuery: return "StructuredQuery";
  }
  return "Unknown";
}

std::optional<ToolName> parse_tool_name(std::string_view text) {
  for (auto t : {ToolName::SemanticSearch, ToolName::GraphExpansion, ToolName::StructuredQuery}) {
    if (text == to_string(t)) return t;
  }
  return std::nullopt;
}

std::string describe(const ToolResult& result) {
  if (result.error) return fmt::format("error: {}", *result.error);
  if (result.tool == ToolName::StructuredQuery) {
    const std::size_t rows = result.table ? result.table->rows.size() : 0;
    std::string out = fmt::format("query: {} | rows: {}", result.generated_query.value_or(""), rows);
    if (result.table && result.table->rows.size() == 1 && result.table->rows[0].size() == 1) {
      out += fmt::format(" | value: {}", query::value_to_text(result.table->rows[0][0]));
    }
    return out;
  }
  std::vector<std::string> parts;
  for (const auto& n : result.context_notes) parts.push_back(fmt::format("{} ({:.4f})", n.note_id, n.score));
  return fmt::format("notes: {}", parts.empty() ? std::string("(none)") : fmt::format("{}", fmt::join(parts, ", ")));
}

double token_overlap(std::string_view question, std::string_view text) {
  const auto qt = embedding::tokenize(question);
  const std::set<std::string> qs(qt.begin(), qt.end());
  if (qs.empty()) return 0.0;
  const auto tt = embedding::tokenize(text);
  const std::set<std::string> ts(tt.begin(), tt.end());
  std::size_t hit = 0;
  for (const auto& t : qs) hit += ts.count(t);
  return static_cast<double>(hit) / static_cast<double>(qs.size());
}

std::vector<ContextNote> apply_rerank(std::vector<ContextNote> hits, double threshold, double blend) {
  std::erase_if(hits, [&](const ContextNote& h) { return h.rerank_score < threshold; });
  // Adjacent swaps only when the later hit wins by more than `blend`. Each
  // swap lowers sum(position * rerank_score), so this terminates.
  bool swapped = true;
  while (swapped) {
    swapped = false;
    for (std::size_t i = 0; i + 1 < hits.size(); ++i) {
      if (hits[i + 1].rerank_score - hits[i].rerank_score > blend) {
        std::swap(hits[i], hits[i + 1]);
        swapped = true;
      }
    }
  }
  return hits;
}

std::vector<ContextNote> rerank(std::string_view question, std::vector<ContextNote> hits,
                                double threshold, double blend) {
  for (auto& h : hits) h.rerank_score = token_overlap(question, h.text);
  return apply_rerank(std::move(hits), threshold, blend);
}

std::vector<ToolName> heuristic_route(std::string_view question) {
  const std::string q = lower(question);
  for (std::string_view cue : {"how many", "count", "number of"}) {
    if (q.find(cue) != std::string::npos) return {ToolName::StructuredQuery};
  }
  for (std::string_view cue : {"prefer", "usually", "background", "about "}) {
    if (q.find(cue) != std::string::npos) return {ToolName::GraphExpansion};
  }
  return {ToolName::SemanticSearch};
}

std::optional<std::string> template_query(std::string_view question) {
  static const std::regex re(R"(\bhow\s+many\s+([a-z]+))", std::regex::icase);
  const std::string q(question);
  std::smatch m;
  if (!std::regex_search(q, m, re)) return std::nullopt;
  const std::string noun = lower(m[1].str());
  std::string label;
  if (noun == "images" || noun == "image") {
    label = "Image";
  } else if (noun == "people" || noun == "persons" || noun == "person") {
    label = "Agent";
  } else if (noun == "objects" || noun == "object") {
    label = "Object";
  } else if (noun == "actions" || noun == "action") {
    label = "Action";
  } else {
    return std::nullopt;
  }
  return fmt::format("MATCH (n:{}) RETURN count(DISTINCT n)", label);
}

std::string tool_descriptions_json() {
  const json tools = json::array({
      {{"name", "SemanticSearch"},
       {"purpose", "Find the stored notes whose text is most similar to the question. Use for "
                   "questions about what was seen or happened."},
       {"arguments", {{"question", "string"}, {"k", "integer, number of notes"}}}},
      {{"name", "GraphExpansion"},
       {"purpose", "Semantic search followed by personalized PageRank over the memory graph, adding "
                   "notes linked through shared people, objects and actions. Use for background, "
                   "habits and preferences that no single note states."},
       {"arguments", {{"question", "string"}, {"k", "integer, number of seed notes"}}}},
      {{"name", "StructuredQuery"},
       {"purpose", "Translate the question into a read-only graph query and run it. Use for "
                   "counting, listing and other structural questions."},
       {"arguments", {{"question", "string"}}}},
  });
  return tools.dump(2);
}

std::string stub_reply(const providers::ChatRequest& request) {
  const std::string system = system_text(request);
  const std::string user = providers::last_user_text(request);
  if (system.starts_with(kTaskText2Query)) {
    return template_query(field_after(user, "Question: ")).value_or("");
  }
  if (system.starts_with(kTaskRoute)) {
    json names = json::array();
    for (auto t : heuristic_route(field_after(user, "Question: "))) names.push_back(to_string(t));
    return names.dump();
  }
  if (system.starts_with(kTaskRerank)) return "";
  if (system.starts_with(kTaskAnswer)) {
    std::istringstream in(user);
    std::string line;
    std::vector<std::string> columns_lines;
    std::vector<std::string> rows;
    std::string first_note;
    bool table_single = false;
    std::string table_value;
    while (std::getline(in, line)) {
      if (line.starts_with("Columns: ")) {
        table_single = line.find(", ") == std::string::npos;
        rows.clear();
        columns_lines.push_back(line);
      } else if (line.starts_with("Row ")) {
        rows.push_back(line.substr(line.find(": ") + 2));
      } else if (first_note.empty() && line.starts_with("[")) {
        first_note = line;
      }
      if (!columns_lines.empty() && table_single && rows.size() == 1 && table_value.empty()) {
        table_value = rows[0];
      }
    }
    if (!table_value.empty() && columns_lines.size() == 1 &&
        std::all_of(table_value.begin(), table_value.end(), [](unsigned char c) { return std::isdigit(c); })) {
      return "count=" + table_value;
    }
    if (!first_note.empty()) return "From memory " + first_note;
    if (!rows.empty()) return fmt::format("{} result rows; first: {}", rows.size(), rows[0]);
    return std::string(kNoContextAnswer);
  }
  return "";
}

RetrievalAgent::RetrievalAgent(const MemoryGraph& graph, const embedding::EmbeddingIndex& index,
                               providers::ProviderSet providers, AgentConfig config)
    : graph_(graph), index_(index), providers_(std::move(providers)), config_(std::move(config)) {}

std::vector<ContextNote> RetrievalAgent::rerank_hits(std::string_view question,
                                                     std::vector<ContextNote> hits) const {
  if (hits.empty()) return hits;
  if (providers_.live && providers_.chat) {
    try {
      std::string passages;
      for (std::size_t i = 0; i < hits.size(); ++i) {
        passages += fmt::format("{}. {}\n", i + 1, hits[i].text);
      }
      providers::ChatRequest req;
      req.messages.push_back({providers::Role::System,
                              fmt::format("{}\nRate how relevant each passage is to the question on "
                                          "a scale from 0 to 1. Reply with only a JSON array of "
                                          "numbers, one per passage, in order.",
                                          kTaskRerank),
                              {}});
      req.messages.push_back(
          {providers::Role::User, fmt::format("Question: {}\nPassages:\n{}", question, passages), {}});
      const auto scores = json::parse(strip_fences(providers_.chat->chat(req).content));
      if (scores.is_array() && scores.size() == hits.size()) {
        for (std::size_t i = 0; i < hits.size(); ++i) {
          hits[i].rerank_score = std::clamp(scores[i].get<double>(), 0.0, 1.0);
        }
        return apply_rerank(std::move(hits), config_.rerank_threshold, config_.rerank_blend);
      }
    } catch (const std::exception&) {
      // fall through to the token-overlap reranker
    }
  }
  return rerank(question, std::move(hits), config_.rerank_threshold, config_.rerank_blend);
}

ToolResult RetrievalAgent::semantic_search(std::string_view question, std::size_t k) const {
  ToolResult result;
  result.tool = ToolName::SemanticSearch;
  if (index_.empty() || k == 0) return result;
  const auto embedded = providers_.embed->embed({{std::string(question)}, {}});
  if (embedded.vectors.size() != 1) {
    throw providers::ProviderError(ErrorCode::MalformedResponse, "embedding count mismatch");
  }
  std::vector<ContextNote> hits;
  for (const auto& hit : index_.search_top_k(embedded.vectors[0], k)) {
    const Note* note = graph_.find_note(hit.note_id);
    if (!note) continue;
    hits.push_back({hit.note_id, note_text(*note), hit.score, 0.0});
  }
  result.context_notes = rerank_hits(question, std::move(hits));
  return result;
}

ToolResult RetrievalAgent::graph_expansion(std::string_view question, std::size_t k) const {
  ToolResult result = semantic_search(question, k);
  result.tool = ToolName::GraphExpansion;
  if (result.context_notes.empty()) return result;
  std::vector<NoteId> seeds;
  for (const auto& n : result.context_notes) seeds.push_back(n.note_id);
  const auto expanded = expansion::expand(graph_, seeds, config_.expansion);
  const auto ranks = expansion::personalized_pagerank(graph_, seeds, config_.expansion);
  for (std::size_t i = seeds.size(); i < expanded.size(); ++i) {
    const Note* note = graph_.find_note(expanded[i]);
    if (!note) continue;
    result.context_notes.push_back({note->id, note_text(*note), ranks.at(note->id), 0.0});
  }
  return result;
}

ToolResult RetrievalAgent::structured(std::string_view question) const {
  ToolResult result;
  result.tool = ToolName::StructuredQuery;

  auto generate = [&](const std::string& feedback) -> std::string {
    if (!providers_.chat) return {};
    providers::ChatRequest req;
    req.messages.push_back({providers::Role::System,
                            fmt::format("{}\nTranslate the question into one graph query. Reply "
                                        "with only the query.\n{}",
                                        kTaskText2Query, graph_schema_text()),
                            {}});
    std::string user = fmt::format("Question: {}\n", question);
    if (!feedback.empty()) {
      user += fmt::format("Your previous query failed to parse: {}\nReturn a corrected query.\n", feedback);
    }
    req.messages.push_back({providers::Role::User, std::move(user), {}});
    return strip_fences(providers_.chat->chat(req).content);
  };
  auto try_parse = [](const std::string& text, std::string& err) -> std::optional<query::QueryAst> {
    try {
      return query::parse_query(text);
    } catch (const Error& e) {
      err = e.what();
      return std::nullopt;
    }
  };

  std::string err;
  std::string text = generate("");
  auto ast = try_parse(text, err);
  if (!ast) {
    text = generate(err.empty() ? "empty query" : err);
    ast = try_parse(text, err);
  }
  if (!ast) {
    if (auto fallback = template_query(question)) {
      text = *fallback;
      ast = try_parse(text, err);
    }
  }
  if (!ast) {
    throw Error(ErrorCode::UnparseableQuery,
                fmt::format("no valid query for question \"{}\": {}", question, err));
  }
  result.generated_query = query::render(*ast);
  result.table = query::evaluate(*ast, graph_);
  result.witnesses = witness_notes(*ast, graph_, config_.max_context_notes);
  return result;
}

std::vector<ToolName> RetrievalAgent::route(std::string_view question) const {
  if (providers_.live && providers_.chat) {
    try {
      providers::ChatRequest req;
      req.messages.push_back({providers::Role::System,
                              fmt::format("{}\nChoose the most suitable tool, or several if "
                                          "necessary, to answer the question. Reply with only a "
                                          "JSON array of tool names.\nTools:\n{}",
                                          kTaskRoute, tool_descriptions_json()),
                              {}});
      req.messages.push_back({providers::Role::User, fmt::format("Question: {}\n", question), {}});
      const auto names = json::parse(strip_fences(providers_.chat->chat(req).content));
      std::vector<ToolName> tools;
      if (names.is_array()) {
        for (const auto& n : names) {
          if (!n.is_string()) continue;
          auto t = parse_tool_name(n.get<std::string>());
          if (t && std::find(tools.begin(), tools.end(), *t) == tools.end()) tools.push_back(*t);
        }
      }
      if (!tools.empty()) return tools;
    } catch (const std::exception&) {
      // heuristic fallback below
    }
  }
  return heuristic_route(question);
}

ToolResult RetrievalAgent::run_tool(ToolName tool, std::string_view question) const {
  try {
    switch (tool) {
      case ToolName::SemanticSearch: return semantic_search(question, config_.top_k);
      case ToolName::GraphExpansion: return graph_expansion(question, config_.top_k);
      case ToolName::StructuredQuery: return structured(question);
    }
  } catch (const Error& e) {
    ToolResult failed;
    failed.tool = tool;
    failed.error = fmt::format("{}: {}", to_string(e.code()), e.what());
    return failed;
  }
  return {};
}

Answer RetrievalAgent::answer(std::string_view question) const {
  Answer answer;
  for (ToolName tool : route(question)) answer.trace.push_back(run_tool(tool, question));

  std::set<NoteId> seen;
  std::size_t chars = 0;
  bool budget_full = false;
  std::string context;
  auto add_note = [&](const NoteId& id, const std::string& text) {
    if (budget_full || seen.count(id)) return;
    if (answer.sources.size() >= config_.max_context_notes ||
        chars + text.size() > config_.max_context_chars) {
      budget_full = true;
      return;
    }
    seen.insert(id);
    chars += text.size();
    answer.sources.push_back(id);
    context += fmt::format("[{}] {}\n", id, text);
  };
  bool has_table = false;
  for (const auto& r : answer.trace) {
    if (r.error) continue;
    if (r.table) {
      has_table = true;
      context += fmt::format("Query: {}\n{}", r.generated_query.value_or(""), table_text(*r.table));
    }
    for (const auto& n : r.context_notes) add_note(n.note_id, n.text);
    for (const auto& id : r.witnesses) {
      if (const Note* note = graph_.find_note(id)) add_note(id, note_text(*note));
    }
  }

  if (graph_.empty() || (answer.sources.empty() && !has_table)) {
    answer.no_context = true;
    answer.sources.clear();
    answer.text = std::string(kNoContextAnswer);
    return answer;
  }

  providers::ChatRequest req;
  req.messages.push_back({providers::Role::System,
                          fmt::format("{}\nYou answer questions about the user's memories. Use "
                                      "only the context below. Cite note ids in brackets when "
                                      "you use them. If the context is insufficient, say so.",
                                      kTaskAnswer),
                          {}});
  req.messages.push_back({providers::Role::User,
                          fmt::format("Context:\n{}\nQuestion: {}\n", context, question), {}});
  answer.text = providers_.chat->chat(req).content;
  return answer;
}

}  // namespace gmem::agent
