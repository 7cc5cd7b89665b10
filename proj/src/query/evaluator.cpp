#include "gmem/query/evaluator.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

namespace gmem::query {

namespace {

constexpr std::array kLabels = {"Image", "MemoryNote", "Agent", "Object", "Action"};
constexpr std::array kEdgeKinds = {"HAS_PREVIOUS", "HAS_ELEMENT"};

bool known_label(const std::string& l) {
  return std::find(kLabels.begin(), kLabels.end(), l) != kLabels.end();
}

/// Dense, id-sorted view of the graph used during evaluation.
struct GraphView {
  struct NodeRef {
    std::string_view id;
    const Note* note = nullptr;
    const EntityNode* entity = nullptr;
  };
  struct EdgeRef {
    std::size_t source;
    std::size_t target;
    EdgeKind kind;
  };

  std::vector<NodeRef> nodes;
  std::vector<EdgeRef> edges;
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::vector<std::size_t>> in;

  explicit GraphView(const MemoryGraph& g) {
    for (const auto& [id, note] : g.notes()) nodes.push_back({id, &note, nullptr});
    for (const auto& [label, e] : g.entities()) nodes.push_back({label, nullptr, &e});
    std::sort(nodes.begin(), nodes.end(),
              [](const NodeRef& a, const NodeRef& b) { return a.id < b.id; });
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i].id, i);
    out.resize(nodes.size());
    in.resize(nodes.size());
    for (const auto& e : g.edges()) {
      const std::size_t s = index.at(e.source), t = index.at(e.target);
      out[s].push_back(edges.size());
      in[t].push_back(edges.size());
      edges.push_back({s, t, e.kind});
    }
  }

  bool has_label(std::size_t n, const std::string& label) const {
    const NodeRef& r = nodes[n];
    if (r.note) {
      if (label == "MemoryNote") return true;
      return label == "Image" && r.note->kind == NoteKind::Image;
    }
    return to_string(r.entity->entity_type) == label;
  }

  Value property(std::size_t n, const std::string& name) const {
    const NodeRef& r = nodes[n];
    if (name == "id") return std::string(r.id);
    if (r.note) {
      const Note& note = *r.note;
      if (name == "kind") return std::string(to_string(note.kind));
      if (name == "caption") return note.caption;
      if (name == "plain_caption") return note.plain_caption;
      if (name == "created_at") return format_rfc3339(note.created_at);
      if (name == "sequence_index" && note.sequence_index) {
        return static_cast<std::int64_t>(*note.sequence_index);
      }
      return std::monostate{};
    }
    const EntityNode& e = *r.entity;
    if (name == "kind") return std::string("entity");
    if (name == "label") return e.label;
    if (name == "type") return std::string(to_string(e.entity_type));
    if (name == "first_seen") return e.first_seen;
    if (name == "mention_count") return static_cast<std::int64_t>(e.mention_count);
    return std::monostate{};
  }
};

using Binding = std::vector<std::ptrdiff_t>;  // slot -> node index, -1 unbound

struct CompiledNode {
  std::size_t slot;
  const NodePattern* pattern;
};

class Matcher {
 public:
  Matcher(const QueryAst& ast, const GraphView& view, std::vector<std::string>& warnings)
      : ast_(ast), view_(view) {
    for (const auto& p : ast.patterns) {
      std::vector<CompiledNode> nodes;
      nodes.push_back({slot_for(p.start.variable), &p.start});
      for (const auto& s : p.steps) nodes.push_back({slot_for(s.node.variable), &s.node});
      compiled_.push_back(std::move(nodes));
      auto warn_label = [&](const NodePattern& n) {
        if (n.label && !known_label(*n.label)) {
          add_warning(warnings, fmt::format("unknown label '{}' matches nothing", *n.label));
        }
      };
      warn_label(p.start);
      for (const auto& s : p.steps) {
        warn_label(s.node);
        if (s.rel.kind && !parse_edge_kind(*s.rel.kind)) {
          add_warning(warnings, fmt::format("unknown relationship kind '{}' matches nothing", *s.rel.kind));
        }
      }
    }
  }

  const std::map<std::string, std::size_t>& slots() const { return slots_; }

  std::vector<Binding> run() {
    std::vector<Binding> results;
    Binding b(slot_count_, -1);
    match_pattern(0, b, results);
    return results;
  }

 private:
  static void add_warning(std::vector<std::string>& w, std::string msg) {
    if (std::find(w.begin(), w.end(), msg) == w.end()) w.push_back(std::move(msg));
  }

  std::size_t slot_for(const std::string& var) {
    if (var.empty()) return slot_count_++;
    auto [it, inserted] = slots_.try_emplace(var, slot_count_);
    if (inserted) ++slot_count_;
    return it->second;
  }

  bool node_ok(std::size_t n, const NodePattern& p) const {
    if (p.label && !view_.has_label(n, *p.label)) return false;
    for (const auto& [key, value] : p.properties) {
      const Value actual = view_.property(n, key);
      if (std::holds_alternative<std::monostate>(actual) ||
          std::holds_alternative<std::monostate>(value) || compare_values(actual, value) != 0) {
        return false;
      }
    }
    return true;
  }

  void match_pattern(std::size_t pi, Binding& b, std::vector<Binding>& results) {
    if (pi == ast_.patterns.size()) {
      results.push_back(b);
      return;
    }
    const CompiledNode& first = compiled_[pi][0];
    auto try_start = [&](std::size_t n) {
      if (!node_ok(n, *first.pattern)) return;
      const auto saved = b[first.slot];
      b[first.slot] = static_cast<std::ptrdiff_t>(n);
      std::vector<std::size_t> used;
      match_step(pi, 0, n, used, b, results);
      b[first.slot] = saved;
    };
    if (b[first.slot] >= 0) {
      try_start(static_cast<std::size_t>(b[first.slot]));
    } else {
      for (std::size_t n = 0; n < view_.nodes.size(); ++n) try_start(n);
    }
  }

  void match_step(std::size_t pi, std::size_t si, std::size_t current, std::vector<std::size_t>& used,
                  Binding& b, std::vector<Binding>& results) {
    const auto& steps = ast_.patterns[pi].steps;
    if (si == steps.size()) {
      match_pattern(pi + 1, b, results);
      return;
    }
    const RelPattern& rel = steps[si].rel;
    const CompiledNode& next = compiled_[pi][si + 1];
    std::optional<EdgeKind> kind;
    if (rel.kind) {
      kind = parse_edge_kind(*rel.kind);
      if (!kind) return;
    }
    auto visit = [&](std::size_t e, std::size_t neighbor) {
      if (kind && view_.edges[e].kind != *kind) return;
      if (std::find(used.begin(), used.end(), e) != used.end()) return;
      if (b[next.slot] >= 0 && static_cast<std::size_t>(b[next.slot]) != neighbor) return;
      if (!node_ok(neighbor, *next.pattern)) return;
      const auto saved = b[next.slot];
      b[next.slot] = static_cast<std::ptrdiff_t>(neighbor);
      used.push_back(e);
      match_step(pi, si + 1, neighbor, used, b, results);
      used.pop_back();
      b[next.slot] = saved;
    };
    if (rel.direction != Direction::Incoming) {
      for (std::size_t e : view_.out[current]) visit(e, view_.edges[e].target);
    }
    if (rel.direction != Direction::Outgoing) {
      for (std::size_t e : view_.in[current]) visit(e, view_.edges[e].source);
    }
  }

  const QueryAst& ast_;
  const GraphView& view_;
  std::map<std::string, std::size_t> slots_;
  std::size_t slot_count_ = 0;
  std::vector<std::vector<CompiledNode>> compiled_;
};

Value eval_operand(const Operand& op, const Binding& b, const std::map<std::string, std::size_t>& slots,
                   const GraphView& view) {
  switch (op.kind) {
    case Operand::Kind::Literal: return op.literal;
    case Operand::Kind::Variable:
      return std::string(view.nodes[static_cast<std::size_t>(b[slots.at(op.variable)])].id);
    case Operand::Kind::Property:
      return view.property(static_cast<std::size_t>(b[slots.at(op.variable)]), op.property);
  }
  return std::monostate{};
}

bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

bool row_less(const std::vector<Value>& a, const std::vector<Value>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (int c = compare_values(a[i], b[i]); c != 0) return c < 0;
  }
  return false;
}

bool row_equal(const std::vector<Value>& a, const std::vector<Value>& b) {
  return !row_less(a, b) && !row_less(b, a);
}

}  // namespace

std::vector<std::string> known_labels() { return {kLabels.begin(), kLabels.end()}; }
std::vector<std::string> known_edge_kinds() { return {kEdgeKinds.begin(), kEdgeKinds.end()}; }

ResultTable evaluate(const QueryAst& ast, const MemoryGraph& graph) {
  ResultTable table;
  for (const auto& item : ast.items) table.columns.push_back(column_name(item));

  const GraphView view(graph);
  Matcher matcher(ast, view, table.warnings);
  const auto& slots = matcher.slots();
  std::vector<Binding> bindings = matcher.run();

  std::erase_if(bindings, [&](const Binding& b) {
    for (const auto& c : ast.where) {
      const Value l = eval_operand(c.lhs, b, slots, view);
      const Value r = eval_operand(c.rhs, b, slots, view);
      if (is_null(l) || is_null(r)) return true;
      const bool eq = compare_values(l, r) == 0;
      if (eq != (c.op == CompareOp::Equal)) return true;
    }
    return false;
  });

  const bool aggregate = std::any_of(ast.items.begin(), ast.items.end(), [](const ReturnItem& i) {
    return i.kind != ReturnItem::Kind::Expression;
  });

  if (!aggregate) {
    for (const auto& b : bindings) {
      std::vector<Value> row;
      for (const auto& item : ast.items) row.push_back(eval_operand(item.expr, b, slots, view));
      table.rows.push_back(std::move(row));
    }
  } else {
    // Group by the non-count items; each group keeps per-item counters.
    struct Group {
      std::vector<Value> key;
      std::vector<std::size_t> counts;
      std::vector<std::vector<Value>> distinct_seen;
    };
    std::vector<Group> groups;
    auto find_group = [&](const std::vector<Value>& key) -> Group& {
      for (auto& g : groups) {
        if (row_equal(g.key, key)) return g;
      }
      groups.push_back({key, std::vector<std::size_t>(ast.items.size(), 0),
                        std::vector<std::vector<Value>>(ast.items.size())});
      return groups.back();
    };
    for (const auto& b : bindings) {
      std::vector<Value> key;
      for (const auto& item : ast.items) {
        if (item.kind == ReturnItem::Kind::Expression) key.push_back(eval_operand(item.expr, b, slots, view));
      }
      Group& g = find_group(key);
      for (std::size_t i = 0; i < ast.items.size(); ++i) {
        const auto& item = ast.items[i];
        if (item.kind == ReturnItem::Kind::CountStar) {
          ++g.counts[i];
        } else if (item.kind == ReturnItem::Kind::Count) {
          Value v = eval_operand(item.expr, b, slots, view);
          if (is_null(v)) continue;
          if (item.count_distinct) {
            auto& seen = g.distinct_seen[i];
            if (std::none_of(seen.begin(), seen.end(),
                             [&](const Value& s) { return compare_values(s, v) == 0; })) {
              seen.push_back(std::move(v));
              ++g.counts[i];
            }
          } else {
            ++g.counts[i];
          }
        }
      }
    }
    const bool has_keys = std::any_of(ast.items.begin(), ast.items.end(), [](const ReturnItem& i) {
      return i.kind == ReturnItem::Kind::Expression;
    });
    if (groups.empty() && !has_keys) find_group({});
    for (const auto& g : groups) {
      std::vector<Value> row;
      std::size_t k = 0;
      for (std::size_t i = 0; i < ast.items.size(); ++i) {
        if (ast.items[i].kind == ReturnItem::Kind::Expression) {
          row.push_back(g.key[k++]);
        } else {
          row.push_back(static_cast<std::int64_t>(g.counts[i]));
        }
      }
      table.rows.push_back(std::move(row));
    }
  }

  std::sort(table.rows.begin(), table.rows.end(), row_less);
  if (ast.distinct) {
    table.rows.erase(std::unique(table.rows.begin(), table.rows.end(), row_equal), table.rows.end());
  }
  if (ast.order_by) {
    const std::size_t col = ast.order_by->column;
    const bool desc = ast.order_by->descending;
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [&](const std::vector<Value>& a, const std::vector<Value>& b) {
                       const int c = compare_values(a[col], b[col]);
                       return desc ? c > 0 : c < 0;
                     });
  }
  if (ast.limit && table.rows.size() > static_cast<std::size_t>(*ast.limit)) {
    table.rows.resize(static_cast<std::size_t>(*ast.limit));
  }
  return table;
}

namespace {

std::string node_desc(const NodePattern& n) {
  std::string s = "(" + n.variable;
  if (n.label) s += ":" + *n.label;
  if (!n.properties.empty()) s += fmt::format(" +{} prop filter{}", n.properties.size(),
                                              n.properties.size() > 1 ? "s" : "");
  return s + ")";
}

std::string rel_desc(const RelPattern& r) {
  const std::string kind = r.kind ? ":" + *r.kind : "";
  switch (r.direction) {
    case Direction::Outgoing: return "-[" + kind + "]->";
    case Direction::Incoming: return "<-[" + kind + "]-";
    case Direction::Either: return "-[" + kind + "]-";
  }
  return "";
}

std::string plan(const QueryAst& ast, const std::function<std::string(const NodePattern&)>& scan_est,
                 const std::function<std::string(const std::string&, const RelPattern&,
                                                  const NodePattern&)>& expand_est) {
  std::vector<std::string> lines;
  std::set<std::string> bound;
  for (std::size_t pi = 0; pi < ast.patterns.size(); ++pi) {
    const auto& p = ast.patterns[pi];
    const bool joined = !p.start.variable.empty() && bound.contains(p.start.variable);
    std::string est = scan_est(p.start);
    if (pi == 0) {
      lines.push_back(fmt::format("NodeScan {} est={}", node_desc(p.start), est));
    } else if (joined) {
      lines.push_back(fmt::format("Join pattern {} on bound {} est={}", pi + 1, node_desc(p.start), est));
    } else {
      lines.push_back(fmt::format("CartesianProduct with NodeScan {} est={}", node_desc(p.start), est));
    }
    if (!p.start.variable.empty()) bound.insert(p.start.variable);
    std::string from = node_desc(p.start);
    for (const auto& s : p.steps) {
      est = expand_est(est, s.rel, s.node);
      const bool closes = !s.node.variable.empty() && bound.contains(s.node.variable);
      lines.push_back(fmt::format("{} {}{}{} est={}", closes ? "ExpandInto" : "Expand", from,
                                  rel_desc(s.rel), node_desc(s.node), est));
      if (!s.node.variable.empty()) bound.insert(s.node.variable);
      from = node_desc(s.node);
    }
  }
  if (!ast.where.empty()) {
    std::vector<std::string> conds;
    for (const auto& c : ast.where) {
      conds.push_back(operand_text(c.lhs) + (c.op == CompareOp::Equal ? " = " : " <> ") +
                      operand_text(c.rhs));
    }
    lines.push_back(fmt::format("Filter {}", fmt::join(conds, " AND ")));
  }
  std::vector<std::string> cols;
  for (const auto& i : ast.items) cols.push_back(column_name(i));
  const bool aggregate = std::any_of(ast.items.begin(), ast.items.end(), [](const ReturnItem& i) {
    return i.kind != ReturnItem::Kind::Expression;
  });
  lines.push_back(fmt::format("{} {}", aggregate ? "Aggregate" : "Project", fmt::join(cols, ", ")));
  if (ast.distinct) lines.push_back("Distinct");
  if (ast.order_by) {
    lines.push_back(fmt::format("Sort {} {}", cols.at(ast.order_by->column),
                                ast.order_by->descending ? "DESC" : "ASC"));
  }
  if (ast.limit) lines.push_back(fmt::format("Limit {}", *ast.limit));

  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) out += fmt::format("{}. {}\n", i + 1, lines[i]);
  return out;
}

}  // namespace

std::string explain(const QueryAst& ast) {
  return plan(
      ast, [](const NodePattern&) { return std::string("?"); },
      [](const std::string&, const RelPattern&, const NodePattern&) { return std::string("?"); });
}

std::string explain(const QueryAst& ast, const MemoryGraph& graph) {
  const GraphView view(graph);
  auto count_label = [&](const NodePattern& n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < view.nodes.size(); ++i) {
      if (!n.label || view.has_label(i, *n.label)) ++c;
    }
    // An id filter pins at most one node.
    for (const auto& [k, v] : n.properties) {
      if (k == "id") c = std::min<std::size_t>(c, 1);
    }
    return c;
  };
  auto scan = [&](const NodePattern& n) { return std::to_string(count_label(n)); };
  auto expand = [&](const std::string& prev, const RelPattern& r, const NodePattern& n) {
    std::size_t kind_edges = 0;
    for (const auto& e : view.edges) {
      if (!r.kind || std::string(to_string(e.kind)) == *r.kind) ++kind_edges;
    }
    const double nodes = std::max<double>(1.0, static_cast<double>(view.nodes.size()));
    double fanout = static_cast<double>(kind_edges) / nodes;
    if (r.direction == Direction::Either) fanout *= 2.0;
    const double sel = static_cast<double>(count_label(n)) / nodes;
    const double est = std::stod(prev) * fanout * sel;
    return fmt::format("{:.0f}", std::max(0.0, est));
  };
  return plan(ast, scan, expand);
}

}  // namespace gmem::query
