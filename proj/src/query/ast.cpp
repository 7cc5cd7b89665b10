#include "gmem/query/ast.hpp"

#include <fmt/format.h>

namespace gmem::query {

namespace {

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\'': out += "\\'"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

std::string node_text(const NodePattern& n) {
  std::string inner = n.variable;
  if (n.label) inner += ":" + *n.label;
  if (!n.properties.empty()) {
    if (!inner.empty()) inner += " ";
    inner += "{";
    for (std::size_t i = 0; i < n.properties.size(); ++i) {
      if (i) inner += ", ";
      inner += n.properties[i].first + ": " + value_to_literal(n.properties[i].second);
    }
    inner += "}";
  }
  return "(" + inner + ")";
}

std::string rel_text(const RelPattern& r) {
  const std::string body = r.kind ? "[:" + *r.kind + "]" : "";
  switch (r.direction) {
    case Direction::Outgoing: return "-" + body + "->";
    case Direction::Incoming: return "<-" + body + "-";
    case Direction::Either: return "-" + body + "-";
  }
  return "--";
}

int type_rank(const Value& v) { return static_cast<int>(v.index()); }

}  // namespace

int compare_values(const Value& a, const Value& b) {
  if (type_rank(a) != type_rank(b)) return type_rank(a) < type_rank(b) ? -1 : 1;
  return std::visit(
      [&](const auto& x) -> int {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return 0;
        } else {
          const T& y = std::get<T>(b);
          return x < y ? -1 : (y < x ? 1 : 0);
        }
      },
      a);
}

std::string value_to_literal(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "null";
        else if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
        else return quote(x);
      },
      v);
}

std::string value_to_text(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return value_to_literal(v);
}

std::string operand_text(const Operand& op) {
  switch (op.kind) {
    case Operand::Kind::Variable: return op.variable;
    case Operand::Kind::Property: return op.variable + "." + op.property;
    case Operand::Kind::Literal: return value_to_literal(op.literal);
  }
  return {};
}

std::string column_name(const ReturnItem& item) {
  if (item.alias) return *item.alias;
  switch (item.kind) {
    case ReturnItem::Kind::Expression: return operand_text(item.expr);
    case ReturnItem::Kind::Count:
      return fmt::format("count({}{})", item.count_distinct ? "DISTINCT " : "",
                         operand_text(item.expr));
    case ReturnItem::Kind::CountStar: return "count(*)";
  }
  return {};
}

std::string render(const QueryAst& ast) {
  std::string out = "MATCH ";
  for (std::size_t i = 0; i < ast.patterns.size(); ++i) {
    if (i) out += ", ";
    out += node_text(ast.patterns[i].start);
    for (const auto& step : ast.patterns[i].steps) out += rel_text(step.rel) + node_text(step.node);
  }
  for (std::size_t i = 0; i < ast.where.size(); ++i) {
    const auto& c = ast.where[i];
    out += i ? " AND " : " WHERE ";
    out += operand_text(c.lhs) + (c.op == CompareOp::Equal ? " = " : " <> ") + operand_text(c.rhs);
  }
  out += ast.distinct ? " RETURN DISTINCT " : " RETURN ";
  for (std::size_t i = 0; i < ast.items.size(); ++i) {
    if (i) out += ", ";
    const auto& item = ast.items[i];
    switch (item.kind) {
      case ReturnItem::Kind::Expression: out += operand_text(item.expr); break;
      case ReturnItem::Kind::Count:
        out += fmt::format("count({}{})", item.count_distinct ? "DISTINCT " : "",
                           operand_text(item.expr));
        break;
      case ReturnItem::Kind::CountStar: out += "count(*)"; break;
    }
    if (item.alias) out += " AS " + *item.alias;
  }
  if (ast.order_by) {
    out += " ORDER BY " + column_name(ast.items.at(ast.order_by->column));
    if (ast.order_by->descending) out += " DESC";
  }
  if (ast.limit) out += fmt::format(" LIMIT {}", *ast.limit);
  return out;
}

}  // namespace gmem::query
