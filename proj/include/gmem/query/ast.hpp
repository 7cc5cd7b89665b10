#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gmem::query {

/// Scalar value: null, boolean, integer, or string.
using Value = std::variant<std::monostate, bool, std::int64_t, std::string>;

/// Total order used for sorting and DISTINCT: null < bool < int < string.
int compare_values(const Value& a, const Value& b);
std::string value_to_literal(const Value& v);  // query-literal syntax
std::string value_to_text(const Value& v);     // display form, strings unquoted

struct NodePattern {
  std::string variable;  // empty: anonymous
  std::optional<std::string> label;
  std::vector<std::pair<std::string, Value>> properties;

  friend bool operator==(const NodePattern&, const NodePattern&) = default;
};

enum class Direction { Outgoing, Incoming, Either };

struct RelPattern {
  Direction direction = Direction::Outgoing;
  std::optional<std::string> kind;

  friend bool operator==(const RelPattern&, const RelPattern&) = default;
};

struct PathStep {
  RelPattern rel;
  NodePattern node;

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

inline constexpr std::size_t kMaxPathLength = 3;

struct PathPattern {
  NodePattern start;
  std::vector<PathStep> steps;

  friend bool operator==(const PathPattern&, const PathPattern&) = default;
};

struct Operand {
  enum class Kind { Variable, Property, Literal };
  Kind kind = Kind::Literal;
  std::string variable;
  std::string property;
  Value literal;

  static Operand var(std::string v) { return {Kind::Variable, std::move(v), {}, {}}; }
  static Operand prop(std::string v, std::string p) {
    return {Kind::Property, std::move(v), std::move(p), {}};
  }
  static Operand lit(Value v) { return {Kind::Literal, {}, {}, std::move(v)}; }

  friend bool operator==(const Operand&, const Operand&) = default;
};

enum class CompareOp { Equal, NotEqual };

struct Comparison {
  Operand lhs;
  CompareOp op = CompareOp::Equal;
  Operand rhs;

  friend bool operator==(const Comparison&, const Comparison&) = default;
};

struct ReturnItem {
  enum class Kind { Expression, Count, CountStar };
  Kind kind = Kind::Expression;
  Operand expr;                // unused for CountStar
  bool count_distinct = false;  // count(DISTINCT expr)
  std::optional<std::string> alias;

  friend bool operator==(const ReturnItem&, const ReturnItem&) = default;
};

struct OrderBy {
  std::size_t column = 0;  // index into return items
  bool descending = false;

  friend bool operator==(const OrderBy&, const OrderBy&) = default;
};

struct QueryAst {
  std::vector<PathPattern> patterns;
  std::vector<Comparison> where;  // conjunction; empty means no WHERE
  bool distinct = false;          // RETURN DISTINCT
  std::vector<ReturnItem> items;
  std::optional<OrderBy> order_by;
  std::optional<std::int64_t> limit;

  friend bool operator==(const QueryAst&, const QueryAst&) = default;
};

std::string operand_text(const Operand& op);
/// Column name: alias if present, else the canonical expression text.
std::string column_name(const ReturnItem& item);

/// Canonical query text. parse_query(render(ast)) == ast.
std::string render(const QueryAst& ast);

}  // namespace gmem::query
