#pragma once

// Read-only graph query subset. Keywords are case-insensitive; labels, edge
// kinds, and property names are case-sensitive.
//
//   query      := MATCH pattern (',' pattern)* [WHERE cond (AND cond)*]
//                 RETURN [DISTINCT] item (',' item)*
//                 [ORDER BY column [ASC | DESC]] [LIMIT int] [';']
//   pattern    := node (rel node)*            -- at most 3 relationships
//   node       := '(' [ident] [':' ident] [props] ')'
//   props      := '{' ident ':' literal (',' ident ':' literal)* '}'
//   rel        := '-' [body] '->' | '<-' [body] '-' | '-' [body] '-'
//   body       := '[' [':' ident] ']'
//   cond       := operand ('=' | '<>') operand
//   operand    := ident | ident '.' ident | literal
//   item       := (operand | COUNT '(' ( '*' | [DISTINCT] operand ) ')') [AS ident]
//   column     := alias or item text of a RETURN item
//   literal    := string | int | TRUE | FALSE | NULL
//
// Mutation keywords (CREATE, DELETE, DETACH, SET, MERGE, REMOVE, DROP) are
// rejected with ForbiddenClause before parsing.

#include <string>
#include <string_view>
#include <vector>

#include "gmem/error.hpp"
#include "gmem/query/ast.hpp"

namespace gmem::query {

class QuerySyntaxError : public Error {
 public:
  QuerySyntaxError(ErrorCode code, std::size_t line, std::size_t column, std::string detail,
                   std::vector<std::string> expected = {});

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::vector<std::string> expected_;
};

QueryAst parse_query(std::string_view text);

}  // namespace gmem::query
