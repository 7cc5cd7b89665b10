#include "gmem/query/parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include <fmt/format.h>

namespace gmem::query {

QuerySyntaxError::QuerySyntaxError(ErrorCode code, std::size_t line, std::size_t column,
                                   std::string detail, std::vector<std::string> expected)
    : Error(code, [&] {
        std::string msg = fmt::format("{} at line {}, column {}: {}", to_string(code), line,
                                      column, detail);
        if (!expected.empty()) msg += fmt::format(" (expected {})", fmt::join(expected, ", "));
        return msg;
      }()),
      line_(line),
      column_(column),
      expected_(std::move(expected)) {}

namespace {

enum class Tok {
  Ident, Int, String,
  LParen, RParen, LBracket, RBracket, LBrace, RBrace,
  Colon, Comma, Dot, Equal, NotEqual, Dash, ArrowRight, ArrowLeft, Star, Semicolon,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

constexpr std::array kForbidden = {"CREATE", "DELETE", "DETACH", "SET", "MERGE", "REMOVE", "DROP"};
constexpr std::array kReserved = {"MATCH", "WHERE", "RETURN", "DISTINCT", "AS", "ORDER",
                                  "BY", "ASC", "DESC", "LIMIT", "AND", "TRUE",
                                  "FALSE", "NULL", "COUNT"};

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::String: return "string literal";
    default: return "'" + t.text + "'";
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      const std::size_t line = line_, col = col_;
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "", line, col});
        return out;
      }
      const char c = src_[pos_];
      auto single = [&](Tok kind) {
        out.push_back({kind, std::string(1, c), line, col});
        advance();
      };
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          advance();
        }
        out.push_back({Tok::Ident, std::string(src_.substr(start, pos_ - start)), line, col});
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        out.push_back({Tok::Int, std::string(src_.substr(start, pos_ - start)), line, col});
      } else if (c == '\'' || c == '"') {
        out.push_back({Tok::String, read_string(c, line, col), line, col});
      } else if (c == '<' && peek(1) == '>') {
        advance(2);
        out.push_back({Tok::NotEqual, "<>", line, col});
      } else if (c == '<' && peek(1) == '-') {
        advance(2);
        out.push_back({Tok::ArrowLeft, "<-", line, col});
      } else if (c == '-' && peek(1) == '>') {
        advance(2);
        out.push_back({Tok::ArrowRight, "->", line, col});
      } else {
        switch (c) {
          case '(': single(Tok::LParen); break;
          case ')': single(Tok::RParen); break;
          case '[': single(Tok::LBracket); break;
          case ']': single(Tok::RBracket); break;
          case '{': single(Tok::LBrace); break;
          case '}': single(Tok::RBrace); break;
          case ':': single(Tok::Colon); break;
          case ',': single(Tok::Comma); break;
          case '.': single(Tok::Dot); break;
          case '=': single(Tok::Equal); break;
          case '-': single(Tok::Dash); break;
          case '*': single(Tok::Star); break;
          case ';': single(Tok::Semicolon); break;
          default:
            throw QuerySyntaxError(ErrorCode::SyntaxError, line, col,
                                   fmt::format("unexpected character '{}'", c));
        }
      }
    }
  }

 private:
  char peek(std::size_t ahead) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      if (std::isspace(static_cast<unsigned char>(src_[pos_]))) {
        advance();
      } else if (src_[pos_] == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string read_string(char quote, std::size_t line, std::size_t col) {
    advance();
    std::string out;
    while (pos_ < src_.size() && src_[pos_] != quote) {
      char c = src_[pos_];
      if (c == '\\') {
        const char e = peek(1);
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '\\': case '\'': case '"': out.push_back(e); break;
          default:
            throw QuerySyntaxError(ErrorCode::SyntaxError, line_, col_,
                                   fmt::format("unknown escape '\\{}'", e));
        }
        advance(2);
      } else {
        out.push_back(c);
        advance();
      }
    }
    if (pos_ >= src_.size()) {
      throw QuerySyntaxError(ErrorCode::SyntaxError, line, col, "unterminated string literal");
    }
    advance();
    return out;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  QueryAst parse() {
    QueryAst ast;
    expect_keyword("MATCH");
    ast.patterns.push_back(pattern());
    while (accept(Tok::Comma)) ast.patterns.push_back(pattern());
    if (accept_keyword("WHERE")) {
      ast.where.push_back(comparison());
      while (accept_keyword("AND")) ast.where.push_back(comparison());
    }
    expect_keyword("RETURN");
    ast.distinct = accept_keyword("DISTINCT");
    ast.items.push_back(return_item());
    while (accept(Tok::Comma)) ast.items.push_back(return_item());
    if (accept_keyword("ORDER")) {
      expect_keyword("BY");
      ast.order_by = order_by(ast.items);
    }
    if (accept_keyword("LIMIT")) {
      const Token& t = cur();
      expect(Tok::Int, "integer");
      std::int64_t n = 0;
      try {
        n = std::stoll(t.text);
      } catch (const std::exception&) {
        fail(t, "LIMIT value out of range");
      }
      if (n <= 0) fail(t, "LIMIT must be a positive integer");
      ast.limit = n;
    }
    accept(Tok::Semicolon);
    if (cur().kind != Tok::End) {
      fail(cur(), "unexpected " + describe(cur()),
           {"WHERE", "RETURN", "ORDER BY", "LIMIT", "end of input"});
    }
    return ast;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }

  bool is_keyword(const Token& t, std::string_view kw) const {
    return t.kind == Tok::Ident && upper(t.text) == kw;
  }

  bool accept(Tok kind) {
    if (cur().kind != kind) return false;
    ++pos_;
    return true;
  }

  bool accept_keyword(std::string_view kw) {
    if (!is_keyword(cur(), kw)) return false;
    ++pos_;
    return true;
  }

  [[noreturn]] void fail(const Token& at, const std::string& detail,
                         std::vector<std::string> expected = {}) const {
    throw QuerySyntaxError(ErrorCode::SyntaxError, at.line, at.column, detail, std::move(expected));
  }

  void expect(Tok kind, const std::string& what) {
    if (!accept(kind)) fail(cur(), "unexpected " + describe(cur()), {what});
  }

  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) fail(cur(), "unexpected " + describe(cur()), {std::string(kw)});
  }

  std::string identifier(const std::string& what) {
    const Token& t = cur();
    if (t.kind != Tok::Ident) fail(t, "unexpected " + describe(t), {what});
    if (std::find(kReserved.begin(), kReserved.end(), upper(t.text)) != kReserved.end()) {
      fail(t, fmt::format("reserved word '{}' cannot be used as {}", t.text, what), {what});
    }
    ++pos_;
    return t.text;
  }

  NodePattern node() {
    NodePattern n;
    expect(Tok::LParen, "'('");
    if (cur().kind == Tok::Ident) {
      n.variable = identifier("variable");
      bound_.insert(n.variable);
    }
    if (accept(Tok::Colon)) n.label = identifier("label");
    if (accept(Tok::LBrace)) {
      do {
        std::string key = identifier("property name");
        expect(Tok::Colon, "':'");
        n.properties.emplace_back(std::move(key), literal());
      } while (accept(Tok::Comma));
      expect(Tok::RBrace, "'}'");
    }
    if (cur().kind != Tok::RParen) {
      std::vector<std::string> exp{"')'"};
      if (!n.label && n.properties.empty()) exp.insert(exp.begin(), "':'");
      if (n.properties.empty()) exp.insert(exp.end() - 1, "'{'");
      fail(cur(), "unexpected " + describe(cur()), exp);
    }
    ++pos_;
    return n;
  }

  std::optional<std::string> rel_body() {
    std::optional<std::string> kind;
    if (accept(Tok::LBracket)) {
      if (cur().kind == Tok::Ident) fail(cur(), "relationship variables are not supported", {"':'", "']'"});
      if (accept(Tok::Colon)) kind = identifier("relationship kind");
      expect(Tok::RBracket, "']'");
    }
    return kind;
  }

  bool at_rel() const {
    return cur().kind == Tok::Dash || cur().kind == Tok::ArrowLeft;
  }

  RelPattern rel() {
    RelPattern r;
    if (accept(Tok::ArrowLeft)) {
      r.kind = rel_body();
      expect(Tok::Dash, "'-'");
      r.direction = Direction::Incoming;
      return r;
    }
    expect(Tok::Dash, "'-'");
    r.kind = rel_body();
    if (accept(Tok::ArrowRight)) {
      r.direction = Direction::Outgoing;
    } else if (accept(Tok::Dash)) {
      r.direction = Direction::Either;
    } else {
      fail(cur(), "unexpected " + describe(cur()), {"'->'", "'-'"});
    }
    return r;
  }

  PathPattern pattern() {
    PathPattern p;
    p.start = node();
    while (at_rel()) {
      const Token& at = cur();
      PathStep step;
      step.rel = rel();
      step.node = node();
      if (p.steps.size() == kMaxPathLength) {
        fail(at, fmt::format("path patterns are limited to {} relationships", kMaxPathLength));
      }
      p.steps.push_back(std::move(step));
    }
    return p;
  }

  Value literal() {
    const Token& t = cur();
    if (t.kind == Tok::String) {
      ++pos_;
      return t.text;
    }
    bool negative = false;
    if (t.kind == Tok::Dash && toks_[pos_ + 1].kind == Tok::Int) {
      negative = true;
      ++pos_;
    }
    if (cur().kind == Tok::Int) {
      const Token& num = cur();
      ++pos_;
      try {
        const std::int64_t v = std::stoll(num.text);
        return negative ? -v : v;
      } catch (const std::exception&) {
        fail(num, "integer literal out of range");
      }
    }
    if (accept_keyword("TRUE")) return true;
    if (accept_keyword("FALSE")) return false;
    if (accept_keyword("NULL")) return std::monostate{};
    fail(t, "unexpected " + describe(t), {"literal"});
  }

  Operand operand(bool check_bound) {
    const Token& t = cur();
    if (t.kind == Tok::Ident && !is_keyword(t, "TRUE") && !is_keyword(t, "FALSE") &&
        !is_keyword(t, "NULL")) {
      std::string var = identifier("variable");
      if (check_bound && !bound_.contains(var)) {
        throw QuerySyntaxError(ErrorCode::UnboundVariable, t.line, t.column,
                               fmt::format("variable '{}' is not bound in MATCH", var));
      }
      if (accept(Tok::Dot)) return Operand::prop(std::move(var), identifier("property name"));
      return Operand::var(std::move(var));
    }
    return Operand::lit(literal());
  }

  Comparison comparison() {
    Comparison c;
    c.lhs = operand(true);
    if (accept(Tok::Equal)) {
      c.op = CompareOp::Equal;
    } else if (accept(Tok::NotEqual)) {
      c.op = CompareOp::NotEqual;
    } else {
      fail(cur(), "unexpected " + describe(cur()), {"'='", "'<>'"});
    }
    c.rhs = operand(true);
    return c;
  }

  ReturnItem item_expression(bool check_bound) {
    ReturnItem item;
    if (is_keyword(cur(), "COUNT") && toks_[pos_ + 1].kind == Tok::LParen) {
      pos_ += 2;
      if (accept(Tok::Star)) {
        item.kind = ReturnItem::Kind::CountStar;
      } else {
        item.kind = ReturnItem::Kind::Count;
        item.count_distinct = accept_keyword("DISTINCT");
        item.expr = operand(check_bound);
      }
      expect(Tok::RParen, "')'");
    } else {
      item.kind = ReturnItem::Kind::Expression;
      item.expr = operand(check_bound);
    }
    return item;
  }

  ReturnItem return_item() {
    ReturnItem item = item_expression(true);
    if (accept_keyword("AS")) item.alias = identifier("alias");
    return item;
  }

  OrderBy order_by(const std::vector<ReturnItem>& items) {
    const Token& at = cur();
    const std::string text = column_name(item_expression(false));
    OrderBy ob;
    auto match = [&](auto pred) -> bool {
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (pred(items[i])) {
          ob.column = i;
          return true;
        }
      }
      return false;
    };
    if (!match([&](const ReturnItem& it) { return it.alias && *it.alias == text; }) &&
        !match([&](const ReturnItem& it) {
          ReturnItem bare = it;
          bare.alias.reset();
          return column_name(bare) == text;
        })) {
      fail(at, fmt::format("ORDER BY '{}' does not name a RETURN item", text));
    }
    if (accept_keyword("DESC") || accept_keyword("DESCENDING")) {
      ob.descending = true;
    } else if (!accept_keyword("ASC")) {
      accept_keyword("ASCENDING");
    }
    return ob;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::set<std::string> bound_;
};

}  // namespace

QueryAst parse_query(std::string_view text) {
  auto tokens = Lexer(text).run();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind != Tok::Ident) continue;
    if (i > 0 && (tokens[i - 1].kind == Tok::Dot || tokens[i - 1].kind == Tok::Colon)) continue;
    const std::string u = upper(t.text);
    if (std::find(kForbidden.begin(), kForbidden.end(), u) != kForbidden.end()) {
      throw QuerySyntaxError(ErrorCode::ForbiddenClause, t.line, t.column,
                             fmt::format("'{}' would modify the graph; only read queries are allowed", u));
    }
  }
  return Parser(std::move(tokens)).parse();
}

}  // namespace gmem::query
