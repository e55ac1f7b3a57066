#include "vexploit/vex/parser.hpp"

#include <cstdlib>
#include <limits>
#include <set>
#include <stdexcept>

namespace vexploit {

namespace {

enum class Tok {
  Ident,
  Int,
  Float,
  String,
  KwPub,
  KwFn,
  KwLet,
  KwIf,
  KwElse,
  KwWhile,
  KwReturn,
  KwThrow,
  KwTry,
  KwCatch,
  KwTrue,
  KwFalse,
  KwNull,
  KwAnd,
  KwOr,
  KwNot,
  LParen,
  RParen,
  LBrace,
  RBrace,
  LBracket,
  RBracket,
  Comma,
  Semi,
  Colon,
  ColonColon,
  Dot,
  Assign,
  EqEq,
  NotEq,
  Lt,
  Le,
  Gt,
  Ge,
  Plus,
  Minus,
  Star,
  Slash,
  Percent,
  At,
  End,
};

struct Token {
  Tok kind = Tok::End;
  SourceLoc loc;
  std::string text;  // identifier name, decoded string, or number spelling
  std::uint64_t int_value = 0;
  double float_value = 0;
};

struct SyntaxError {
  SourceLoc loc;
  std::string message;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::Ident: return "identifier '" + t.text + "'";
    case Tok::Int:
    case Tok::Float: return "number " + t.text;
    case Tok::String: return "string literal";
    default: return "'" + t.text + "'";
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.loc = {line_, col_};
      if (pos_ >= text_.size()) {
        t.kind = Tok::End;
        out.push_back(std::move(t));
        return out;
      }
      char c = text_[pos_];
      if (is_alpha(c)) {
        lex_word(t);
      } else if (is_digit(c)) {
        lex_number(t);
      } else if (c == '"') {
        lex_string(t);
      } else {
        lex_punct(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  void lex_word(Token& t) {
    std::size_t start = pos_;
    while (pos_ < text_.size() && (is_alpha(text_[pos_]) || is_digit(text_[pos_]))) advance();
    t.text = std::string(text_.substr(start, pos_ - start));
    static const std::pair<std::string_view, Tok> kw[] = {
        {"pub", Tok::KwPub},       {"fn", Tok::KwFn},         {"let", Tok::KwLet},     {"if", Tok::KwIf},
        {"else", Tok::KwElse},     {"while", Tok::KwWhile},   {"return", Tok::KwReturn},
        {"throw", Tok::KwThrow},   {"try", Tok::KwTry},       {"catch", Tok::KwCatch},
        {"true", Tok::KwTrue},     {"false", Tok::KwFalse},   {"null", Tok::KwNull},
        {"and", Tok::KwAnd},       {"or", Tok::KwOr},         {"not", Tok::KwNot},
    };
    t.kind = Tok::Ident;
    for (auto [word, kind] : kw) {
      if (word == t.text) t.kind = kind;
    }
  }

  void lex_number(Token& t) {
    std::size_t start = pos_;
    bool is_float = false;
    while (is_digit(peek())) advance();
    if (peek() == '.' && is_digit(peek(1))) {
      is_float = true;
      advance();
      while (is_digit(peek())) advance();
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t save_pos = pos_;
      auto save_line = line_, save_col = col_;
      advance();
      if (peek() == '+' || peek() == '-') advance();
      if (is_digit(peek())) {
        is_float = true;
        while (is_digit(peek())) advance();
      } else {
        pos_ = save_pos;
        line_ = save_line;
        col_ = save_col;
      }
    }
    t.text = std::string(text_.substr(start, pos_ - start));
    if (is_float) {
      t.kind = Tok::Float;
      t.float_value = std::strtod(t.text.c_str(), nullptr);
      return;
    }
    t.kind = Tok::Int;
    std::uint64_t v = 0;
    constexpr std::uint64_t kLimit = 9223372036854775808ull;
    for (char c : t.text) {
      std::uint64_t d = static_cast<std::uint64_t>(c - '0');
      if (v > (kLimit - d) / 10) throw SyntaxError{t.loc, "integer literal out of range"};
      v = v * 10 + d;
    }
    t.int_value = v;
  }

  static int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  }

  void lex_string(Token& t) {
    t.kind = Tok::String;
    advance();  // opening quote
    for (;;) {
      if (pos_ >= text_.size() || peek() == '\n') throw SyntaxError{t.loc, "unterminated string literal"};
      char c = peek();
      if (c == '"') {
        advance();
        return;
      }
      if (c != '\\') {
        t.text += c;
        advance();
        continue;
      }
      SourceLoc esc{line_, col_};
      advance();
      char e = peek();
      switch (e) {
        case '"': t.text += '"'; break;
        case '\\': t.text += '\\'; break;
        case 'n': t.text += '\n'; break;
        case 't': t.text += '\t'; break;
        case 'r': t.text += '\r'; break;
        case 'x': {
          int hi = hex_digit(peek(1)), lo = hex_digit(peek(2));
          if (hi < 0 || lo < 0) throw SyntaxError{esc, "bad \\x escape"};
          t.text += static_cast<char>(hi * 16 + lo);
          advance();
          advance();
          break;
        }
        default:
          throw SyntaxError{esc, "unknown escape sequence"};
      }
      advance();
    }
  }

  void lex_punct(Token& t) {
    char c = peek();
    char n = peek(1);
    auto two = [&](Tok k, const char* s) {
      t.kind = k;
      t.text = s;
      advance();
      advance();
    };
    auto one = [&](Tok k) {
      t.kind = k;
      t.text = std::string(1, c);
      advance();
    };
    switch (c) {
      case '(': return one(Tok::LParen);
      case ')': return one(Tok::RParen);
      case '{': return one(Tok::LBrace);
      case '}': return one(Tok::RBrace);
      case '[': return one(Tok::LBracket);
      case ']': return one(Tok::RBracket);
      case ',': return one(Tok::Comma);
      case ';': return one(Tok::Semi);
      case '.': return one(Tok::Dot);
      case '+': return one(Tok::Plus);
      case '-': return one(Tok::Minus);
      case '*': return one(Tok::Star);
      case '/': return one(Tok::Slash);
      case '%': return one(Tok::Percent);
      case '@': return one(Tok::At);
      case ':': return n == ':' ? two(Tok::ColonColon, "::") : one(Tok::Colon);
      case '=': return n == '=' ? two(Tok::EqEq, "==") : one(Tok::Assign);
      case '<': return n == '=' ? two(Tok::Le, "<=") : one(Tok::Lt);
      case '>': return n == '=' ? two(Tok::Ge, ">=") : one(Tok::Gt);
      case '!':
        if (n == '=') return two(Tok::NotEq, "!=");
        break;
      default:
        break;
    }
    throw SyntaxError{{line_, col_}, std::string("unexpected character '") + c + "'"};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::uint32_t line_ = 1;
  std::uint32_t col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  ModuleAst parse_module(std::string name) {
    ModuleAst m;
    m.name = std::move(name);
    while (!at(Tok::End)) {
      m.functions.push_back(parse_function());
    }
    return m;
  }

  ExprPtr parse_standalone_expr() {
    auto e = parse_expr();
    expect(Tok::End, "end of input");
    return e;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  bool at(Tok k) const { return cur().kind == k; }

  const Token& take() {
    const Token& t = toks_[pos_];
    if (t.kind != Tok::End) ++pos_;
    return t;
  }

  bool accept(Tok k) {
    if (!at(k)) return false;
    take();
    return true;
  }

  [[noreturn]] void fail(const std::string& expected) const {
    throw SyntaxError{cur().loc, "expected " + expected + ", found " + describe(cur())};
  }

  const Token& expect(Tok k, const char* what) {
    if (!at(k)) fail(what);
    return take();
  }

  std::unique_ptr<FunctionDecl> parse_function() {
    auto fn = std::make_unique<FunctionDecl>();
    fn->loc = cur().loc;
    fn->is_public = accept(Tok::KwPub);
    expect(Tok::KwFn, "'fn'");
    fn->name = expect(Tok::Ident, "function name").text;
    expect(Tok::LParen, "'('");
    if (!at(Tok::RParen)) {
      do {
        Param p;
        p.loc = cur().loc;
        p.name = expect(Tok::Ident, "parameter name").text;
        if (accept(Tok::Colon)) {
          const Token& ty = expect(Tok::Ident, "type annotation");
          auto parsed = param_type_from_name(ty.text);
          if (!parsed) throw SyntaxError{ty.loc, "unknown type annotation '" + ty.text + "'"};
          p.type = parsed;
        }
        fn->params.push_back(std::move(p));
      } while (accept(Tok::Comma));
    }
    expect(Tok::RParen, "')'");
    fn->body = parse_block();
    return fn;
  }

  std::vector<StmtPtr> parse_block() {
    expect(Tok::LBrace, "'{'");
    std::vector<StmtPtr> body;
    while (!at(Tok::RBrace)) {
      if (at(Tok::End)) fail("'}'");
      body.push_back(parse_stmt());
    }
    take();
    return body;
  }

  StmtPtr parse_if() {
    auto s = std::make_unique<Stmt>();
    s->kind = StmtKind::If;
    s->loc = take().loc;
    s->expr = parse_expr();
    s->body = parse_block();
    if (accept(Tok::KwElse)) {
      s->has_else = true;
      if (at(Tok::KwIf)) {
        s->else_body.push_back(parse_if());
      } else {
        s->else_body = parse_block();
      }
    }
    return s;
  }

  StmtPtr parse_stmt() {
    auto s = std::make_unique<Stmt>();
    s->loc = cur().loc;
    switch (cur().kind) {
      case Tok::KwLet:
        take();
        s->kind = StmtKind::Let;
        s->name = expect(Tok::Ident, "variable name").text;
        expect(Tok::Assign, "'='");
        s->expr = parse_expr();
        expect(Tok::Semi, "';'");
        return s;
      case Tok::KwIf:
        return parse_if();
      case Tok::KwWhile:
        take();
        s->kind = StmtKind::While;
        s->expr = parse_expr();
        s->body = parse_block();
        return s;
      case Tok::KwReturn:
        take();
        s->kind = StmtKind::Return;
        if (!at(Tok::Semi)) s->expr = parse_expr();
        expect(Tok::Semi, "';'");
        return s;
      case Tok::KwThrow:
        take();
        s->kind = StmtKind::Throw;
        s->expr = parse_expr();
        expect(Tok::Semi, "';'");
        return s;
      case Tok::KwTry:
        take();
        s->kind = StmtKind::Try;
        s->body = parse_block();
        expect(Tok::KwCatch, "'catch'");
        s->name = expect(Tok::Ident, "catch variable").text;
        s->else_body = parse_block();
        return s;
      default:
        break;
    }
    auto e = parse_expr();
    if (at(Tok::Assign)) {
      SourceLoc eq = cur().loc;
      take();
      if (!is_lvalue(*e)) throw SyntaxError{eq, "left side of '=' is not assignable"};
      s->kind = StmtKind::Assign;
      s->target = std::move(e);
      s->expr = parse_expr();
    } else {
      s->kind = StmtKind::ExprStmt;
      s->expr = std::move(e);
    }
    expect(Tok::Semi, "';'");
    return s;
  }

  static bool is_lvalue(const Expr& e) {
    if (e.kind == ExprKind::Var) return true;
    if (e.kind == ExprKind::Field || e.kind == ExprKind::Index) return is_lvalue(*e.operands[0]);
    return false;
  }

  static ExprPtr make(ExprKind kind, SourceLoc loc) {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    e->loc = loc;
    return e;
  }

  static ExprPtr binary(BinaryOp op, SourceLoc loc, ExprPtr lhs, ExprPtr rhs) {
    auto e = make(ExprKind::Binary, loc);
    e->binary_op = op;
    e->operands.push_back(std::move(lhs));
    e->operands.push_back(std::move(rhs));
    return e;
  }

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    auto lhs = parse_and();
    while (at(Tok::KwOr)) {
      SourceLoc loc = take().loc;
      lhs = binary(BinaryOp::Or, loc, std::move(lhs), parse_and());
    }
    return lhs;
  }

  ExprPtr parse_and() {
    auto lhs = parse_equality();
    while (at(Tok::KwAnd)) {
      SourceLoc loc = take().loc;
      lhs = binary(BinaryOp::And, loc, std::move(lhs), parse_equality());
    }
    return lhs;
  }

  ExprPtr parse_equality() {
    auto lhs = parse_comparison();
    for (;;) {
      BinaryOp op;
      if (at(Tok::EqEq)) op = BinaryOp::Eq;
      else if (at(Tok::NotEq)) op = BinaryOp::Ne;
      else return lhs;
      SourceLoc loc = take().loc;
      lhs = binary(op, loc, std::move(lhs), parse_comparison());
    }
  }

  ExprPtr parse_comparison() {
    auto lhs = parse_additive();
    for (;;) {
      BinaryOp op;
      if (at(Tok::Lt)) op = BinaryOp::Lt;
      else if (at(Tok::Le)) op = BinaryOp::Le;
      else if (at(Tok::Gt)) op = BinaryOp::Gt;
      else if (at(Tok::Ge)) op = BinaryOp::Ge;
      else return lhs;
      SourceLoc loc = take().loc;
      lhs = binary(op, loc, std::move(lhs), parse_additive());
    }
  }

  ExprPtr parse_additive() {
    auto lhs = parse_multiplicative();
    for (;;) {
      BinaryOp op;
      if (at(Tok::Plus)) op = BinaryOp::Add;
      else if (at(Tok::Minus)) op = BinaryOp::Sub;
      else return lhs;
      SourceLoc loc = take().loc;
      lhs = binary(op, loc, std::move(lhs), parse_multiplicative());
    }
  }

  ExprPtr parse_multiplicative() {
    auto lhs = parse_unary();
    for (;;) {
      BinaryOp op;
      if (at(Tok::Star)) op = BinaryOp::Mul;
      else if (at(Tok::Slash)) op = BinaryOp::Div;
      else if (at(Tok::Percent)) op = BinaryOp::Mod;
      else return lhs;
      SourceLoc loc = take().loc;
      lhs = binary(op, loc, std::move(lhs), parse_unary());
    }
  }

  ExprPtr parse_unary() {
    if (at(Tok::Minus) || at(Tok::KwNot)) {
      bool neg = at(Tok::Minus);
      SourceLoc loc = take().loc;
      auto operand = parse_unary();
      // Negative numeric literals fold so that rendering round-trips.
      if (neg && operand->kind == ExprKind::Literal && operand->literal.is(ValueKind::Int)) {
        auto u = static_cast<std::uint64_t>(operand->literal.as_int());
        operand->literal = Value::integer(static_cast<std::int64_t>(0 - u));
        operand->loc = loc;
        return operand;
      }
      if (neg && operand->kind == ExprKind::Literal && operand->literal.is(ValueKind::Float)) {
        operand->literal = Value::real(-operand->literal.as_float());
        operand->loc = loc;
        return operand;
      }
      auto e = make(ExprKind::Unary, loc);
      e->unary_op = neg ? UnaryOp::Neg : UnaryOp::Not;
      e->operands.push_back(std::move(operand));
      return e;
    }
    return parse_postfix();
  }

  ExprPtr parse_postfix() {
    auto e = parse_primary();
    for (;;) {
      if (at(Tok::Dot)) {
        SourceLoc loc = take().loc;
        auto f = make(ExprKind::Field, loc);
        f->name = expect(Tok::Ident, "field name").text;
        f->operands.push_back(std::move(e));
        e = std::move(f);
      } else if (at(Tok::LBracket)) {
        SourceLoc loc = take().loc;
        auto ix = make(ExprKind::Index, loc);
        ix->operands.push_back(std::move(e));
        ix->operands.push_back(parse_expr());
        expect(Tok::RBracket, "']'");
        e = std::move(ix);
      } else {
        return e;
      }
    }
  }

  void parse_args(Expr& call) {
    expect(Tok::LParen, "'('");
    if (!at(Tok::RParen)) {
      do {
        call.operands.push_back(parse_expr());
      } while (accept(Tok::Comma));
    }
    expect(Tok::RParen, "')'");
  }

  ExprPtr parse_primary() {
    const Token& t = cur();
    switch (t.kind) {
      case Tok::Int: {
        auto e = make(ExprKind::Literal, t.loc);
        e->literal = Value::integer(static_cast<std::int64_t>(t.int_value));
        take();
        return e;
      }
      case Tok::Float: {
        auto e = make(ExprKind::Literal, t.loc);
        e->literal = Value::real(t.float_value);
        take();
        return e;
      }
      case Tok::String: {
        auto e = make(ExprKind::Literal, t.loc);
        e->literal = Value::string(t.text);
        take();
        return e;
      }
      case Tok::KwTrue:
      case Tok::KwFalse: {
        auto e = make(ExprKind::Literal, t.loc);
        e->literal = Value::boolean(t.kind == Tok::KwTrue);
        take();
        return e;
      }
      case Tok::KwNull: {
        auto e = make(ExprKind::Literal, t.loc);
        take();
        return e;
      }
      case Tok::Ident: {
        SourceLoc loc = t.loc;
        std::string name = take().text;
        if (at(Tok::ColonColon)) {
          take();
          auto e = make(ExprKind::Call, loc);
          e->call_kind = CallKind::Qualified;
          e->module = std::move(name);
          e->name = expect(Tok::Ident, "function name").text;
          parse_args(*e);
          return e;
        }
        if (at(Tok::LParen)) {
          auto e = make(ExprKind::Call, loc);
          e->call_kind = CallKind::Local;
          e->name = std::move(name);
          parse_args(*e);
          return e;
        }
        auto e = make(ExprKind::Var, loc);
        e->name = std::move(name);
        return e;
      }
      case Tok::At: {
        SourceLoc loc = take().loc;
        const Token& id = expect(Tok::Ident, "builtin name");
        auto b = builtin_from_name(id.text);
        if (!b) throw SyntaxError{id.loc, "unknown builtin '@" + id.text + "'"};
        auto e = make(ExprKind::Call, loc);
        e->call_kind = CallKind::Builtin;
        e->name = id.text;
        e->builtin = *b;
        parse_args(*e);
        return e;
      }
      case Tok::LParen: {
        take();
        auto e = parse_expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::LBracket: {
        auto e = make(ExprKind::ListLit, take().loc);
        if (!at(Tok::RBracket)) {
          do {
            e->operands.push_back(parse_expr());
          } while (accept(Tok::Comma));
        }
        expect(Tok::RBracket, "']'");
        return e;
      }
      case Tok::LBrace: {
        auto e = make(ExprKind::RecordLit, take().loc);
        if (!at(Tok::RBrace)) {
          do {
            const Token& key = cur();
            if (key.kind != Tok::Ident && key.kind != Tok::String) fail("field name");
            for (const auto& k : e->keys) {
              if (k == key.text) throw SyntaxError{key.loc, "duplicate field '" + key.text + "'"};
            }
            e->keys.push_back(take().text);
            expect(Tok::Colon, "':'");
            e->operands.push_back(parse_expr());
          } while (accept(Tok::Comma));
        }
        expect(Tok::RBrace, "'}'");
        return e;
      }
      default:
        fail("expression");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

void check_declarations(const ModuleAst& m, const std::string& origin, std::vector<Diagnostic>& diags) {
  std::set<std::string> seen;
  for (const auto& fn : m.functions) {
    if (!seen.insert(fn->name).second) {
      diags.push_back({origin, fn->loc, "duplicate function '" + fn->name + "'"});
    }
    std::set<std::string> params;
    for (const auto& p : fn->params) {
      if (!params.insert(p.name).second) {
        diags.push_back({origin, p.loc, "duplicate parameter '" + p.name + "' in '" + fn->name + "'"});
      }
    }
  }
}

// Constant evaluation for parse_literal: only literal forms are accepted.
std::optional<Value> fold_literal(const Expr& e, std::string_view file_root) {
  switch (e.kind) {
    case ExprKind::Literal:
      return e.literal;
    case ExprKind::ListLit: {
      List items;
      for (const auto& op : e.operands) {
        auto v = fold_literal(*op, file_root);
        if (!v) return std::nullopt;
        items.push_back(std::move(*v));
      }
      return Value::list(std::move(items));
    }
    case ExprKind::RecordLit: {
      Record fields;
      for (std::size_t i = 0; i < e.keys.size(); ++i) {
        auto v = fold_literal(*e.operands[i], file_root);
        if (!v) return std::nullopt;
        fields.emplace_back(e.keys[i], std::move(*v));
      }
      return Value::record(std::move(fields));
    }
    case ExprKind::Call:
      if (e.call_kind == CallKind::Builtin && e.builtin == Builtin::Open && e.operands.size() == 1 &&
          e.operands[0]->kind == ExprKind::Literal && e.operands[0]->literal.is(ValueKind::Str)) {
        return Value::file(FileRef{std::string(file_root), e.operands[0]->literal.as_str()});
      }
      return std::nullopt;
    case ExprKind::Binary:
      // NaN renders as (0.0 / 0.0).
      if (e.binary_op == BinaryOp::Div && e.operands[0]->kind == ExprKind::Literal &&
          e.operands[1]->kind == ExprKind::Literal && e.operands[0]->literal.is(ValueKind::Float) &&
          e.operands[1]->literal.is(ValueKind::Float) && e.operands[0]->literal.as_float() == 0.0 &&
          e.operands[1]->literal.as_float() == 0.0) {
        return Value::real(std::numeric_limits<double>::quiet_NaN());
      }
      return std::nullopt;
    default:
      return std::nullopt;
  }
}

}  // namespace

ParseResult parse_module(const SourceUnit& source) {
  ParseResult result;
  std::string origin = source.origin.empty() ? source.module_name + ".vex" : source.origin.string();
  if (!is_identifier(source.module_name) || is_keyword(source.module_name)) {
    result.diagnostics.push_back({origin, {}, "module name '" + source.module_name + "' is not an identifier"});
    return result;
  }
  try {
    Parser parser(Lexer(source.text).run());
    ModuleAst m = parser.parse_module(source.module_name);
    m.origin = origin;
    check_declarations(m, origin, result.diagnostics);
    if (result.diagnostics.empty()) result.module = std::move(m);
  } catch (const SyntaxError& err) {
    result.diagnostics.push_back({origin, err.loc, err.message});
  }
  return result;
}

std::optional<Value> parse_literal(std::string_view text, std::string_view file_root) {
  try {
    Parser parser(Lexer(text).run());
    auto e = parser.parse_standalone_expr();
    return fold_literal(*e, file_root);
  } catch (const SyntaxError&) {
    return std::nullopt;
  }
}

}  // namespace vexploit
