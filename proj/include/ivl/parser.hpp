#pragma once

// Lexer and recursive-descent parser for the textual IVL. Structured `if` and
// `while` statements are lowered to CFG blocks while parsing: a loop's `inv`
// clauses become the leading asserts of its head block.

#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ivl/core_ir.hpp"
#include "ivl/graph.hpp"

namespace ivl {

struct Token {
  enum class Kind : std::uint8_t { Ident, Number, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  Lexer(std::string_view text, std::string file) : text_(text), file_(std::move(file)) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    for (;;) {
      skip_trivia();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= text_.size()) {
        t.kind = Token::Kind::End;
        out.push_back(t);
        return out;
      }
      char c = text_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
          advance();
        }
        t.kind = Token::Kind::Ident;
        t.text = std::string(text_.substr(start, pos_ - start));
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) advance();
        t.kind = Token::Kind::Number;
        t.text = std::string(text_.substr(start, pos_ - start));
      } else {
        static const char* puncts[] = {"<==>", "==>", "::", ":=", "==", "!=", "<=", ">=", "&&", "||",
                                       "(",    ")",   "{",  "}",  "<",  ">",  ",",  ";",  ":",  "!",
                                       "+",    "-",   "*",  "%",  "="};
        bool matched = false;
        for (const char* p : puncts) {
          std::string_view pv(p);
          if (text_.substr(pos_, pv.size()) == pv) {
            for (std::size_t i = 0; i < pv.size(); ++i) advance();
            t.kind = Token::Kind::Punct;
            t.text = std::string(pv);
            matched = true;
            break;
          }
        }
        if (!matched) {
          throw SyntaxError(SourceSpan{file_, line_, col_, line_, col_},
                            std::string("unexpected character '") + c + "'");
        }
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_trivia() {
    for (;;) {
      while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) advance();
      if (text_.substr(pos_, 2) == "//") {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (text_.substr(pos_, 2) == "/*") {
        advance();
        advance();
        while (pos_ < text_.size() && text_.substr(pos_, 2) != "*/") advance();
        if (pos_ < text_.size()) {
          advance();
          advance();
        }
      } else {
        return;
      }
    }
  }

  std::string_view text_;
  std::string file_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  Parser(std::string_view text, std::string file, std::vector<Diagnostic>* warnings)
      : file_(std::move(file)), warnings_(warnings) {
    tokens_ = Lexer(text, file_).tokenize();
  }

  Program parse_program() {
    Program prog;
    std::set<std::string> type_names, fun_names, var_names, proc_names;
    while (!at_end()) {
      SourceSpan sp = span();
      if (accept("type")) {
        TypeConDecl d;
        d.span = sp;
        d.name = ident("type constructor name");
        d.arity = static_cast<std::uint32_t>(number("type constructor arity"));
        expect(";");
        unique(type_names, d.name, sp);
        prog.types.push_back(std::move(d));
      } else if (accept("function")) {
        FunctionDecl f = function_decl();
        f.span = sp;
        unique(fun_names, f.name, sp);
        prog.functions.push_back(std::move(f));
      } else if (accept("axiom")) {
        prog.axioms.push_back(expr());
        expect(";");
      } else if (accept("var") || accept("const")) {
        bool is_const = tokens_[pos_ - 1].text == "const";
        VarDecl d;
        d.span = sp;
        d.name = ident("variable name");
        expect(":");
        d.type = type();
        d.is_mutable = !is_const;
        expect(";");
        unique(var_names, d.name, sp);
        (is_const ? prog.constants : prog.globals).push_back(std::move(d));
      } else if (accept("procedure")) {
        Procedure p = procedure();
        p.span = sp;
        unique(proc_names, p.name, sp);
        prog.procedures.push_back(std::move(p));
      } else {
        fail("expected a declaration");
      }
    }
    return prog;
  }

 private:
  // -- token helpers --------------------------------------------------------

  const Token& peek(std::size_t k = 0) const { return tokens_[std::min(pos_ + k, tokens_.size() - 1)]; }
  bool at_end() const { return peek().kind == Token::Kind::End; }
  SourceSpan span() const {
    const Token& t = peek();
    return SourceSpan{file_, t.line, t.col, t.line, t.col + static_cast<int>(t.text.size())};
  }
  bool is(std::string_view text, std::size_t k = 0) const {
    const Token& t = peek(k);
    return t.kind != Token::Kind::End && t.kind != Token::Kind::Number && t.text == text;
  }
  bool accept(std::string_view text) {
    if (!is(text)) return false;
    ++pos_;
    return true;
  }
  void expect(std::string_view text) {
    if (!accept(text)) fail("expected '" + std::string(text) + "'");
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    std::string found = t.kind == Token::Kind::End ? "end of input" : "'" + t.text + "'";
    throw SyntaxError(span(), msg + ", found " + found);
  }
  static bool is_keyword(const std::string& s) {
    static const std::set<std::string> kw = {
        "type",   "function", "axiom",  "var",    "const",  "procedure", "returns", "requires",
        "ensures", "if",     "else",    "while",  "inv",    "invariant", "assume",  "assert",
        "havoc",  "goto",     "return", "true",   "false",  "old",       "forall",  "exists",
        "div",    "mod",      "int",    "bool"};
    return kw.count(s) != 0;
  }
  std::string ident(const char* what) {
    const Token& t = peek();
    if (t.kind != Token::Kind::Ident || is_keyword(t.text)) fail(std::string("expected ") + what);
    ++pos_;
    return t.text;
  }
  std::int64_t number(const char* what) {
    const Token& t = peek();
    if (t.kind != Token::Kind::Number) fail(std::string("expected ") + what);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc()) fail("integer literal out of range");
    ++pos_;
    return v;
  }
  void unique(std::set<std::string>& names, const std::string& n, const SourceSpan& sp) {
    if (!names.insert(n).second) throw SyntaxError(sp, "duplicate declaration of '" + n + "'");
  }

  // -- types ----------------------------------------------------------------

  std::optional<std::uint32_t> type_var_index(const std::string& n) const {
    for (std::size_t i = type_scope_.size(); i-- > 0;) {
      if (type_scope_[i] == n) return static_cast<std::uint32_t>(type_scope_.size() - 1 - i);
    }
    return std::nullopt;
  }

  bool starts_atomic_type() const {
    const Token& t = peek();
    if (t.kind == Token::Kind::Punct) return t.text == "(";
    if (t.kind != Token::Kind::Ident) return false;
    return t.text == "int" || t.text == "bool" || !is_keyword(t.text);
  }

  Type atomic_type() {
    if (accept("int")) return Type::integer();
    if (accept("bool")) return Type::boolean();
    if (accept("(")) {
      Type t = type();
      expect(")");
      return t;
    }
    std::string n = ident("type");
    if (auto i = type_var_index(n)) return Type::var(*i);
    return Type::con(n);
  }

  Type type() {
    if (is("int") || is("bool") || is("(")) return atomic_type();
    std::string n = ident("type");
    if (auto i = type_var_index(n)) return Type::var(*i);
    Type t = Type::con(n);
    while (starts_atomic_type()) t.args.push_back(atomic_type());
    return t;
  }

  // -- declarations ---------------------------------------------------------

  FunctionDecl function_decl() {
    FunctionDecl f;
    f.name = ident("function name");
    if (accept("<")) {
      do {
        f.type_param_names.push_back(ident("type parameter"));
      } while (accept(","));
      expect(">");
    }
    f.type_params = static_cast<std::uint32_t>(f.type_param_names.size());
    auto saved = type_scope_;
    type_scope_.assign(f.type_param_names.rbegin(), f.type_param_names.rend());
    expect("(");
    if (!is(")")) {
      do {
        std::string name;
        if (peek().kind == Token::Kind::Ident && is(":", 1)) {
          name = ident("argument name");
          expect(":");
        }
        f.arg_names.push_back(name);
        f.arg_types.push_back(type());
      } while (accept(","));
    }
    expect(")");
    expect(":");
    f.result = type();
    expect(";");
    type_scope_ = saved;
    return f;
  }

  std::vector<VarDecl> typed_vars() {
    std::vector<VarDecl> out;
    if (is(")")) return out;
    do {
      VarDecl d;
      d.span = span();
      d.name = ident("variable name");
      expect(":");
      d.type = type();
      out.push_back(std::move(d));
    } while (accept(","));
    return out;
  }

  Procedure procedure() {
    Procedure p;
    p.name = ident("procedure name");
    expect("(");
    p.params = typed_vars();
    for (auto& v : p.params) v.is_mutable = false;
    expect(")");
    if (accept("returns")) {
      expect("(");
      p.returns = typed_vars();
      expect(")");
    }
    std::vector<Expr> pres, posts;
    for (;;) {
      if (accept("requires")) {
        pres.push_back(expr());
        expect(";");
      } else if (accept("ensures")) {
        posts.push_back(expr());
        expect(";");
      } else {
        break;
      }
    }
    p.pre = ex::conjunction(pres);
    p.post = ex::conjunction(posts);
    expect("{");
    std::set<std::string> local_names;
    for (const auto& v : p.params) unique(local_names, v.name, v.span);
    for (const auto& v : p.returns) unique(local_names, v.name, v.span);
    while (is("var")) {
      ++pos_;
      VarDecl d;
      d.span = span();
      d.name = ident("variable name");
      expect(":");
      d.type = type();
      expect(";");
      unique(local_names, d.name, d.span);
      p.locals.push_back(std::move(d));
    }
    p.body = body();
    return p;
  }

  // -- bodies and CFG lowering ----------------------------------------------

  BlockId new_block(std::string label = {}) {
    BlockId id = next_block_++;
    Block b;
    b.id = id;
    b.label = label.empty() ? "B" + std::to_string(id) : std::move(label);
    cfg_.blocks[id] = std::move(b);
    cfg_.successors[id];
    return id;
  }
  void edge(BlockId from, BlockId to) { cfg_.successors[from].push_back(to); }
  void emit(BlockId b, Command c) { cfg_.blocks[b].commands.push_back(std::move(c)); }

  bool labeled_body() const { return peek().kind == Token::Kind::Ident && !is_keyword(peek().text) && is(":", 1); }

  Cfg body() {
    cfg_ = Cfg{};
    next_block_ = 0;
    if (labeled_body()) {
      // Pre-assign ids to labels in order of appearance.
      std::map<std::string, BlockId> labels;
      std::vector<std::pair<std::string, SourceSpan>> goto_refs;
      std::size_t save = pos_;
      int depth = 0;
      for (std::size_t i = pos_; i < tokens_.size(); ++i) {
        const Token& t = tokens_[i];
        if (t.kind == Token::Kind::End) break;
        if (t.text == "{") ++depth;
        if (t.text == "}") {
          if (depth == 0) break;
          --depth;
        }
        bool after_sep = i == save || tokens_[i - 1].text == ";" || tokens_[i - 1].text == "}" ||
                         tokens_[i - 1].text == "{";
        if (depth == 0 && after_sep && t.kind == Token::Kind::Ident && !is_keyword(t.text) && i + 1 < tokens_.size() &&
            tokens_[i + 1].text == ":") {
          if (labels.count(t.text)) {
            throw SyntaxError(SourceSpan{file_, t.line, t.col, t.line, t.col}, "duplicate label '" + t.text + "'");
          }
          labels[t.text] = new_block(t.text);
        }
      }
      if (labels.empty()) fail("expected a labeled block");
      cfg_.entry = labels.begin()->second;
      for (const auto& [name, id] : labels) {
        if (id < cfg_.entry) cfg_.entry = id;
      }
      while (!is("}")) {
        std::string label = ident("block label");
        expect(":");
        BlockId cur = labels.at(label);
        while (!is("goto") && !is("return")) {
          if (is("}") || at_end()) fail("expected 'goto' or 'return'");
          cur = stmt(cur);
        }
        if (accept("goto")) {
          do {
            SourceSpan sp = span();
            std::string target = ident("label");
            auto it = labels.find(target);
            if (it == labels.end()) throw SyntaxError(sp, "unknown label '" + target + "'");
            edge(cur, it->second);
          } while (accept(","));
        } else {
          expect("return");
        }
        expect(";");
      }
      expect("}");
      // The entry may not be a jump target: CFG-to-DAG moves invariants into
      // predecessors and an entry loop head would lose its initial check.
      auto preds = cfg_.predecessors();
      if (!preds[cfg_.entry].empty()) {
        BlockId fresh = new_block();
        edge(fresh, cfg_.entry);
        cfg_.entry = fresh;
      }
    } else {
      BlockId cur = new_block();
      cfg_.entry = cur;
      while (!is("}")) {
        if (at_end()) fail("expected '}'");
        cur = stmt(cur);
      }
      expect("}");
    }
    auto removed = graph::prune_unreachable(cfg_);
    if (warnings_) {
      for (BlockId id : removed) {
        warnings_->push_back(Diagnostic{SourceSpan{file_}, "unreachable block " + std::to_string(id) + " removed"});
      }
    }
    return cfg_;
  }

  /// Lowers one statement starting in block `cur`; returns the block where
  /// control continues.
  BlockId stmt(BlockId cur) {
    SourceSpan sp = span();
    if (accept("assume")) {
      Command c = Command::assume(expr());
      c.span = sp;
      expect(";");
      emit(cur, std::move(c));
      return cur;
    }
    if (accept("assert")) {
      Command c = Command::assert_(expr());
      c.span = sp;
      expect(";");
      emit(cur, std::move(c));
      return cur;
    }
    if (accept("havoc")) {
      do {
        Command c = Command::havoc(ident("variable"));
        c.span = sp;
        emit(cur, std::move(c));
      } while (accept(","));
      expect(";");
      return cur;
    }
    if (accept("if")) return if_stmt(cur);
    if (accept("while")) {
      expect("(");
      std::optional<Expr> cond = guard();
      expect(")");
      std::vector<Command> invs;
      while (accept("inv") || accept("invariant")) {
        SourceSpan isp = span();
        Command c = Command::assert_(expr());
        c.span = isp;
        invs.push_back(std::move(c));
        expect(";");
      }
      BlockId head = new_block();
      edge(cur, head);
      for (auto& c : invs) emit(head, std::move(c));
      BlockId body = new_block();
      edge(head, body);
      if (cond) emit(body, Command::assume(*cond));
      BlockId end = block_stmts(body);
      edge(end, head);
      BlockId exit = new_block();
      edge(head, exit);
      if (cond) emit(exit, Command::assume(ex::not_(*cond)));
      return exit;
    }
    if (peek().kind == Token::Kind::Ident && is(":=", 1)) {
      std::string x = ident("variable");
      expect(":=");
      Command c = Command::assign(x, expr());
      c.span = sp;
      expect(";");
      emit(cur, std::move(c));
      return cur;
    }
    fail("expected a statement");
  }

  std::optional<Expr> guard() {
    if (accept("*")) return std::nullopt;
    return expr();
  }

  BlockId if_stmt(BlockId cur) {
    expect("(");
    std::optional<Expr> cond = guard();
    expect(")");
    BlockId then_b = new_block();
    edge(cur, then_b);
    if (cond) emit(then_b, Command::assume(*cond));
    BlockId then_end = block_stmts(then_b);
    BlockId else_b = new_block();
    edge(cur, else_b);
    if (cond) emit(else_b, Command::assume(ex::not_(*cond)));
    BlockId else_end = else_b;
    if (accept("else")) {
      if (accept("if")) {
        else_end = if_stmt(else_b);
      } else {
        else_end = block_stmts(else_b);
      }
    }
    BlockId join = new_block();
    edge(then_end, join);
    edge(else_end, join);
    return join;
  }

  BlockId block_stmts(BlockId cur) {
    expect("{");
    while (!accept("}")) {
      if (at_end()) fail("expected '}'");
      cur = stmt(cur);
    }
    return cur;
  }

  // -- expressions ----------------------------------------------------------

  Expr expr() { return iff(); }

  Expr iff() {
    Expr lhs = imp();
    while (is("<==>")) {
      SourceSpan sp = span();
      ++pos_;
      lhs = ex::binary(BinOp::Iff, lhs, imp(), sp);
    }
    return lhs;
  }
  Expr imp() {
    Expr lhs = disj();
    if (is("==>")) {
      SourceSpan sp = span();
      ++pos_;
      return ex::binary(BinOp::Imp, lhs, imp(), sp);
    }
    return lhs;
  }
  Expr disj() {
    Expr lhs = conj();
    while (is("||")) {
      SourceSpan sp = span();
      ++pos_;
      lhs = ex::binary(BinOp::Or, lhs, conj(), sp);
    }
    return lhs;
  }
  Expr conj() {
    Expr lhs = cmp();
    while (is("&&")) {
      SourceSpan sp = span();
      ++pos_;
      lhs = ex::binary(BinOp::And, lhs, cmp(), sp);
    }
    return lhs;
  }
  Expr cmp() {
    Expr lhs = add();
    static const std::pair<const char*, BinOp> ops[] = {{"==", BinOp::Eq}, {"!=", BinOp::Neq}, {"<=", BinOp::Le},
                                                        {">=", BinOp::Ge}, {"<", BinOp::Lt},   {">", BinOp::Gt},
                                                        {"=", BinOp::Eq}};
    for (const auto& [tok, op] : ops) {
      if (is(tok)) {
        SourceSpan sp = span();
        ++pos_;
        return ex::binary(op, lhs, add(), sp);
      }
    }
    return lhs;
  }
  Expr add() {
    Expr lhs = mul();
    for (;;) {
      SourceSpan sp = span();
      if (accept("+")) {
        lhs = ex::binary(BinOp::Add, lhs, mul(), sp);
      } else if (accept("-")) {
        lhs = ex::binary(BinOp::Sub, lhs, mul(), sp);
      } else {
        return lhs;
      }
    }
  }
  Expr mul() {
    Expr lhs = unary();
    for (;;) {
      SourceSpan sp = span();
      if (accept("*")) {
        lhs = ex::binary(BinOp::Mul, lhs, unary(), sp);
      } else if (accept("div")) {
        lhs = ex::binary(BinOp::Div, lhs, unary(), sp);
      } else if (accept("mod") || accept("%")) {
        lhs = ex::binary(BinOp::Mod, lhs, unary(), sp);
      } else {
        return lhs;
      }
    }
  }
  Expr unary() {
    SourceSpan sp = span();
    if (accept("!")) return ex::unary(UnOp::Not, unary(), sp);
    if (accept("-")) {
      if (peek().kind == Token::Kind::Number) {
        const Token& t = peek();
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc()) fail("integer literal out of range");
        ++pos_;
        return ex::integer(-v);
      }
      return ex::unary(UnOp::Neg, unary(), sp);
    }
    return atom();
  }

  Expr atom() {
    SourceSpan sp = span();
    const Token& t = peek();
    if (t.kind == Token::Kind::Number) return ex::integer(number("integer"));
    if (accept("true")) return ex::boolean(true);
    if (accept("false")) return ex::boolean(false);
    if (accept("(")) {
      Expr e = expr();
      expect(")");
      return e;
    }
    if (accept("old")) {
      expect("(");
      Expr e = expr();
      expect(")");
      return ex::old(e, sp);
    }
    if (is("forall") || is("exists")) return quantifier();
    std::string n = ident("expression");
    if (accept("(")) {
      std::vector<Expr> args;
      if (!is(")")) {
        do {
          args.push_back(expr());
        } while (accept(","));
      }
      expect(")");
      return ex::call(n, {}, std::move(args), sp);
    }
    for (std::size_t i = value_scope_.size(); i-- > 0;) {
      if (value_scope_[i] == n) return ex::bound(static_cast<std::uint32_t>(value_scope_.size() - 1 - i));
    }
    return ex::var(n, sp);
  }

  Expr quantifier() {
    SourceSpan sp = span();
    bool universal = accept("forall");
    if (!universal) expect("exists");
    std::vector<std::string> tvars;
    if (accept("<")) {
      do {
        tvars.push_back(ident("type variable"));
      } while (accept(","));
      expect(">");
    }
    auto saved_types = type_scope_;
    auto saved_values = value_scope_;
    for (const auto& tv : tvars) type_scope_.push_back(tv);
    std::vector<Type> bound_types;
    if (!is("::")) {
      do {
        std::string name = ident("bound variable");
        expect(":");
        bound_types.push_back(type());
        value_scope_.push_back(name);
      } while (accept(","));
    }
    if (tvars.empty() && bound_types.empty()) fail("quantifier binds nothing");
    expect("::");
    Expr body = expr();
    type_scope_ = saved_types;
    value_scope_ = saved_values;
    for (std::size_t i = bound_types.size(); i-- > 0;) {
      body = ex::quant(universal ? ExprNode::Kind::Forall : ExprNode::Kind::Exists, bound_types[i], body, sp);
    }
    for (std::size_t i = tvars.size(); i-- > 0;) {
      body = ex::quant(universal ? ExprNode::Kind::ForallType : ExprNode::Kind::ExistsType, Type{}, body, sp);
    }
    return body;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::string file_;
  std::vector<Diagnostic>* warnings_;
  std::vector<std::string> type_scope_;   // innermost last
  std::vector<std::string> value_scope_;  // innermost last
  Cfg cfg_;
  BlockId next_block_ = 0;
};

/// Parses a whole program. Unreachable blocks are pruned and reported through
/// `warnings` when given.
inline Program parse_program(std::string_view text, const std::string& file = {},
                             std::vector<Diagnostic>* warnings = nullptr) {
  return Parser(text, file, warnings).parse_program();
}

}  // namespace ivl
