#pragma once

// Prefix S-expression encoding of types, expressions and commands, used by the
// JSON dumps. Bound variables keep their de Bruijn indices (#N) so the text is
// independent of any naming scheme.

#include <cctype>
#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "ivl/core_ir.hpp"
#include "ivl/printer.hpp"

namespace ivl::sexpr {

inline std::string of(const Type& t) {
  switch (t.kind) {
    case Type::Kind::Int: return "int";
    case Type::Kind::Bool: return "bool";
    case Type::Kind::Var: return "(tvar " + std::to_string(t.index) + ")";
    case Type::Kind::Con: {
      std::string out = "(" + t.name;
      for (const auto& a : t.args) out += " " + of(a);
      return out + ")";
    }
  }
  return "?";
}

inline std::string of(const Expr& e) {
  using K = ExprNode::Kind;
  switch (e->kind) {
    case K::Var: return e->name;
    case K::Bound: return "#" + std::to_string(e->index);
    case K::BoolLit: return e->bool_value ? "true" : "false";
    case K::IntLit: return std::to_string(e->int_value);
    case K::Binary:
      return std::string("(") + detail::binop_token(e->binop) + " " + of(e->args[0]) + " " + of(e->args[1]) + ")";
    case K::Unary: return std::string(e->unop == UnOp::Not ? "(! " : "(neg ") + of(e->args[0]) + ")";
    case K::Call: {
      std::string out = "(call " + e->name + " (";
      for (std::size_t i = 0; i < e->type_args.size(); ++i) out += (i ? " " : "") + of(e->type_args[i]);
      out += ")";
      for (const auto& a : e->args) out += " " + of(a);
      return out + ")";
    }
    case K::Old: return "(old " + of(e->args[0]) + ")";
    case K::Forall: return "(forall " + of(e->bound_type) + " " + of(e->args[0]) + ")";
    case K::Exists: return "(exists " + of(e->bound_type) + " " + of(e->args[0]) + ")";
    case K::ForallType: return "(forall-type " + of(e->args[0]) + ")";
    case K::ExistsType: return "(exists-type " + of(e->args[0]) + ")";
  }
  return "?";
}

inline std::string of(const Command& c) {
  switch (c.kind) {
    case Command::Kind::Assume: return "(assume " + of(c.expr) + ")";
    case Command::Kind::Assert: return "(assert " + of(c.expr) + ")";
    case Command::Kind::Assign: return "(assign " + c.var + " " + of(c.expr) + ")";
    case Command::Kind::Havoc: return "(havoc " + c.var + ")";
  }
  return "?";
}

/// Generic S-expression tree.
struct Node {
  std::string atom;  // non-empty for atoms
  std::vector<Node> items;
  bool is_list = false;
};

namespace detail {

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  Node read() {
    Node n = node();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw MalformedInput("s-expression: " + what + " at offset " + std::to_string(pos_) + " in '" +
                         std::string(text_) + "'");
  }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  Node node() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end");
    Node n;
    if (text_[pos_] == '(') {
      ++pos_;
      n.is_list = true;
      for (;;) {
        skip_ws();
        if (pos_ >= text_.size()) fail("unbalanced parenthesis");
        if (text_[pos_] == ')') {
          ++pos_;
          break;
        }
        n.items.push_back(node());
      }
      return n;
    }
    if (text_[pos_] == ')') fail("unexpected ')'");
    std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      ++pos_;
    }
    n.atom = std::string(text_.substr(start, pos_ - start));
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline bool parse_int(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

[[noreturn]] inline void bad(const std::string& what) { throw MalformedInput("s-expression: " + what); }

inline Type to_type(const Node& n) {
  if (!n.is_list) {
    if (n.atom == "int") return Type::integer();
    if (n.atom == "bool") return Type::boolean();
    bad("bad type atom '" + n.atom + "'");
  }
  if (n.items.empty() || n.items[0].is_list) bad("bad type");
  if (n.items[0].atom == "tvar") {
    std::int64_t i = 0;
    if (n.items.size() != 2 || !parse_int(n.items[1].atom, i) || i < 0) bad("bad tvar");
    return Type::var(static_cast<std::uint32_t>(i));
  }
  Type t = Type::con(n.items[0].atom);
  for (std::size_t i = 1; i < n.items.size(); ++i) t.args.push_back(to_type(n.items[i]));
  return t;
}

inline std::optional<BinOp> binop_of(const std::string& s) {
  static const std::pair<const char*, BinOp> table[] = {
      {"+", BinOp::Add},  {"-", BinOp::Sub},   {"*", BinOp::Mul},  {"div", BinOp::Div},  {"mod", BinOp::Mod},
      {"==", BinOp::Eq},  {"!=", BinOp::Neq},  {"<", BinOp::Lt},   {"<=", BinOp::Le},    {">", BinOp::Gt},
      {">=", BinOp::Ge},  {"&&", BinOp::And},  {"||", BinOp::Or},  {"==>", BinOp::Imp},  {"<==>", BinOp::Iff}};
  for (const auto& [tok, op] : table) {
    if (s == tok) return op;
  }
  return std::nullopt;
}

inline Expr to_expr(const Node& n) {
  if (!n.is_list) {
    const std::string& a = n.atom;
    if (a == "true") return ex::boolean(true);
    if (a == "false") return ex::boolean(false);
    std::int64_t v = 0;
    if (parse_int(a, v)) return ex::integer(v);
    if (!a.empty() && a[0] == '#') {
      if (!parse_int(a.substr(1), v) || v < 0) bad("bad bound index '" + a + "'");
      return ex::bound(static_cast<std::uint32_t>(v));
    }
    return ex::var(a);
  }
  if (n.items.empty() || n.items[0].is_list) bad("bad expression list");
  const std::string& head = n.items[0].atom;
  auto arity = [&](std::size_t k) {
    if (n.items.size() != k + 1) bad("wrong arity for '" + head + "'");
  };
  if (auto op = binop_of(head)) {
    arity(2);
    return ex::binary(*op, to_expr(n.items[1]), to_expr(n.items[2]));
  }
  if (head == "!") {
    arity(1);
    return ex::unary(UnOp::Not, to_expr(n.items[1]));
  }
  if (head == "neg") {
    arity(1);
    return ex::unary(UnOp::Neg, to_expr(n.items[1]));
  }
  if (head == "old") {
    arity(1);
    return ex::old(to_expr(n.items[1]));
  }
  if (head == "forall" || head == "exists") {
    arity(2);
    return ex::quant(head == "forall" ? ExprNode::Kind::Forall : ExprNode::Kind::Exists, to_type(n.items[1]),
                     to_expr(n.items[2]));
  }
  if (head == "forall-type" || head == "exists-type") {
    arity(1);
    return ex::quant(head == "forall-type" ? ExprNode::Kind::ForallType : ExprNode::Kind::ExistsType, Type{},
                     to_expr(n.items[1]));
  }
  if (head == "call") {
    if (n.items.size() < 3 || n.items[1].is_list || !n.items[2].is_list) bad("bad call");
    std::vector<Type> targs;
    for (const auto& t : n.items[2].items) targs.push_back(to_type(t));
    std::vector<Expr> args;
    for (std::size_t i = 3; i < n.items.size(); ++i) args.push_back(to_expr(n.items[i]));
    return ex::call(n.items[1].atom, std::move(targs), std::move(args));
  }
  bad("unknown operator '" + head + "'");
}

}  // namespace detail

inline Node read(std::string_view text) { return detail::Reader(text).read(); }

inline Type parse_type(std::string_view text) { return detail::to_type(read(text)); }
inline Expr parse_expr(std::string_view text) { return detail::to_expr(read(text)); }

inline Command parse_command(std::string_view text) {
  Node n = read(text);
  if (!n.is_list || n.items.empty() || n.items[0].is_list) detail::bad("bad command");
  const std::string& head = n.items[0].atom;
  if (head == "assume" && n.items.size() == 2) return Command::assume(detail::to_expr(n.items[1]));
  if (head == "assert" && n.items.size() == 2) return Command::assert_(detail::to_expr(n.items[1]));
  if (head == "assign" && n.items.size() == 3 && !n.items[1].is_list)
    return Command::assign(n.items[1].atom, detail::to_expr(n.items[2]));
  if (head == "havoc" && n.items.size() == 2 && !n.items[1].is_list) return Command::havoc(n.items[1].atom);
  detail::bad("bad command '" + std::string(text) + "'");
}

}  // namespace ivl::sexpr
