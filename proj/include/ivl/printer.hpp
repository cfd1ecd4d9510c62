#pragma once

// Surface-syntax pretty printer. Output re-parses to the same AST for
// programs in canonical form (block ids 0..n-1 in print order, entry first).

#include <sstream>
#include <string>
#include <vector>

#include "ivl/core_ir.hpp"

namespace ivl {

namespace detail {

inline const char* binop_token(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "div";
    case BinOp::Mod: return "mod";
    case BinOp::Eq: return "==";
    case BinOp::Neq: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
    case BinOp::Imp: return "==>";
    case BinOp::Iff: return "<==>";
  }
  return "?";
}

inline int binop_precedence(BinOp op) {
  switch (op) {
    case BinOp::Iff: return 1;
    case BinOp::Imp: return 2;
    case BinOp::Or: return 3;
    case BinOp::And: return 4;
    case BinOp::Eq:
    case BinOp::Neq:
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge: return 5;
    case BinOp::Add:
    case BinOp::Sub: return 6;
    case BinOp::Mul:
    case BinOp::Div:
    case BinOp::Mod: return 7;
  }
  return 0;
}

constexpr int kUnaryPrecedence = 8;
constexpr int kAtomPrecedence = 9;

class SurfacePrinter {
 public:
  explicit SurfacePrinter(std::vector<std::string> type_names = {})
      : tnames_(std::move(type_names)) {}

  std::string type(const Type& t) const { return type_impl(t, false); }

  std::string expr(const Expr& e) { return expr_impl(e).first; }

 private:
  std::string type_impl(const Type& t, bool atomic) const {
    switch (t.kind) {
      case Type::Kind::Int: return "int";
      case Type::Kind::Bool: return "bool";
      case Type::Kind::Var:
        if (t.index < tnames_.size()) return tnames_[tnames_.size() - 1 - t.index];
        return "?" + std::to_string(t.index);
      case Type::Kind::Con: {
        std::string out = t.name;
        for (const auto& a : t.args) out += " " + type_impl(a, true);
        if (atomic && !t.args.empty()) return "(" + out + ")";
        return out;
      }
    }
    return "?";
  }

  static std::string paren(const std::pair<std::string, int>& p, bool need) {
    return need ? "(" + p.first + ")" : p.first;
  }

  std::pair<std::string, int> expr_impl(const Expr& e) {
    using K = ExprNode::Kind;
    switch (e->kind) {
      case K::Var: return {e->name, kAtomPrecedence};
      case K::Bound:
        if (e->index < vnames_.size()) return {vnames_[vnames_.size() - 1 - e->index], kAtomPrecedence};
        return {"#" + std::to_string(e->index), kAtomPrecedence};
      case K::BoolLit: return {e->bool_value ? "true" : "false", kAtomPrecedence};
      case K::IntLit:
        return {std::to_string(e->int_value), e->int_value < 0 ? kUnaryPrecedence : kAtomPrecedence};
      case K::Binary: {
        int p = binop_precedence(e->binop);
        auto l = expr_impl(e->args[0]);
        auto r = expr_impl(e->args[1]);
        bool right_assoc = e->binop == BinOp::Imp;
        bool non_assoc = p == 5 || e->binop == BinOp::Iff;
        bool lp = l.second < p || (l.second == p && (right_assoc || non_assoc));
        bool rp = r.second < p || (r.second == p && (!right_assoc || non_assoc));
        return {paren(l, lp) + " " + binop_token(e->binop) + " " + paren(r, rp), p};
      }
      case K::Unary: {
        auto a = expr_impl(e->args[0]);
        bool need = a.second < kUnaryPrecedence ||
                    (e->unop == UnOp::Neg && e->args[0]->kind == K::IntLit);
        return {std::string(e->unop == UnOp::Not ? "!" : "-") + paren(a, need), kUnaryPrecedence};
      }
      case K::Call: {
        std::string out = e->name + "(";
        for (std::size_t i = 0; i < e->args.size(); ++i) {
          if (i) out += ", ";
          out += expr_impl(e->args[i]).first;
        }
        return {out + ")", kAtomPrecedence};
      }
      case K::Old: return {"old(" + expr_impl(e->args[0]).first + ")", kAtomPrecedence};
      case K::Forall:
      case K::Exists: {
        std::string name = "bv" + std::to_string(vnames_.size());
        std::string head = std::string(e->kind == K::Forall ? "forall " : "exists ") + name + ": " +
                           type(e->bound_type) + " :: ";
        vnames_.push_back(name);
        auto body = expr_impl(e->args[0]);
        vnames_.pop_back();
        return {"(" + head + body.first + ")", kAtomPrecedence};
      }
      case K::ForallType:
      case K::ExistsType: {
        std::string name = "tv" + std::to_string(tnames_.size());
        std::string head = std::string(e->kind == K::ForallType ? "forall <" : "exists <") + name + "> :: ";
        tnames_.push_back(name);
        auto body = expr_impl(e->args[0]);
        tnames_.pop_back();
        return {"(" + head + body.first + ")", kAtomPrecedence};
      }
    }
    return {"?", kAtomPrecedence};
  }

  std::vector<std::string> tnames_;
  std::vector<std::string> vnames_;
};

}  // namespace detail

inline std::string to_string(const Type& t) { return detail::SurfacePrinter().type(t); }
inline std::string to_string(const Expr& e) { return detail::SurfacePrinter().expr(e); }

inline std::string to_string(const Command& c) {
  switch (c.kind) {
    case Command::Kind::Assume: return "assume " + to_string(c.expr) + ";";
    case Command::Kind::Assert: return "assert " + to_string(c.expr) + ";";
    case Command::Kind::Assign: return c.var + " := " + to_string(c.expr) + ";";
    case Command::Kind::Havoc: return "havoc " + c.var + ";";
  }
  return "?";
}

/// Block ids in print order: entry first, then ascending.
inline std::vector<BlockId> print_order(const Cfg& g) {
  std::vector<BlockId> order;
  if (g.blocks.count(g.entry)) order.push_back(g.entry);
  for (const auto& [id, _] : g.blocks) {
    if (id != g.entry) order.push_back(id);
  }
  return order;
}

inline void print_cfg(std::ostream& os, const Cfg& g, const std::string& indent = "  ") {
  for (BlockId id : print_order(g)) {
    const Block& b = g.block(id);
    os << indent << g.name_of(id) << ":\n";
    for (const auto& c : b.commands) os << indent << "  " << to_string(c) << "\n";
    const auto& succ = g.succs(id);
    if (succ.empty()) {
      os << indent << "  return;\n";
    } else {
      os << indent << "  goto ";
      for (std::size_t i = 0; i < succ.size(); ++i) os << (i ? ", " : "") << g.name_of(succ[i]);
      os << ";\n";
    }
  }
}

inline std::string to_string(const Cfg& g) {
  std::ostringstream os;
  print_cfg(os, g);
  return os.str();
}

namespace detail {
inline void print_vars(std::ostream& os, const std::vector<VarDecl>& vs) {
  for (std::size_t i = 0; i < vs.size(); ++i) os << (i ? ", " : "") << vs[i].name << ": " << to_string(vs[i].type);
}
}  // namespace detail

inline void print_procedure(std::ostream& os, const Procedure& p) {
  os << "procedure " << p.name << "(";
  detail::print_vars(os, p.params);
  os << ")";
  if (!p.returns.empty()) {
    os << " returns (";
    detail::print_vars(os, p.returns);
    os << ")";
  }
  os << "\n";
  if (!(p.pre->kind == ExprNode::Kind::BoolLit && p.pre->bool_value)) os << "  requires " << to_string(p.pre) << ";\n";
  if (!(p.post->kind == ExprNode::Kind::BoolLit && p.post->bool_value)) os << "  ensures " << to_string(p.post) << ";\n";
  os << "{\n";
  for (const auto& l : p.locals) os << "  var " << l.name << ": " << to_string(l.type) << ";\n";
  print_cfg(os, p.body);
  os << "}\n";
}

inline std::string to_string(const Program& prog) {
  std::ostringstream os;
  for (const auto& t : prog.types) os << "type " << t.name << " " << t.arity << ";\n";
  for (const auto& c : prog.constants) os << "const " << c.name << ": " << to_string(c.type) << ";\n";
  for (const auto& g : prog.globals) os << "var " << g.name << ": " << to_string(g.type) << ";\n";
  for (const auto& f : prog.functions) {
    std::vector<std::string> names = f.type_param_names;
    names.resize(f.type_params);
    for (std::uint32_t i = 0; i < f.type_params; ++i) {
      if (names[i].empty()) names[i] = "t" + std::to_string(i);
    }
    // TVar i is parameter i, the printer looks names up innermost-last.
    std::vector<std::string> lookup(names.rbegin(), names.rend());
    detail::SurfacePrinter sp(lookup);
    os << "function " << f.name;
    if (f.type_params) {
      os << "<";
      for (std::uint32_t i = 0; i < f.type_params; ++i) os << (i ? ", " : "") << names[i];
      os << ">";
    }
    os << "(";
    for (std::size_t i = 0; i < f.arg_types.size(); ++i) {
      if (i) os << ", ";
      if (i < f.arg_names.size() && !f.arg_names[i].empty()) os << f.arg_names[i] << ": ";
      os << sp.type(f.arg_types[i]);
    }
    os << "): " << sp.type(f.result) << ";\n";
  }
  for (const auto& a : prog.axioms) os << "axiom " << to_string(a) << ";\n";
  for (const auto& p : prog.procedures) {
    os << "\n";
    print_procedure(os, p);
  }
  return os.str();
}

}  // namespace ivl
