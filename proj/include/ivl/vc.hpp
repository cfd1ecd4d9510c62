#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ivl/core_ir.hpp"
#include "ivl/error.hpp"
#include "ivl/graph.hpp"
#include "ivl/passify.hpp"

namespace ivl {

enum class VcSort : std::uint8_t { V, T, Int, Bool };

inline const char* to_string(VcSort s) {
  switch (s) {
    case VcSort::V: return "V";
    case VcSort::T: return "T";
    case VcSort::Int: return "Int";
    case VcSort::Bool: return "Bool";
  }
  return "?";
}

struct VcNode;
using VcTerm = std::shared_ptr<const VcNode>;
using VcBinder = std::pair<std::string, VcSort>;

struct VcNode {
  enum class Kind : std::uint8_t { Sym, IntLit, BoolLit, App, Forall, Exists };
  Kind kind = Kind::Sym;
  std::string name;  // symbol, or applied function / operator
  std::int64_t int_value = 0;
  bool bool_value = false;
  std::vector<VcTerm> args;       // quantifiers: the body
  std::vector<VcBinder> binders;  // quantifiers only
};

namespace vc {

inline VcTerm make(VcNode n) { return std::make_shared<const VcNode>(std::move(n)); }
inline VcTerm sym(std::string name) {
  VcNode n;
  n.name = std::move(name);
  return make(std::move(n));
}
inline VcTerm integer(std::int64_t v) {
  VcNode n;
  n.kind = VcNode::Kind::IntLit;
  n.int_value = v;
  return make(std::move(n));
}
inline VcTerm boolean(bool b) {
  VcNode n;
  n.kind = VcNode::Kind::BoolLit;
  n.bool_value = b;
  return make(std::move(n));
}
inline VcTerm app(std::string f, std::vector<VcTerm> args) {
  if (args.empty()) return sym(std::move(f));
  VcNode n;
  n.kind = VcNode::Kind::App;
  n.name = std::move(f);
  n.args = std::move(args);
  return make(std::move(n));
}
inline VcTerm quant(bool universal, std::vector<VcBinder> binders, VcTerm body) {
  if (binders.empty()) return body;
  VcNode n;
  n.kind = universal ? VcNode::Kind::Forall : VcNode::Kind::Exists;
  n.binders = std::move(binders);
  n.args = {std::move(body)};
  return make(std::move(n));
}
inline VcTerm forall(std::vector<VcBinder> b, VcTerm body) { return quant(true, std::move(b), std::move(body)); }
inline VcTerm exists(std::vector<VcBinder> b, VcTerm body) { return quant(false, std::move(b), std::move(body)); }
inline VcTerm eq(VcTerm a, VcTerm b) { return app("=", {std::move(a), std::move(b)}); }
inline VcTerm not_(VcTerm a) { return app("not", {std::move(a)}); }
inline VcTerm and_(VcTerm a, VcTerm b) { return app("and", {std::move(a), std::move(b)}); }
inline VcTerm implies(VcTerm a, VcTerm b) { return app("=>", {std::move(a), std::move(b)}); }

inline VcTerm conjunction(std::vector<VcTerm> parts) {
  if (parts.empty()) return boolean(true);
  if (parts.size() == 1) return parts[0];
  return app("and", std::move(parts));
}

}  // namespace vc

inline std::string to_smt(const VcTerm& t) {
  std::ostringstream os;
  std::function<void(const VcTerm&)> go = [&](const VcTerm& n) {
    switch (n->kind) {
      case VcNode::Kind::Sym: os << n->name; return;
      case VcNode::Kind::IntLit:
        if (n->int_value < 0) {
          // Avoid negating INT64_MIN.
          os << "(- " << (static_cast<std::uint64_t>(0) - static_cast<std::uint64_t>(n->int_value)) << ")";
        } else {
          os << n->int_value;
        }
        return;
      case VcNode::Kind::BoolLit: os << (n->bool_value ? "true" : "false"); return;
      case VcNode::Kind::App:
        os << "(" << n->name;
        for (const auto& a : n->args) {
          os << " ";
          go(a);
        }
        os << ")";
        return;
      case VcNode::Kind::Forall:
      case VcNode::Kind::Exists:
        os << (n->kind == VcNode::Kind::Forall ? "(forall (" : "(exists (");
        for (std::size_t i = 0; i < n->binders.size(); ++i) {
          os << (i ? " " : "") << "(" << n->binders[i].first << " " << to_string(n->binders[i].second) << ")";
        }
        os << ") ";
        go(n->args[0]);
        os << ")";
        return;
    }
  };
  go(t);
  return os.str();
}

struct VcFun {
  std::string name;
  std::vector<VcSort> args;
  VcSort result = VcSort::Bool;
  bool carrier = false;  // constructor or selector of a carrier datatype
};

// Symbol naming.
inline std::string type_con_symbol(const std::string& c) { return "C@" + c; }
inline std::string projection_symbol(const std::string& c, std::size_t i) { return "P@" + c + "@" + std::to_string(i); }
inline std::string function_symbol(const std::string& f) { return "F@" + f; }
inline std::string value_symbol(const std::string& v) { return "x@" + v; }
inline std::string wp_symbol(BlockId b) { return "wp@B" + std::to_string(b); }

/// Encodes a type at sort T; `tvar` resolves type variables.
inline VcTerm encode_type(const Type& t, const std::function<VcTerm(std::uint32_t)>& tvar) {
  switch (t.kind) {
    case Type::Kind::Int: return vc::sym("TInt");
    case Type::Kind::Bool: return vc::sym("TBool");
    case Type::Kind::Var: return tvar(t.index);
    case Type::Kind::Con: {
      std::vector<VcTerm> args;
      for (const auto& a : t.args) args.push_back(encode_type(a, tvar));
      return vc::app(type_con_symbol(t.name), std::move(args));
    }
  }
  throw InternalError("unknown type kind");
}

/// Encodes a type whose variables are binders on `env` (innermost last).
inline VcTerm encode_type(const Type& t, const std::vector<VcTerm>& env = {}) {
  return encode_type(t, [&](std::uint32_t i) -> VcTerm {
    if (i >= env.size()) throw MalformedInput("unbound type variable tv" + std::to_string(i));
    return env[env.size() - 1 - i];
  });
}

inline VcSort natural_sort(const Type& t) {
  if (t.is_int()) return VcSort::Int;
  if (t.is_bool()) return VcSort::Bool;
  return VcSort::V;
}

inline VcTerm box(VcTerm e, const Type& t) {
  if (t.is_int()) return vc::app("int2v", {std::move(e)});
  if (t.is_bool()) return vc::app("bool2v", {std::move(e)});
  return e;
}

inline VcTerm unbox(VcTerm e, const Type& t) {
  if (t.is_int()) return vc::app("v2int", {std::move(e)});
  if (t.is_bool()) return vc::app("v2bool", {std::move(e)});
  return e;
}

/// Translates passive expressions into VC terms of their natural sort: int
/// and bool expressions are unboxed, values of other types live at sort V.
/// Variable names are looked up in `vars` and mapped to value symbols.
class ExprTranslator {
 public:
  ExprTranslator(const Program& prog, const VarContext& vars) : prog_(prog), vars_(vars) {}

  VcTerm translate(const Expr& e) {
    tenv_.clear();
    venv_.clear();
    return go(e);
  }

 private:
  using K = ExprNode::Kind;

  VcTerm go(const Expr& e) {
    switch (e->kind) {
      case K::Var: {
        const VarDecl* d = vars_.find(e->name);
        if (!d) throw InternalError("untyped symbol '" + e->name + "'");
        return unbox(vc::sym(value_symbol(e->name)), d->type);
      }
      case K::Bound: {
        if (e->index >= venv_.size()) throw InternalError("dangling bound variable");
        const auto& [name, t] = venv_[venv_.size() - 1 - e->index];
        return unbox(vc::sym(name), t);
      }
      case K::BoolLit: return vc::boolean(e->bool_value);
      case K::IntLit: return vc::integer(e->int_value);
      case K::Unary:
        if (e->unop == UnOp::Not) return vc::not_(go(e->args[0]));
        return vc::app("-", {go(e->args[0])});
      case K::Binary: return binary(e);
      case K::Call: {
        const FunctionDecl* f = prog_.find_function(e->name);
        if (!f) throw InternalError("unknown function " + e->name);
        if (e->type_args.size() != f->type_params) throw InternalError("call to " + e->name + " lacks type arguments");
        std::vector<VcTerm> args;
        for (const auto& t : e->type_args) args.push_back(encode_type(t, tenv_));
        for (std::size_t i = 0; i < e->args.size(); ++i) {
          Type at = substitute_types(f->arg_types[i], e->type_args);
          args.push_back(box(go(e->args[i]), at));
        }
        Type ret = substitute_types(f->result, e->type_args);
        return unbox(vc::app(function_symbol(e->name), std::move(args)), ret);
      }
      case K::Old: throw InternalError("old() reached the VC translation");
      case K::Forall:
      case K::Exists: {
        bool universal = e->kind == K::Forall;
        std::string name = "b@" + std::to_string(venv_.size());
        VcTerm guard = vc::eq(vc::app("typeof", {vc::sym(name)}), encode_type(e->bound_type, tenv_));
        venv_.emplace_back(name, e->bound_type);
        VcTerm body = go(e->args[0]);
        venv_.pop_back();
        return vc::quant(universal, {{name, VcSort::V}},
                         universal ? vc::implies(guard, body) : vc::and_(guard, body));
      }
      case K::ForallType:
      case K::ExistsType: {
        std::string name = "t@" + std::to_string(tenv_.size());
        tenv_.push_back(vc::sym(name));
        VcTerm body = go(e->args[0]);
        tenv_.pop_back();
        return vc::quant(e->kind == K::ForallType, {{name, VcSort::T}}, body);
      }
    }
    throw InternalError("unknown expression kind");
  }

  VcTerm binary(const Expr& e) {
    VcTerm a = go(e->args[0]);
    VcTerm b = go(e->args[1]);
    switch (e->binop) {
      case BinOp::Add: return vc::app("+", {a, b});
      case BinOp::Sub: return vc::app("-", {a, b});
      case BinOp::Mul: return vc::app("*", {a, b});
      case BinOp::Div:
        return vc::app("ite", {vc::eq(b, vc::integer(0)), vc::integer(0), vc::app("div", {a, b})});
      case BinOp::Mod: return vc::app("ite", {vc::eq(b, vc::integer(0)), a, vc::app("mod", {a, b})});
      case BinOp::Eq:
      case BinOp::Iff: return vc::eq(a, b);
      case BinOp::Neq: return vc::not_(vc::eq(a, b));
      case BinOp::Lt: return vc::app("<", {a, b});
      case BinOp::Le: return vc::app("<=", {a, b});
      case BinOp::Gt: return vc::app(">", {a, b});
      case BinOp::Ge: return vc::app(">=", {a, b});
      case BinOp::And: return vc::and_(a, b);
      case BinOp::Or: return vc::app("or", {a, b});
      case BinOp::Imp: return vc::implies(a, b);
    }
    throw InternalError("unknown operator");
  }

  const Program& prog_;
  const VarContext& vars_;
  std::vector<VcTerm> tenv_;                           // innermost last
  std::vector<std::pair<std::string, Type>> venv_;  // innermost last; types only pick the sort
};

inline VcTerm translate_expr(const Program& prog, const VarContext& vars, const Expr& e) {
  return ExprTranslator(prog, vars).translate(e);
}

/// Projection, distinctness and boxing axioms for the type encoding.
inline std::vector<VcTerm> type_encoding_axioms(const Program& prog) {
  std::vector<VcTerm> out;
  auto binders = [](const std::string& prefix, std::uint32_t n) {
    std::vector<VcBinder> b;
    for (std::uint32_t i = 0; i < n; ++i) b.emplace_back(prefix + std::to_string(i), VcSort::T);
    return b;
  };
  auto apply = [](const TypeConDecl& c, const std::vector<VcBinder>& b) {
    std::vector<VcTerm> args;
    for (const auto& [n, _] : b) args.push_back(vc::sym(n));
    return vc::app(type_con_symbol(c.name), std::move(args));
  };
  for (const auto& c : prog.types) {
    auto b = binders("a@", c.arity);
    for (std::uint32_t i = 0; i < c.arity; ++i) {
      out.push_back(vc::forall(b, vc::eq(vc::app(projection_symbol(c.name, i + 1), {apply(c, b)}), vc::sym(b[i].first))));
    }
  }
  out.push_back(vc::not_(vc::eq(vc::sym("TInt"), vc::sym("TBool"))));
  for (const auto& c : prog.types) {
    auto b = binders("a@", c.arity);
    out.push_back(vc::forall(b, vc::and_(vc::not_(vc::eq(apply(c, b), vc::sym("TInt"))),
                                         vc::not_(vc::eq(apply(c, b), vc::sym("TBool"))))));
  }
  for (std::size_t i = 0; i < prog.types.size(); ++i) {
    for (std::size_t j = i + 1; j < prog.types.size(); ++j) {
      auto bi = binders("a@", prog.types[i].arity);
      auto bj = binders("c@", prog.types[j].arity);
      std::vector<VcBinder> all = bi;
      all.insert(all.end(), bj.begin(), bj.end());
      out.push_back(vc::forall(all, vc::not_(vc::eq(apply(prog.types[i], bi), apply(prog.types[j], bj)))));
    }
  }
  out.push_back(vc::forall({{"i@0", VcSort::Int}},
                           vc::and_(vc::eq(vc::app("v2int", {vc::app("int2v", {vc::sym("i@0")})}), vc::sym("i@0")),
                                    vc::eq(vc::app("typeof", {vc::app("int2v", {vc::sym("i@0")})}), vc::sym("TInt")))));
  out.push_back(vc::forall(
      {{"p@0", VcSort::Bool}},
      vc::and_(vc::eq(vc::app("v2bool", {vc::app("bool2v", {vc::sym("p@0")})}), vc::sym("p@0")),
               vc::eq(vc::app("typeof", {vc::app("bool2v", {vc::sym("p@0")})}), vc::sym("TBool")))));
  return out;
}

/// `typeof(f(ts, xs)) = ret[ts]` for every argument, well-typed or not.
inline VcTerm function_typing_axiom(const FunctionDecl& f) {
  std::vector<VcBinder> b;
  std::vector<VcTerm> args, targs;
  for (std::uint32_t i = 0; i < f.type_params; ++i) {
    b.emplace_back("t@" + std::to_string(i), VcSort::T);
    targs.push_back(vc::sym(b.back().first));
  }
  args = targs;
  for (std::size_t i = 0; i < f.arg_types.size(); ++i) {
    b.emplace_back("a@" + std::to_string(i), VcSort::V);
    args.push_back(vc::sym(b.back().first));
  }
  VcTerm ret = encode_type(f.result, [&](std::uint32_t i) -> VcTerm {
    if (i >= targs.size()) throw MalformedInput("unbound type parameter in " + f.name);
    return targs[i];
  });
  return vc::forall(b, vc::eq(vc::app("typeof", {vc::app(function_symbol(f.name), std::move(args))}), ret));
}

struct VcMutation {
  bool assume_as_and = false;
};

struct VcOptions {
  /// Declare T and V as algebraic datatypes whose constructors and selectors
  /// are the type constructors, projections and boxing functions. Otherwise
  /// both are plain uninterpreted sorts.
  bool datatype_carriers = true;
  VcMutation mutation;
};

/// Block-named weakest preconditions in reverse topological order.
inline std::vector<std::pair<BlockId, VcTerm>> wp_blocks(const Program& prog, const PassiveResult& r,
                                                         VcMutation mut = {}) {
  auto order = graph::topological_order(r.target);
  if (!order) throw InternalError("wp_blocks requires an acyclic control flow graph");
  VarContext vars = r.version_context();
  ExprTranslator tr(prog, vars);
  std::vector<std::pair<BlockId, VcTerm>> out;
  for (auto it = order->rbegin(); it != order->rend(); ++it) {
    BlockId b = *it;
    std::vector<VcTerm> succ;
    for (BlockId s : r.target.succs(b)) succ.push_back(vc::sym(wp_symbol(s)));
    VcTerm q = vc::conjunction(std::move(succ));
    const auto& cmds = r.target.block(b).commands;
    for (auto c = cmds.rbegin(); c != cmds.rend(); ++c) {
      VcTerm e = tr.translate(c->expr);
      if (c->kind == Command::Kind::Assert) {
        q = vc::and_(e, q);
      } else if (c->kind == Command::Kind::Assume) {
        q = mut.assume_as_and ? vc::and_(e, q) : vc::implies(e, q);
      } else {
        throw InternalError("state-changing command in a passive block");
      }
    }
    out.emplace_back(b, q);
  }
  return out;
}

struct VcScript {
  bool datatype_carriers = true;
  std::vector<TypeConDecl> type_constructors;
  std::vector<VcFun> declarations;
  std::vector<std::pair<std::string, VcTerm>> assumptions;  // (section, formula)
  std::vector<std::pair<std::string, VcTerm>> definitions;  // named Bool constants, defined before use
  VcTerm goal;                                              // asserted negated

  [[nodiscard]] std::string render() const {
    std::ostringstream os;
    os << "(set-logic ALL)\n";
    if (datatype_carriers) {
      os << "(declare-datatypes ((T 0)) (((TInt) (TBool)";
      for (const auto& c : type_constructors) {
        os << " (" << type_con_symbol(c.name);
        for (std::uint32_t i = 0; i < c.arity; ++i) os << " (" << projection_symbol(c.name, i + 1) << " T)";
        os << ")";
      }
      os << ")))\n";
      os << "(declare-datatypes ((V 0)) (((int2v (v2int Int)) (bool2v (v2bool Bool)) (V@other (V@id Int)))))\n";
    } else {
      os << "(declare-sort V 0)\n(declare-sort T 0)\n";
    }
    for (const auto& f : declarations) {
      if (datatype_carriers && f.carrier) continue;
      os << "(declare-fun " << f.name << " (";
      for (std::size_t i = 0; i < f.args.size(); ++i) os << (i ? " " : "") << to_string(f.args[i]);
      os << ") " << to_string(f.result) << ")\n";
    }
    std::string section;
    for (const auto& [s, a] : assumptions) {
      if (s != section) {
        os << "; " << s << "\n";
        section = s;
      }
      os << "(assert " << to_smt(a) << ")\n";
    }
    if (!definitions.empty()) os << "; weakest preconditions\n";
    for (const auto& [n, d] : definitions) os << "(define-fun " << n << " () Bool " << to_smt(d) << ")\n";
    os << "(assert (not " << to_smt(goal) << "))\n(check-sat)\n";
    return os.str();
  }
};

namespace detail {

/// Sort checker over the fixed builtin operator set and the declared symbols.
class SortChecker {
 public:
  explicit SortChecker(const std::map<std::string, VcFun>& sig) : sig_(sig) {}

  VcSort check(const VcTerm& t) {
    switch (t->kind) {
      case VcNode::Kind::IntLit: return VcSort::Int;
      case VcNode::Kind::BoolLit: return VcSort::Bool;
      case VcNode::Kind::Sym: {
        for (auto it = bound_.rbegin(); it != bound_.rend(); ++it) {
          if (it->first == t->name) return it->second;
        }
        auto f = sig_.find(t->name);
        if (f == sig_.end() || !f->second.args.empty()) fail("unknown constant " + t->name);
        return f->second.result;
      }
      case VcNode::Kind::Forall:
      case VcNode::Kind::Exists: {
        for (const auto& b : t->binders) bound_.push_back(b);
        VcSort s = check(t->args[0]);
        bound_.resize(bound_.size() - t->binders.size());
        if (s != VcSort::Bool) fail("quantifier body is not Bool");
        return VcSort::Bool;
      }
      case VcNode::Kind::App: break;
    }
    std::vector<VcSort> a;
    for (const auto& x : t->args) a.push_back(check(x));
    const std::string& op = t->name;
    auto all = [&](VcSort s) {
      for (VcSort x : a) {
        if (x != s) fail("operand of " + op + " has sort " + to_string(x));
      }
    };
    if (op == "+" || op == "*" || op == "div" || op == "mod" || op == "-") {
      all(VcSort::Int);
      return VcSort::Int;
    }
    if (op == "<" || op == "<=" || op == ">" || op == ">=") {
      all(VcSort::Int);
      return VcSort::Bool;
    }
    if (op == "and" || op == "or" || op == "=>" || op == "not") {
      all(VcSort::Bool);
      return VcSort::Bool;
    }
    if (op == "=" || op == "distinct") {
      for (VcSort x : a) {
        if (x != a[0]) fail("mixed sorts under " + op);
      }
      return VcSort::Bool;
    }
    if (op == "ite") {
      if (a.size() != 3 || a[0] != VcSort::Bool || a[1] != a[2]) fail("ill-sorted ite");
      return a[1];
    }
    auto f = sig_.find(op);
    if (f == sig_.end()) fail("unknown function " + op);
    if (f->second.args != a) fail("ill-sorted application of " + op);
    return f->second.result;
  }

 private:
  [[noreturn]] static void fail(const std::string& m) { throw InternalError("ill-sorted VC term: " + m); }

  const std::map<std::string, VcFun>& sig_;
  std::vector<VcBinder> bound_;
};

}  // namespace detail

inline std::map<std::string, VcFun> signature(const VcScript& s) {
  std::map<std::string, VcFun> sig;
  for (const auto& f : s.declarations) sig[f.name] = f;
  for (const auto& [n, _] : s.definitions) sig[n] = VcFun{n, {}, VcSort::Bool};
  return sig;
}

/// Re-checks every formula of the script; throws InternalError on a sort error.
inline void check_sorts(const VcScript& s) {
  std::map<std::string, VcFun> sig;
  for (const auto& f : s.declarations) sig[f.name] = f;
  auto expect_bool = [&](const VcTerm& t) {
    if (detail::SortChecker(sig).check(t) != VcSort::Bool) throw InternalError("ill-sorted VC term: not a formula");
  };
  for (const auto& [_, a] : s.assumptions) expect_bool(a);
  for (const auto& [n, d] : s.definitions) {
    expect_bool(d);
    sig[n] = VcFun{n, {}, VcSort::Bool};
  }
  expect_bool(s.goal);
}

inline VcScript assemble_vc(const Program& prog, const PassiveResult& r, VcOptions opts = {}) {
  VcScript s;
  s.datatype_carriers = opts.datatype_carriers;
  s.type_constructors = prog.types;
  auto declare = [&](std::string n, std::vector<VcSort> a, VcSort res, bool carrier = false) {
    s.declarations.push_back(VcFun{std::move(n), std::move(a), res, carrier});
  };
  declare("typeof", {VcSort::V}, VcSort::T);
  declare("TInt", {}, VcSort::T, true);
  declare("TBool", {}, VcSort::T, true);
  for (const auto& c : prog.types) {
    declare(type_con_symbol(c.name), std::vector<VcSort>(c.arity, VcSort::T), VcSort::T, true);
    for (std::uint32_t i = 0; i < c.arity; ++i) {
      declare(projection_symbol(c.name, i + 1), {VcSort::T}, VcSort::T, true);
    }
  }
  declare("int2v", {VcSort::Int}, VcSort::V, true);
  declare("v2int", {VcSort::V}, VcSort::Int, true);
  declare("bool2v", {VcSort::Bool}, VcSort::V, true);
  declare("v2bool", {VcSort::V}, VcSort::Bool, true);
  for (const auto& f : prog.functions) {
    std::vector<VcSort> a(f.type_params, VcSort::T);
    a.insert(a.end(), f.arg_types.size(), VcSort::V);
    declare(function_symbol(f.name), std::move(a), VcSort::V);
  }
  std::vector<std::string> versions = r.live_versions();
  for (const auto& v : versions) declare(value_symbol(v), {}, VcSort::V);

  for (const auto& a : type_encoding_axioms(prog)) s.assumptions.emplace_back("type encoding", a);
  for (const auto& v : versions) {
    s.assumptions.emplace_back("version typing", vc::eq(vc::app("typeof", {vc::sym(value_symbol(v))}),
                                                        encode_type(r.versions.at(v).type)));
  }
  for (const auto& f : prog.functions) s.assumptions.emplace_back("function typing", function_typing_axiom(f));
  VarContext vctx = r.version_context();
  const VarRelation& entry = r.blocks.at(r.target.entry).entry;
  for (const auto& ax : prog.axioms) {
    s.assumptions.emplace_back("axioms", translate_expr(prog, vctx, rename_vars(ax, entry)));
  }
  for (auto& [b, wp] : wp_blocks(prog, r, opts.mutation)) s.definitions.emplace_back(wp_symbol(b), wp);
  s.goal = vc::sym(wp_symbol(r.target.entry));
  check_sorts(s);
  return s;
}

}  // namespace ivl
