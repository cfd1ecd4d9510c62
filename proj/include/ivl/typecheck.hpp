#pragma once

// Type checking with first-order unification for polymorphic function calls.
// Checked programs carry explicit instantiations on every call node.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ivl/core_ir.hpp"
#include "ivl/printer.hpp"

namespace ivl {

struct TypecheckOptions {
  /// When false every call must already carry its instantiation.
  bool infer = true;
};

namespace detail {

class TypeChecker {
 public:
  TypeChecker(const Program& p, TypecheckOptions opts) : prog_(p), opts_(opts) {}

  Program run() {
    Program out = prog_;
    for (const auto& f : prog_.functions) {
      for (const auto& t : f.arg_types) well_formed(t, f.type_params, f.span, "function " + f.name);
      well_formed(f.result, f.type_params, f.span, "function " + f.name);
    }
    for (const auto& v : prog_.constants) well_formed(v.type, 0, v.span, "constant " + v.name);
    for (const auto& v : prog_.globals) well_formed(v.type, 0, v.span, "variable " + v.name);

    VarContext gctx = global_context(prog_);
    for (auto& a : out.axioms) {
      Scope sc{&gctx, false, true, 0, {}};
      a = check_bool(a, sc, a->span, "axiom");
    }
    for (auto& proc : out.procedures) check_procedure(proc);
    if (!diags_.empty()) throw TypeError(diags_);
    return out;
  }

 private:
  static constexpr std::uint32_t kMeta = 1u << 30;

  struct Scope {
    const VarContext* ctx;
    bool allow_old;
    bool constants_only;
    std::uint32_t depth = 0;
    std::vector<Type> bound;  // innermost last, relative to `depth`
  };

  struct Abort {};

  // -- diagnostics ----------------------------------------------------------

  void report(const SourceSpan& sp, std::string msg) { diags_.push_back(Diagnostic{sp, std::move(msg)}); }
  [[noreturn]] void abort(const SourceSpan& sp, std::string msg) {
    report(sp, std::move(msg));
    throw Abort{};
  }
  const SourceSpan& pick(const SourceSpan& a) const { return a.start_line ? a : current_span_; }

  std::string show(const Type& t) const {
    Type r = resolve(t);
    std::string s;
    if (r.is_var() && r.index >= kMeta) return "?" + std::to_string(r.index - kMeta);
    return to_string(r);
  }

  // -- well-formedness of declared types ------------------------------------

  bool well_formed(const Type& t, std::uint32_t depth, const SourceSpan& sp, const std::string& where) {
    switch (t.kind) {
      case Type::Kind::Int:
      case Type::Kind::Bool:
        return true;
      case Type::Kind::Var:
        if (t.index >= depth) {
          report(sp, where + ": unbound type variable");
          return false;
        }
        return true;
      case Type::Kind::Con: {
        const TypeConDecl* d = prog_.find_type(t.name);
        if (!d) {
          report(sp, where + ": unknown type '" + t.name + "'");
          return false;
        }
        if (d->arity != t.args.size()) {
          report(sp, where + ": type constructor '" + t.name + "' expects " + std::to_string(d->arity) +
                         " argument(s), got " + std::to_string(t.args.size()));
          return false;
        }
        bool ok = true;
        for (const auto& a : t.args) ok = well_formed(a, depth, sp, where) && ok;
        return ok;
      }
    }
    return true;
  }

  // -- unification ----------------------------------------------------------

  Type resolve(const Type& t) const {
    if (t.is_var() && t.index >= kMeta) {
      auto it = subst_.find(t.index);
      return it == subst_.end() ? t : resolve(it->second);
    }
    if (!t.is_con()) return t;
    Type out = Type::con(t.name);
    for (const auto& a : t.args) out.args.push_back(resolve(a));
    return out;
  }

  bool occurs(std::uint32_t meta, const Type& t) const {
    if (t.is_var()) return t.index == meta;
    for (const auto& a : t.args) {
      if (occurs(meta, a)) return true;
    }
    return false;
  }

  bool unify(const Type& a0, const Type& b0) {
    Type a = resolve(a0), b = resolve(b0);
    if (a.is_var() && a.index >= kMeta) {
      if (b.is_var() && b.index == a.index) return true;
      if (occurs(a.index, b)) return false;
      subst_[a.index] = b;
      return true;
    }
    if (b.is_var() && b.index >= kMeta) return unify(b, a);
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Type::Kind::Int:
      case Type::Kind::Bool:
        return true;
      case Type::Kind::Var:
        return a.index == b.index;
      case Type::Kind::Con:
        if (a.name != b.name || a.args.size() != b.args.size()) return false;
        for (std::size_t i = 0; i < a.args.size(); ++i) {
          if (!unify(a.args[i], b.args[i])) return false;
        }
        return true;
    }
    return false;
  }

  void expect(const Type& want, const Type& got, const SourceSpan& sp, const std::string& what) {
    if (!unify(want, got)) abort(pick(sp), what + ": expected " + show(want) + ", found " + show(got));
  }

  // -- expressions ----------------------------------------------------------

  std::pair<Expr, Type> infer(const Expr& e, Scope& sc) {
    using K = ExprNode::Kind;
    switch (e->kind) {
      case K::Var: {
        const VarDecl* d = sc.ctx->find(e->name);
        if (!d) abort(pick(e->span), "unbound name '" + e->name + "'");
        if (sc.constants_only && !sc.ctx->is_constant(e->name)) {
          abort(pick(e->span), "axioms may only mention constants, found '" + e->name + "'");
        }
        return {e, shift_type(d->type, sc.depth)};
      }
      case K::Bound:
        if (e->index >= sc.bound.size()) abort(pick(e->span), "dangling bound variable");
        return {e, sc.bound[sc.bound.size() - 1 - e->index]};
      case K::BoolLit:
        return {e, Type::boolean()};
      case K::IntLit:
        return {e, Type::integer()};
      case K::Binary: {
        auto [l, lt] = infer(e->args[0], sc);
        auto [r, rt] = infer(e->args[1], sc);
        Type result = Type::boolean();
        std::string op = std::string("operator ") + binop_token(e->binop);
        if (is_arith(e->binop) || is_comparison(e->binop)) {
          expect(Type::integer(), lt, e->args[0]->span.start_line ? e->args[0]->span : e->span, op);
          expect(Type::integer(), rt, e->args[1]->span.start_line ? e->args[1]->span : e->span, op);
          if (is_arith(e->binop)) result = Type::integer();
        } else if (is_logical(e->binop)) {
          expect(Type::boolean(), lt, e->span, op);
          expect(Type::boolean(), rt, e->span, op);
        } else {
          if (!unify(lt, rt)) {
            abort(pick(e->span), op + ": operand types differ (" + show(lt) + " vs " + show(rt) + ")");
          }
        }
        return {rebuild(e, {l, r}), result};
      }
      case K::Unary: {
        auto [a, at] = infer(e->args[0], sc);
        Type want = e->unop == UnOp::Not ? Type::boolean() : Type::integer();
        expect(want, at, e->span, e->unop == UnOp::Not ? "operator !" : "negation");
        return {rebuild(e, {a}), want};
      }
      case K::Call: {
        const FunctionDecl* f = prog_.find_function(e->name);
        if (!f) abort(pick(e->span), "unknown function '" + e->name + "'");
        if (e->args.size() != f->arg_types.size()) {
          abort(pick(e->span), "function '" + f->name + "' expects " + std::to_string(f->arg_types.size()) +
                                   " argument(s), got " + std::to_string(e->args.size()));
        }
        TypeSubst inst;
        if (!e->type_args.empty() || !opts_.infer) {
          if (e->type_args.size() != f->type_params) {
            abort(pick(e->span), "call to '" + f->name + "' needs " + std::to_string(f->type_params) +
                                     " type argument(s), has " + std::to_string(e->type_args.size()));
          }
          for (const auto& t : e->type_args) {
            if (!well_formed(t, sc.depth, pick(e->span), "call to " + f->name)) throw Abort{};
          }
          inst = e->type_args;
        } else {
          for (std::uint32_t i = 0; i < f->type_params; ++i) inst.push_back(Type::var(kMeta + next_meta_++));
        }
        std::vector<Expr> args;
        for (std::size_t i = 0; i < e->args.size(); ++i) {
          auto [a, at] = infer(e->args[i], sc);
          expect(substitute_types(f->arg_types[i], inst), at, e->args[i]->span.start_line ? e->args[i]->span : e->span,
                 "argument " + std::to_string(i + 1) + " of '" + f->name + "'");
          args.push_back(a);
        }
        ExprNode copy = *e;
        copy.args = std::move(args);
        copy.type_args = inst;
        return {ex::make(std::move(copy)), substitute_types(f->result, inst)};
      }
      case K::Old: {
        if (!sc.allow_old) abort(pick(e->span), "old() is not allowed here");
        auto [a, at] = infer(e->args[0], sc);
        return {rebuild(e, {a}), at};
      }
      case K::Forall:
      case K::Exists: {
        if (!well_formed(e->bound_type, sc.depth, pick(e->span), "quantifier")) throw Abort{};
        sc.bound.push_back(e->bound_type);
        auto [b, bt] = infer(e->args[0], sc);
        sc.bound.pop_back();
        expect(Type::boolean(), bt, e->span, "quantifier body");
        return {rebuild(e, {b}), Type::boolean()};
      }
      case K::ForallType:
      case K::ExistsType: {
        std::vector<Type> saved = sc.bound;
        for (auto& t : sc.bound) t = shift_type(t, 1);
        ++sc.depth;
        auto [b, bt] = infer(e->args[0], sc);
        --sc.depth;
        sc.bound = std::move(saved);
        expect(Type::boolean(), bt, e->span, "quantifier body");
        return {rebuild(e, {b}), Type::boolean()};
      }
    }
    abort(pick(e->span), "unsupported expression");
  }

  static Expr rebuild(const Expr& e, std::vector<Expr> args) {
    bool same = args.size() == e->args.size();
    for (std::size_t i = 0; same && i < args.size(); ++i) same = args[i] == e->args[i];
    if (same) return e;
    ExprNode copy = *e;
    copy.args = std::move(args);
    return ex::make(std::move(copy));
  }

  /// Replaces meta variables in call instantiations by their solutions.
  Expr finalize(const Expr& e) {
    return rewrite(e, [&](const Expr& n) -> Expr {
      if (n->kind != ExprNode::Kind::Call || n->type_args.empty()) return nullptr;
      ExprNode copy = *n;
      for (auto& t : copy.type_args) {
        t = resolve(t);
        if (has_meta(t)) abort(pick(n->span), "cannot infer type arguments of call to '" + n->name + "'");
      }
      return ex::make(std::move(copy));
    });
  }

  static bool has_meta(const Type& t) {
    if (t.is_var()) return t.index >= kMeta;
    for (const auto& a : t.args) {
      if (has_meta(a)) return true;
    }
    return false;
  }

  /// Checks a top-level expression of the given type; on error records a
  /// diagnostic and returns the input unchanged.
  Expr check(const Expr& e, const Type& want, Scope sc, const SourceSpan& sp, const std::string& what) {
    subst_.clear();
    next_meta_ = 0;
    current_span_ = sp;
    try {
      auto [out, t] = infer(e, sc);
      expect(want, t, e->span, what);
      return finalize(out);
    } catch (const Abort&) {
      return e;
    }
  }

  Expr check_bool(const Expr& e, Scope sc, const SourceSpan& sp, const std::string& what) {
    return check(e, Type::boolean(), std::move(sc), sp, what);
  }

  // -- procedures -----------------------------------------------------------

  void check_procedure(Procedure& proc) {
    const std::string where = "procedure " + proc.name;
    for (const auto* list : {&proc.params, &proc.returns, &proc.locals}) {
      for (const auto& v : *list) {
        well_formed(v.type, 0, v.span, where + ", variable " + v.name);
        bool clash = false;
        for (const auto& g : prog_.globals) clash = clash || g.name == v.name;
        for (const auto& c : prog_.constants) clash = clash || c.name == v.name;
        if (clash) report(v.span, where + ": local '" + v.name + "' shadows a global declaration");
      }
    }
    VarContext ctx = procedure_context(prog_, proc);
    proc.pre = check_bool(proc.pre, Scope{&ctx, false, false, 0, {}}, proc.span, "precondition");
    proc.post = check_bool(proc.post, Scope{&ctx, true, false, 0, {}}, proc.span, "postcondition");
    try {
      proc.body.validate();
    } catch (const MalformedInput& err) {
      report(proc.span, where + ": " + err.what());
      return;
    }
    for (auto& [id, block] : proc.body.blocks) {
      for (auto& c : block.commands) {
        const SourceSpan& sp = c.span.start_line ? c.span : proc.span;
        switch (c.kind) {
          case Command::Kind::Assume:
            c.expr = check_bool(c.expr, Scope{&ctx, true, false, 0, {}}, sp, "assume");
            break;
          case Command::Kind::Assert:
            c.expr = check_bool(c.expr, Scope{&ctx, true, false, 0, {}}, sp, "assert");
            break;
          case Command::Kind::Assign:
          case Command::Kind::Havoc: {
            const VarDecl* d = ctx.find(c.var);
            if (!d) {
              report(sp, "unbound name '" + c.var + "'");
              break;
            }
            if (!d->is_mutable) {
              report(sp, "cannot modify '" + c.var + "': " +
                             (ctx.is_constant(c.var) ? "it is a constant" : "it is an in-parameter"));
              break;
            }
            if (c.kind == Command::Kind::Assign) {
              c.expr = check(c.expr, d->type, Scope{&ctx, true, false, 0, {}}, sp, "assignment to " + c.var);
            }
            break;
          }
        }
      }
    }
  }

  const Program& prog_;
  TypecheckOptions opts_;
  std::vector<Diagnostic> diags_;
  std::map<std::uint32_t, Type> subst_;
  std::uint32_t next_meta_ = 0;
  SourceSpan current_span_;
};

}  // namespace detail

/// Type checks `p` and returns a copy whose calls carry explicit
/// instantiations. Throws TypeError with every diagnostic found.
inline Program typecheck(const Program& p, TypecheckOptions opts = {}) {
  return detail::TypeChecker(p, opts).run();
}

}  // namespace ivl
