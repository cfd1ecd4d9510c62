#pragma once

// Abstract syntax of the intermediate verification language: types, expressions,
// basic commands, control-flow graphs and declarations. Every phase consumes and
// produces these values; nodes are immutable once built and shared by pointer.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ivl/error.hpp"

namespace ivl {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct Type {
  enum class Kind : std::uint8_t { Int, Bool, Con, Var };

  Kind kind = Kind::Int;
  std::string name;         // constructor name, Con only
  std::vector<Type> args;   // constructor arguments, Con only
  std::uint32_t index = 0;  // de Bruijn index, Var only (0 = innermost binder)

  static Type integer() { return Type{}; }
  static Type boolean() {
    Type t;
    t.kind = Kind::Bool;
    return t;
  }
  static Type con(std::string name, std::vector<Type> args = {}) {
    Type t;
    t.kind = Kind::Con;
    t.name = std::move(name);
    t.args = std::move(args);
    return t;
  }
  static Type var(std::uint32_t index) {
    Type t;
    t.kind = Kind::Var;
    t.index = index;
    return t;
  }

  [[nodiscard]] bool is_int() const noexcept { return kind == Kind::Int; }
  [[nodiscard]] bool is_bool() const noexcept { return kind == Kind::Bool; }
  [[nodiscard]] bool is_con() const noexcept { return kind == Kind::Con; }
  [[nodiscard]] bool is_var() const noexcept { return kind == Kind::Var; }
};

inline int compare(const Type& a, const Type& b) {
  if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
  switch (a.kind) {
    case Type::Kind::Int:
    case Type::Kind::Bool:
      return 0;
    case Type::Kind::Var:
      return a.index == b.index ? 0 : (a.index < b.index ? -1 : 1);
    case Type::Kind::Con: {
      if (int c = a.name.compare(b.name); c != 0) return c < 0 ? -1 : 1;
      if (a.args.size() != b.args.size()) return a.args.size() < b.args.size() ? -1 : 1;
      for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (int c = compare(a.args[i], b.args[i]); c != 0) return c;
      }
      return 0;
    }
  }
  return 0;
}

inline bool operator==(const Type& a, const Type& b) { return compare(a, b) == 0; }
inline bool operator!=(const Type& a, const Type& b) { return compare(a, b) != 0; }
inline bool operator<(const Type& a, const Type& b) { return compare(a, b) < 0; }

/// True iff no type variable occurs in `t`.
inline bool is_closed(const Type& t) {
  if (t.is_var()) return false;
  for (const auto& a : t.args) {
    if (!is_closed(a)) return false;
  }
  return true;
}

/// Index i of the substitution is the replacement for `TVar i`.
using TypeSubst = std::vector<Type>;

inline Type substitute_types(const Type& t, const TypeSubst& subst) {
  switch (t.kind) {
    case Type::Kind::Int:
    case Type::Kind::Bool:
      return t;
    case Type::Kind::Var:
      if (t.index >= subst.size()) {
        throw MalformedInput("type substitution does not map type variable #" +
                             std::to_string(t.index));
      }
      return subst[t.index];
    case Type::Kind::Con: {
      Type out = Type::con(t.name);
      out.args.reserve(t.args.size());
      for (const auto& a : t.args) out.args.push_back(substitute_types(a, subst));
      return out;
    }
  }
  return t;
}

/// Adds `amount` to every type-variable index >= `cutoff`.
inline Type shift_type(const Type& t, std::uint32_t amount, std::uint32_t cutoff = 0) {
  if (t.is_var()) return t.index >= cutoff ? Type::var(t.index + amount) : t;
  if (!t.is_con()) return t;
  Type out = Type::con(t.name);
  for (const auto& a : t.args) out.args.push_back(shift_type(a, amount, cutoff));
  return out;
}

inline std::uint32_t type_depth(const Type& t) {
  std::uint32_t d = 0;
  for (const auto& a : t.args) d = std::max(d, type_depth(a) + 1);
  return d;
}

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class BinOp : std::uint8_t { Add, Sub, Mul, Div, Mod, Eq, Neq, Lt, Le, Gt, Ge, And, Or, Imp, Iff };
enum class UnOp : std::uint8_t { Not, Neg };

inline bool is_arith(BinOp op) {
  return op == BinOp::Add || op == BinOp::Sub || op == BinOp::Mul || op == BinOp::Div ||
         op == BinOp::Mod;
}
inline bool is_comparison(BinOp op) {
  return op == BinOp::Lt || op == BinOp::Le || op == BinOp::Gt || op == BinOp::Ge;
}
inline bool is_logical(BinOp op) {
  return op == BinOp::And || op == BinOp::Or || op == BinOp::Imp || op == BinOp::Iff;
}

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  enum class Kind : std::uint8_t {
    Var,         // named variable (global, constant or local)
    Bound,       // de Bruijn reference to a value quantifier
    BoolLit,
    IntLit,
    Binary,
    Unary,
    Call,        // f<type_args>(args)
    Old,
    Forall,      // value quantifier over bound_type
    Exists,
    ForallType,  // type quantifier over closed types
    ExistsType,
  };

  Kind kind = Kind::BoolLit;
  std::string name;
  std::int64_t int_value = 0;
  bool bool_value = false;
  std::uint32_t index = 0;
  BinOp binop = BinOp::Add;
  UnOp unop = UnOp::Not;
  Type bound_type;
  std::vector<Type> type_args;
  std::vector<Expr> args;
  SourceSpan span;
};

namespace ex {

inline Expr make(ExprNode node) { return std::make_shared<const ExprNode>(std::move(node)); }

inline Expr var(std::string name, SourceSpan span = {}) {
  ExprNode n;
  n.kind = ExprNode::Kind::Var;
  n.name = std::move(name);
  n.span = std::move(span);
  return make(std::move(n));
}
inline Expr bound(std::uint32_t index) {
  ExprNode n;
  n.kind = ExprNode::Kind::Bound;
  n.index = index;
  return make(std::move(n));
}
inline Expr boolean(bool b) {
  ExprNode n;
  n.kind = ExprNode::Kind::BoolLit;
  n.bool_value = b;
  return make(std::move(n));
}
inline Expr integer(std::int64_t v) {
  ExprNode n;
  n.kind = ExprNode::Kind::IntLit;
  n.int_value = v;
  return make(std::move(n));
}
inline Expr binary(BinOp op, Expr lhs, Expr rhs, SourceSpan span = {}) {
  ExprNode n;
  n.kind = ExprNode::Kind::Binary;
  n.binop = op;
  n.args = {std::move(lhs), std::move(rhs)};
  n.span = std::move(span);
  return make(std::move(n));
}
inline Expr unary(UnOp op, Expr arg, SourceSpan span = {}) {
  ExprNode n;
  n.kind = ExprNode::Kind::Unary;
  n.unop = op;
  n.args = {std::move(arg)};
  n.span = std::move(span);
  return make(std::move(n));
}
inline Expr call(std::string fn, std::vector<Type> type_args, std::vector<Expr> args,
                 SourceSpan span = {}) {
  ExprNode n;
  n.kind = ExprNode::Kind::Call;
  n.name = std::move(fn);
  n.type_args = std::move(type_args);
  n.args = std::move(args);
  n.span = std::move(span);
  return make(std::move(n));
}
inline Expr old(Expr e, SourceSpan span = {}) {
  ExprNode n;
  n.kind = ExprNode::Kind::Old;
  n.args = {std::move(e)};
  n.span = std::move(span);
  return make(std::move(n));
}
inline Expr quant(ExprNode::Kind kind, Type bound_type, Expr body, SourceSpan span = {}) {
  ExprNode n;
  n.kind = kind;
  n.bound_type = std::move(bound_type);
  n.args = {std::move(body)};
  n.span = std::move(span);
  return make(std::move(n));
}
inline Expr forall(Type t, Expr body) { return quant(ExprNode::Kind::Forall, std::move(t), std::move(body)); }
inline Expr exists(Type t, Expr body) { return quant(ExprNode::Kind::Exists, std::move(t), std::move(body)); }
inline Expr forall_type(Expr body) { return quant(ExprNode::Kind::ForallType, Type{}, std::move(body)); }
inline Expr exists_type(Expr body) { return quant(ExprNode::Kind::ExistsType, Type{}, std::move(body)); }

inline Expr and_(Expr a, Expr b) { return binary(BinOp::And, std::move(a), std::move(b)); }
inline Expr or_(Expr a, Expr b) { return binary(BinOp::Or, std::move(a), std::move(b)); }
inline Expr imp(Expr a, Expr b) { return binary(BinOp::Imp, std::move(a), std::move(b)); }
inline Expr eq(Expr a, Expr b) { return binary(BinOp::Eq, std::move(a), std::move(b)); }
inline Expr iff(Expr a, Expr b) { return binary(BinOp::Iff, std::move(a), std::move(b)); }
inline Expr not_(Expr a) { return unary(UnOp::Not, std::move(a)); }

/// Right-nested conjunction; `true` for an empty list.
inline Expr conjunction(const std::vector<Expr>& parts) {
  if (parts.empty()) return boolean(true);
  Expr acc = parts.back();
  for (std::size_t i = parts.size() - 1; i-- > 0;) acc = and_(parts[i], acc);
  return acc;
}

}  // namespace ex

inline bool is_quantifier(ExprNode::Kind k) {
  return k == ExprNode::Kind::Forall || k == ExprNode::Kind::Exists ||
         k == ExprNode::Kind::ForallType || k == ExprNode::Kind::ExistsType;
}
inline bool is_type_quantifier(ExprNode::Kind k) {
  return k == ExprNode::Kind::ForallType || k == ExprNode::Kind::ExistsType;
}
inline bool is_literal(const Expr& e) {
  return e->kind == ExprNode::Kind::BoolLit || e->kind == ExprNode::Kind::IntLit;
}

/// Structural equality; source spans are ignored.
inline bool equal(const Expr& a, const Expr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  using K = ExprNode::Kind;
  switch (a->kind) {
    case K::Var:
      return a->name == b->name;
    case K::Bound:
      return a->index == b->index;
    case K::BoolLit:
      return a->bool_value == b->bool_value;
    case K::IntLit:
      return a->int_value == b->int_value;
    case K::Binary:
      if (a->binop != b->binop) return false;
      break;
    case K::Unary:
      if (a->unop != b->unop) return false;
      break;
    case K::Call:
      if (a->name != b->name || a->type_args != b->type_args) return false;
      break;
    case K::Forall:
    case K::Exists:
      if (a->bound_type != b->bound_type) return false;
      break;
    default:
      break;
  }
  if (a->args.size() != b->args.size()) return false;
  for (std::size_t i = 0; i < a->args.size(); ++i) {
    if (!equal(a->args[i], b->args[i])) return false;
  }
  return true;
}

inline void collect_free_vars(const Expr& e, std::set<std::string>& out) {
  if (e->kind == ExprNode::Kind::Var) {
    out.insert(e->name);
    return;
  }
  for (const auto& a : e->args) collect_free_vars(a, out);
}

/// Names of the variables occurring in `e`. Bound references are de Bruijn
/// indices and never appear here; `old` does not bind.
inline std::set<std::string> free_vars(const Expr& e) {
  std::set<std::string> out;
  collect_free_vars(e, out);
  return out;
}

inline bool contains_old(const Expr& e) {
  if (e->kind == ExprNode::Kind::Old) return true;
  for (const auto& a : e->args) {
    if (contains_old(a)) return true;
  }
  return false;
}

inline bool contains_quantifier(const Expr& e) {
  if (is_quantifier(e->kind)) return true;
  for (const auto& a : e->args) {
    if (contains_quantifier(a)) return true;
  }
  return false;
}

inline bool contains_call(const Expr& e) {
  if (e->kind == ExprNode::Kind::Call) return true;
  for (const auto& a : e->args) {
    if (contains_call(a)) return true;
  }
  return false;
}

/// Rebuilds `e` bottom-up; `fn` sees each node after its children were rewritten
/// and returns a replacement or nullptr to keep it.
inline Expr rewrite(const Expr& e, const std::function<Expr(const Expr&)>& fn) {
  bool changed = false;
  std::vector<Expr> args;
  args.reserve(e->args.size());
  for (const auto& a : e->args) {
    args.push_back(rewrite(a, fn));
    changed = changed || args.back() != a;
  }
  Expr cur = e;
  if (changed) {
    ExprNode copy = *e;
    copy.args = std::move(args);
    cur = ex::make(std::move(copy));
  }
  if (Expr r = fn(cur)) return r;
  return cur;
}

/// Renames variables by a total-or-partial map; unmapped names are kept.
inline Expr rename_vars(const Expr& e, const std::map<std::string, std::string>& renaming) {
  return rewrite(e, [&](const Expr& n) -> Expr {
    if (n->kind != ExprNode::Kind::Var) return nullptr;
    auto it = renaming.find(n->name);
    if (it == renaming.end() || it->second == n->name) return nullptr;
    return ex::var(it->second, n->span);
  });
}

// ---------------------------------------------------------------------------
// Commands, blocks, CFGs
// ---------------------------------------------------------------------------

struct Command {
  enum class Kind : std::uint8_t { Assume, Assert, Assign, Havoc };

  Kind kind = Kind::Assume;
  std::string var;  // Assign / Havoc target
  Expr expr;        // Assume / Assert / Assign
  SourceSpan span;

  static Command assume(Expr e) { return Command{Kind::Assume, {}, std::move(e), {}}; }
  static Command assert_(Expr e) { return Command{Kind::Assert, {}, std::move(e), {}}; }
  static Command assign(std::string x, Expr e) { return Command{Kind::Assign, std::move(x), std::move(e), {}}; }
  static Command havoc(std::string x) { return Command{Kind::Havoc, std::move(x), nullptr, {}}; }

  [[nodiscard]] bool changes_state() const noexcept { return kind == Kind::Assign || kind == Kind::Havoc; }
};

inline bool operator==(const Command& a, const Command& b) {
  if (a.kind != b.kind || a.var != b.var) return false;
  if (!a.expr || !b.expr) return !a.expr && !b.expr;
  return equal(a.expr, b.expr);
}
inline bool operator!=(const Command& a, const Command& b) { return !(a == b); }

inline bool commands_equal(const std::vector<Command>& a, const std::vector<Command>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

using BlockId = std::uint32_t;

struct Block {
  BlockId id = 0;
  std::string label;  // display name, optional
  std::vector<Command> commands;
};

struct Cfg {
  std::map<BlockId, Block> blocks;
  BlockId entry = 0;
  std::map<BlockId, std::vector<BlockId>> successors;

  [[nodiscard]] const Block& block(BlockId id) const {
    auto it = blocks.find(id);
    if (it == blocks.end()) throw MalformedInput("unknown block id " + std::to_string(id));
    return it->second;
  }
  Block& block(BlockId id) {
    auto it = blocks.find(id);
    if (it == blocks.end()) throw MalformedInput("unknown block id " + std::to_string(id));
    return it->second;
  }
  [[nodiscard]] const std::vector<BlockId>& succs(BlockId id) const {
    static const std::vector<BlockId> kNone;
    auto it = successors.find(id);
    return it == successors.end() ? kNone : it->second;
  }
  [[nodiscard]] std::map<BlockId, std::vector<BlockId>> predecessors() const {
    std::map<BlockId, std::vector<BlockId>> preds;
    for (const auto& [id, _] : blocks) preds[id];
    for (const auto& [from, tos] : successors) {
      for (BlockId to : tos) preds[to].push_back(from);
    }
    return preds;
  }
  [[nodiscard]] std::string name_of(BlockId id) const {
    auto it = blocks.find(id);
    if (it != blocks.end() && !it->second.label.empty()) return it->second.label;
    return "B" + std::to_string(id);
  }
  [[nodiscard]] BlockId next_free_id() const { return blocks.empty() ? 0 : blocks.rbegin()->first + 1; }

  /// Throws MalformedInput unless every referenced block exists.
  void validate() const {
    if (!blocks.count(entry)) throw MalformedInput("entry block " + std::to_string(entry) + " missing");
    for (const auto& [id, b] : blocks) {
      if (b.id != id) throw MalformedInput("block id mismatch for " + std::to_string(id));
    }
    for (const auto& [from, tos] : successors) {
      if (!blocks.count(from)) throw MalformedInput("edge from unknown block " + std::to_string(from));
      for (BlockId to : tos) {
        if (!blocks.count(to)) throw MalformedInput("edge to unknown block " + std::to_string(to));
      }
    }
  }
};

inline bool cfg_equal(const Cfg& a, const Cfg& b) {
  if (a.entry != b.entry || a.blocks.size() != b.blocks.size()) return false;
  for (const auto& [id, blk] : a.blocks) {
    auto it = b.blocks.find(id);
    if (it == b.blocks.end() || !commands_equal(blk.commands, it->second.commands)) return false;
    if (a.succs(id) != b.succs(id)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Declarations
// ---------------------------------------------------------------------------

struct VarDecl {
  std::string name;
  Type type;
  bool is_mutable = true;  // constants and in-parameters are immutable
  SourceSpan span;
};

struct TypeConDecl {
  std::string name;
  std::uint32_t arity = 0;
  SourceSpan span;
};

struct FunctionDecl {
  std::string name;
  std::uint32_t type_params = 0;
  std::vector<std::string> type_param_names;
  std::vector<std::string> arg_names;  // may hold empty names
  std::vector<Type> arg_types;         // TVar i refers to type parameter i
  Type result;
  SourceSpan span;
};

struct Procedure {
  std::string name;
  std::vector<VarDecl> params;
  std::vector<VarDecl> returns;
  std::vector<VarDecl> locals;
  Expr pre = ex::boolean(true);
  Expr post = ex::boolean(true);
  Cfg body;
  SourceSpan span;
};

struct Program {
  std::vector<TypeConDecl> types;
  std::vector<FunctionDecl> functions;
  std::vector<Expr> axioms;
  std::vector<VarDecl> globals;
  std::vector<VarDecl> constants;
  std::vector<Procedure> procedures;

  [[nodiscard]] const TypeConDecl* find_type(std::string_view n) const {
    for (const auto& t : types) {
      if (t.name == n) return &t;
    }
    return nullptr;
  }
  [[nodiscard]] const FunctionDecl* find_function(std::string_view n) const {
    for (const auto& f : functions) {
      if (f.name == n) return &f;
    }
    return nullptr;
  }
  [[nodiscard]] const Procedure* find_procedure(std::string_view n) const {
    for (const auto& p : procedures) {
      if (p.name == n) return &p;
    }
    return nullptr;
  }
};

/// The variable context: global data G (globals and constants) and local data L.
struct VarContext {
  std::map<std::string, VarDecl> globals;
  std::map<std::string, VarDecl> locals;

  [[nodiscard]] const VarDecl* find(const std::string& n) const {
    if (auto it = locals.find(n); it != locals.end()) return &it->second;
    if (auto it = globals.find(n); it != globals.end()) return &it->second;
    return nullptr;
  }
  [[nodiscard]] bool is_global(const std::string& n) const { return globals.count(n) != 0; }
  [[nodiscard]] bool is_constant(const std::string& n) const {
    auto it = globals.find(n);
    return it != globals.end() && !it->second.is_mutable;
  }
  /// Every variable, globals first, in name order.
  [[nodiscard]] std::vector<const VarDecl*> all() const {
    std::vector<const VarDecl*> out;
    for (const auto& [_, d] : globals) out.push_back(&d);
    for (const auto& [_, d] : locals) out.push_back(&d);
    return out;
  }
};

inline VarContext global_context(const Program& p) {
  VarContext ctx;
  for (const auto& c : p.constants) {
    VarDecl d = c;
    d.is_mutable = false;
    ctx.globals[d.name] = d;
  }
  for (const auto& g : p.globals) ctx.globals[g.name] = g;
  return ctx;
}

inline VarContext procedure_context(const Program& p, const Procedure& proc) {
  VarContext ctx = global_context(p);
  for (const auto& v : proc.params) {
    VarDecl d = v;
    d.is_mutable = false;
    ctx.locals[d.name] = d;
  }
  for (const auto& v : proc.returns) ctx.locals[v.name] = v;
  for (const auto& v : proc.locals) ctx.locals[v.name] = v;
  return ctx;
}

// ---------------------------------------------------------------------------
// Static types of typechecked expressions
// ---------------------------------------------------------------------------

/// Computes the type of an already typechecked expression with explicit
/// instantiations. `bound` holds the types of enclosing value binders
/// (innermost last), expressed relative to the current type-binder depth.
class ExprTyper {
 public:
  ExprTyper(const Program& program, std::function<const Type*(const std::string&)> var_type)
      : program_(program), var_type_(std::move(var_type)) {}

  [[nodiscard]] Type type_of(const Expr& e) const {
    std::vector<Type> bound;
    return go(e, bound);
  }
  [[nodiscard]] Type type_of(const Expr& e, std::vector<Type>& bound) const { return go(e, bound); }

 private:
  Type go(const Expr& e, std::vector<Type>& bound) const {
    using K = ExprNode::Kind;
    switch (e->kind) {
      case K::Var: {
        const Type* t = var_type_(e->name);
        if (!t) throw InternalError("untyped variable " + e->name);
        return *t;
      }
      case K::Bound:
        if (e->index >= bound.size()) throw InternalError("dangling bound index");
        return bound[bound.size() - 1 - e->index];
      case K::BoolLit:
        return Type::boolean();
      case K::IntLit:
        return Type::integer();
      case K::Binary:
        return is_arith(e->binop) ? Type::integer() : Type::boolean();
      case K::Unary:
        return e->unop == UnOp::Neg ? Type::integer() : Type::boolean();
      case K::Call: {
        const FunctionDecl* f = program_.find_function(e->name);
        if (!f) throw InternalError("unknown function " + e->name);
        return substitute_types(f->result, e->type_args);
      }
      case K::Old:
        return go(e->args[0], bound);
      case K::Forall:
      case K::Exists:
      case K::ForallType:
      case K::ExistsType:
        return Type::boolean();
    }
    return Type::boolean();
  }

  const Program& program_;
  std::function<const Type*(const std::string&)> var_type_;
};

inline ExprTyper make_typer(const Program& program, const VarContext& ctx) {
  return ExprTyper(program, [&ctx](const std::string& n) -> const Type* {
    const VarDecl* d = ctx.find(n);
    return d ? &d->type : nullptr;
  });
}

}  // namespace ivl
