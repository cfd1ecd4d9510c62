#pragma once

// Reference interpreter: values, states, expression evaluation with
// three-valued quantifier enumeration, command / block / CFG execution and a
// sampling-based procedure correctness oracle.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ivl/core_ir.hpp"
#include "ivl/fold.hpp"
#include "ivl/printer.hpp"

namespace ivl {

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

struct Value {
  enum class Kind : std::uint8_t { Int, Bool, Abstract };

  Kind kind = Kind::Int;
  std::int64_t i = 0;
  bool b = false;
  Type type;               // Abstract only, closed constructor application
  std::uint32_t index = 0;  // Abstract only

  static Value integer(std::int64_t v) {
    Value out;
    out.i = v;
    return out;
  }
  static Value boolean(bool v) {
    Value out;
    out.kind = Kind::Bool;
    out.b = v;
    return out;
  }
  static Value abstract(Type t, std::uint32_t n) {
    Value out;
    out.kind = Kind::Abstract;
    out.type = std::move(t);
    out.index = n;
    return out;
  }
};

inline int compare(const Value& a, const Value& b) {
  if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
  switch (a.kind) {
    case Value::Kind::Int: return a.i == b.i ? 0 : (a.i < b.i ? -1 : 1);
    case Value::Kind::Bool: return a.b == b.b ? 0 : (a.b ? 1 : -1);
    case Value::Kind::Abstract:
      if (int c = compare(a.type, b.type)) return c;
      return a.index == b.index ? 0 : (a.index < b.index ? -1 : 1);
  }
  return 0;
}
inline bool operator==(const Value& a, const Value& b) { return compare(a, b) == 0; }
inline bool operator!=(const Value& a, const Value& b) { return compare(a, b) != 0; }
inline bool operator<(const Value& a, const Value& b) { return compare(a, b) < 0; }

inline Type value_type(const Value& v) {
  switch (v.kind) {
    case Value::Kind::Int: return Type::integer();
    case Value::Kind::Bool: return Type::boolean();
    case Value::Kind::Abstract: return v.type;
  }
  return Type::integer();
}

inline std::string to_string(const Value& v) {
  switch (v.kind) {
    case Value::Kind::Int: return std::to_string(v.i);
    case Value::Kind::Bool: return v.b ? "true" : "false";
    case Value::Kind::Abstract: return "(" + to_string(v.type) + ")@" + std::to_string(v.index);
  }
  return "?";
}

/// Value of the given closed type used when an arbitrary one is needed.
inline Value default_value(const Type& t) {
  if (t.is_int()) return Value::integer(0);
  if (t.is_bool()) return Value::boolean(false);
  return Value::abstract(t, 0);
}

using MaybeValue = std::optional<Value>;

// ---------------------------------------------------------------------------
// Variable stores and states
// ---------------------------------------------------------------------------

/// Name-to-value map kept as a sorted vector.
class VarStore {
 public:
  using Entry = std::pair<std::string, Value>;

  [[nodiscard]] const Value* find(const std::string& n) const {
    auto it = lower(n);
    return it != items_.end() && it->first == n ? &it->second : nullptr;
  }
  void set(const std::string& n, Value v) {
    auto it = std::lower_bound(items_.begin(), items_.end(), n,
                               [](const Entry& e, const std::string& k) { return e.first < k; });
    if (it != items_.end() && it->first == n) {
      it->second = std::move(v);
    } else {
      items_.insert(it, Entry{n, std::move(v)});
    }
  }
  [[nodiscard]] bool contains(const std::string& n) const { return find(n) != nullptr; }
  [[nodiscard]] std::size_t size() const { return items_.size(); }
  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[nodiscard]] auto begin() const { return items_.begin(); }
  [[nodiscard]] auto end() const { return items_.end(); }

  friend bool operator==(const VarStore& a, const VarStore& b) {
    if (a.items_.size() != b.items_.size()) return false;
    for (std::size_t k = 0; k < a.items_.size(); ++k) {
      if (a.items_[k].first != b.items_[k].first || a.items_[k].second != b.items_[k].second) return false;
    }
    return true;
  }

 private:
  [[nodiscard]] std::vector<Entry>::const_iterator lower(const std::string& n) const {
    return std::lower_bound(items_.begin(), items_.end(), n,
                            [](const Entry& e, const std::string& k) { return e.first < k; });
  }
  std::vector<Entry> items_;
};

inline std::string to_string(const VarStore& s) {
  std::string out;
  for (const auto& [k, v] : s) {
    if (!out.empty()) out += ", ";
    out += k + "=" + to_string(v);
  }
  return out;
}

/// Normal state: globals (constants included), locals, and the globals of
/// the procedure pre-state.
struct NormalState {
  VarStore old_globals;
  VarStore globals;
  VarStore locals;

  [[nodiscard]] const Value* lookup(const std::string& n) const {
    if (const Value* v = locals.find(n)) return v;
    return globals.find(n);
  }
  friend bool operator==(const NormalState& a, const NormalState& b) {
    return a.old_globals == b.old_globals && a.globals == b.globals && a.locals == b.locals;
  }
};

struct ExecState {
  /// Stuck marks a state the oracle could not decide (a guard evaluated to
  /// Unknown); it is absorbing like Failure and Magic.
  enum class Kind : std::uint8_t { Normal, Failure, Magic, Stuck };

  Kind kind = Kind::Normal;
  NormalState ns;

  static ExecState normal(NormalState ns) { return ExecState{Kind::Normal, std::move(ns)}; }
  static ExecState failure() { return ExecState{Kind::Failure, {}}; }
  static ExecState magic() { return ExecState{Kind::Magic, {}}; }
  static ExecState stuck() { return ExecState{Kind::Stuck, {}}; }

  [[nodiscard]] bool is_normal() const { return kind == Kind::Normal; }
  [[nodiscard]] bool is_failure() const { return kind == Kind::Failure; }
  [[nodiscard]] bool is_magic() const { return kind == Kind::Magic; }
  [[nodiscard]] bool is_stuck() const { return kind == Kind::Stuck; }
};

inline const char* to_string(ExecState::Kind k) {
  switch (k) {
    case ExecState::Kind::Normal: return "normal";
    case ExecState::Kind::Failure: return "failure";
    case ExecState::Kind::Magic: return "magic";
    case ExecState::Kind::Stuck: return "stuck";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

struct EnumBounds {
  std::int64_t int_min = -8;
  std::int64_t int_max = 8;
  std::uint32_t type_depth = 2;
  std::uint32_t abstract_count = 4;  // abstract indices 0..abstract_count-1
  /// When true the enumerated ranges are taken to be the whole domains, so
  /// an exhausted quantifier is decided instead of Unknown.
  bool bounded_domains = false;
};

using FunctionInterp = std::function<Value(const std::vector<Type>& types, const std::vector<Value>& args)>;

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline void hash_mix(std::uint64_t& h, std::uint64_t v) { h = splitmix(h ^ v); }

inline void hash_string(std::uint64_t& h, const std::string& s) {
  std::uint64_t f = 1469598103934665603ULL;
  for (unsigned char c : s) f = (f ^ c) * 1099511628211ULL;
  hash_mix(h, f);
}

inline void hash_type(std::uint64_t& h, const Type& t) {
  hash_mix(h, static_cast<std::uint64_t>(t.kind) + 17);
  if (t.is_con()) hash_string(h, t.name);
  if (t.is_var()) hash_mix(h, t.index);
  for (const auto& a : t.args) hash_type(h, a);
  hash_mix(h, 0xabcdef);
}

inline void hash_value(std::uint64_t& h, const Value& v) {
  hash_mix(h, static_cast<std::uint64_t>(v.kind) + 31);
  switch (v.kind) {
    case Value::Kind::Int: hash_mix(h, static_cast<std::uint64_t>(v.i)); break;
    case Value::Kind::Bool: hash_mix(h, v.b ? 1 : 2); break;
    case Value::Kind::Abstract:
      hash_type(h, v.type);
      hash_mix(h, v.index);
      break;
  }
}

}  // namespace detail

/// Evaluation context: the program's declarations, variable context Λ,
/// function interpretation Γ (a seeded default plus per-function overrides),
/// type substitution Ω and enumeration bounds.
struct Context {
  const Program* program = nullptr;
  VarContext vars;
  TypeSubst omega;
  std::uint64_t interp_seed = 0;
  std::map<std::string, FunctionInterp> overrides;
  EnumBounds bounds;

  /// Default interpretation of `f` at the given instantiation. Results are a
  /// pure function of (seed, name, types, args), hence functionally consistent.
  [[nodiscard]] Value apply_function(const std::string& f, const std::vector<Type>& types,
                                     const std::vector<Value>& args) const {
    if (auto it = overrides.find(f); it != overrides.end()) return it->second(types, args);
    const FunctionDecl* d = program->find_function(f);
    if (!d) throw InternalError("unknown function " + f);
    Type ret = substitute_types(d->result, types);
    std::uint64_t h = interp_seed;
    detail::hash_string(h, f);
    for (const auto& t : types) detail::hash_type(h, t);
    for (const auto& v : args) detail::hash_value(h, v);
    h = detail::splitmix(h);
    if (ret.is_int()) return Value::integer(static_cast<std::int64_t>(h % 9) - 4);
    if (ret.is_bool()) return Value::boolean((h & 1) != 0);
    return Value::abstract(ret, static_cast<std::uint32_t>(h % std::max<std::uint32_t>(bounds.abstract_count, 1)));
  }

  /// Closed types built from int, bool and the declared constructors up to
  /// the configured nesting depth, in a fixed order.
  [[nodiscard]] const std::vector<Type>& closed_types() const {
    if (!closed_types_cache_) {
      std::vector<Type> level = {Type::integer(), Type::boolean()};
      std::vector<Type> all = level;
      for (const auto& c : program->types) {
        if (c.arity == 0) {
          all.push_back(Type::con(c.name));
        }
      }
      for (std::uint32_t d = 1; d <= bounds.type_depth; ++d) {
        std::vector<Type> next;
        std::vector<Type> prev = all;
        for (const auto& c : program->types) {
          if (c.arity == 0) continue;
          std::vector<std::size_t> idx(c.arity, 0);
          for (;;) {
            Type t = Type::con(c.name);
            for (auto k : idx) t.args.push_back(prev[k]);
            if (std::find(all.begin(), all.end(), t) == all.end() &&
                std::find(next.begin(), next.end(), t) == next.end()) {
              next.push_back(t);
            }
            std::size_t pos = 0;
            while (pos < idx.size() && ++idx[pos] == prev.size()) idx[pos++] = 0;
            if (pos == idx.size()) break;
            if (all.size() + next.size() > kMaxTypes) break;
          }
        }
        all.insert(all.end(), next.begin(), next.end());
        if (all.size() > kMaxTypes) break;
      }
      closed_types_cache_ = std::make_shared<std::vector<Type>>(std::move(all));
    }
    return *closed_types_cache_;
  }

  static constexpr std::size_t kMaxTypes = 256;

 private:
  mutable std::shared_ptr<std::vector<Type>> closed_types_cache_;
};

inline Context make_context(const Program& program, const VarContext& vars, std::uint64_t interp_seed = 0,
                            EnumBounds bounds = {}) {
  Context ctx;
  ctx.program = &program;
  ctx.vars = vars;
  ctx.interp_seed = interp_seed;
  ctx.bounds = bounds;
  return ctx;
}

// ---------------------------------------------------------------------------
// Expression evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline bool uses_bound(const Expr& e, std::uint32_t index) {
  switch (e->kind) {
    case ExprNode::Kind::Bound: return e->index == index;
    case ExprNode::Kind::Forall:
    case ExprNode::Kind::Exists: return uses_bound(e->args[0], index + 1);
    default:
      for (const auto& a : e->args) {
        if (uses_bound(a, index)) return true;
      }
      return false;
  }
}

inline bool type_uses_var(const Type& t, std::uint32_t index) {
  if (t.is_var()) return t.index == index;
  for (const auto& a : t.args) {
    if (type_uses_var(a, index)) return true;
  }
  return false;
}

inline bool uses_type_var(const Expr& e, std::uint32_t index) {
  if ((e->kind == ExprNode::Kind::Forall || e->kind == ExprNode::Kind::Exists) && type_uses_var(e->bound_type, index)) {
    return true;
  }
  for (const auto& t : e->type_args) {
    if (type_uses_var(t, index)) return true;
  }
  std::uint32_t inner = is_type_quantifier(e->kind) ? index + 1 : index;
  for (const auto& a : e->args) {
    if (uses_type_var(a, inner)) return true;
  }
  return false;
}

class Evaluator {
 public:
  Evaluator(const Context& ctx, const NormalState& ns) : ctx_(ctx), ns_(ns) {}

  MaybeValue eval(const Expr& e) { return go(e, false); }

 private:
  Type close(const Type& t) const {
    // Type variables refer to enclosing type binders first, then Ω.
    TypeSubst s(tenv_.rbegin(), tenv_.rend());
    s.insert(s.end(), ctx_.omega.begin(), ctx_.omega.end());
    return substitute_types(t, s);
  }

  static MaybeValue boolean(bool b) { return Value::boolean(b); }

  MaybeValue go(const Expr& e, bool in_old) {
    using K = ExprNode::Kind;
    switch (e->kind) {
      case K::Var: {
        const Value* v = nullptr;
        if (in_old && !ns_.locals.contains(e->name)) {
          v = ns_.old_globals.find(e->name);
          if (!v) v = ns_.globals.find(e->name);
        } else {
          v = ns_.lookup(e->name);
        }
        if (!v) throw InternalError("variable '" + e->name + "' has no value");
        return *v;
      }
      case K::Bound:
        if (e->index >= bound_.size()) throw InternalError("dangling bound index");
        return bound_[bound_.size() - 1 - e->index];
      case K::BoolLit: return boolean(e->bool_value);
      case K::IntLit: return Value::integer(e->int_value);
      case K::Unary: {
        MaybeValue a = go(e->args[0], in_old);
        if (!a) return std::nullopt;
        if (e->unop == UnOp::Not) return boolean(!as_bool(*a));
        if (as_int(*a) == INT64_MIN) return std::nullopt;
        return Value::integer(-as_int(*a));
      }
      case K::Binary: return binary(e, in_old);
      case K::Call: {
        std::vector<Value> args;
        args.reserve(e->args.size());
        for (const auto& a : e->args) {
          MaybeValue v = go(a, in_old);
          if (!v) return std::nullopt;
          args.push_back(std::move(*v));
        }
        std::vector<Type> types;
        types.reserve(e->type_args.size());
        for (const auto& t : e->type_args) types.push_back(close(t));
        return ctx_.apply_function(e->name, types, args);
      }
      case K::Old: return go(e->args[0], true);
      case K::Forall:
      case K::Exists: return value_quantifier(e, in_old);
      case K::ForallType:
      case K::ExistsType: return type_quantifier(e, in_old);
    }
    throw InternalError("unknown expression kind");
  }

  static bool as_bool(const Value& v) {
    if (v.kind != Value::Kind::Bool) throw InternalError("expected a boolean value");
    return v.b;
  }
  static std::int64_t as_int(const Value& v) {
    if (v.kind != Value::Kind::Int) throw InternalError("expected an integer value");
    return v.i;
  }

  MaybeValue binary(const Expr& e, bool in_old) {
    BinOp op = e->binop;
    if (is_logical(op)) {
      MaybeValue l = go(e->args[0], in_old);
      // Kleene connectives: a decided left operand may settle the result.
      if (l) {
        bool lb = as_bool(*l);
        if (op == BinOp::And && !lb) return boolean(false);
        if (op == BinOp::Or && lb) return boolean(true);
        if (op == BinOp::Imp && !lb) return boolean(true);
      }
      MaybeValue r = go(e->args[1], in_old);
      if (r) {
        bool rb = as_bool(*r);
        if (op == BinOp::And && !rb) return boolean(false);
        if (op == BinOp::Or && rb) return boolean(true);
        if (op == BinOp::Imp && rb) return boolean(true);
      }
      if (!l || !r) return std::nullopt;
      bool lb = as_bool(*l), rb = as_bool(*r);
      switch (op) {
        case BinOp::And: return boolean(lb && rb);
        case BinOp::Or: return boolean(lb || rb);
        case BinOp::Imp: return boolean(!lb || rb);
        default: return boolean(lb == rb);
      }
    }
    MaybeValue l = go(e->args[0], in_old);
    MaybeValue r = go(e->args[1], in_old);
    if (!l || !r) return std::nullopt;
    if (op == BinOp::Eq) return boolean(*l == *r);
    if (op == BinOp::Neq) return boolean(*l != *r);
    std::int64_t a = as_int(*l), b = as_int(*r);
    std::int64_t out = 0;
    switch (op) {
      case BinOp::Add:
        if (__builtin_add_overflow(a, b, &out)) return std::nullopt;
        return Value::integer(out);
      case BinOp::Sub:
        if (__builtin_sub_overflow(a, b, &out)) return std::nullopt;
        return Value::integer(out);
      case BinOp::Mul:
        if (__builtin_mul_overflow(a, b, &out)) return std::nullopt;
        return Value::integer(out);
      case BinOp::Div:
      case BinOp::Mod: {
        auto dm = euclid(a, b);
        if (!dm) return std::nullopt;
        return Value::integer(op == BinOp::Div ? dm->first : dm->second);
      }
      case BinOp::Lt: return boolean(a < b);
      case BinOp::Le: return boolean(a <= b);
      case BinOp::Gt: return boolean(a > b);
      case BinOp::Ge: return boolean(a >= b);
      default: break;
    }
    throw InternalError("unhandled operator");
  }

 public:
  static std::optional<std::pair<std::int64_t, std::int64_t>> euclid(std::int64_t a, std::int64_t b) {
    return euclid_divmod(a, b);
  }

 private:
  /// Three-valued quantifier: a decisive witness settles it; an exhausted
  /// infinite domain yields Unknown unless bounded_domains holds.
  MaybeValue quantify(bool universal, bool finite, const std::function<MaybeValue(std::size_t)>& at,
                      std::size_t count) {
    bool unknown = false;
    for (std::size_t k = 0; k < count; ++k) {
      MaybeValue v = at(k);
      if (!v) {
        unknown = true;
        continue;
      }
      if (as_bool(*v) != universal) return boolean(!universal);
    }
    if (unknown) return std::nullopt;
    if (!finite && !ctx_.bounds.bounded_domains) return std::nullopt;
    return boolean(universal);
  }

  MaybeValue value_quantifier(const Expr& e, bool in_old) {
    bool universal = e->kind == ExprNode::Kind::Forall;
    Type t = close(e->bound_type);
    const Expr& body = e->args[0];
    if (!uses_bound(body, 0)) {
      bound_.push_back(default_value(t));
      MaybeValue v = go(body, in_old);
      bound_.pop_back();
      return v;
    }
    std::vector<Value> domain;
    bool finite = false;
    if (t.is_bool()) {
      domain = {Value::boolean(false), Value::boolean(true)};
      finite = true;
    } else if (t.is_int()) {
      for (std::int64_t k = ctx_.bounds.int_min; k <= ctx_.bounds.int_max; ++k) domain.push_back(Value::integer(k));
    } else {
      for (std::uint32_t k = 0; k < ctx_.bounds.abstract_count; ++k) domain.push_back(Value::abstract(t, k));
    }
    return quantify(
        universal, finite,
        [&](std::size_t k) {
          bound_.push_back(domain[k]);
          MaybeValue v = go(body, in_old);
          bound_.pop_back();
          return v;
        },
        domain.size());
  }

  MaybeValue type_quantifier(const Expr& e, bool in_old) {
    bool universal = e->kind == ExprNode::Kind::ForallType;
    const Expr& body = e->args[0];
    auto with_type = [&](const Type& t) {
      tenv_.push_back(t);
      MaybeValue v = go(body, in_old);
      tenv_.pop_back();
      return v;
    };
    if (!uses_type_var(body, 0)) return with_type(Type::integer());
    const auto& types = ctx_.closed_types();
    return quantify(
        universal, false, [&](std::size_t k) { return with_type(types[k]); }, types.size());
  }

  const Context& ctx_;
  const NormalState& ns_;
  std::vector<Value> bound_;  // innermost last
  std::vector<Type> tenv_;    // innermost last
};

}  // namespace detail

/// Evaluates `e` in normal state `ns`; nullopt is the Unknown outcome.
inline MaybeValue eval_expr(const Context& ctx, const NormalState& ns, const Expr& e) {
  return detail::Evaluator(ctx, ns).eval(e);
}

// ---------------------------------------------------------------------------
// Value sources
// ---------------------------------------------------------------------------

/// Draws a well-typed value, biased towards 0, 1 and -1 for integers.
inline Value sample_value(const Context& ctx, const Type& t, std::mt19937_64& rng) {
  if (t.is_bool()) return Value::boolean((rng() & 1) != 0);
  if (t.is_int()) {
    if (rng() % 2 == 0) {
      static const std::int64_t small[] = {0, 1, -1};
      return Value::integer(small[rng() % 3]);
    }
    auto span = static_cast<std::uint64_t>(ctx.bounds.int_max - ctx.bounds.int_min + 1);
    return Value::integer(ctx.bounds.int_min + static_cast<std::int64_t>(rng() % span));
  }
  if (!is_closed(t)) throw InternalError("cannot sample a value of open type " + to_string(t));
  return Value::abstract(t, static_cast<std::uint32_t>(rng() % std::max<std::uint32_t>(ctx.bounds.abstract_count, 1)));
}

class HavocSource {
 public:
  virtual ~HavocSource() = default;
  virtual Value next(const std::string& var, const Type& type) = 0;
};

class RandomHavoc : public HavocSource {
 public:
  RandomHavoc(const Context& ctx, std::uint64_t seed) : ctx_(ctx), rng_(seed) {}
  Value next(const std::string&, const Type& type) override { return sample_value(ctx_, type, rng_); }
  std::mt19937_64& rng() { return rng_; }

 private:
  const Context& ctx_;
  std::mt19937_64 rng_;
};

/// Replays recorded values per variable in FIFO order, falling back to
/// `fallback` (or the type's default value) once a queue is empty.
class ScriptedHavoc : public HavocSource {
 public:
  explicit ScriptedHavoc(HavocSource* fallback = nullptr) : fallback_(fallback) {}
  void push(const std::string& var, Value v) { queues_[var].push_back(std::move(v)); }
  Value next(const std::string& var, const Type& type) override {
    auto it = queues_.find(var);
    if (it != queues_.end() && !it->second.empty()) {
      Value v = it->second.front();
      it->second.pop_front();
      return v;
    }
    return fallback_ ? fallback_->next(var, type) : default_value(type);
  }

 private:
  std::map<std::string, std::deque<Value>> queues_;
  HavocSource* fallback_;
};

class RecordingHavoc : public HavocSource {
 public:
  explicit RecordingHavoc(HavocSource& inner) : inner_(inner) {}
  Value next(const std::string& var, const Type& type) override {
    Value v = inner_.next(var, type);
    log_.emplace_back(var, v);
    return v;
  }
  [[nodiscard]] const std::vector<std::pair<std::string, Value>>& log() const { return log_; }
  void clear() { log_.clear(); }

 private:
  HavocSource& inner_;
  std::vector<std::pair<std::string, Value>> log_;
};

// ---------------------------------------------------------------------------
// Commands, blocks, CFGs
// ---------------------------------------------------------------------------

inline void set_var(const Context& ctx, NormalState& ns, const std::string& x, Value v) {
  if (ctx.vars.locals.count(x)) {
    ns.locals.set(x, std::move(v));
  } else if (ctx.vars.globals.count(x)) {
    ns.globals.set(x, std::move(v));
  } else {
    throw InternalError("assignment to undeclared variable " + x);
  }
}

inline const Type& var_type(const Context& ctx, const std::string& x) {
  const VarDecl* d = ctx.vars.find(x);
  if (!d) throw InternalError("undeclared variable " + x);
  return d->type;
}

/// Executes one command in place. Failure, Magic and Stuck are absorbing.
inline void exec_cmd_inplace(const Context& ctx, ExecState& s, const Command& c, HavocSource& havoc) {
  if (!s.is_normal()) return;
  switch (c.kind) {
    case Command::Kind::Assume:
    case Command::Kind::Assert: {
      MaybeValue v = eval_expr(ctx, s.ns, c.expr);
      if (!v) {
        s = ExecState::stuck();
      } else if (v->kind != Value::Kind::Bool) {
        throw InternalError("non-boolean guard");
      } else if (!v->b) {
        s = c.kind == Command::Kind::Assume ? ExecState::magic() : ExecState::failure();
      }
      return;
    }
    case Command::Kind::Assign: {
      MaybeValue v = eval_expr(ctx, s.ns, c.expr);
      if (!v) {
        s = ExecState::stuck();
        return;
      }
      set_var(ctx, s.ns, c.var, std::move(*v));
      return;
    }
    case Command::Kind::Havoc:
      set_var(ctx, s.ns, c.var, havoc.next(c.var, var_type(ctx, c.var)));
      return;
  }
}

inline ExecState exec_cmd(const Context& ctx, ExecState s, const Command& c, HavocSource& havoc) {
  exec_cmd_inplace(ctx, s, c, havoc);
  return s;
}

inline ExecState exec_block(const Context& ctx, ExecState s, const std::vector<Command>& cs, HavocSource& havoc) {
  for (const auto& c : cs) {
    if (!s.is_normal()) break;
    exec_cmd_inplace(ctx, s, c, havoc);
  }
  return s;
}

struct Configuration {
  std::optional<BlockId> at;  // nullopt is Done
  ExecState state;
  [[nodiscard]] bool done() const { return !at.has_value(); }
};

/// One CFG step: runs the block, then fans out to every successor.
inline std::vector<Configuration> step_cfg(const Context& ctx, const Cfg& g, const Configuration& conf,
                                           HavocSource& havoc) {
  if (conf.done()) throw MalformedInput("step_cfg on a final configuration");
  if (!conf.state.is_normal()) return {Configuration{std::nullopt, conf.state}};
  ExecState s = exec_block(ctx, conf.state, g.block(*conf.at).commands, havoc);
  const auto& succ = g.succs(*conf.at);
  if (!s.is_normal() || succ.empty()) return {Configuration{std::nullopt, std::move(s)}};
  std::vector<Configuration> out;
  out.reserve(succ.size());
  for (BlockId b : succ) out.push_back(Configuration{b, s});
  return out;
}

// ---------------------------------------------------------------------------
// Well-typedness and state sampling
// ---------------------------------------------------------------------------

inline bool well_typed(const Context& ctx, const NormalState& ns) {
  auto check = [&](const VarStore& store, bool locals) {
    for (const auto& [name, v] : store) {
      const auto& decls = locals ? ctx.vars.locals : ctx.vars.globals;
      auto it = decls.find(name);
      if (it == decls.end() || value_type(v) != it->second.type) return false;
    }
    return true;
  };
  if (!check(ns.globals, false) || !check(ns.old_globals, false) || !check(ns.locals, true)) return false;
  for (const auto& [name, d] : ctx.vars.globals) {
    if (!ns.globals.contains(name)) return false;
  }
  for (const auto& [name, d] : ctx.vars.locals) {
    if (!ns.locals.contains(name)) return false;
  }
  return true;
}

/// The state restricted to constants, as seen by axioms.
inline NormalState constants_only(const Context& ctx, const NormalState& ns) {
  NormalState out;
  for (const auto& [name, v] : ns.globals) {
    if (ctx.vars.is_constant(name)) {
      out.globals.set(name, v);
      out.old_globals.set(name, v);
    }
  }
  return out;
}

/// True iff every axiom evaluates to true (Unknown counts as not satisfied).
inline bool axioms_hold(const Context& ctx, const NormalState& ns) {
  NormalState restricted = constants_only(ctx, ns);
  for (const auto& a : ctx.program->axioms) {
    MaybeValue v = eval_expr(ctx, restricted, a);
    if (!v || !v->b) return false;
  }
  return true;
}

/// Random well-typed state; pre-state globals equal the current globals.
inline NormalState sample_state(const Context& ctx, std::mt19937_64& rng) {
  NormalState ns;
  for (const auto& [name, d] : ctx.vars.globals) ns.globals.set(name, sample_value(ctx, d.type, rng));
  for (const auto& [name, d] : ctx.vars.locals) ns.locals.set(name, sample_value(ctx, d.type, rng));
  ns.old_globals = ns.globals;
  return ns;
}

// ---------------------------------------------------------------------------
// Procedure correctness oracle
// ---------------------------------------------------------------------------

struct TraceStep {
  BlockId block = 0;
  std::optional<std::size_t> command;  // nullopt for the initial line
  std::string delta;
};

struct Trace {
  NormalState initial;
  std::uint64_t interp_seed = 0;
  std::vector<BlockId> blocks;
  std::vector<std::pair<std::string, Value>> havoc_values;  // in execution order
  std::vector<TraceStep> steps;
  std::string reason;  // failing assert or postcondition

  [[nodiscard]] std::string dump() const {
    std::ostringstream os;
    for (const auto& s : steps) {
      os << "B" << s.block << " | " << (s.command ? std::to_string(*s.command) : std::string("init")) << " | "
         << s.delta << "\n";
    }
    return os.str();
  }
};

struct CheckOptions {
  std::size_t samples = 200;
  std::size_t fuel = 10000;  // block executions per sample
  std::uint64_t seed = 0;
  std::size_t axiom_attempts = 64;
};

struct Verdict {
  enum class Kind : std::uint8_t { NoFailureFound, FailingTrace, OracleIncomplete, NoInitialState };
  Kind kind = Kind::NoFailureFound;
  std::optional<Trace> trace;
  std::size_t unknown_count = 0;   // stuck traces or undecided preconditions
  std::size_t samples_run = 0;     // samples whose initial state satisfied pre
  std::size_t fuel_exhausted = 0;  // samples cut off by fuel
  std::string message;
};

inline const char* to_string(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::NoFailureFound: return "NoFailureFound";
    case Verdict::Kind::FailingTrace: return "FailingTrace";
    case Verdict::Kind::OracleIncomplete: return "OracleIncomplete";
    case Verdict::Kind::NoInitialState: return "NoInitialState";
  }
  return "?";
}

namespace detail {

inline std::string state_delta(const NormalState& before, const NormalState& after) {
  std::string out;
  auto diff = [&](const VarStore& a, const VarStore& b) {
    for (const auto& [k, v] : b) {
      const Value* old = a.find(k);
      if (!old || *old != v) {
        if (!out.empty()) out += ", ";
        out += k + "=" + to_string(v);
      }
    }
  };
  diff(before.globals, after.globals);
  diff(before.locals, after.locals);
  return out.empty() ? "-" : out;
}

/// Re-executes a recorded path command by command to build the trace dump.
inline void render_trace(const Context& ctx, const Cfg& g, Trace& t,
                         const std::vector<std::vector<std::pair<std::string, Value>>>& havocs) {
  ScriptedHavoc script;
  for (const auto& per_block : havocs) {
    for (const auto& [var, v] : per_block) script.push(var, v);
  }
  ExecState s = ExecState::normal(t.initial);
  std::string init;
  for (const auto& [k, v] : t.initial.globals) init += (init.empty() ? "" : ", ") + k + "=" + to_string(v);
  for (const auto& [k, v] : t.initial.locals) init += (init.empty() ? "" : ", ") + k + "=" + to_string(v);
  t.steps.push_back(TraceStep{t.blocks.empty() ? g.entry : t.blocks.front(), std::nullopt, init.empty() ? "-" : init});
  for (BlockId b : t.blocks) {
    const auto& cmds = g.block(b).commands;
    for (std::size_t k = 0; k < cmds.size() && s.is_normal(); ++k) {
      NormalState before = s.ns;
      exec_cmd_inplace(ctx, s, cmds[k], script);
      std::string delta = s.is_normal() ? state_delta(before, s.ns) : std::string(to_string(s.kind));
      t.steps.push_back(TraceStep{b, k, delta});
    }
  }
}

}  // namespace detail

/// Samples context-respecting initial states that satisfy the precondition
/// and explores their traces depth first, looking for a failing one.
inline Verdict check_procedure(const Context& base, const Procedure& proc, const CheckOptions& opts = {}) {
  Verdict verdict;
  std::mt19937_64 rng(opts.seed);
  const Cfg& g = proc.body;
  std::size_t rejected_axioms = 0;
  for (std::size_t sample = 0; sample < opts.samples; ++sample) {
    Context ctx = base;
    NormalState ns;
    bool found = false;
    for (std::size_t attempt = 0; attempt < opts.axiom_attempts; ++attempt) {
      ctx.interp_seed = base.interp_seed + rng();
      ns = sample_state(ctx, rng);
      if (axioms_hold(ctx, ns)) {
        found = true;
        break;
      }
    }
    if (!found) {
      ++rejected_axioms;
      continue;
    }
    MaybeValue pre = eval_expr(ctx, ns, proc.pre);
    if (!pre) {
      ++verdict.unknown_count;
      continue;
    }
    if (!pre->b) continue;
    ++verdict.samples_run;

    struct Frame {
      BlockId block;
      ExecState state;
      std::size_t depth;
      std::vector<std::pair<std::string, Value>> havocs;  // drawn on entry to `block`
      std::size_t parent;
    };
    RandomHavoc random(ctx, rng());
    std::vector<Frame> frames;  // all frames, for path reconstruction
    std::vector<std::size_t> stack;
    frames.push_back(Frame{g.entry, ExecState::normal(ns), 0, {}, SIZE_MAX});
    stack.push_back(0);
    std::size_t fuel = opts.fuel;
    bool failed = false;
    std::size_t fail_frame = 0;
    std::string reason;
    while (!stack.empty() && !failed) {
      if (fuel == 0) {
        ++verdict.fuel_exhausted;
        break;
      }
      --fuel;
      std::size_t fi = stack.back();
      stack.pop_back();
      RecordingHavoc rec(random);
      ExecState s = exec_block(ctx, frames[fi].state, g.block(frames[fi].block).commands, rec);
      frames[fi].havocs = rec.log();
      if (s.is_stuck()) {
        ++verdict.unknown_count;
        continue;
      }
      if (s.is_magic()) continue;
      if (s.is_failure()) {
        failed = true;
        fail_frame = fi;
        reason = "assertion failure";
        break;
      }
      const auto& succ = g.succs(frames[fi].block);
      if (succ.empty()) {
        MaybeValue post = eval_expr(ctx, s.ns, proc.post);
        if (!post) {
          ++verdict.unknown_count;
        } else if (!post->b) {
          failed = true;
          fail_frame = fi;
          reason = "postcondition violated";
        }
        continue;
      }
      std::vector<BlockId> order(succ.begin(), succ.end());
      std::shuffle(order.begin(), order.end(), rng);
      // Pushed in reverse so the first shuffled successor is explored first.
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        frames.push_back(Frame{*it, s, frames[fi].depth + 1, {}, fi});
        stack.push_back(frames.size() - 1);
      }
    }
    if (failed) {
      Trace t;
      t.initial = ns;
      t.interp_seed = ctx.interp_seed;
      t.reason = reason;
      std::vector<std::size_t> path;
      for (std::size_t f = fail_frame; f != SIZE_MAX; f = frames[f].parent) path.push_back(f);
      std::reverse(path.begin(), path.end());
      std::vector<std::vector<std::pair<std::string, Value>>> havocs;
      for (std::size_t f : path) {
        t.blocks.push_back(frames[f].block);
        havocs.push_back(frames[f].havocs);
        t.havoc_values.insert(t.havoc_values.end(), frames[f].havocs.begin(), frames[f].havocs.end());
      }
      detail::render_trace(ctx, g, t, havocs);
      verdict.kind = Verdict::Kind::FailingTrace;
      verdict.trace = std::move(t);
      return verdict;
    }
  }
  if (verdict.samples_run == 0 && rejected_axioms > 0) {
    verdict.kind = Verdict::Kind::NoInitialState;
    verdict.message = "no initial state satisfying the axioms was found";
    return verdict;
  }
  if (verdict.unknown_count > 0) {
    verdict.kind = Verdict::Kind::OracleIncomplete;
    verdict.message = std::to_string(verdict.unknown_count) + " undecided evaluation(s)";
    return verdict;
  }
  if (verdict.samples_run == 0) verdict.message = "no initial state satisfied the precondition";
  return verdict;
}

/// Replays a failing trace and reports whether it still fails.
inline bool replay_trace(const Context& base, const Procedure& proc, const Trace& t) {
  Context ctx = base;
  ctx.interp_seed = t.interp_seed;
  ScriptedHavoc script;
  for (const auto& [var, v] : t.havoc_values) script.push(var, v);
  ExecState s = ExecState::normal(t.initial);
  for (BlockId b : t.blocks) s = exec_block(ctx, s, proc.body.block(b).commands, script);
  if (s.is_failure()) return true;
  if (s.is_normal() && !t.blocks.empty() && proc.body.succs(t.blocks.back()).empty()) {
    MaybeValue post = eval_expr(ctx, s.ns, proc.post);
    return post && !post->b;
  }
  return false;
}

}  // namespace ivl
