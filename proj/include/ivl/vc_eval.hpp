#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ivl/fold.hpp"
#include "ivl/semantics.hpp"
#include "ivl/vc.hpp"

namespace ivl {

/// A VC-level value in the bridge model: sort V is Value, sort T is a closed
/// Type, and the builtin sorts are themselves.
struct VcValue {
  VcSort sort = VcSort::Bool;
  Value v;
  Type t;
  std::int64_t i = 0;
  bool b = false;

  static VcValue of_value(Value x) {
    VcValue out;
    out.sort = VcSort::V;
    out.v = std::move(x);
    return out;
  }
  static VcValue of_type(Type x) {
    VcValue out;
    out.sort = VcSort::T;
    out.t = std::move(x);
    return out;
  }
  static VcValue of_int(std::int64_t x) {
    VcValue out;
    out.sort = VcSort::Int;
    out.i = x;
    return out;
  }
  static VcValue of_bool(bool x) {
    VcValue out;
    out.sort = VcSort::Bool;
    out.b = x;
    return out;
  }
};

inline bool operator==(const VcValue& a, const VcValue& b) {
  if (a.sort != b.sort) return false;
  switch (a.sort) {
    case VcSort::V: return a.v == b.v;
    case VcSort::T: return a.t == b.t;
    case VcSort::Int: return a.i == b.i;
    case VcSort::Bool: return a.b == b.b;
  }
  return false;
}

using MaybeVc = std::optional<VcValue>;

/// Value-symbol interpretation (names without the `x@` prefix) plus the
/// named definitions of a script.
struct VcModel {
  std::map<std::string, Value> values;
  std::map<std::string, VcTerm> definitions;
};

inline VcModel model_of(const VcScript& s) {
  VcModel m;
  for (const auto& [n, d] : s.definitions) m.definitions[n] = d;
  return m;
}

namespace detail {

class VcEvaluator {
 public:
  VcEvaluator(const Context& ctx, const VcModel& model) : ctx_(ctx), model_(model) {}

  MaybeVc eval(const VcTerm& t) { return go(t); }

 private:
  using K = VcNode::Kind;

  MaybeVc go(const VcTerm& t) {
    switch (t->kind) {
      case K::IntLit: return VcValue::of_int(t->int_value);
      case K::BoolLit: return VcValue::of_bool(t->bool_value);
      case K::Sym: return symbol(t->name);
      case K::App: return apply(t);
      case K::Forall:
      case K::Exists: return quantifier(t, 0);
    }
    throw InternalError("unknown VC term");
  }

  MaybeVc symbol(const std::string& n) {
    for (auto it = bound_.rbegin(); it != bound_.rend(); ++it) {
      if (it->first == n) return it->second;
    }
    if (n == "TInt") return VcValue::of_type(Type::integer());
    if (n == "TBool") return VcValue::of_type(Type::boolean());
    if (n.rfind("C@", 0) == 0) return VcValue::of_type(Type::con(n.substr(2)));
    if (n.rfind("x@", 0) == 0) {
      auto it = model_.values.find(n.substr(2));
      if (it == model_.values.end()) throw InternalError("no value for " + n);
      return VcValue::of_value(it->second);
    }
    if (n.rfind("F@", 0) == 0) return VcValue::of_value(function(n.substr(2), {}, {}));
    auto d = model_.definitions.find(n);
    if (d != model_.definitions.end()) {
      auto memo = memo_.find(n);
      if (memo != memo_.end()) return memo->second;
      MaybeVc v = go(d->second);
      memo_[n] = v;
      return v;
    }
    throw InternalError("unknown VC symbol " + n);
  }

  Value function(const std::string& f, const std::vector<Type>& types, const std::vector<Value>& args) {
    const FunctionDecl* d = ctx_.program->find_function(f);
    if (!d) throw InternalError("unknown function " + f);
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (value_type(args[i]) != substitute_types(d->arg_types[i], types)) {
        return default_value(substitute_types(d->result, types));
      }
    }
    return ctx_.apply_function(f, types, args);
  }

  MaybeVc apply(const VcTerm& t) {
    const std::string& op = t->name;
    if (op == "and" || op == "or") {
      bool conj = op == "and";
      bool unknown = false;
      for (const auto& a : t->args) {
        MaybeVc v = go(a);
        if (!v) {
          unknown = true;
        } else if (v->b != conj) {
          return VcValue::of_bool(!conj);
        }
      }
      if (unknown) return std::nullopt;
      return VcValue::of_bool(conj);
    }
    if (op == "=>") {
      MaybeVc l = go(t->args[0]);
      if (l && !l->b) return VcValue::of_bool(true);
      MaybeVc r = go(t->args[1]);
      if (r && r->b) return VcValue::of_bool(true);
      if (!l || !r) return std::nullopt;
      return VcValue::of_bool(false);
    }
    if (op == "ite") {
      MaybeVc c = go(t->args[0]);
      if (!c) return std::nullopt;
      return go(t->args[c->b ? 1 : 2]);
    }
    std::vector<VcValue> a;
    for (const auto& x : t->args) {
      MaybeVc v = go(x);
      if (!v) return std::nullopt;
      a.push_back(std::move(*v));
    }
    if (op == "not") return VcValue::of_bool(!a[0].b);
    if (op == "=") return VcValue::of_bool(a[0] == a[1]);
    if (op == "distinct") {
      for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
          if (a[i] == a[j]) return VcValue::of_bool(false);
        }
      }
      return VcValue::of_bool(true);
    }
    if (op == "-" && a.size() == 1) {
      if (a[0].i == INT64_MIN) return std::nullopt;
      return VcValue::of_int(-a[0].i);
    }
    if (op == "+" || op == "-" || op == "*") {
      std::int64_t out = 0;
      bool overflow = op == "+"   ? __builtin_add_overflow(a[0].i, a[1].i, &out)
                      : op == "-" ? __builtin_sub_overflow(a[0].i, a[1].i, &out)
                                  : __builtin_mul_overflow(a[0].i, a[1].i, &out);
      if (overflow) return std::nullopt;
      return VcValue::of_int(out);
    }
    if (op == "div" || op == "mod") {
      auto dm = euclid_divmod(a[0].i, a[1].i);
      if (!dm) return std::nullopt;
      return VcValue::of_int(op == "div" ? dm->first : dm->second);
    }
    if (op == "<") return VcValue::of_bool(a[0].i < a[1].i);
    if (op == "<=") return VcValue::of_bool(a[0].i <= a[1].i);
    if (op == ">") return VcValue::of_bool(a[0].i > a[1].i);
    if (op == ">=") return VcValue::of_bool(a[0].i >= a[1].i);
    if (op == "typeof") return VcValue::of_type(value_type(a[0].v));
    if (op == "int2v") return VcValue::of_value(Value::integer(a[0].i));
    if (op == "bool2v") return VcValue::of_value(Value::boolean(a[0].b));
    if (op == "v2int") return VcValue::of_int(a[0].v.kind == Value::Kind::Int ? a[0].v.i : 0);
    if (op == "v2bool") return VcValue::of_bool(a[0].v.kind == Value::Kind::Bool && a[0].v.b);
    if (op.rfind("C@", 0) == 0) {
      std::vector<Type> args;
      for (auto& x : a) args.push_back(x.t);
      return VcValue::of_type(Type::con(op.substr(2), std::move(args)));
    }
    if (op.rfind("P@", 0) == 0) {
      auto at = op.rfind('@');
      std::string con = op.substr(2, at - 2);
      std::size_t idx = std::stoul(op.substr(at + 1));
      const Type& arg = a[0].t;
      if (arg.kind == Type::Kind::Con && arg.name == con && idx >= 1 && idx <= arg.args.size()) {
        return VcValue::of_type(arg.args[idx - 1]);
      }
      return VcValue::of_type(Type::integer());
    }
    if (op.rfind("F@", 0) == 0) {
      std::string f = op.substr(2);
      const FunctionDecl* d = ctx_.program->find_function(f);
      if (!d) throw InternalError("unknown function " + f);
      std::vector<Type> types;
      std::vector<Value> vals;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (i < d->type_params) {
          types.push_back(a[i].t);
        } else {
          vals.push_back(a[i].v);
        }
      }
      return VcValue::of_value(function(f, types, vals));
    }
    throw InternalError("unknown VC function " + op);
  }

  // A binder over V guarded by `typeof(x) = E` ranges over values of E only.
  std::optional<Type> guard_type(const VcTerm& body, const std::string& x, bool universal) {
    if (body->kind != K::App || body->name != (universal ? "=>" : "and") || body->args.size() != 2) return std::nullopt;
    const VcTerm& g = body->args[0];
    if (g->kind != K::App || g->name != "=" || g->args[0]->kind != K::App || g->args[0]->name != "typeof") {
      return std::nullopt;
    }
    const VcTerm& arg = g->args[0]->args[0];
    if (arg->kind != K::Sym || arg->name != x) return std::nullopt;
    MaybeVc t = go(g->args[1]);
    if (!t) return std::nullopt;
    return t->t;
  }

  std::vector<VcValue> values_of(const Type& t) {
    std::vector<VcValue> out;
    if (t.is_bool()) {
      out = {VcValue::of_value(Value::boolean(false)), VcValue::of_value(Value::boolean(true))};
    } else if (t.is_int()) {
      for (std::int64_t k = ctx_.bounds.int_min; k <= ctx_.bounds.int_max; ++k) {
        out.push_back(VcValue::of_value(Value::integer(k)));
      }
    } else {
      for (std::uint32_t k = 0; k < ctx_.bounds.abstract_count; ++k) {
        out.push_back(VcValue::of_value(Value::abstract(t, k)));
      }
    }
    return out;
  }

  MaybeVc quantifier(const VcTerm& t, std::size_t first) {
    bool universal = t->kind == K::Forall;
    if (first == t->binders.size()) return go(t->args[0]);
    const auto& [name, sort] = t->binders[first];
    std::vector<VcValue> domain;
    bool finite = false;
    switch (sort) {
      case VcSort::Bool:
        domain = {VcValue::of_bool(false), VcValue::of_bool(true)};
        finite = true;
        break;
      case VcSort::Int:
        for (std::int64_t k = ctx_.bounds.int_min; k <= ctx_.bounds.int_max; ++k) domain.push_back(VcValue::of_int(k));
        break;
      case VcSort::T:
        for (const auto& ty : ctx_.closed_types()) domain.push_back(VcValue::of_type(ty));
        break;
      case VcSort::V: {
        std::optional<Type> g;
        if (t->binders.size() == 1) g = guard_type(t->args[0], name, universal);
        if (g) {
          domain = values_of(*g);
          finite = g->is_bool();
        } else {
          for (const auto& ty : ctx_.closed_types()) {
            auto vs = values_of(ty);
            domain.insert(domain.end(), vs.begin(), vs.end());
          }
        }
        break;
      }
    }
    bool unknown = false;
    for (const auto& v : domain) {
      bound_.emplace_back(name, v);
      MaybeVc r = quantifier(t, first + 1);
      bound_.pop_back();
      if (!r) {
        unknown = true;
      } else if (r->b != universal) {
        return VcValue::of_bool(!universal);
      }
    }
    if (unknown || (!finite && !ctx_.bounds.bounded_domains)) return std::nullopt;
    return VcValue::of_bool(universal);
  }

  const Context& ctx_;
  const VcModel& model_;
  std::vector<std::pair<std::string, VcValue>> bound_;
  std::map<std::string, MaybeVc> memo_;
};

}  // namespace detail

/// Evaluates a VC term in the bridge model. Named definitions are evaluated
/// on demand and cached for the lifetime of the call.
inline MaybeVc eval_vc(const Context& ctx, const VcModel& model, const VcTerm& t) {
  return detail::VcEvaluator(ctx, model).eval(t);
}

/// Truth of a formula; nullopt is Unknown.
inline std::optional<bool> eval_formula(const Context& ctx, const VcModel& model, const VcTerm& t) {
  MaybeVc v = eval_vc(ctx, model, t);
  if (!v) return std::nullopt;
  if (v->sort != VcSort::Bool) throw InternalError("formula expected");
  return v->b;
}

}  // namespace ivl
