#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "ivl/core_ir.hpp"

namespace ivl {

/// Euclidean division: the remainder is always non-negative. `x div 0 = 0`
/// and `x mod 0 = x`. Empty on overflow.
inline std::optional<std::pair<std::int64_t, std::int64_t>> euclid_divmod(std::int64_t a, std::int64_t b) {
  if (b == 0) return std::make_pair(std::int64_t{0}, a);
  if (a == INT64_MIN && b == -1) return std::nullopt;
  std::int64_t q = a / b, r = a % b;
  if (r < 0) {
    if (b > 0) {
      q -= 1;
      r += b;
    } else {
      q += 1;
      r -= b;
    }
  }
  return std::make_pair(q, r);
}

namespace detail {

inline Expr fold_node(const Expr& n) {
  using K = ExprNode::Kind;
  if (n->kind == K::Unary && is_literal(n->args[0])) {
    const Expr& a = n->args[0];
    if (n->unop == UnOp::Not && a->kind == K::BoolLit) return ex::boolean(!a->bool_value);
    if (n->unop == UnOp::Neg && a->kind == K::IntLit && a->int_value != INT64_MIN) return ex::integer(-a->int_value);
    return nullptr;
  }
  if (n->kind != K::Binary || !is_literal(n->args[0]) || !is_literal(n->args[1])) return nullptr;
  const Expr& l = n->args[0];
  const Expr& r = n->args[1];
  if (l->kind == K::BoolLit && r->kind == K::BoolLit) {
    bool a = l->bool_value, b = r->bool_value;
    switch (n->binop) {
      case BinOp::And: return ex::boolean(a && b);
      case BinOp::Or: return ex::boolean(a || b);
      case BinOp::Imp: return ex::boolean(!a || b);
      case BinOp::Iff:
      case BinOp::Eq: return ex::boolean(a == b);
      case BinOp::Neq: return ex::boolean(a != b);
      default: return nullptr;
    }
  }
  if (l->kind != K::IntLit || r->kind != K::IntLit) return nullptr;
  std::int64_t a = l->int_value, b = r->int_value, out = 0;
  switch (n->binop) {
    case BinOp::Add:
      if (__builtin_add_overflow(a, b, &out)) return nullptr;
      return ex::integer(out);
    case BinOp::Sub:
      if (__builtin_sub_overflow(a, b, &out)) return nullptr;
      return ex::integer(out);
    case BinOp::Mul:
      if (__builtin_mul_overflow(a, b, &out)) return nullptr;
      return ex::integer(out);
    case BinOp::Div:
    case BinOp::Mod: {
      auto dm = euclid_divmod(a, b);
      if (!dm) return nullptr;
      return ex::integer(n->binop == BinOp::Div ? dm->first : dm->second);
    }
    case BinOp::Eq: return ex::boolean(a == b);
    case BinOp::Neq: return ex::boolean(a != b);
    case BinOp::Lt: return ex::boolean(a < b);
    case BinOp::Le: return ex::boolean(a <= b);
    case BinOp::Gt: return ex::boolean(a > b);
    case BinOp::Ge: return ex::boolean(a >= b);
    default: return nullptr;
  }
}

}  // namespace detail

/// Replaces every operator application whose operands are literals by its
/// value, bottom-up. Applications that would overflow are kept.
inline Expr fold_literals(const Expr& e) { return rewrite(e, detail::fold_node); }

}  // namespace ivl
