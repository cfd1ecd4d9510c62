#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ivl/core_ir.hpp"
#include "ivl/error.hpp"
#include "ivl/fold.hpp"
#include "ivl/graph.hpp"

namespace ivl {

/// Source variable name to target version name.
using VarRelation = std::map<std::string, std::string>;

struct VersionInfo {
  std::string var;
  Type type;
  std::uint64_t number = 0;
};

inline std::string version_name(std::uint64_t n) { return "v" + std::to_string(n); }

struct PassiveBlockInfo {
  VarRelation entry;
  VarRelation exit;
  std::vector<std::string> writes;                         // one per Assign/Havoc of the source block
  std::vector<std::pair<std::string, std::string>> syncs;  // (variable, join version)
  std::vector<std::string> defines;                        // per target command, empty if none
};

struct PassiveResult {
  Cfg source;  // the acyclic input after critical-edge splitting
  Cfg target;
  std::map<BlockId, PassiveBlockInfo> blocks;
  std::map<std::string, VersionInfo> versions;
  std::map<std::string, Expr> inlined;  // versions replaced by literals
  std::uint64_t version_count = 0;

  [[nodiscard]] std::uint64_t number(const std::string& v) const { return versions.at(v).number; }

  [[nodiscard]] std::vector<std::string> constrained(BlockId b) const {
    std::vector<std::string> out;
    for (const auto& d : blocks.at(b).defines) {
      if (!d.empty()) out.push_back(d);
    }
    return out;
  }

  /// Versions ordered by number, skipping the inlined ones.
  [[nodiscard]] std::vector<std::string> live_versions() const {
    std::vector<std::pair<std::uint64_t, std::string>> order;
    for (const auto& [name, info] : versions) {
      if (!inlined.count(name)) order.emplace_back(info.number, name);
    }
    std::sort(order.begin(), order.end());
    std::vector<std::string> out;
    for (auto& [_, n] : order) out.push_back(n);
    return out;
  }

  /// Every version as an immutable local, for typing passive expressions.
  [[nodiscard]] VarContext version_context() const {
    VarContext ctx;
    for (const auto& [name, info] : versions) ctx.locals[name] = VarDecl{name, info.type, false, {}};
    return ctx;
  }
};

/// Inserts an empty block on every edge whose source has several successors
/// and whose target has several predecessors. New blocks take fresh ids in
/// edge order; successor order is preserved.
inline Cfg split_critical_edges(const Cfg& g) {
  Cfg out = g;
  auto preds = g.predecessors();
  BlockId next = g.next_free_id();
  for (const auto& [from, tos] : g.successors) {
    if (tos.size() < 2) continue;
    for (std::size_t i = 0; i < tos.size(); ++i) {
      BlockId to = tos[i];
      if (preds[to].size() < 2) continue;
      BlockId mid = next++;
      out.blocks[mid] = Block{mid, "", {}};
      out.successors[mid] = {to};
      out.successors[from][i] = mid;
    }
  }
  return out;
}

/// Renames an expression into versions: variables by `current`, and globals
/// under old() by `entry`. The result contains no old().
inline Expr desugar_old(const Expr& e, const VarRelation& current, const VarRelation& entry,
                        const VarContext& vars, bool in_old = false) {
  using K = ExprNode::Kind;
  if (e->kind == K::Old) return desugar_old(e->args[0], current, entry, vars, true);
  if (e->kind == K::Var) {
    const VarRelation& rel = in_old && vars.is_global(e->name) ? entry : current;
    auto it = rel.find(e->name);
    if (it == rel.end()) throw InternalError("no version for '" + e->name + "'");
    ExprNode n = *e;
    n.name = it->second;
    return ex::make(std::move(n));
  }
  if (e->args.empty()) return e;
  ExprNode n = *e;
  bool changed = false;
  for (auto& a : n.args) {
    Expr r = desugar_old(a, current, entry, vars, in_old);
    changed = changed || r != a;
    a = std::move(r);
  }
  return changed ? ex::make(std::move(n)) : e;
}

struct PassifyMutation {
  bool double_constrain = false;
  bool drop_sync = false;
};

inline Expr defining_equation(const std::string& version, const Type& t, Expr rhs) {
  Expr lhs = ex::var(version);
  return t.kind == Type::Kind::Bool ? ex::iff(std::move(lhs), std::move(rhs)) : ex::eq(std::move(lhs), std::move(rhs));
}

inline PassiveResult passify(const Cfg& dag, const VarContext& vars, PassifyMutation mut = {}) {
  PassiveResult r;
  r.source = split_critical_edges(dag);
  const Cfg& src = r.source;
  auto order = graph::topological_order(src);
  if (!order) throw InternalError("passify requires an acyclic control flow graph");
  auto fresh = [&](const std::string& var) {
    std::string name = version_name(r.version_count);
    r.versions[name] = VersionInfo{var, vars.find(var)->type, r.version_count};
    ++r.version_count;
    return name;
  };

  std::vector<std::string> names;
  for (const VarDecl* d : vars.all()) names.push_back(d->name);
  std::sort(names.begin(), names.end());
  VarRelation initial;
  for (const auto& n : names) initial[n] = fresh(n);

  auto preds = src.predecessors();
  r.target.entry = src.entry;
  bool sync_dropped = false;
  for (BlockId b : *order) {
    PassiveBlockInfo& info = r.blocks[b];
    if (b == src.entry) {
      info.entry = initial;
    } else {
      const auto& ps = preds.at(b);
      for (const auto& n : names) {
        std::set<std::string> seen;
        for (BlockId p : ps) seen.insert(r.blocks.at(p).exit.at(n));
        if (seen.size() == 1) {
          info.entry[n] = *seen.begin();
          continue;
        }
        std::string s = fresh(n);
        info.entry[n] = s;
        for (BlockId p : ps) {
          PassiveBlockInfo& pi = r.blocks.at(p);
          if (src.succs(p).size() != 1) throw InternalError("sync at a block with several successors");
          std::string prev = pi.exit.at(n);
          pi.exit[n] = s;
          pi.syncs.emplace_back(n, s);
          if (mut.drop_sync && !sync_dropped) {
            sync_dropped = true;
            continue;
          }
          r.target.block(p).commands.push_back(
              Command::assume(defining_equation(s, r.versions.at(s).type, ex::var(prev))));
          pi.defines.push_back(s);
        }
      }
    }

    VarRelation cur = info.entry;
    std::set<std::string> constrained_here;
    Block out{b, src.block(b).label, {}};
    for (const auto& c : src.block(b).commands) {
      switch (c.kind) {
        case Command::Kind::Assume:
        case Command::Kind::Assert: {
          Command t = c;
          t.expr = desugar_old(c.expr, cur, initial, vars);
          out.commands.push_back(std::move(t));
          info.defines.emplace_back();
          break;
        }
        case Command::Kind::Assign: {
          Expr rhs = desugar_old(c.expr, cur, initial, vars);
          std::string v;
          if (mut.double_constrain && constrained_here.count(cur.at(c.var))) {
            v = cur.at(c.var);
          } else {
            v = fresh(c.var);
          }
          out.commands.push_back(Command::assume(defining_equation(v, r.versions.at(v).type, rhs)));
          info.defines.push_back(v);
          info.writes.push_back(v);
          constrained_here.insert(v);
          cur[c.var] = v;
          break;
        }
        case Command::Kind::Havoc: {
          std::string v = fresh(c.var);
          info.writes.push_back(v);
          cur[c.var] = v;
          break;
        }
      }
    }
    info.exit = cur;
    r.target.blocks[b] = std::move(out);
    r.target.successors[b] = src.succs(b);
  }
  return r;
}

/// Inlines versions whose only constraint is an equation with a literal,
/// dropping that equation, and folds literal operator applications. Repeats
/// to a fixpoint.
inline PassiveResult propagate_constants(PassiveResult r) {
  for (;;) {
    std::map<std::string, int> count;
    for (const auto& [b, info] : r.blocks) {
      for (const auto& d : info.defines) {
        if (!d.empty()) ++count[d];
      }
    }
    std::map<std::string, Expr> subst;
    for (auto& [b, info] : r.blocks) {
      auto& cmds = r.target.block(b).commands;
      for (std::size_t i = 0; i < cmds.size(); ++i) {
        const std::string& d = info.defines[i];
        if (d.empty() || count[d] != 1) continue;
        const Expr& e = cmds[i].expr;
        if (e->kind == ExprNode::Kind::Binary && e->args[0]->kind == ExprNode::Kind::Var && e->args[0]->name == d &&
            is_literal(e->args[1])) {
          subst[d] = e->args[1];
        }
      }
    }
    bool changed = !subst.empty();
    for (auto& [b, info] : r.blocks) {
      auto& cmds = r.target.block(b).commands;
      std::vector<Command> kept;
      std::vector<std::string> defs;
      for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (!info.defines[i].empty() && subst.count(info.defines[i])) continue;
        Command c = cmds[i];
        Expr e = rewrite(c.expr, [&](const Expr& n) -> Expr {
          if (n->kind == ExprNode::Kind::Var) {
            auto it = subst.find(n->name);
            if (it != subst.end()) return it->second;
          }
          return detail::fold_node(n);
        });
        changed = changed || e != c.expr;
        c.expr = e;
        kept.push_back(std::move(c));
        defs.push_back(info.defines[i]);
      }
      cmds = std::move(kept);
      info.defines = std::move(defs);
    }
    for (auto& [v, lit] : subst) r.inlined[v] = lit;
    if (!changed) return r;
  }
}

struct VersionOrderResult {
  bool ok = true;
  std::optional<BlockId> from;
  std::optional<BlockId> to;
  std::string message;
};

/// Checks that no block constrains a version twice, and that for every block
/// B'' reachable from B' every version constrained in B' is numbered below
/// every version constrained in B''.
inline VersionOrderResult check_version_order(const PassiveResult& r) {
  for (const auto& [b, _] : r.blocks) {
    std::set<std::string> seen;
    for (const auto& v : r.constrained(b)) {
      if (!seen.insert(v).second) {
        return {false, b, b, r.target.name_of(b) + " constrains " + v + " more than once"};
      }
    }
  }
  for (const auto& [b1, _] : r.blocks) {
    auto c1 = r.constrained(b1);
    if (c1.empty()) continue;
    std::uint64_t hi = 0;
    for (const auto& v : c1) hi = std::max(hi, r.number(v));
    std::set<BlockId> seen;
    std::vector<BlockId> stack(r.target.succs(b1).begin(), r.target.succs(b1).end());
    while (!stack.empty()) {
      BlockId b2 = stack.back();
      stack.pop_back();
      if (!seen.insert(b2).second) continue;
      for (const auto& v : r.constrained(b2)) {
        if (r.number(v) <= hi) {
          return {false, b1, b2,
                  r.target.name_of(b1) + " constrains a version numbered " + std::to_string(hi) + " but reachable " +
                      r.target.name_of(b2) + " constrains " + v};
        }
      }
      for (BlockId s : r.target.succs(b2)) stack.push_back(s);
    }
  }
  return {};
}

}  // namespace ivl
