#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ivl/core_ir.hpp"
#include "ivl/error.hpp"
#include "ivl/graph.hpp"

namespace ivl {

using Edge = std::pair<BlockId, BlockId>;

struct Loop {
  BlockId head = 0;
  std::set<BlockId> body;  // includes the head
  std::vector<BlockId> tails;
  std::size_t prefix_len = 0;  // number of leading asserts forming the invariant
  Expr invariant;               // conjunction of that prefix, `true` if empty
  std::set<std::string> modified;
};

struct LoopInfo {
  std::map<BlockId, Loop> loops;
  std::set<Edge> back_edges;
  std::map<BlockId, BlockId> idom;

  [[nodiscard]] bool empty() const { return loops.empty(); }
  [[nodiscard]] bool is_head(BlockId b) const { return loops.count(b) != 0; }
  [[nodiscard]] bool is_back_edge(BlockId from, BlockId to) const { return back_edges.count({from, to}) != 0; }
};

inline bool is_true_literal(const Expr& e) { return !e || (e->kind == ExprNode::Kind::BoolLit && e->bool_value); }

/// The body with the contract made explicit: a fresh entry block assuming the
/// precondition, and the postcondition asserted at the end of every exit
/// block. Trivial contracts leave the body unchanged.
inline Cfg body_with_contracts(const Procedure& proc) {
  Cfg g = proc.body;
  if (!is_true_literal(proc.post)) {
    for (auto& [id, b] : g.blocks) {
      if (g.succs(id).empty()) b.commands.push_back(Command::assert_(proc.post));
    }
  }
  if (!is_true_literal(proc.pre)) {
    BlockId e = g.next_free_id();
    g.blocks[e] = Block{e, "", {Command::assume(proc.pre)}};
    g.successors[e] = {g.entry};
    g.entry = e;
  }
  return g;
}

inline std::size_t leading_assert_count(const Block& b) {
  std::size_t n = 0;
  while (n < b.commands.size() && b.commands[n].kind == Command::Kind::Assert) ++n;
  return n;
}

inline LoopInfo analyze_loops(const Cfg& g) {
  g.validate();
  LoopInfo li;
  li.idom = graph::immediate_dominators(g);
  std::set<BlockId> live = graph::reachable(g, g.entry);

  for (BlockId b : live) {
    for (BlockId s : g.succs(b)) {
      if (graph::dominates(li.idom, s, b)) li.back_edges.insert({b, s});
    }
  }
  // With back-edges removed the graph must be acyclic, otherwise some cycle
  // has an entry that does not dominate its source.
  Cfg forward = g;
  for (auto& [b, ss] : forward.successors) {
    std::vector<BlockId> keep;
    for (BlockId s : ss) {
      if (!li.back_edges.count({b, s})) keep.push_back(s);
    }
    ss = keep;
  }
  if (!graph::is_acyclic(forward)) throw IrreducibleCfg("control flow graph is irreducible");

  auto preds = g.predecessors();
  for (const auto& [tail, head] : li.back_edges) {
    if (head == g.entry) throw IrreducibleCfg("entry block " + g.name_of(head) + " is a loop head");
    Loop& loop = li.loops[head];
    loop.head = head;
    loop.body.insert(head);
    loop.tails.push_back(tail);
    std::vector<BlockId> stack{tail};
    while (!stack.empty()) {
      BlockId b = stack.back();
      stack.pop_back();
      if (!loop.body.insert(b).second) continue;
      for (BlockId p : preds[b]) {
        if (live.count(p)) stack.push_back(p);
      }
    }
  }
  for (auto& [head, loop] : li.loops) {
    const Block& hb = g.block(head);
    loop.prefix_len = leading_assert_count(hb);
    std::vector<Expr> parts;
    for (std::size_t i = 0; i < loop.prefix_len; ++i) parts.push_back(hb.commands[i].expr);
    loop.invariant = ex::conjunction(parts);
    for (BlockId b : loop.body) {
      for (const auto& c : g.block(b).commands) {
        if (c.changes_state()) loop.modified.insert(c.var);
      }
    }
  }
  return li;
}

struct DagMutation {
  bool drop_assert_move = false;
  bool drop_havoc = false;
};

/// Per-block record of what the transformation did, in the terms the
/// validator checks against.
struct DagBlockInfo {
  bool is_head = false;
  Expr invariant;                       // A_pre for heads, null otherwise
  std::vector<std::string> havocked;    // X_H, in emission order
  std::vector<Expr> appended_asserts;   // A_post parts, one per successor head
  bool appended_assume_false = false;
  std::size_t removed_prefix = 0;
};

struct DagResult {
  Cfg target;
  LoopInfo loops;
  std::map<BlockId, DagBlockInfo> info;
  std::map<BlockId, BlockId> correspondence;
};

inline DagResult to_dag(const Cfg& g, const LoopInfo& li, DagMutation mut = {}) {
  DagResult r;
  r.target = g;
  r.loops = li;
  for (const auto& [id, _] : g.blocks) {
    r.info[id];
    r.correspondence[id] = id;
  }

  for (const auto& [head, loop] : li.loops) {
    Block& hb = r.target.block(head);
    DagBlockInfo& info = r.info[head];
    info.is_head = true;
    info.invariant = loop.invariant;
    info.removed_prefix = loop.prefix_len;
    std::vector<Command> cmds;
    bool first = true;
    for (const auto& x : loop.modified) {
      if (mut.drop_havoc && first) {
        first = false;
        continue;
      }
      first = false;
      cmds.push_back(Command::havoc(x));
      info.havocked.push_back(x);
    }
    if (loop.prefix_len > 0) cmds.push_back(Command::assume(loop.invariant));
    cmds.insert(cmds.end(), hb.commands.begin() + static_cast<std::ptrdiff_t>(loop.prefix_len), hb.commands.end());
    hb.commands = std::move(cmds);
  }

  if (!mut.drop_assert_move) {
    for (const auto& [id, _] : g.blocks) {
      std::set<BlockId> seen;
      for (BlockId s : g.succs(id)) {
        auto it = li.loops.find(s);
        if (it == li.loops.end() || it->second.prefix_len == 0 || !seen.insert(s).second) continue;
        r.target.block(id).commands.push_back(Command::assert_(it->second.invariant));
        r.info[id].appended_asserts.push_back(it->second.invariant);
      }
    }
  }

  for (auto& [from, tos] : r.target.successors) {
    bool had = !tos.empty();
    std::vector<BlockId> keep;
    for (BlockId s : tos) {
      if (!li.is_back_edge(from, s)) keep.push_back(s);
    }
    tos = std::move(keep);
    if (had && tos.empty()) {
      r.target.block(from).commands.push_back(Command::assume(ex::boolean(false)));
      r.info[from].appended_assume_false = true;
    }
  }
  return r;
}

inline DagResult to_dag(const Cfg& g, DagMutation mut = {}) { return to_dag(g, analyze_loops(g), mut); }

}  // namespace ivl
