#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "ivl/core_ir.hpp"

namespace ivl::graph {

inline std::set<BlockId> reachable(const Cfg& g, BlockId from) {
  std::set<BlockId> seen{from};
  std::vector<BlockId> stack{from};
  while (!stack.empty()) {
    BlockId b = stack.back();
    stack.pop_back();
    for (BlockId s : g.succs(b)) {
      if (seen.insert(s).second) stack.push_back(s);
    }
  }
  return seen;
}

/// Drops blocks unreachable from the entry; returns the removed ids.
inline std::vector<BlockId> prune_unreachable(Cfg& g) {
  std::set<BlockId> live = reachable(g, g.entry);
  std::vector<BlockId> removed;
  for (auto it = g.blocks.begin(); it != g.blocks.end();) {
    if (!live.count(it->first)) {
      removed.push_back(it->first);
      g.successors.erase(it->first);
      it = g.blocks.erase(it);
    } else {
      ++it;
    }
  }
  return removed;
}

/// Reverse post-order of a depth-first walk from the entry, successors in edge order.
inline std::vector<BlockId> reverse_post_order(const Cfg& g) {
  std::vector<BlockId> post;
  std::set<BlockId> seen{g.entry};
  // Explicit stack of (block, next successor index).
  std::vector<std::pair<BlockId, std::size_t>> stack{{g.entry, 0}};
  while (!stack.empty()) {
    auto& [b, i] = stack.back();
    const auto& succ = g.succs(b);
    if (i < succ.size()) {
      BlockId s = succ[i++];
      if (seen.insert(s).second) stack.emplace_back(s, 0);
    } else {
      post.push_back(b);
      stack.pop_back();
    }
  }
  std::reverse(post.begin(), post.end());
  return post;
}

/// Kahn's algorithm with smallest-id tie breaking, over blocks reachable from
/// the entry. Empty optional if a cycle exists.
inline std::optional<std::vector<BlockId>> topological_order(const Cfg& g) {
  std::set<BlockId> live = reachable(g, g.entry);
  std::map<BlockId, std::size_t> indeg;
  for (BlockId b : live) indeg[b];
  for (BlockId b : live) {
    for (BlockId s : g.succs(b)) ++indeg[s];
  }
  std::set<BlockId> ready;
  for (const auto& [b, d] : indeg) {
    if (d == 0) ready.insert(b);
  }
  std::vector<BlockId> order;
  while (!ready.empty()) {
    BlockId b = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(b);
    for (BlockId s : g.succs(b)) {
      if (--indeg[s] == 0) ready.insert(s);
    }
  }
  if (order.size() != live.size()) return std::nullopt;
  return order;
}

inline bool is_acyclic(const Cfg& g) { return topological_order(g).has_value(); }

/// Immediate dominators by the iterative reverse-post-order dataflow scheme
/// (Cooper, Harvey, Kennedy). The entry maps to itself.
inline std::map<BlockId, BlockId> immediate_dominators(const Cfg& g) {
  std::vector<BlockId> rpo = reverse_post_order(g);
  std::map<BlockId, std::size_t> rank;
  for (std::size_t i = 0; i < rpo.size(); ++i) rank[rpo[i]] = i;
  auto preds = g.predecessors();
  std::map<BlockId, BlockId> idom;
  idom[g.entry] = g.entry;
  auto intersect = [&](BlockId a, BlockId b) {
    while (a != b) {
      while (rank[a] > rank[b]) a = idom[a];
      while (rank[b] > rank[a]) b = idom[b];
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 1; i < rpo.size(); ++i) {
      BlockId b = rpo[i];
      std::optional<BlockId> candidate;
      for (BlockId p : preds[b]) {
        if (!rank.count(p) || !idom.count(p)) continue;
        candidate = candidate ? intersect(*candidate, p) : p;
      }
      if (candidate && (!idom.count(b) || idom[b] != *candidate)) {
        idom[b] = *candidate;
        changed = true;
      }
    }
  }
  return idom;
}

inline bool dominates(const std::map<BlockId, BlockId>& idom, BlockId a, BlockId b) {
  for (;;) {
    if (a == b) return true;
    auto it = idom.find(b);
    if (it == idom.end() || it->second == b) return false;
    b = it->second;
  }
}

}  // namespace ivl::graph
