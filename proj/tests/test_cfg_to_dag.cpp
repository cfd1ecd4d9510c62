#include <gtest/gtest.h>

#include "ivl/cfg_to_dag.hpp"
#include "ivl/printer.hpp"
#include "support/common.hpp"
#include "support/gen.hpp"

using namespace ivl;
using ivl::test::checked;
using ivl::test::read_sample;

namespace {

std::vector<std::string> block_text(const Cfg& g, BlockId id) {
  std::vector<std::string> out;
  for (const auto& c : g.block(id).commands) out.push_back(to_string(c));
  return out;
}

Cfg skeleton(std::map<BlockId, std::vector<BlockId>> edges) {
  Cfg g;
  for (const auto& [b, _] : edges) g.blocks[b] = Block{b, "", {}};
  g.successors = std::move(edges);
  g.entry = 0;
  return g;
}

// Reachability of `to` from the entry when `removed` is deleted.
bool reachable_without(const Cfg& g, BlockId removed, BlockId to) {
  if (removed == g.entry) return false;
  std::set<BlockId> seen{g.entry};
  std::vector<BlockId> stack{g.entry};
  while (!stack.empty()) {
    BlockId b = stack.back();
    stack.pop_back();
    if (b == to) return true;
    for (BlockId s : g.succs(b)) {
      if (s != removed && seen.insert(s).second) stack.push_back(s);
    }
  }
  return false;
}

bool brute_dominates(const Cfg& g, BlockId a, BlockId b) { return a == b || !reachable_without(g, a, b); }

// Forward reachability from `from` that never re-enters `h`.
std::set<BlockId> reach_avoiding(const Cfg& g, BlockId from, BlockId h) {
  std::set<BlockId> seen{from};
  std::vector<BlockId> stack{from};
  while (!stack.empty()) {
    BlockId b = stack.back();
    stack.pop_back();
    for (BlockId s : g.succs(b)) {
      if (s != h && seen.insert(s).second) stack.push_back(s);
    }
  }
  return seen;
}

// Variables assigned on some path h -> ... -> t -> h that does not pass
// through h in between, where h dominates t.
std::set<std::string> brute_looping_vars(const Cfg& g, BlockId h) {
  std::set<std::string> out;
  for (BlockId b : reach_avoiding(g, h, h)) {
    bool loops_back = false;
    for (BlockId t : reach_avoiding(g, b, h)) {
      for (BlockId s : g.succs(t)) loops_back = loops_back || (s == h && brute_dominates(g, h, t));
    }
    if (!loops_back) continue;
    for (const auto& c : g.block(b).commands) {
      if (c.changes_state()) out.insert(c.var);
    }
  }
  return out;
}

}  // namespace

TEST(AnalyzeLoops, RunningExample) {
  Program p = checked(read_sample("running.ivl"));
  LoopInfo li = analyze_loops(p.procedures[0].body);
  ASSERT_EQ(li.loops.size(), 1u);
  EXPECT_TRUE(li.is_head(1));
  EXPECT_EQ(li.back_edges, (std::set<Edge>{{5, 1}}));
  EXPECT_EQ(li.loops.at(1).modified, (std::set<std::string>{"i", "j"}));
  EXPECT_EQ(li.loops.at(1).body, (std::set<BlockId>{1, 2, 3, 4, 5}));
  EXPECT_EQ(to_string(li.loops.at(1).invariant), "j >= 0 && (i == 0 ==> j > 0)");
}

TEST(AnalyzeLoops, AcyclicGraphHasNoLoops) {
  Program p = checked("procedure p() { var x: int; if (x > 0) { x := 1; } else { x := 2; } }");
  EXPECT_TRUE(analyze_loops(p.procedures[0].body).empty());
}

TEST(AnalyzeLoops, NestedLoopModifiesSubset) {
  Cfg g = skeleton({{0, {1}}, {1, {2, 7}}, {2, {3}}, {3, {4, 6}}, {4, {5}}, {5, {3}}, {6, {1}}, {7, {}}});
  g.block(4).commands = {Command::assign("j", ex::binary(BinOp::Add, ex::var("j"), ex::integer(1)))};
  g.block(6).commands = {Command::assign("i", ex::binary(BinOp::Sub, ex::var("i"), ex::integer(1)))};
  LoopInfo li = analyze_loops(g);
  ASSERT_EQ(li.loops.size(), 2u);
  EXPECT_EQ(li.back_edges, (std::set<Edge>{{5, 3}, {6, 1}}));
  EXPECT_EQ(li.loops.at(3).modified, brute_looping_vars(g, 3));
  EXPECT_EQ(li.loops.at(1).modified, brute_looping_vars(g, 1));
  EXPECT_EQ(li.loops.at(3).modified, (std::set<std::string>{"j"}));
  EXPECT_EQ(li.loops.at(1).modified, (std::set<std::string>{"i", "j"}));
  EXPECT_TRUE(std::includes(li.loops.at(1).modified.begin(), li.loops.at(1).modified.end(),
                            li.loops.at(3).modified.begin(), li.loops.at(3).modified.end()));
}

TEST(AnalyzeLoops, IrreducibleGraphIsRejected) {
  EXPECT_THROW(analyze_loops(skeleton({{0, {1, 2}}, {1, {2}}, {2, {1}}})), IrreducibleCfg);
  EXPECT_THROW(analyze_loops(skeleton({{0, {0}}})), IrreducibleCfg);
}

TEST(ToDag, RunningExampleMatchesGolden) {
  Program p = checked(read_sample("running.ivl"));
  const Cfg& src = p.procedures[0].body;
  DagResult r = to_dag(src);
  const Cfg& d = r.target;
  const std::string a = "j >= 0 && (i == 0 ==> j > 0)";
  EXPECT_EQ(block_text(d, 0), (std::vector<std::string>{"assume i != 0;", "j := 0;", "assert " + a + ";"}));
  EXPECT_EQ(block_text(d, 1), (std::vector<std::string>{"havoc i;", "havoc j;", "assume " + a + ";"}));
  EXPECT_EQ(block_text(d, 5), (std::vector<std::string>{"i := i - 1;", "assert " + a + ";", "assume false;"}));
  for (BlockId b : {2u, 3u, 4u, 6u}) {
    EXPECT_TRUE(commands_equal(d.block(b).commands, src.block(b).commands)) << b;
  }
  EXPECT_TRUE(d.succs(5).empty());
  EXPECT_EQ(d.succs(1), (std::vector<BlockId>{2, 6}));
  EXPECT_TRUE(graph::is_acyclic(d));
  EXPECT_TRUE(r.info.at(1).is_head);
  EXPECT_EQ(r.info.at(1).havocked, (std::vector<std::string>{"i", "j"}));
  EXPECT_TRUE(r.info.at(5).appended_assume_false);
  EXPECT_EQ(r.info.at(0).appended_asserts.size(), 1u);
  EXPECT_EQ(r.correspondence.size(), src.blocks.size());
}

TEST(ToDag, IdentityOnAcyclicInput) {
  Program p = checked("procedure p() { var x: int; if (x > 0) { x := 1; } assert x != 0; }");
  const Cfg& g = p.procedures[0].body;
  EXPECT_TRUE(cfg_equal(to_dag(g).target, g));
}

TEST(ToDag, MutationsChangeOutput) {
  Program p = checked(read_sample("running.ivl"));
  const Cfg& g = p.procedures[0].body;
  DagResult noassert = to_dag(g, DagMutation{true, false});
  EXPECT_EQ(block_text(noassert.target, 0).size(), 2u);
  DagResult nohavoc = to_dag(g, DagMutation{false, true});
  EXPECT_EQ(block_text(nohavoc.target, 1).front(), "havoc j;");
}

TEST(ToDag, GeneratedProgramsProperties) {
  test::ProgramGen gen(23);
  int loops = 0;
  for (int n = 0; n < 300; ++n) {
    Program p = gen.next();
    const Cfg& g = p.procedures[0].body;
    LoopInfo li = analyze_loops(g);
    DagResult r = to_dag(g, li);
    ASSERT_TRUE(graph::is_acyclic(r.target)) << to_string(g);
    loops += static_cast<int>(li.loops.size());
    for (const auto& [t, h] : li.back_edges) EXPECT_TRUE(brute_dominates(g, h, t));
    for (const auto& [h, loop] : li.loops) EXPECT_EQ(loop.modified, brute_looping_vars(g, h)) << to_string(g);
    // Nested heads modify a subset of the enclosing loop.
    for (const auto& [h1, outer] : li.loops) {
      for (const auto& [h2, inner] : li.loops) {
        if (h1 != h2 && outer.body.count(h2)) {
          EXPECT_TRUE(std::includes(outer.modified.begin(), outer.modified.end(), inner.modified.begin(),
                                    inner.modified.end()));
        }
      }
    }
    auto preds = g.predecessors();
    for (const auto& [id, b] : g.blocks) {
      bool touched = li.is_head(id);
      for (BlockId s : g.succs(id)) touched = touched || li.is_head(s);
      if (!touched) {
        EXPECT_TRUE(commands_equal(r.target.block(id).commands, b.commands));
      }
    }
  }
  EXPECT_GT(loops, 100);
}
