#include <gtest/gtest.h>

#include <json.hpp>

#include "ivl/cfg_to_dag.hpp"
#include "ivl/passify.hpp"
#include "ivl/validator.hpp"
#include "ivl/vc.hpp"
#include "support/common.hpp"
#include "support/gen.hpp"

using namespace ivl;
using ivl::test::checked;
using ivl::test::read_sample;

namespace {

struct Mutations {
  DagMutation dag;
  PassifyMutation passify;
  VcMutation vc;
};

// Holds a program and everything derived from it; contexts point into the
// program, so the object stays in place.
struct Artifacts {
  Program prog;
  Cfg source;
  DagResult dag;
  PassiveResult passive;
  VcScript vc;
  Context ctx;

  explicit Artifacts(const std::string& text, Mutations m = {}, bool constprop = true) : prog(checked(text)) {
    const Procedure& proc = prog.procedures[0];
    VarContext vars = procedure_context(prog, proc);
    ctx = make_context(prog, vars);
    source = body_with_contracts(proc);
    dag = to_dag(source, m.dag);
    passive = passify(dag.target, vars, m.passify);
    if (constprop) passive = propagate_constants(passive);
    VcOptions vo;
    vo.mutation = m.vc;
    vc = assemble_vc(prog, passive, vo);
  }
  Artifacts(const Artifacts&) = delete;
  Artifacts& operator=(const Artifacts&) = delete;
};

NormalState locals(const std::map<std::string, std::int64_t>& vals) {
  NormalState ns;
  for (const auto& [k, v] : vals) ns.locals.set(k, Value::integer(v));
  return ns;
}

ValidateOptions quick(std::size_t samples = 200) {
  ValidateOptions o;
  o.samples = samples;
  return o;
}

bool any_falsified(const PhaseCertReport& r) { return !r.validated(); }

}  // namespace

TEST(DagBlock, TailOfRunningExampleByHand) {
  Artifacts a(read_sample("running.ivl"));
  DagValidator v(a.ctx, a.source, a.dag);
  NormalState ns = locals({{"i", 1}, {"j", 1}});
  RandomHavoc h(a.ctx, 0);
  SampleResult r = v.check_block(a.ctx, 5, ns, ns, h);
  EXPECT_EQ(r.kind, SampleResult::Kind::Pass) << r.check << ": " << r.detail;
  EXPECT_EQ(r.source_kind, ExecState::Kind::Normal);
  EXPECT_EQ(r.target_kind, ExecState::Kind::Magic);
}

TEST(DagBlock, UnchangedBlockValidatesEverySample) {
  Artifacts a(read_sample("running.ivl"));
  BlockOutcome o = validate_dag_block(a.ctx, a.source, a.dag, 3, quick());
  EXPECT_EQ(o.kind, BlockOutcome::Kind::Validated);
  EXPECT_EQ(o.samples + o.vacuous, 200u);
  EXPECT_GT(o.samples, 0u);
}

TEST(DagBlock, HeadWithInvariantValidates) {
  Artifacts a(read_sample("running.ivl"));
  BlockOutcome o = validate_dag_block(a.ctx, a.source, a.dag, 1, quick());
  EXPECT_EQ(o.kind, BlockOutcome::Kind::Validated);
  EXPECT_GT(o.samples, 50u);
}

TEST(DagBlock, DroppedAssertMoveIsCaught) {
  Mutations m;
  m.dag.drop_assert_move = true;
  Artifacts a(read_sample("running.ivl"), m);
  DagValidator v(a.ctx, a.source, a.dag);
  NormalState ns = locals({{"i", 1}, {"j", 0}});
  RandomHavoc h(a.ctx, 0);
  SampleResult r = v.check_block(a.ctx, 5, ns, ns, h);
  EXPECT_EQ(r.kind, SampleResult::Kind::Fail);
  EXPECT_EQ(r.check, "invariant-not-established");
  EXPECT_EQ(validate_dag_block(a.ctx, a.source, a.dag, 5, quick()).kind, BlockOutcome::Kind::Falsified);
}

TEST(DagBlock, DroppedHavocIsCaught) {
  Mutations m;
  m.dag.drop_havoc = true;
  Artifacts a(read_sample("running.ivl"), m);
  BlockOutcome o = validate_dag_block(a.ctx, a.source, a.dag, 1, quick());
  ASSERT_EQ(o.kind, BlockOutcome::Kind::Falsified);
  ASSERT_TRUE(o.counterexample.has_value());
  // The counterexample replays to the same violation.
  DagValidator v(a.ctx, a.source, a.dag);
  SampleResult again = v.replay(*o.counterexample);
  EXPECT_EQ(again.kind, SampleResult::Kind::Fail);
  EXPECT_EQ(again.check, o.counterexample->check);
}

TEST(DagGlobal, RunningExampleValidates) {
  Artifacts a(read_sample("running.ivl"));
  BlockOutcome o = validate_global(a.ctx, a.source, a.dag, quick());
  EXPECT_EQ(o.kind, BlockOutcome::Kind::Validated) << (o.counterexample ? o.counterexample->detail : "");
  EXPECT_GT(o.samples, 100u);
  EXPECT_EQ(o.failures, 0u);
}

TEST(DagGlobal, FailingVariantHasMatchingTargetFailures) {
  Artifacts a(read_sample("running_no_assume.ivl"));
  BlockOutcome o = validate_global(a.ctx, a.source, a.dag, quick());
  EXPECT_EQ(o.kind, BlockOutcome::Kind::Validated);
  // Initial states with i = 0 fail in the source; each is matched.
  EXPECT_GT(o.failures, 0u);
}

TEST(DagGlobal, DroppedHavocIsCaught) {
  Mutations m;
  m.dag.drop_havoc = true;
  Artifacts a(read_sample("running.ivl"), m);
  BlockOutcome o = validate_global(a.ctx, a.source, a.dag, quick());
  ASSERT_EQ(o.kind, BlockOutcome::Kind::Falsified);
  DagValidator v(a.ctx, a.source, a.dag);
  SampleResult again = v.replay(*o.counterexample);
  EXPECT_EQ(again.kind, SampleResult::Kind::Fail);
  EXPECT_EQ(again.check, o.counterexample->check);
  EXPECT_EQ(again.path, o.counterexample->path);
}

TEST(PassiveBlock, RunningExampleWitnessByHand) {
  Artifacts a(read_sample("running.ivl"), {}, false);
  PassiveValidator v(a.ctx, a.passive);
  NormalState ns = locals({{"i", 3}, {"j", 2}});
  RandomHavoc h(a.ctx, 0);
  SampleResult r = v.check_block(a.ctx, 3, ns, h);
  ASSERT_EQ(r.kind, SampleResult::Kind::Pass) << r.check << ": " << r.detail;
  const PassiveBlockInfo& info = a.passive.blocks.at(3);
  auto at = [&](const std::string& version) { return r.witness.locals.find(version)->i; };
  EXPECT_EQ(at(info.entry.at("i")), 3);
  EXPECT_EQ(at(info.entry.at("j")), 2);
  ASSERT_EQ(info.writes.size(), 1u);
  EXPECT_EQ(at(info.writes[0]), 3);
  EXPECT_EQ(at(info.exit.at("j")), 3);
  EXPECT_NE(info.writes[0], info.exit.at("j"));
}

TEST(PassiveBlock, EmptyBlockKeepsRelation) {
  Artifacts a("procedure p() { var x: int; if (*) { x := 1; } assert x != 5; }", {}, false);
  const Cfg& s = a.passive.source;
  std::optional<BlockId> empty;
  for (const auto& [b, blk] : s.blocks) {
    if (blk.commands.empty() && b != s.entry) empty = b;
  }
  ASSERT_TRUE(empty.has_value());
  BlockOutcome o = validate_passive_block(a.ctx, a.passive, *empty, quick());
  EXPECT_EQ(o.kind, BlockOutcome::Kind::Validated);
  EXPECT_EQ(o.samples, 200u);
}

TEST(PassiveBlock, DoubleConstraintIsCaught) {
  Mutations m;
  m.passify.double_constrain = true;
  Artifacts a("procedure p() { var x: int; x := 1; x := x + 1; assert x == 2; }", m, false);
  BlockOutcome o = validate_passive_block(a.ctx, a.passive, a.passive.source.entry, quick());
  ASSERT_EQ(o.kind, BlockOutcome::Kind::Falsified);
  EXPECT_EQ(o.counterexample->check, "spurious-magic");
  EXPECT_FALSE(check_version_order(a.passive).ok);
}

TEST(PassiveBlock, DroppedSyncIsCaught) {
  Mutations m;
  m.passify.drop_sync = true;
  Artifacts a("procedure p() { var x: int; if (*) { x := 1; } else { x := 2; } assert x > 0; }", m, false);
  PhaseCertReport r = certify_passive(a.ctx, a.passive, quick());
  ASSERT_FALSE(r.validated());
  bool unpinned = false;
  for (const auto& [b, o] : r.blocks) {
    unpinned = unpinned || (o.counterexample && o.counterexample->check == "unconstrained-version");
  }
  EXPECT_TRUE(unpinned) << r.text();
}

TEST(PassiveBlock, ConstantPropagationValidates) {
  Artifacts a(read_sample("running.ivl"));
  ASSERT_FALSE(a.passive.inlined.empty());
  PhaseCertReport r = certify_passive(a.ctx, a.passive, quick());
  EXPECT_TRUE(r.validated()) << r.text();
}

TEST(PassiveBlock, WrongInlinedLiteralIsCaught) {
  Artifacts a("procedure p() { var x: int; x := 3; assert x > 2; }");
  ASSERT_EQ(a.passive.inlined.count("v1"), 1u);
  a.passive.inlined["v1"] = ex::integer(4);
  BlockOutcome o = validate_passive_block(a.ctx, a.passive, a.passive.source.entry, quick());
  ASSERT_EQ(o.kind, BlockOutcome::Kind::Falsified);
  EXPECT_EQ(o.counterexample->check, "inlined-mismatch");
}

TEST(PassiveGlobal, RunningExampleAndFailingVariant) {
  Artifacts ok(read_sample("running.ivl"));
  BlockOutcome o = validate_global(ok.ctx, ok.passive, quick());
  EXPECT_EQ(o.kind, BlockOutcome::Kind::Validated) << (o.counterexample ? o.counterexample->detail : "");
  Artifacts bad(read_sample("running_no_assume.ivl"));
  BlockOutcome f = validate_global(bad.ctx, bad.passive, quick());
  EXPECT_EQ(f.kind, BlockOutcome::Kind::Validated);
  EXPECT_GT(f.failures, 0u);
}

TEST(VcBlocks, RunningExampleValidates) {
  Artifacts a(read_sample("running.ivl"), {}, false);
  PhaseCertReport r = validate_vc_blocks(a.ctx, a.passive, a.vc, quick());
  EXPECT_TRUE(r.validated()) << r.text();
  EXPECT_EQ(r.blocks.size(), a.passive.target.blocks.size());
  for (const auto& [b, o] : r.blocks) EXPECT_GT(o.samples, 0u) << "B" << b;
}

TEST(VcBlocks, GuardFalseMakesHeadSuccessorVacuouslyTrue) {
  Artifacts a(read_sample("running.ivl"), {}, false);
  VcValidator v(a.ctx, a.passive, a.vc);
  NormalState t;
  for (const auto& [name, info] : a.passive.versions) t.locals.set(name, Value::integer(1));
  t.locals.set(a.passive.blocks.at(2).entry.at("i"), Value::integer(0));
  SampleResult r = v.check_block(v.target_context(), 2, t);
  EXPECT_EQ(r.kind, SampleResult::Kind::Pass) << r.check << ": " << r.detail;
  EXPECT_EQ(r.target_kind, ExecState::Kind::Magic);
}

TEST(VcBlocks, AssertFalseBlockIsVacuous) {
  Artifacts a("procedure p() { assert false; }");
  PhaseCertReport r = validate_vc_blocks(a.ctx, a.passive, a.vc, quick());
  EXPECT_TRUE(r.validated()) << r.text();
}

TEST(VcBlocks, AssumeAsConjunctionIsCaught) {
  Mutations m;
  m.vc.assume_as_and = true;
  Artifacts a(read_sample("running.ivl"), m);
  PhaseCertReport r = validate_vc_blocks(a.ctx, a.passive, a.vc, quick());
  ASSERT_FALSE(r.validated());
  bool inexact = false;
  for (const auto& [b, o] : r.blocks) inexact = inexact || (o.counterexample && o.counterexample->check == "wp-inexact");
  EXPECT_TRUE(inexact);
}

TEST(VcGlobal, EntryWpRulesOutFailingPaths) {
  Artifacts a(read_sample("running_no_assume.ivl"), {}, false);
  PhaseCertReport r = validate_vc_blocks(a.ctx, a.passive, a.vc, quick());
  ASSERT_TRUE(r.global.has_value());
  EXPECT_EQ(r.global->kind, BlockOutcome::Kind::Validated);
  EXPECT_GT(r.global->samples, 0u);
}

TEST(Report, TextJsonAndVerdict) {
  Artifacts a(read_sample("running.ivl"));
  std::vector<PhaseCertReport> reports = certify(a.ctx, a.source, a.dag, a.passive, a.vc, quick(50));
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_EQ(reports[0].phase, "cfg_to_dag");
  EXPECT_EQ(reports[1].phase, "passify");
  EXPECT_EQ(reports[2].phase, "vc");
  for (const auto& r : reports) {
    EXPECT_TRUE(r.validated()) << r.text();
    EXPECT_EQ(r.text().rfind("phase " + r.phase + ": validated\n", 0), 0u) << r.text();
    nlohmann::json j = nlohmann::json::parse(r.json());
    EXPECT_EQ(j["phase"], r.phase);
    EXPECT_EQ(j["verdict"], "validated");
    EXPECT_EQ(j["blocks"].size(), r.blocks.size());
  }
  std::vector<PhaseCertReport> again = certify(a.ctx, a.source, a.dag, a.passive, a.vc, quick(50));
  for (std::size_t k = 0; k < reports.size(); ++k) {
    EXPECT_EQ(reports[k].text(), again[k].text());
    EXPECT_EQ(reports[k].json(), again[k].json());
  }
  ASSERT_EQ(reports[1].static_checks.size(), 1u);
  EXPECT_EQ(reports[1].static_checks[0].name, "version_order");
  EXPECT_TRUE(reports[1].static_checks[0].ok);
}

TEST(Report, FalsifiedBlockCarriesCounterexample) {
  Mutations m;
  m.dag.drop_assert_move = true;
  Artifacts a(read_sample("running.ivl"), m);
  PhaseCertReport r = certify_dag(a.ctx, a.source, a.dag, quick());
  EXPECT_FALSE(r.validated());
  EXPECT_EQ(r.text().rfind("phase cfg_to_dag: falsified\n", 0), 0u);
  nlohmann::json j = nlohmann::json::parse(r.json());
  EXPECT_EQ(j["verdict"], "falsified");
  bool found = false;
  for (const auto& b : j["blocks"]) {
    if (b["outcome"] == "falsified") {
      found = true;
      EXPECT_TRUE(b["counterexample"].contains("check"));
      EXPECT_TRUE(b["counterexample"].contains("state"));
    }
  }
  EXPECT_TRUE(found);
}

TEST(Validator, GeneratedProgramsNeverFalsified) {
  test::ProgramGen gen(77);
  for (int n = 0; n < 40; ++n) {
    Program p = gen.next();
    Artifacts a(to_string(p));
    for (const auto& r : certify(a.ctx, a.source, a.dag, a.passive, a.vc, quick(60))) {
      ASSERT_TRUE(r.validated()) << to_string(p) << "\n" << r.text();
    }
  }
}

TEST(Validator, EveryMutationKilledOnGeneratedPrograms) {
  std::vector<Mutations> ms(5);
  ms[0].dag.drop_assert_move = true;
  ms[1].dag.drop_havoc = true;
  ms[2].passify.double_constrain = true;
  ms[3].passify.drop_sync = true;
  ms[4].vc.assume_as_and = true;
  for (std::size_t k = 0; k < ms.size(); ++k) {
    test::ProgramGen gen(5);
    bool killed = false;
    for (int n = 0; n < 40 && !killed; ++n) {
      Artifacts a(to_string(gen.next()), ms[k]);
      for (const auto& r : certify(a.ctx, a.source, a.dag, a.passive, a.vc, quick(60))) killed = killed || any_falsified(r);
    }
    EXPECT_TRUE(killed) << "mutation " << k;
  }
}
