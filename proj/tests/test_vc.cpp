#include <gtest/gtest.h>

#include "ivl/cfg_to_dag.hpp"
#include "ivl/passify.hpp"
#include "ivl/solver.hpp"
#include "ivl/vc.hpp"
#include "ivl/vc_eval.hpp"
#include "support/common.hpp"
#include "support/gen.hpp"

using namespace ivl;
using ivl::test::checked;
using ivl::test::read_sample;

namespace {

struct Pipeline {
  Program prog;
  PassiveResult passive;
  VcScript script;
};

Pipeline run(const std::string& text, bool constprop = true) {
  Pipeline p{checked(text), {}, {}};
  const Procedure& proc = p.prog.procedures[0];
  VarContext vars = procedure_context(p.prog, proc);
  p.passive = passify(to_dag(body_with_contracts(proc)).target, vars);
  if (constprop) p.passive = propagate_constants(p.passive);
  p.script = assemble_vc(p.prog, p.passive);
  return p;
}

bool have_solver() {
  static bool ok = solver_available();
  return ok;
}

std::string wp_text(const VcScript& s, BlockId b) {
  for (const auto& [n, d] : s.definitions) {
    if (n == wp_symbol(b)) return to_smt(d);
  }
  return "<missing>";
}

}  // namespace

TEST(EncodeType, Examples) {
  EXPECT_EQ(to_smt(encode_type(Type::con("List", {Type::integer()}))), "(C@List TInt)");
  EXPECT_EQ(to_smt(encode_type(Type::integer())), "TInt");
  EXPECT_EQ(to_smt(encode_type(Type::con("Pair", {Type::var(0), Type::boolean()}), {vc::sym("t")})),
            "(C@Pair t TBool)");
  EXPECT_THROW(encode_type(Type::var(1), {vc::sym("t")}), MalformedInput);
}

TEST(TypeEncodingAxioms, Shapes) {
  Program none = checked("");
  EXPECT_EQ(type_encoding_axioms(none).size(), 3u);
  Program two = checked("type List 1; type Pair 2;");
  std::vector<std::string> text;
  for (const auto& a : type_encoding_axioms(two)) text.push_back(to_smt(a));
  auto has = [&](const std::string& s) { return std::find(text.begin(), text.end(), s) != text.end(); };
  EXPECT_TRUE(has("(forall ((a@0 T)) (= (P@List@1 (C@List a@0)) a@0))"));
  EXPECT_TRUE(has("(forall ((a@0 T) (a@1 T)) (= (P@Pair@2 (C@Pair a@0 a@1)) a@1))"));
  EXPECT_TRUE(has("(forall ((a@0 T) (c@0 T) (c@1 T)) (not (= (C@List a@0) (C@Pair c@0 c@1))))"));
  EXPECT_TRUE(has("(not (= TInt TBool))"));
}

TEST(TypeEncodingAxioms, HoldInBridgeModel) {
  Program prog = checked("type List 1; type Pair 2; type C 0; function f<a>(x: a, y: List a): Pair a int;");
  VarContext vars;
  EnumBounds bounds;
  bounds.bounded_domains = true;
  bounds.type_depth = 1;
  Context ctx = make_context(prog, vars, 3, bounds);
  VcModel model;
  for (const auto& a : type_encoding_axioms(prog)) {
    EXPECT_EQ(eval_formula(ctx, model, a), std::optional<bool>(true)) << to_smt(a);
  }
  for (const auto& f : prog.functions) {
    VcTerm ax = function_typing_axiom(f);
    EXPECT_EQ(to_smt(ax),
              "(forall ((t@0 T) (a@0 V) (a@1 V)) (= (typeof (F@f t@0 a@0 a@1)) (C@Pair t@0 TInt)))");
    EXPECT_EQ(eval_formula(ctx, model, ax), std::optional<bool>(true));
  }
  // Without bounded domains an unrefuted universal over an infinite sort is Unknown.
  Context open = make_context(prog, vars, 3);
  auto axioms = type_encoding_axioms(prog);
  EXPECT_FALSE(eval_formula(open, model, axioms[axioms.size() - 2]).has_value());
}

TEST(TranslateExpr, Examples) {
  Program prog = test::prelude_program();
  VarContext vars = procedure_context(prog, prog.procedures[0]);
  EXPECT_EQ(to_smt(translate_expr(prog, vars, ex::binary(BinOp::Neq, ex::var("x"), ex::integer(0)))),
            "(not (= (v2int x@x) 0))");
  EXPECT_EQ(to_smt(translate_expr(prog, vars, ex::boolean(true))), "true");
  Expr q = ex::forall(Type::con("List", {Type::integer()}),
                      ex::binary(BinOp::Gt, ex::call("len", {Type::integer()}, {ex::bound(0)}), ex::integer(0)));
  EXPECT_EQ(to_smt(translate_expr(prog, vars, q)),
            "(forall ((b@0 V)) (=> (= (typeof b@0) (C@List TInt)) (> (v2int (F@len TInt b@0)) 0)))");
  Expr poly = ex::forall_type(ex::forall(Type::con("List", {Type::var(0)}),
                                         ex::binary(BinOp::Ge, ex::call("len", {Type::var(0)}, {ex::bound(0)}),
                                                    ex::integer(0))));
  EXPECT_EQ(to_smt(translate_expr(prog, vars, poly)),
            "(forall ((t@0 T)) (forall ((b@0 V)) (=> (= (typeof b@0) (C@List t@0)) (>= (v2int (F@len t@0 b@0)) 0))))");
  EXPECT_EQ(to_smt(translate_expr(prog, vars, ex::binary(BinOp::Div, ex::var("x"), ex::var("y")))),
            "(ite (= (v2int x@y) 0) 0 (div (v2int x@x) (v2int x@y)))");
  EXPECT_THROW(translate_expr(prog, vars, ex::old(ex::var("g"))), InternalError);
}

TEST(WpBlocks, RunningExampleLoopHeadShape) {
  Pipeline p = run(read_sample("running.ivl"), false);
  std::string i1 = value_symbol(p.passive.blocks.at(2).entry.at("i"));
  EXPECT_EQ(wp_text(p.script, 2), "(=> (not (= (v2int " + i1 + ") 0)) (and wp@B3 wp@B4))");
  EXPECT_EQ(p.script.definitions.back().first, "wp@B0");
  EXPECT_EQ(to_smt(p.script.goal), "wp@B0");
}

TEST(WpBlocks, FoldRightDefinition) {
  Pipeline p = run("procedure p() { var x: int; A: assert x > 0; assume x < 3; goto L; L: return; }", false);
  // The labeled body starts a fresh block for L.
  const Cfg& g = p.passive.target;
  ASSERT_EQ(g.succs(g.entry).size(), 1u);
  BlockId l = g.succs(g.entry)[0];
  EXPECT_EQ(wp_text(p.script, l), "true");
  EXPECT_EQ(wp_text(p.script, g.entry), "(and (> (v2int x@v0) 0) (=> (< (v2int x@v0) 3) " + wp_symbol(l) + "))");
  VcOptions opts;
  opts.mutation.assume_as_and = true;
  VcScript mutated = assemble_vc(p.prog, p.passive, opts);
  EXPECT_EQ(to_smt(mutated.definitions.back().second),
            "(and (> (v2int x@v0) 0) (and (< (v2int x@v0) 3) " + wp_symbol(l) + "))");
}

TEST(AssembleVc, DeclarationsAndDeterminism) {
  Pipeline a = run(read_sample("polymorphic.ivl"));
  Pipeline b = run(read_sample("polymorphic.ivl"));
  std::string text = a.script.render();
  EXPECT_EQ(text, b.script.render());
  EXPECT_NE(text.find("(declare-datatypes ((T 0)) (((TInt) (TBool) (C@List (P@List@1 T)))))"), std::string::npos);
  EXPECT_NE(text.find("(declare-fun F@cons (T V V) V)"), std::string::npos);
  EXPECT_NE(text.find("; function typing"), std::string::npos);
  EXPECT_NE(text.find("; axioms"), std::string::npos);
  EXPECT_EQ(text.rfind("(check-sat)\n"), text.size() - 12);
}

TEST(Solver, TrivialScripts) {
  if (!have_solver()) GTEST_SKIP() << "no SMT solver available";
  EXPECT_EQ(run_solver("(assert false)(check-sat)\n").status, SolverResult::Status::Unsat);
  EXPECT_EQ(run_solver("(assert true)(check-sat)\n").status, SolverResult::Status::Sat);
  SolverResult missing = run_solver("(check-sat)\n", "/nonexistent/solver");
  EXPECT_EQ(missing.status, SolverResult::Status::Error);
  EXPECT_NE(missing.message.find("cannot start"), std::string::npos);
}

TEST(Solver, Timeout) {
  if (!have_solver()) GTEST_SKIP() << "no SMT solver available";
  std::string script = (std::filesystem::temp_directory_path() / "ivl-sleeper.sh").string();
  {
    std::ofstream f(script);
    f << "sleep 5\n";
  }
  SolverResult r = run_solver("(check-sat)\n", "sh " + script, 0.2);
  std::filesystem::remove(script);
  EXPECT_EQ(r.status, SolverResult::Status::Unknown);
}

TEST(AssembleVc, EndToEndVerdicts) {
  if (!have_solver()) GTEST_SKIP() << "no SMT solver available";
  EXPECT_EQ(run_solver(run(read_sample("running.ivl")).script.render()).status, SolverResult::Status::Unsat);
  EXPECT_EQ(run_solver(run(read_sample("running.ivl"), false).script.render()).status, SolverResult::Status::Unsat);
  EXPECT_EQ(run_solver(run(read_sample("running_no_assume.ivl")).script.render()).status, SolverResult::Status::Sat);
  EXPECT_EQ(run_solver(run("procedure p() { assert false; }").script.render()).status, SolverResult::Status::Sat);
  EXPECT_EQ(run_solver(run(read_sample("polymorphic.ivl")).script.render()).status, SolverResult::Status::Unsat);
  Pipeline plain = run(read_sample("running.ivl"));
  VcOptions opts;
  opts.datatype_carriers = false;
  std::string text = assemble_vc(plain.prog, plain.passive, opts).render();
  EXPECT_NE(text.find("(declare-sort V 0)"), std::string::npos);
  EXPECT_EQ(run_solver(text).status, SolverResult::Status::Unsat);
}

TEST(EvalVc, BoxingInverse) {
  Program prog = checked("");
  VarContext vars;
  Context ctx = make_context(prog, vars);
  VcTerm t = vc::eq(vc::app("v2int", {vc::app("int2v", {vc::integer(7)})}), vc::integer(7));
  EXPECT_EQ(eval_formula(ctx, VcModel{}, t), std::optional<bool>(true));
  EXPECT_EQ(eval_formula(ctx, VcModel{}, vc::app("v2bool", {vc::app("int2v", {vc::integer(1)})})),
            std::optional<bool>(false));
  EXPECT_EQ(eval_vc(ctx, VcModel{}, vc::app("P@List@1", {vc::sym("TBool")}))->t, Type::integer());
}

TEST(EvalVc, AgreesWithInterpreterOnFuzzedExpressions) {
  Program prog = test::prelude_program();
  VarContext vars = procedure_context(prog, prog.procedures[0]);
  test::ExprGen::Options opts;
  opts.quantifiers = false;
  opts.old = false;
  test::ExprGen gen(prog, vars, 99, opts);
  std::mt19937_64 rng(4);
  int compared = 0;
  for (int n = 0; n < 1000; ++n) {
    auto [e, t] = gen.any_expr();
    Context ctx = make_context(prog, vars, rng());
    NormalState ns = sample_state(ctx, rng);
    VcModel model;
    for (const VarDecl* d : vars.all()) model.values[d->name] = *ns.lookup(d->name);
    MaybeValue want = eval_expr(ctx, ns, e);
    MaybeVc got = eval_vc(ctx, model, translate_expr(prog, vars, e));
    if (!want || !got) continue;
    ++compared;
    VcValue expect = t.is_int()    ? VcValue::of_int(want->i)
                     : t.is_bool() ? VcValue::of_bool(want->b)
                                   : VcValue::of_value(*want);
    ASSERT_TRUE(*got == expect) << to_string(e) << "\n" << to_smt(translate_expr(prog, vars, e));
  }
  EXPECT_GT(compared, 900);
}
