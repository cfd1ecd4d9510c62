// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "ivl/pipeline.hpp"
#include "ivl/vc_eval.hpp"
#include "support/common.hpp"
#include "support/gen.hpp"

using namespace ivl;
using ivl::test::checked;
using ivl::test::read_sample;

namespace {

// Pinned parameters.
constexpr double kRunningExampleSeconds = 5.0;
constexpr std::size_t kOracleSamples = 200;
constexpr std::size_t kOracleFuel = 10000;
constexpr int kCorpusSize = 500;
constexpr std::uint64_t kCorpusSeed = 1;
constexpr double kFuzzBudgetSeconds = 600.0;
constexpr int kBridgeExpressions = 1000;
constexpr std::uint32_t kBridgeTypeDepth = 2;
// The prelude's binary constructor makes depth 2 enumeration of its
// four-binder typing axioms intractable.
constexpr std::uint32_t kPreludeTypeDepth = 1;
constexpr int kTypeSafetyExpressions = 1000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct CorpusEntry {
  Program prog;
  std::optional<SolverResult::Status> solver;
  std::optional<Verdict::Kind> oracle;
};

std::vector<CorpusEntry>& corpus() {
  static std::vector<CorpusEntry> c = [] {
    std::vector<CorpusEntry> out;
    test::ProgramGen gen(kCorpusSeed);
    for (int n = 0; n < kCorpusSize; ++n) out.push_back({gen.next(), std::nullopt, std::nullopt});
    return out;
  }();
  return c;
}

Verdict oracle(const Program& prog, const Procedure& proc) {
  Context ctx = make_context(prog, procedure_context(prog, proc));
  CheckOptions co;
  co.samples = kOracleSamples;
  co.fuel = kOracleFuel;
  return check_procedure(ctx, proc, co);
}

SolverResult::Status solve(const Program& prog, const Procedure& proc, const Mutations& m = {}) {
  return run_solver(build_artifacts(prog, proc, true, m).vc.render()).status;
}

std::vector<std::string> renamed_text(const PassiveResult& r, BlockId b) {
  std::vector<std::pair<std::uint64_t, std::string>> order;
  for (const auto& [n, info] : r.versions) order.emplace_back(info.number, n);
  std::sort(order.begin(), order.end());
  std::map<std::string, int> next;
  std::map<std::string, std::string> names;
  for (const auto& [_, n] : order) {
    const std::string& var = r.versions.at(n).var;
    names[n] = var + std::to_string(next[var]++);
  }
  std::vector<std::string> out;
  for (const auto& c : r.target.block(b).commands) {
    Command t = c;
    t.expr = rename_vars(c.expr, names);
    out.push_back(to_string(t));
  }
  return out;
}

std::vector<std::string> block_text(const Cfg& g, BlockId b) {
  std::vector<std::string> out;
  for (const auto& c : g.block(b).commands) out.push_back(to_string(c));
  return out;
}

Outcome running_example() {
  if (!solver_available()) return {false, "no SMT solver available"};
  auto t0 = Clock::now();
  Program timed = checked(read_sample("running.ivl"));
  SolverResult::Status s1 = solve(timed, timed.procedures[0]);
  double secs = seconds_since(t0);
  Program bad = checked(read_sample("running_no_assume.ivl"));
  SolverResult::Status s2 = solve(bad, bad.procedures[0]);
  Verdict v = oracle(bad, bad.procedures[0]);
  bool i_zero = v.trace && v.trace->initial.lookup("i") && *v.trace->initial.lookup("i") == Value::integer(0);
  std::ostringstream os;
  os << "verify " << to_string(s1) << " in " << secs << "s; variant " << to_string(s2) << ", oracle "
     << to_string(v.kind) << (i_zero ? " with i=0" : "");
  bool ok = s1 == SolverResult::Status::Unsat && secs < kRunningExampleSeconds && s2 == SolverResult::Status::Sat &&
            v.kind == Verdict::Kind::FailingTrace && i_zero;
  return {ok, os.str()};
}

Outcome goldens() {
  std::vector<std::string> bad;
  Program p = checked(read_sample("running.ivl"));
  const Cfg& src = p.procedures[0].body;
  DagResult r = to_dag(src);
  const Cfg& d = r.target;
  const std::string a = "j >= 0 && (i == 0 ==> j > 0)";
  auto expect = [&](bool c, const std::string& what) {
    if (!c) bad.push_back(what);
  };
  expect(block_text(d, 0) == std::vector<std::string>{"assume i != 0;", "j := 0;", "assert " + a + ";"}, "dag B0");
  expect(block_text(d, 1) == std::vector<std::string>{"havoc i;", "havoc j;", "assume " + a + ";"}, "dag B1");
  expect(block_text(d, 5) == std::vector<std::string>{"i := i - 1;", "assert " + a + ";", "assume false;"},
         "dag B5");
  for (BlockId b : {2u, 3u, 4u, 6u}) {
    expect(commands_equal(d.block(b).commands, src.block(b).commands), "dag B" + std::to_string(b));
  }
  expect(d.succs(5).empty() && graph::is_acyclic(d), "back-edge removed");

  VarContext vars = procedure_context(p, p.procedures[0]);
  PassiveResult pr = passify(to_dag(body_with_contracts(p.procedures[0])).target, vars);
  expect(renamed_text(pr, 3) == std::vector<std::string>{"assume i1 < 5;", "assume j3 == j2 + 1;", "assume j4 == j3;"},
         "passive B3");
  expect(renamed_text(pr, 4) == std::vector<std::string>{"assume !(i1 < 5);", "assume j4 == j2;"}, "passive B4");
  std::vector<std::string> b5 = renamed_text(pr, 5);
  expect(!b5.empty() && b5[0] == "assume i2 == i1 - 1;", "passive B5");

  VcScript vc = assemble_vc(p, pr);
  std::string want = "(=> (not (= (v2int " + value_symbol(pr.blocks.at(2).entry.at("i")) +
                     ") 0)) (and " + wp_symbol(3) + " " + wp_symbol(4) + "))";
  bool wp_ok = false;
  for (const auto& [n, t] : vc.definitions) wp_ok = wp_ok || (n == wp_symbol(2) && to_smt(t) == want);
  expect(wp_ok, "wp B2");
  std::string detail = "dag, passive and wp goldens";
  for (const auto& b : bad) detail += (b == bad.front() ? "; mismatched: " : ", ") + b;
  return {bad.empty(), detail};
}

Outcome differential_fuzz() {
  if (!solver_available()) return {false, "no SMT solver available"};
  auto t0 = Clock::now();
  int unsat = 0, sat = 0, other = 0, violations = 0, sat_with_trace = 0;
  std::string first;
  for (std::size_t n = 0; n < corpus().size(); ++n) {
    CorpusEntry& e = corpus()[n];
    const Procedure& proc = e.prog.procedures[0];
    e.solver = solve(e.prog, proc);
    e.oracle = oracle(e.prog, proc).kind;
    if (*e.solver == SolverResult::Status::Unsat) {
      ++unsat;
      if (*e.oracle == Verdict::Kind::FailingTrace) {
        ++violations;
        if (first.empty()) first = " first at program " + std::to_string(n);
      }
    } else if (*e.solver == SolverResult::Status::Sat) {
      ++sat;
      if (*e.oracle == Verdict::Kind::FailingTrace) ++sat_with_trace;
    } else {
      ++other;
    }
  }
  double secs = seconds_since(t0);
  std::ostringstream os;
  os << corpus().size() << " programs: " << unsat << " unsat, " << sat << " sat (" << sat_with_trace
     << " with failing trace), " << other << " other; " << violations << " violations" << first << "; " << secs << "s";
  return {violations == 0 && other == 0 && secs <= kFuzzBudgetSeconds, os.str()};
}

Outcome phase_validation() {
  int falsified = 0, order_failures = 0, blocks = 0;
  std::string first;
  for (std::size_t n = 0; n < corpus().size(); ++n) {
    const Program& prog = corpus()[n].prog;
    const Procedure& proc = prog.procedures[0];
    Artifacts a = build_artifacts(prog, proc, true);
    Context ctx = make_context(prog, procedure_context(prog, proc));
    if (!check_version_order(a.passive).ok) ++order_failures;
    for (const auto& r : certify(ctx, a.source, *a.dag, a.passive, a.vc, ValidateOptions{})) {
      for (const auto& [id, o] : r.blocks) {
        ++blocks;
        if (o.kind == BlockOutcome::Kind::Falsified) {
          ++falsified;
          if (first.empty()) first = " first: program " + std::to_string(n) + " " + r.phase + " B" + std::to_string(id);
        }
      }
      if (r.global && r.global->kind == BlockOutcome::Kind::Falsified) {
        ++falsified;
        if (first.empty()) first = " first: program " + std::to_string(n) + " " + r.phase + " global";
      }
    }
  }
  std::ostringstream os;
  os << blocks << " block checks, " << falsified << " falsified" << first << "; version order failures "
     << order_failures;
  return {falsified == 0 && order_failures == 0, os.str()};
}

Outcome mutation_kills() {
  std::vector<std::pair<std::string, Mutations>> ms(5);
  ms[0].first = "drop_assert_move";
  ms[0].second.dag.drop_assert_move = true;
  ms[1].first = "drop_havoc";
  ms[1].second.dag.drop_havoc = true;
  ms[2].first = "double_constrain";
  ms[2].second.passify.double_constrain = true;
  ms[3].first = "drop_sync";
  ms[3].second.passify.drop_sync = true;
  ms[4].first = "assume_as_and";
  ms[4].second.vc.assume_as_and = true;
  int killed = 0;
  std::string detail;
  for (const auto& [name, m] : ms) {
    std::string how = "survived";
    for (std::size_t n = 0; n < corpus().size(); ++n) {
      const CorpusEntry& e = corpus()[n];
      const Procedure& proc = e.prog.procedures[0];
      Artifacts a = build_artifacts(e.prog, proc, true, m);
      Context ctx = make_context(e.prog, procedure_context(e.prog, proc));
      bool falsified = false;
      for (const auto& r : certify(ctx, a.source, *a.dag, a.passive, a.vc, ValidateOptions{})) {
        falsified = falsified || !r.validated();
      }
      if (falsified) {
        how = "falsified on program " + std::to_string(n);
        break;
      }
      if (e.oracle == Verdict::Kind::FailingTrace && solver_available() &&
          run_solver(a.vc.render()).status == SolverResult::Status::Unsat) {
        how = "unsound verdict on program " + std::to_string(n);
        break;
      }
    }
    if (how != "survived") ++killed;
    detail += (detail.empty() ? "" : "; ") + name + " " + how;
  }
  return {killed == static_cast<int>(ms.size()), std::to_string(killed) + "/5 killed: " + detail};
}

Outcome vc_bridge() {
  EnumBounds bounds;
  bounds.bounded_domains = true;
  bounds.int_min = -8;
  bounds.int_max = 8;
  int axioms = 0, not_true = 0;
  std::string first;
  auto check = [&](const Program& prog, const std::string& what, std::uint32_t depth) {
    EnumBounds b = bounds;
    b.type_depth = depth;
    Context ctx = make_context(prog, VarContext{}, 3, b);
    std::vector<VcTerm> all = type_encoding_axioms(prog);
    for (const auto& f : prog.functions) all.push_back(function_typing_axiom(f));
    for (const auto& ax : all) {
      ++axioms;
      if (eval_formula(ctx, VcModel{}, ax) != std::optional<bool>(true)) {
        ++not_true;
        if (first.empty()) first = " first: " + what + " " + to_smt(ax);
      }
    }
  };
  for (std::size_t n = 0; n < corpus().size(); ++n) {
    check(corpus()[n].prog, "program " + std::to_string(n), kBridgeTypeDepth);
  }
  check(checked(read_sample("polymorphic.ivl")), "polymorphic.ivl", kBridgeTypeDepth);
  check(test::prelude_program(), "prelude", kPreludeTypeDepth);

  Program prog = test::prelude_program();
  VarContext vars = procedure_context(prog, prog.procedures[0]);
  test::ExprGen::Options opts;
  opts.quantifiers = false;
  opts.old = false;
  test::ExprGen gen(prog, vars, 99, opts);
  std::mt19937_64 rng(4);
  int compared = 0, undecided = 0, mismatches = 0;
  for (int n = 0; n < kBridgeExpressions; ++n) {
    auto [e, t] = gen.any_expr();
    Context ctx = make_context(prog, vars, rng());
    NormalState ns = sample_state(ctx, rng);
    VcModel model;
    for (const VarDecl* d : vars.all()) model.values[d->name] = *ns.lookup(d->name);
    MaybeValue want = eval_expr(ctx, ns, e);
    MaybeVc got = eval_vc(ctx, model, translate_expr(prog, vars, e));
    if (!want || !got) {
      ++undecided;
      continue;
    }
    ++compared;
    VcValue expect = t.is_int()    ? VcValue::of_int(want->i)
                     : t.is_bool() ? VcValue::of_bool(want->b)
                                   : VcValue::of_value(*want);
    if (!(*got == expect)) ++mismatches;
  }
  std::ostringstream os;
  os << axioms << " axioms (type depth " << kBridgeTypeDepth << ", prelude depth " << kPreludeTypeDepth << "), " << not_true << " not true" << first << "; " << kBridgeExpressions << " expressions, "
     << compared << " compared, " << undecided << " undecided, " << mismatches << " mismatches";
  return {not_true == 0 && mismatches == 0, os.str()};
}

Outcome type_safety() {
  Program prog = test::prelude_program();
  VarContext vars = procedure_context(prog, prog.procedures[0]);
  test::ExprGen gen(prog, vars, 11, {});
  std::mt19937_64 rng(5);
  int decided = 0, counterexamples = 0;
  ExprTyper typer = make_typer(prog, vars);
  for (int n = 0; n < kTypeSafetyExpressions; ++n) {
    auto [e, t] = gen.any_expr();
    if (!(typer.type_of(e) == t)) ++counterexamples;
    Context ctx = make_context(prog, vars, rng());
    NormalState ns = sample_state(ctx, rng);
    if (!well_typed(ctx, ns)) ++counterexamples;
    MaybeValue v = eval_expr(ctx, ns, e);
    if (v) {
      ++decided;
      if (!(value_type(*v) == t)) ++counterexamples;
    }
  }
  std::ostringstream os;
  os << kTypeSafetyExpressions << " expressions, " << decided << " decided, " << counterexamples
     << " counterexamples";
  return {counterexamples == 0, os.str()};
}

Outcome determinism() {
  auto base = std::filesystem::temp_directory_path() / "ivl-acceptance-determinism";
  std::filesystem::remove_all(base);
  std::vector<std::pair<std::string, std::string>> inputs = {
      {"running", read_sample("running.ivl")},
      {"polymorphic", read_sample("polymorphic.ivl")},
      {"no_assume", read_sample("running_no_assume.ivl")}};
  for (int n = 0; n < 5; ++n) inputs.emplace_back("fuzz" + std::to_string(n), to_string(corpus()[n].prog));
  std::size_t files = 0;
  std::vector<std::string> differ;
  for (const auto& [name, text] : inputs) {
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
      PipelineConfig cfg;
      cfg.command = solver_available() ? "verify" : "validate";
      cfg.validate = true;
      cfg.dump_dir = (base / name / std::to_string(run)).string();
      cfg.jobs = 2;
      outputs[run] = run_pipeline_text(cfg, text).out;
    }
    if (outputs[0] != outputs[1]) differ.push_back(name + " stdout");
    for (const auto& f : std::filesystem::directory_iterator(base / name / "0")) {
      auto other = base / name / "1" / f.path().filename();
      ++files;
      if (!std::filesystem::exists(other) || detail::read_file(f.path().string()) != detail::read_file(other.string())) {
        differ.push_back(name + "/" + f.path().filename().string());
      }
    }
  }
  std::filesystem::remove_all(base);
  std::string d = std::to_string(files) + " dumped files compared over " + std::to_string(inputs.size()) + " inputs";
  for (const auto& x : differ) d += (x == differ.front() ? "; differing: " : ", ") + x;
  return {differ.empty() && files > 0, d};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"running example end to end", running_example},
      {"golden structure of DAG, passive program and wp", goldens},
      {"differential fuzz, solver unsat implies no failing trace", differential_fuzz},
      {"phase validation finds nothing on the corpus", phase_validation},
      {"every seeded mutation is killed", mutation_kills},
      {"VC axioms hold in the value model, translation agrees", vc_bridge},
      {"evaluation respects static types", type_safety},
      {"identical runs give identical artifacts", determinism},
  };
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (k + 1) << ": " << criteria[k].first << " ("
              << o.detail << ") [" << seconds_since(t0) << "s]" << std::endl;
  }
  std::cout << (all ? "all criteria passed" : "some criteria failed") << std::endl;
  return all ? 0 : 1;
}
