#pragma once

// Translation validation of the three phases by sampling. Each check runs a
// source block (or trace) in the reference semantics, builds the target
// state the phase claims to correspond to, runs the target, and compares.

#include <json.hpp>

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ivl/cfg_to_dag.hpp"
#include "ivl/passify.hpp"
#include "ivl/semantics.hpp"
#include "ivl/vc.hpp"
#include "ivl/vc_eval.hpp"

namespace ivl {

using HavocLog = std::vector<std::pair<std::string, Value>>;

struct ValidateOptions {
  std::size_t samples = 200;
  std::size_t fuel = 10000;  // block executions per global trace
  std::uint64_t seed = 0;
  std::size_t attempts = 16;  // redraws when a sample is discarded
};

/// Outcome of one sample. A failing sample doubles as the counterexample:
/// `state`, `witness`, `havocs` and `path` are enough to replay it.
struct SampleResult {
  enum class Kind : std::uint8_t { Pass, Vacuous, Unknown, Fail };
  Kind kind = Kind::Pass;
  std::string check;
  std::string detail;
  std::optional<BlockId> block;
  std::uint64_t interp_seed = 0;
  NormalState state;
  NormalState witness;
  HavocLog havocs;
  std::vector<BlockId> path;
  bool source_failed = false;
  ExecState::Kind source_kind = ExecState::Kind::Normal;
  ExecState::Kind target_kind = ExecState::Kind::Normal;

  SampleResult& fail(std::string c, std::string d) {
    kind = Kind::Fail;
    check = std::move(c);
    detail = std::move(d);
    return *this;
  }
  SampleResult& as(Kind k) {
    kind = k;
    return *this;
  }
};

struct BlockOutcome {
  enum class Kind : std::uint8_t { Validated, Falsified, Skipped };
  Kind kind = Kind::Validated;
  std::size_t samples = 0;   // samples whose checks ran to a verdict
  std::size_t vacuous = 0;   // samples discarded by the premise
  std::size_t unknown = 0;   // samples the oracle could not decide
  std::size_t failures = 0;  // source failures matched by the target
  std::optional<SampleResult> counterexample;
};

inline const char* to_string(BlockOutcome::Kind k) {
  switch (k) {
    case BlockOutcome::Kind::Validated: return "validated";
    case BlockOutcome::Kind::Falsified: return "falsified";
    case BlockOutcome::Kind::Skipped: return "skipped";
  }
  return "?";
}

struct StaticCheck {
  std::string name;
  bool ok = true;
  std::string message;
};

struct PhaseCertReport {
  std::string phase;
  std::map<BlockId, BlockOutcome> blocks;
  std::optional<BlockOutcome> global;
  std::vector<StaticCheck> static_checks;

  [[nodiscard]] bool validated() const {
    for (const auto& [b, o] : blocks) {
      if (o.kind == BlockOutcome::Kind::Falsified) return false;
    }
    if (global && global->kind == BlockOutcome::Kind::Falsified) return false;
    for (const auto& s : static_checks) {
      if (!s.ok) return false;
    }
    return true;
  }

  [[nodiscard]] std::string text() const;
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string json() const { return to_json().dump(2) + "\n"; }
};

namespace detail {

inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t block, std::uint64_t i) {
  std::uint64_t h = splitmix(seed);
  hash_mix(h, tag);
  hash_mix(h, block);
  hash_mix(h, i);
  return h;
}

inline constexpr std::uint64_t kGlobal = 0xffffffffull;

template <class F>
BlockOutcome run_samples(const ValidateOptions& opts, std::uint64_t tag, std::uint64_t block, F&& sample) {
  BlockOutcome out;
  for (std::size_t i = 0; i < opts.samples; ++i) {
    SampleResult r = sample(sample_seed(opts.seed, tag, block, i));
    switch (r.kind) {
      case SampleResult::Kind::Pass:
        ++out.samples;
        if (r.source_failed) ++out.failures;
        break;
      case SampleResult::Kind::Vacuous: ++out.vacuous; break;
      case SampleResult::Kind::Unknown: ++out.unknown; break;
      case SampleResult::Kind::Fail:
        out.kind = BlockOutcome::Kind::Falsified;
        out.counterexample = std::move(r);
        return out;
    }
  }
  if (out.samples == 0 && out.unknown > 0) out.kind = BlockOutcome::Kind::Skipped;
  return out;
}

inline Context sample_context(const Context& base, std::mt19937_64& rng) {
  Context ctx = base;
  ctx.interp_seed = base.interp_seed + rng();
  return ctx;
}

/// Resolves every havoc to the variable's value in a fixed state.
class StateHavoc : public HavocSource {
 public:
  explicit StateHavoc(const NormalState& ns) : ns_(ns) {}
  Value next(const std::string& var, const Type& type) override {
    const Value* v = ns_.lookup(var);
    return v ? *v : default_value(type);
  }

 private:
  const NormalState& ns_;
};

class ScriptedChooser {
 public:
  virtual ~ScriptedChooser() = default;
  virtual std::optional<BlockId> next(BlockId from, const std::vector<BlockId>& succs) = 0;
};

class RandomChooser : public ScriptedChooser {
 public:
  explicit RandomChooser(std::uint64_t seed) : rng_(seed) {}
  std::optional<BlockId> next(BlockId, const std::vector<BlockId>& succs) override {
    return succs[rng_() % succs.size()];
  }

 private:
  std::mt19937_64 rng_;
};

/// Follows a recorded path; `path[0]` is the entry block.
class PathChooser : public ScriptedChooser {
 public:
  explicit PathChooser(std::vector<BlockId> path) : path_(std::move(path)) {}
  std::optional<BlockId> next(BlockId, const std::vector<BlockId>&) override {
    if (pos_ + 1 >= path_.size()) return std::nullopt;
    return path_[++pos_];
  }

 private:
  std::vector<BlockId> path_;
  std::size_t pos_ = 0;
};

inline std::string diff_states(const NormalState& want, const NormalState& got) {
  std::string out;
  auto cmp = [&](const char* tag, const VarStore& a, const VarStore& b) {
    for (const auto& [k, v] : a) {
      const Value* w = b.find(k);
      if (!w || *w != v) {
        if (!out.empty()) out += ", ";
        out += std::string(tag) + k + ": expected " + to_string(v) + ", got " + (w ? to_string(*w) : "missing");
      }
    }
  };
  cmp("", want.globals, got.globals);
  cmp("", want.locals, got.locals);
  cmp("old ", want.old_globals, got.old_globals);
  return out;
}

/// True when `a` and `b` agree on every variable outside `allowed`.
inline bool agree_outside(const NormalState& a, const NormalState& b, const std::set<std::string>& allowed) {
  auto same = [&](const VarStore& x, const VarStore& y) {
    if (x.size() != y.size()) return false;
    for (const auto& [k, v] : x) {
      if (allowed.count(k)) continue;
      const Value* w = y.find(k);
      if (!w || *w != v) return false;
    }
    return true;
  };
  return same(a.globals, b.globals) && same(a.locals, b.locals) && a.old_globals == b.old_globals;
}

inline bool is_assume_false(const Command& c) {
  return c.kind == Command::Kind::Assume && c.expr->kind == ExprNode::Kind::BoolLit && !c.expr->bool_value;
}

/// Another value of the same type, if the type has one within the bounds.
inline std::optional<Value> perturb(const Context& ctx, const Value& v) {
  switch (v.kind) {
    case Value::Kind::Int:
      return Value::integer(v.i == std::numeric_limits<std::int64_t>::max() ? v.i - 1 : v.i + 1);
    case Value::Kind::Bool: return Value::boolean(!v.b);
    case Value::Kind::Abstract: {
      std::uint32_t n = std::max<std::uint32_t>(ctx.bounds.abstract_count, 1);
      if (n < 2) return std::nullopt;
      return Value::abstract(v.type, (v.index + 1) % n);
    }
  }
  return std::nullopt;
}

inline nlohmann::json store_json(const VarStore& s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : s) j[k] = to_string(v);
  return j;
}

inline nlohmann::json state_json(const NormalState& ns) {
  return {{"globals", store_json(ns.globals)}, {"locals", store_json(ns.locals)},
          {"old_globals", store_json(ns.old_globals)}};
}

inline nlohmann::json outcome_json(const BlockOutcome& o) {
  nlohmann::json j = {{"outcome", to_string(o.kind)}, {"samples", o.samples},   {"vacuous", o.vacuous},
                      {"unknown", o.unknown},         {"failures", o.failures}};
  if (o.counterexample) {
    const SampleResult& c = *o.counterexample;
    nlohmann::json cj = {{"check", c.check},
                         {"detail", c.detail},
                         {"interp_seed", c.interp_seed},
                         {"state", state_json(c.state)},
                         {"witness", state_json(c.witness)},
                         {"path", c.path}};
    nlohmann::json havocs = nlohmann::json::array();
    for (const auto& [var, v] : c.havocs) havocs.push_back({var, to_string(v)});
    cj["havocs"] = havocs;
    j["counterexample"] = cj;
  }
  return j;
}

inline std::string outcome_text(const BlockOutcome& o) {
  std::ostringstream os;
  os << to_string(o.kind) << " samples=" << o.samples << " vacuous=" << o.vacuous << " unknown=" << o.unknown
     << " failures=" << o.failures;
  if (o.counterexample) {
    const SampleResult& c = *o.counterexample;
    os << "\n      check=" << c.check << " interp_seed=" << c.interp_seed;
    std::string st = to_string(c.state.globals);
    std::string lo = to_string(c.state.locals);
    os << " state=[" << st << (st.empty() || lo.empty() ? "" : ", ") << lo << "]";
    if (!c.path.empty()) {
      os << " path=";
      for (std::size_t k = 0; k < c.path.size(); ++k) os << (k ? "," : "") << "B" << c.path[k];
    }
    os << "\n      " << c.detail;
  }
  return os.str();
}

}  // namespace detail

inline std::string PhaseCertReport::text() const {
  std::ostringstream os;
  os << "phase " << phase << ": " << (validated() ? "validated" : "falsified") << "\n";
  for (const auto& [b, o] : blocks) os << "  B" << b << ": " << detail::outcome_text(o) << "\n";
  if (global) os << "  global: " << detail::outcome_text(*global) << "\n";
  for (const auto& s : static_checks) {
    os << "  static " << s.name << ": " << (s.ok ? "ok" : "failed");
    if (!s.message.empty()) os << " (" << s.message << ")";
    os << "\n";
  }
  return os.str();
}

inline nlohmann::json PhaseCertReport::to_json() const {
  nlohmann::json j;
  j["phase"] = phase;
  j["verdict"] = validated() ? "validated" : "falsified";
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& [b, o] : blocks) {
    nlohmann::json bj = detail::outcome_json(o);
    bj["block"] = b;
    bs.push_back(bj);
  }
  j["blocks"] = bs;
  j["global"] = global ? detail::outcome_json(*global) : nlohmann::json();
  nlohmann::json sc = nlohmann::json::array();
  for (const auto& s : static_checks) sc.push_back({{"name", s.name}, {"ok", s.ok}, {"message", s.message}});
  j["static_checks"] = sc;
  return j;
}

// ---------------------------------------------------------------------------
// CFG to DAG
// ---------------------------------------------------------------------------

/// Checks a DAG result against its source CFG. Loop information is
/// recomputed from the source rather than taken from the result.
class DagValidator {
 public:
  DagValidator(const Context& ctx, const Cfg& source, const DagResult& result)
      : ctx_(ctx), source_(source), result_(result), loops_(analyze_loops(source)) {}

  [[nodiscard]] const LoopInfo& loops() const { return loops_; }

  /// Invariant assumed on entry (`true` for blocks that are not heads).
  [[nodiscard]] Expr pre_invariant(BlockId b) const {
    auto it = loops_.loops.find(b);
    return it == loops_.loops.end() ? ex::boolean(true) : it->second.invariant;
  }

  /// Invariants of the loop heads the block jumps to.
  [[nodiscard]] std::vector<Expr> post_invariants(BlockId b) const {
    std::vector<Expr> out;
    std::set<BlockId> seen;
    for (BlockId s : source_.succs(b)) {
      auto it = loops_.loops.find(s);
      if (it == loops_.loops.end() || it->second.prefix_len == 0 || !seen.insert(s).second) continue;
      out.push_back(it->second.invariant);
    }
    return out;
  }

  [[nodiscard]] const std::set<std::string>& havoc_set(BlockId b) const {
    static const std::set<std::string> none;
    auto it = loops_.loops.find(b);
    return it == loops_.loops.end() ? none : it->second.modified;
  }

  /// One local check: the source runs from `ns1`, the target from `ns2`,
  /// which may differ from `ns1` on the head's havoc set. The target's
  /// havocs replay `ns1` for that set and the source's own havoc values.
  SampleResult check_block(const Context& ctx, BlockId b, const NormalState& ns1, const NormalState& ns2,
                           HavocSource& havoc) const {
    SampleResult r;
    r.block = b;
    r.interp_seed = ctx.interp_seed;
    r.state = ns1;
    r.witness = ns2;
    RecordingHavoc rec(havoc);
    ExecState s = exec_block(ctx, ExecState::normal(ns1), source_.block(b).commands, rec);
    r.havocs = rec.log();
    r.source_kind = s.kind;
    if (s.is_stuck()) return r.as(SampleResult::Kind::Unknown);
    if (s.is_magic()) return r.as(SampleResult::Kind::Vacuous);

    detail::StateHavoc fallback(ns1);
    ScriptedHavoc script(&fallback);
    for (const auto& x : havoc_set(b)) script.push(x, *ns1.lookup(x));
    for (const auto& [x, v] : r.havocs) script.push(x, v);
    const Block& tb = result_.target.block(b);
    ExecState t = exec_block(ctx, ExecState::normal(ns2), tb.commands, script);
    r.target_kind = t.kind;
    if (t.is_stuck()) return r.as(SampleResult::Kind::Unknown);
    if (t.is_normal() && !well_typed(ctx, t.ns)) return r.fail("ill-typed-state", "target state is ill-typed");

    if (s.is_failure()) {
      r.source_failed = true;
      if (!t.is_failure()) return r.fail("missed-failure", "source fails but target ends " + std::string(to_string(t.kind)));
      return r;
    }
    for (const auto& a : post_invariants(b)) {
      MaybeValue v = eval_expr(ctx, s.ns, a);
      if (!v) return r.as(SampleResult::Kind::Unknown);
      if (!v->b) {
        if (t.is_failure()) return r;
        return r.fail("invariant-not-established",
                      "invariant " + to_string(a) + " is false after the block but the target does not fail");
      }
    }
    if (t.is_failure()) return r.fail("spurious-failure", "target fails although every invariant holds");
    bool cut = !tb.commands.empty() && detail::is_assume_false(tb.commands.back());
    if (cut) return r;
    if (!t.is_normal()) return r.fail("state-mismatch", "target ends in magic");
    if (!(t.ns == s.ns)) return r.fail("state-mismatch", detail::diff_states(s.ns, t.ns));
    return r;
  }

  SampleResult sample_block(BlockId b, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    Context ctx = detail::sample_context(ctx_, rng);
    Expr pre = pre_invariant(b);
    SampleResult last;
    last.kind = SampleResult::Kind::Vacuous;
    for (std::size_t attempt = 0; attempt < attempts_; ++attempt) {
      NormalState ns1 = sample_state(ctx, rng);
      MaybeValue p = eval_expr(ctx, ns1, pre);
      if (!p) {
        last.kind = SampleResult::Kind::Unknown;
        continue;
      }
      if (!p->b) continue;
      NormalState ns2 = ns1;
      for (const auto& x : havoc_set(b)) set_var(ctx, ns2, x, sample_value(ctx, var_type(ctx, x), rng));
      RandomHavoc h(ctx, rng());
      last = check_block(ctx, b, ns1, ns2, h);
      if (last.kind != SampleResult::Kind::Vacuous) return last;
    }
    return last;
  }

  /// Runs a source trace and the target alongside it. A back-edge in the
  /// source restarts the target at the loop head from the state in which
  /// the target entered that head.
  SampleResult check_trace(const Context& ctx, const NormalState& ns, HavocSource& havoc,
                           detail::ScriptedChooser& choose, std::size_t fuel) const {
    SampleResult r;
    r.interp_seed = ctx.interp_seed;
    r.state = ns;
    r.witness = ns;
    NormalState s = ns;
    NormalState t = ns;
    std::map<BlockId, NormalState> head_entry;
    BlockId b = source_.entry;
    RecordingHavoc rec(havoc);
    bool target_failed = false;
    for (std::size_t step = 0; step < fuel; ++step) {
      r.path.push_back(b);
      if (target_failed) {
        // The target already failed on this path; only see whether the
        // source fails too, for the statistics.
        ExecState s2 = exec_block(ctx, ExecState::normal(s), source_.block(b).commands, rec);
        r.havocs = rec.log();
        if (s2.is_failure()) r.source_failed = true;
        if (!s2.is_normal() || source_.succs(b).empty()) return r;
        std::optional<BlockId> nb = choose.next(b, source_.succs(b));
        if (!nb) return r;
        s = s2.ns;
        b = *nb;
        continue;
      }
      if (loops_.is_head(b)) head_entry[b] = t;
      std::size_t before = rec.log().size();
      ExecState s2 = exec_block(ctx, ExecState::normal(s), source_.block(b).commands, rec);
      detail::StateHavoc fallback(s);
      ScriptedHavoc script(&fallback);
      for (const auto& x : havoc_set(b)) script.push(x, *s.lookup(x));
      for (std::size_t k = before; k < rec.log().size(); ++k) script.push(rec.log()[k].first, rec.log()[k].second);
      std::vector<Command> cmds = result_.target.block(b).commands;
      bool cut = !cmds.empty() && detail::is_assume_false(cmds.back());
      if (cut) cmds.pop_back();
      ExecState t2 = exec_block(ctx, ExecState::normal(t), cmds, script);
      r.havocs = rec.log();
      r.source_kind = s2.kind;
      r.target_kind = t2.kind;
      if (s2.is_stuck() || t2.is_stuck()) return r.as(SampleResult::Kind::Unknown);
      if (s2.is_failure()) {
        r.source_failed = true;
        if (!t2.is_failure()) {
          return r.fail("missed-failure", "source fails in B" + std::to_string(b) + " but the target does not");
        }
        return r;
      }
      if (s2.is_magic()) return r;
      if (t2.is_magic()) return r.fail("spurious-magic", "target blocks in B" + std::to_string(b));
      if (t2.is_failure()) {
        target_failed = true;
        const auto& succs = source_.succs(b);
        if (succs.empty()) return r;
        std::optional<BlockId> nb = choose.next(b, succs);
        if (!nb) return r;
        s = s2.ns;
        b = *nb;
        continue;
      }
      if (!(t2.ns == s2.ns)) {
        return r.fail("state-mismatch", "after B" + std::to_string(b) + ": " + detail::diff_states(s2.ns, t2.ns));
      }
      const auto& succs = source_.succs(b);
      if (succs.empty()) return r;
      std::optional<BlockId> nb = choose.next(b, succs);
      if (!nb) return r;
      const auto& tsuccs = result_.target.succs(b);
      bool in_target = std::find(tsuccs.begin(), tsuccs.end(), *nb) != tsuccs.end();
      if (loops_.is_back_edge(b, *nb)) {
        if (in_target) return r.fail("back-edge-kept", "edge B" + std::to_string(b) + "->B" + std::to_string(*nb));
        auto it = head_entry.find(*nb);
        if (it == head_entry.end()) return r.fail("loop-entry-mismatch", "head entered only through a back-edge");
        if (!detail::agree_outside(it->second, s2.ns, havoc_set(*nb))) {
          return r.fail("loop-entry-mismatch", "state at B" + std::to_string(*nb) +
                                                   " differs outside the havoc set");
        }
        t = it->second;
      } else {
        if (!in_target) return r.fail("missing-edge", "edge B" + std::to_string(b) + "->B" + std::to_string(*nb));
        if (cut) return r.fail("spurious-magic", "target blocks at the end of B" + std::to_string(b));
        t = t2.ns;
      }
      s = s2.ns;
      b = *nb;
    }
    return r.as(SampleResult::Kind::Unknown);
  }

  SampleResult sample_trace(std::uint64_t seed, std::size_t fuel) const {
    std::mt19937_64 rng(seed);
    Context ctx = detail::sample_context(ctx_, rng);
    SampleResult last;
    last.kind = SampleResult::Kind::Vacuous;
    for (std::size_t attempt = 0; attempt < attempts_; ++attempt) {
      NormalState ns = sample_state(ctx, rng);
      RandomHavoc probe(ctx, 0);
      if (exec_block(ctx, ExecState::normal(ns), source_.block(source_.entry).commands, probe).is_magic()) continue;
      RandomHavoc h(ctx, rng());
      detail::RandomChooser choose(rng());
      last = check_trace(ctx, ns, h, choose, fuel);
      if (last.kind != SampleResult::Kind::Vacuous) return last;
    }
    return last;
  }

  /// Re-runs a counterexample deterministically.
  [[nodiscard]] SampleResult replay(const SampleResult& cex) const {
    Context ctx = ctx_;
    ctx.interp_seed = cex.interp_seed;
    ScriptedHavoc h;
    for (const auto& [x, v] : cex.havocs) h.push(x, v);
    if (cex.block) return check_block(ctx, *cex.block, cex.state, cex.witness, h);
    detail::PathChooser choose(cex.path);
    return check_trace(ctx, cex.state, h, choose, cex.path.size() + 1);
  }

  [[nodiscard]] BlockOutcome block(BlockId b, const ValidateOptions& opts) {
    attempts_ = opts.attempts;
    return detail::run_samples(opts, 1, b, [&](std::uint64_t s) { return sample_block(b, s); });
  }

  [[nodiscard]] BlockOutcome global(const ValidateOptions& opts) {
    attempts_ = opts.attempts;
    return detail::run_samples(opts, 1, detail::kGlobal, [&](std::uint64_t s) { return sample_trace(s, opts.fuel); });
  }

  [[nodiscard]] PhaseCertReport report(const ValidateOptions& opts) {
    PhaseCertReport rep;
    rep.phase = "cfg_to_dag";
    for (const auto& [b, _] : source_.blocks) rep.blocks[b] = block(b, opts);
    rep.global = global(opts);
    return rep;
  }

 private:
  Context ctx_;
  const Cfg& source_;
  const DagResult& result_;
  LoopInfo loops_;
  std::size_t attempts_ = ValidateOptions{}.attempts;
};

// ---------------------------------------------------------------------------
// Passification
// ---------------------------------------------------------------------------

class PassiveValidator {
 public:
  PassiveValidator(const Context& ctx, const PassiveResult& r) : ctx_(ctx), r_(r) {
    initial_ = r.blocks.at(r.source.entry).entry;
  }

  [[nodiscard]] Context target_context(const Context& ctx) const {
    Context t = ctx;
    t.vars = r_.version_context();
    return t;
  }

  /// Value of a version in the witness, reading inlined versions from
  /// their literal.
  [[nodiscard]] std::optional<Value> version_value(const Context& ctx, const NormalState& t,
                                                   const std::string& v) const {
    auto it = r_.inlined.find(v);
    if (it != r_.inlined.end()) return eval_expr(ctx, NormalState{}, it->second);
    if (const Value* x = t.locals.find(v)) return *x;
    return std::nullopt;
  }

  /// Adjusts a sampled state to lie in the domain of the block's entry
  /// relation: inlined entry versions fix their variable, and a global
  /// whose entry version is the procedure's initial one equals its old value.
  [[nodiscard]] NormalState canonical(const Context& ctx, BlockId b, NormalState ns) const {
    const PassiveBlockInfo& info = r_.blocks.at(b);
    for (const auto& [n, v] : info.entry) {
      auto it = r_.inlined.find(v);
      if (it != r_.inlined.end()) {
        if (MaybeValue lit = eval_expr(ctx, NormalState{}, it->second)) set_var(ctx, ns, n, *lit);
      }
    }
    for (const auto& [g, _] : ctx.vars.globals) {
      if (info.entry.at(g) == initial_.at(g)) ns.old_globals.set(g, *ns.globals.find(g));
    }
    return ns;
  }

  SampleResult check_block(const Context& ctx, BlockId b, const NormalState& ns_in, HavocSource& havoc) const {
    SampleResult r;
    r.block = b;
    r.interp_seed = ctx.interp_seed;
    NormalState ns = canonical(ctx, b, ns_in);
    r.state = ns;
    const PassiveBlockInfo& info = r_.blocks.at(b);
    Step st = run_source(ctx, b, ns, havoc);
    r.havocs = st.havocs;
    r.source_kind = st.after.kind;
    if (st.after.is_stuck()) return r.as(SampleResult::Kind::Unknown);
    if (st.after.is_magic()) return r.as(SampleResult::Kind::Vacuous);

    Context tctx = target_context(ctx);
    NormalState t = defaults(tctx);
    for (const auto& [n, v] : initial_) {
      if (ctx.vars.globals.count(n) && !r_.inlined.count(v)) t.locals.set(v, *ns.old_globals.find(n));
    }
    for (const auto& [n, v] : info.entry) {
      if (!r_.inlined.count(v)) t.locals.set(v, *ns.lookup(n));
    }
    if (auto bad = assign_step(ctx, info, st, t)) return r.fail("inlined-mismatch", *bad);
    r.witness = t;
    return compare_block(ctx, tctx, b, st, t, r, true);
  }

  SampleResult sample_block(BlockId b, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    Context ctx = detail::sample_context(ctx_, rng);
    SampleResult last;
    last.kind = SampleResult::Kind::Vacuous;
    for (std::size_t attempt = 0; attempt < attempts_; ++attempt) {
      NormalState ns = sample_state(ctx, rng);
      RandomHavoc h(ctx, rng());
      last = check_block(ctx, b, ns, h);
      if (last.kind != SampleResult::Kind::Vacuous) return last;
    }
    return last;
  }

  /// Runs a source trace through the DAG, builds one witness for the whole
  /// path and executes the target along the same blocks.
  SampleResult check_trace(const Context& ctx, const NormalState& ns, HavocSource& havoc,
                           detail::ScriptedChooser& choose) const {
    SampleResult r;
    r.interp_seed = ctx.interp_seed;
    r.state = ns;
    std::vector<Step> steps;
    BlockId b = r_.source.entry;
    NormalState s = ns;
    for (std::size_t guard = 0; guard <= r_.source.blocks.size(); ++guard) {
      r.path.push_back(b);
      steps.push_back(run_source(ctx, b, s, havoc));
      for (const auto& h : steps.back().havocs) r.havocs.push_back(h);
      const ExecState& after = steps.back().after;
      if (!after.is_normal()) break;
      const auto& succs = r_.source.succs(b);
      if (succs.empty()) break;
      std::optional<BlockId> nb = choose.next(b, succs);
      if (!nb) break;
      s = after.ns;
      b = *nb;
    }
    const ExecState& last = steps.back().after;
    r.source_kind = last.kind;
    if (last.is_stuck()) return r.as(SampleResult::Kind::Unknown);

    Context tctx = target_context(ctx);
    NormalState t = defaults(tctx);
    for (const auto& [n, v] : initial_) {
      if (!r_.inlined.count(v)) t.locals.set(v, *ns.lookup(n));
    }
    for (std::size_t k = 0; k < steps.size(); ++k) {
      if (auto bad = assign_step(ctx, r_.blocks.at(r.path[k]), steps[k], t)) return r.fail("inlined-mismatch", *bad);
    }
    r.witness = t;
    SampleResult cur = r;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      BlockId blk = r.path[k];
      for (const auto& [n, v] : r_.blocks.at(blk).entry) {
        std::optional<Value> tv = version_value(tctx, t, v);
        if (!tv || *tv != *steps[k].before.lookup(n)) {
          return r.fail("relation-broken", "entry of B" + std::to_string(blk) + ": " + n + " is not " + v);
        }
      }
      if (k + 1 < steps.size()) {
        const auto& ts = r_.target.succs(blk);
        if (std::find(ts.begin(), ts.end(), r.path[k + 1]) == ts.end()) {
          return r.fail("missing-edge", "edge B" + std::to_string(blk) + "->B" + std::to_string(r.path[k + 1]));
        }
      }
      cur = compare_block(ctx, tctx, blk, steps[k], t, cur, false);
      if (cur.kind != SampleResult::Kind::Pass || !steps[k].after.is_normal()) return cur;
    }
    return cur;
  }

  SampleResult sample_trace(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    Context ctx = detail::sample_context(ctx_, rng);
    SampleResult last;
    last.kind = SampleResult::Kind::Vacuous;
    for (std::size_t attempt = 0; attempt < attempts_; ++attempt) {
      NormalState ns = sample_state(ctx, rng);
      RandomHavoc probe(ctx, 0);
      if (exec_block(ctx, ExecState::normal(ns), r_.source.block(r_.source.entry).commands, probe).is_magic()) {
        continue;
      }
      RandomHavoc h(ctx, rng());
      detail::RandomChooser choose(rng());
      last = check_trace(ctx, ns, h, choose);
      if (last.kind != SampleResult::Kind::Vacuous) return last;
    }
    return last;
  }

  [[nodiscard]] SampleResult replay(const SampleResult& cex) const {
    Context ctx = ctx_;
    ctx.interp_seed = cex.interp_seed;
    ScriptedHavoc h;
    for (const auto& [x, v] : cex.havocs) h.push(x, v);
    if (cex.block) return check_block(ctx, *cex.block, cex.state, h);
    detail::PathChooser choose(cex.path);
    return check_trace(ctx, cex.state, h, choose);
  }

  [[nodiscard]] BlockOutcome block(BlockId b, const ValidateOptions& opts) {
    attempts_ = opts.attempts;
    return detail::run_samples(opts, 2, b, [&](std::uint64_t s) { return sample_block(b, s); });
  }

  [[nodiscard]] BlockOutcome global(const ValidateOptions& opts) {
    attempts_ = opts.attempts;
    return detail::run_samples(opts, 2, detail::kGlobal, [&](std::uint64_t s) { return sample_trace(s); });
  }

  [[nodiscard]] PhaseCertReport report(const ValidateOptions& opts) {
    PhaseCertReport rep;
    rep.phase = "passify";
    for (const auto& [b, _] : r_.source.blocks) rep.blocks[b] = block(b, opts);
    rep.global = global(opts);
    VersionOrderResult vo = check_version_order(r_);
    rep.static_checks.push_back(StaticCheck{"version_order", vo.ok, vo.message});
    return rep;
  }

 private:
  struct Step {
    NormalState before;
    ExecState after;
    std::vector<Value> writes;  // value of each assigned or havocked variable
    std::vector<bool> assigned;  // write came from an assignment
    HavocLog havocs;
  };

  Step run_source(const Context& ctx, BlockId b, const NormalState& ns, HavocSource& havoc) const {
    Step st;
    st.before = ns;
    st.after = ExecState::normal(ns);
    RecordingHavoc rec(havoc);
    for (const auto& c : r_.source.block(b).commands) {
      exec_cmd_inplace(ctx, st.after, c, rec);
      if (!st.after.is_normal()) break;
      if (c.changes_state()) {
        st.writes.push_back(*st.after.ns.lookup(c.var));
        st.assigned.push_back(c.kind == Command::Kind::Assign);
      }
    }
    st.havocs = rec.log();
    return st;
  }

  static NormalState defaults(const Context& tctx) {
    NormalState t;
    for (const auto& [name, d] : tctx.vars.locals) t.locals.set(name, default_value(d.type));
    return t;
  }

  /// Stores the values a source step gives to its write and sync versions.
  std::optional<std::string> assign_step(const Context& ctx, const PassiveBlockInfo& info, const Step& st,
                                         NormalState& t) const {
    auto put = [&](const std::string& v, const Value& x) -> std::optional<std::string> {
      auto it = r_.inlined.find(v);
      if (it == r_.inlined.end()) {
        t.locals.set(v, x);
        return std::nullopt;
      }
      MaybeValue lit = eval_expr(ctx, NormalState{}, it->second);
      if (lit && *lit == x) return std::nullopt;
      return v + " was inlined as " + to_string(it->second) + " but the source computes " + to_string(x);
    };
    for (std::size_t k = 0; k < st.writes.size() && k < info.writes.size(); ++k) {
      if (auto bad = put(info.writes[k], st.writes[k])) return bad;
    }
    if (st.after.is_normal()) {
      for (const auto& [n, v] : info.syncs) {
        if (auto bad = put(v, *st.after.ns.lookup(n))) return bad;
      }
    }
    return std::nullopt;
  }

  SampleResult compare_block(const Context& ctx, const Context& tctx, BlockId b, const Step& st, const NormalState& t,
                            SampleResult r, bool pin) const {
    const PassiveBlockInfo& info = r_.blocks.at(b);
    const auto& cmds = r_.target.block(b).commands;
    for (const auto& c : cmds) {
      if (c.changes_state()) return r.fail("not-passive", "B" + std::to_string(b) + " contains " + to_string(c));
    }
    detail::StateHavoc none(t);
    ExecState out = exec_block(tctx, ExecState::normal(t), cmds, none);
    r.target_kind = out.kind;
    if (out.is_stuck()) return r.as(SampleResult::Kind::Unknown);
    if (st.after.is_magic()) return r;
    if (out.is_magic()) return r.fail("spurious-magic", "witness does not satisfy the assumptions of B" + std::to_string(b));
    if (st.after.is_failure()) {
      r.source_failed = true;
      if (!out.is_failure()) return r.fail("missed-failure", "source fails in B" + std::to_string(b) + " but the target does not");
      return r;
    }
    if (out.is_failure()) return r.fail("spurious-failure", "target fails in B" + std::to_string(b));
    for (const auto& [n, v] : info.exit) {
      std::optional<Value> tv = version_value(tctx, t, v);
      const Value* sv = st.after.ns.lookup(n);
      if (!tv || !sv || *tv != *sv) {
        return r.fail("relation-broken", "exit of B" + std::to_string(b) + ": " + n + " = " +
                                             (sv ? to_string(*sv) : "?") + " but " + v + " = " +
                                             (tv ? to_string(*tv) : "?"));
      }
    }
    if (!pin) return r;
    std::vector<std::string> pinned;
    for (std::size_t k = 0; k < info.writes.size() && k < st.assigned.size(); ++k) {
      if (st.assigned[k]) pinned.push_back(info.writes[k]);
    }
    for (const auto& [n, v] : info.syncs) pinned.push_back(v);
    std::set<std::string> done;
    for (const auto& v : pinned) {
      if (r_.inlined.count(v) || !done.insert(v).second) continue;
      std::optional<Value> other = detail::perturb(ctx, *t.locals.find(v));
      if (!other) continue;
      NormalState t2 = t;
      t2.locals.set(v, *other);
      detail::StateHavoc none2(t2);
      ExecState o2 = exec_block(tctx, ExecState::normal(t2), cmds, none2);
      if (o2.is_normal()) {
        return r.fail("unconstrained-version", v + " (" + r_.versions.at(v).var + ") is not determined by B" +
                                                   std::to_string(b));
      }
    }
    return r;
  }

  Context ctx_;
  const PassiveResult& r_;
  VarRelation initial_;
  std::size_t attempts_ = ValidateOptions{}.attempts;
};

// ---------------------------------------------------------------------------
// Verification condition
// ---------------------------------------------------------------------------

/// Checks the block-named weakest preconditions against the passive program
/// in the value bridge model.
class VcValidator {
 public:
  VcValidator(const Context& ctx, const PassiveResult& r, const VcScript& script)
      : ctx_(ctx), r_(r), model_(model_of(script)) {
    ctx_.vars = r.version_context();
  }

  [[nodiscard]] const Context& target_context() const { return ctx_; }

  [[nodiscard]] VcModel model(const NormalState& t) const {
    VcModel m = model_;
    for (const auto& [n, v] : t.locals) m.values[n] = v;
    return m;
  }

  /// wp_B true must rule out failure and establish every successor's wp;
  /// wp_B false must mean the block fails or some successor's wp is false.
  SampleResult check_block(const Context& ctx, BlockId b, const NormalState& t) const {
    SampleResult r;
    r.block = b;
    r.interp_seed = ctx.interp_seed;
    r.state = t;
    r.witness = t;
    VcModel m = model(t);
    std::optional<bool> wp = eval_formula(ctx, m, vc::sym(wp_symbol(b)));
    if (!wp) return r.as(SampleResult::Kind::Unknown);
    detail::StateHavoc none(t);
    ExecState out = exec_block(ctx, ExecState::normal(t), r_.target.block(b).commands, none);
    r.target_kind = out.kind;
    if (out.is_stuck()) return r.as(SampleResult::Kind::Unknown);
    std::optional<BlockId> false_succ;
    bool unknown = false;
    if (out.is_normal()) {
      for (BlockId s : r_.target.succs(b)) {
        std::optional<bool> w = eval_formula(ctx, m, vc::sym(wp_symbol(s)));
        if (!w) {
          unknown = true;
        } else if (!*w && !false_succ) {
          false_succ = s;
        }
      }
    }
    if (*wp) {
      if (out.is_failure()) return r.fail("wp-unsound", wp_symbol(b) + " holds but the block fails");
      if (false_succ) {
        return r.fail("wp-unsound", wp_symbol(b) + " holds but " + wp_symbol(*false_succ) + " does not after the block");
      }
      if (unknown) return r.as(SampleResult::Kind::Unknown);
      return r;
    }
    if (out.is_failure() || false_succ) return r;
    if (unknown) return r.as(SampleResult::Kind::Unknown);
    if (out.is_magic()) return r.fail("wp-inexact", wp_symbol(b) + " is false although the block ends in magic");
    return r.fail("wp-inexact", wp_symbol(b) + " is false although the block and all successors are fine");
  }

  /// wp of the entry true must exclude every failing path of the target.
  SampleResult check_entry(const Context& ctx, const NormalState& t, std::size_t fuel) const {
    SampleResult r;
    r.interp_seed = ctx.interp_seed;
    r.state = t;
    r.witness = t;
    std::optional<bool> wp = eval_formula(ctx, model(t), vc::sym(wp_symbol(r_.target.entry)));
    if (!wp) return r.as(SampleResult::Kind::Unknown);
    if (!*wp) return r.as(SampleResult::Kind::Vacuous);
    std::vector<std::pair<BlockId, std::vector<BlockId>>> stack = {{r_.target.entry, {}}};
    detail::StateHavoc none(t);
    bool unknown = false;
    while (!stack.empty()) {
      if (fuel-- == 0) return r.as(SampleResult::Kind::Unknown);
      auto [b, path] = stack.back();
      stack.pop_back();
      path.push_back(b);
      ExecState out = exec_block(ctx, ExecState::normal(t), r_.target.block(b).commands, none);
      if (out.is_stuck()) unknown = true;
      if (out.is_failure()) {
        r.path = path;
        return r.fail("wp-unsound", "entry wp holds but the path fails in B" + std::to_string(b));
      }
      if (!out.is_normal()) continue;
      for (BlockId s : r_.target.succs(b)) stack.emplace_back(s, path);
    }
    return unknown ? r.as(SampleResult::Kind::Unknown) : r;
  }

  SampleResult sample_block(BlockId b, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    Context ctx = detail::sample_context(ctx_, rng);
    return check_block(ctx, b, sample_state(ctx, rng));
  }

  SampleResult sample_entry(std::uint64_t seed, std::size_t fuel) const {
    std::mt19937_64 rng(seed);
    Context ctx = detail::sample_context(ctx_, rng);
    SampleResult last;
    last.kind = SampleResult::Kind::Vacuous;
    for (std::size_t attempt = 0; attempt < attempts_; ++attempt) {
      last = check_entry(ctx, sample_state(ctx, rng), fuel);
      if (last.kind != SampleResult::Kind::Vacuous) return last;
    }
    return last;
  }

  [[nodiscard]] SampleResult replay(const SampleResult& cex, std::size_t fuel = 10000) const {
    Context ctx = ctx_;
    ctx.interp_seed = cex.interp_seed;
    if (cex.block) return check_block(ctx, *cex.block, cex.state);
    return check_entry(ctx, cex.state, fuel);
  }

  [[nodiscard]] PhaseCertReport report(const ValidateOptions& opts) {
    attempts_ = opts.attempts;
    PhaseCertReport rep;
    rep.phase = "vc";
    for (const auto& [b, _] : r_.target.blocks) {
      rep.blocks[b] = detail::run_samples(opts, 3, b, [&](std::uint64_t s) { return sample_block(b, s); });
    }
    rep.global = detail::run_samples(opts, 3, detail::kGlobal,
                                     [&](std::uint64_t s) { return sample_entry(s, opts.fuel); });
    return rep;
  }

 private:
  Context ctx_;
  const PassiveResult& r_;
  VcModel model_;
  std::size_t attempts_ = ValidateOptions{}.attempts;
};

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

inline BlockOutcome validate_dag_block(const Context& ctx, const Cfg& source, const DagResult& dag, BlockId b,
                                       const ValidateOptions& opts = {}) {
  return DagValidator(ctx, source, dag).block(b, opts);
}

inline BlockOutcome validate_passive_block(const Context& ctx, const PassiveResult& r, BlockId b,
                                           const ValidateOptions& opts = {}) {
  return PassiveValidator(ctx, r).block(b, opts);
}

inline BlockOutcome validate_global(const Context& ctx, const Cfg& source, const DagResult& dag,
                                    const ValidateOptions& opts = {}) {
  return DagValidator(ctx, source, dag).global(opts);
}

inline BlockOutcome validate_global(const Context& ctx, const PassiveResult& r, const ValidateOptions& opts = {}) {
  return PassiveValidator(ctx, r).global(opts);
}

inline PhaseCertReport validate_vc_blocks(const Context& ctx, const PassiveResult& r, const VcScript& script,
                                          const ValidateOptions& opts = {}) {
  return VcValidator(ctx, r, script).report(opts);
}

inline PhaseCertReport certify_dag(const Context& ctx, const Cfg& source, const DagResult& dag,
                                   const ValidateOptions& opts = {}) {
  return DagValidator(ctx, source, dag).report(opts);
}

inline PhaseCertReport certify_passive(const Context& ctx, const PassiveResult& r, const ValidateOptions& opts = {}) {
  return PassiveValidator(ctx, r).report(opts);
}

/// Reports for the three phases, in pipeline order. `ctx` is the context of
/// the source procedure.
inline std::vector<PhaseCertReport> certify(const Context& ctx, const Cfg& source, const DagResult& dag,
                                            const PassiveResult& passive, const VcScript& script,
                                            const ValidateOptions& opts = {}) {
  return {certify_dag(ctx, source, dag, opts), certify_passive(ctx, passive, opts),
          validate_vc_blocks(ctx, passive, script, opts)};
}

}  // namespace ivl
