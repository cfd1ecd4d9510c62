#pragma once

// The verification pipeline behind the command line driver: frontend,
// CFG to DAG, passification, VC generation, solver, and optionally the
// phase validators, run per procedure.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ivl/cfg_to_dag.hpp"
#include "ivl/dump.hpp"
#include "ivl/error.hpp"
#include "ivl/parser.hpp"
#include "ivl/passify.hpp"
#include "ivl/printer.hpp"
#include "ivl/semantics.hpp"
#include "ivl/solver.hpp"
#include "ivl/typecheck.hpp"
#include "ivl/validator.hpp"
#include "ivl/vc.hpp"

namespace ivl {

enum ExitCode : int {
  kExitOk = 0,
  kExitSat = 1,
  kExitFalsified = 2,
  kExitInputError = 3,
  kExitSolverError = 4,
};

/// Combines per-procedure statuses: input errors first, then falsified
/// validations, solver trouble, and failed verification.
inline int worse_exit(int a, int b) {
  auto rank = [](int c) {
    switch (c) {
      case kExitInputError: return 4;
      case kExitFalsified: return 3;
      case kExitSolverError: return 2;
      case kExitSat: return 1;
      default: return 0;
    }
  };
  return rank(a) >= rank(b) ? a : b;
}

/// Seeded faults in the phases, used to check that validation notices them.
struct Mutations {
  DagMutation dag;
  PassifyMutation passify;
  VcMutation vc;
};

struct PipelineConfig {
  std::string input;  // path, "-" for standard input
  std::string command = "verify";  // parse | typecheck | run | dump | verify | validate
  std::string solver = default_solver_command();
  double timeout = 30.0;
  std::uint64_t seed = 0;
  std::size_t samples = 200;
  std::size_t fuel = 10000;
  EnumBounds bounds;
  bool constprop = true;
  bool validate = false;
  std::string dump_dir;
  std::vector<std::string> formats = {"dot", "json", "text"};
  std::size_t jobs = 1;
  std::string resume;  // JSON CFG document (source or dag phase) to continue from
  Mutations mutations;

  void check() const {
    if (!(timeout > 0)) throw MalformedInput("timeout must be positive");
    if (jobs == 0) throw MalformedInput("--jobs must be at least 1");
    for (const auto& f : formats) {
      if (f != "dot" && f != "json" && f != "text") throw MalformedInput("unknown dump format '" + f + "'");
    }
  }
};

struct Artifacts {
  Cfg source;
  std::optional<DagResult> dag;  // absent when resuming from a DAG dump
  Cfg dag_target;
  PassiveResult passive;
  VcScript vc;
};

inline Artifacts build_artifacts(const Program& prog, const Procedure& proc, bool constprop,
                                 const Mutations& m = {}, const CfgDocument* resume = nullptr) {
  Artifacts a;
  VarContext vars = procedure_context(prog, proc);
  if (resume && resume->phase == "dag") {
    a.dag_target = resume->cfg;
  } else {
    a.source = resume ? resume->cfg : body_with_contracts(proc);
    a.dag = to_dag(a.source, m.dag);
    a.dag_target = a.dag->target;
  }
  a.passive = passify(a.dag_target, vars, m.passify);
  if (constprop) a.passive = propagate_constants(a.passive);
  VcOptions vo;
  vo.mutation = m.vc;
  a.vc = assemble_vc(prog, a.passive, vo);
  return a;
}

struct ProcedureReport {
  std::string name;
  int status = kExitOk;
  std::string out;
  std::string err;
  std::optional<SolverResult> solver;
  std::vector<PhaseCertReport> reports;
  std::vector<std::string> files;  // dumps written, in order
};

struct PipelineResult {
  int exit_code = kExitOk;
  std::string out;
  std::string err;
  std::vector<ProcedureReport> procedures;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MalformedInput("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw MalformedInput("cannot write " + p.string());
  f << text;
}

/// Text of `(define-fun <symbol> () <sort> <value>)` in a model, value only.
inline std::optional<std::string> model_value(const std::string& model, const std::string& symbol) {
  std::string key = "(define-fun " + symbol + " ()";
  std::size_t pos = model.find(key);
  if (pos == std::string::npos) return std::nullopt;
  pos += key.size();
  while (pos < model.size() && std::isspace(static_cast<unsigned char>(model[pos]))) ++pos;
  while (pos < model.size() && !std::isspace(static_cast<unsigned char>(model[pos]))) ++pos;  // sort
  while (pos < model.size() && std::isspace(static_cast<unsigned char>(model[pos]))) ++pos;
  std::size_t start = pos;
  int depth = 0;
  for (; pos < model.size(); ++pos) {
    char c = model[pos];
    if (c == '(') ++depth;
    if (c == ')') {
      if (depth == 0) break;
      --depth;
      if (depth == 0) {
        ++pos;
        break;
      }
    }
    if (depth == 0 && std::isspace(static_cast<unsigned char>(c))) break;
  }
  std::string v = model.substr(start, pos - start);
  for (const char* box : {"(int2v ", "(bool2v "}) {
    std::string b(box);
    if (v.rfind(b, 0) == 0 && v.back() == ')') v = v.substr(b.size(), v.size() - b.size() - 1);
  }
  if (v.size() > 4 && v.rfind("(- ", 0) == 0 && v.back() == ')') v = "-" + v.substr(3, v.size() - 4);
  return v;
}

inline std::string indent(const std::string& text, const std::string& pad) {
  std::string out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out += pad + line + "\n";
  return out;
}

class Runner {
 public:
  Runner(const PipelineConfig& cfg, const Program& prog, const CfgDocument* resume)
      : cfg_(cfg), prog_(prog), resume_(resume) {}

  ProcedureReport run(const Procedure& proc) const {
    ProcedureReport rep;
    rep.name = proc.name;
    try {
      if (cfg_.command == "run") {
        run_oracle(proc, rep);
      } else {
        run_phases(proc, rep);
      }
    } catch (const IrreducibleCfg& e) {
      rep.status = kExitInputError;
      rep.err += "error: " + proc.name + ": " + e.what() + "\n";
    } catch (const MalformedInput& e) {
      rep.status = kExitInputError;
      rep.err += "error: " + proc.name + ": " + e.what() + "\n";
    }
    return rep;
  }

 private:
  void run_oracle(const Procedure& proc, ProcedureReport& rep) const {
    Context ctx = make_context(prog_, procedure_context(prog_, proc), cfg_.seed, cfg_.bounds);
    CheckOptions co;
    co.samples = cfg_.samples;
    co.fuel = cfg_.fuel;
    co.seed = cfg_.seed;
    Verdict v = check_procedure(ctx, proc, co);
    std::ostringstream os;
    os << proc.name << ": " << to_string(v.kind) << " (samples=" << v.samples_run << ", unknown=" << v.unknown_count
       << ", fuel_exhausted=" << v.fuel_exhausted << ")\n";
    if (v.trace) {
      os << "  initial: " << to_string(v.trace->initial.globals)
         << (v.trace->initial.globals.empty() ? "" : ", ") << to_string(v.trace->initial.locals) << "\n";
      os << "  reason: " << v.trace->reason << "\n";
      os << indent(v.trace->dump(), "  ");
    }
    if (!v.message.empty()) os << "  " << v.message << "\n";
    rep.out = os.str();
    if (v.kind == Verdict::Kind::FailingTrace) rep.status = kExitSat;
    if (v.kind == Verdict::Kind::OracleIncomplete) rep.status = kExitSolverError;
  }

  void dump(const Procedure& proc, const Artifacts& a, ProcedureReport& rep) const {
    std::filesystem::path dir(cfg_.dump_dir.empty() ? "." : cfg_.dump_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (!std::filesystem::is_directory(dir)) throw MalformedInput("cannot create dump directory " + dir.string());
    auto emit = [&](const std::string& file, const std::string& text) {
      write_file(dir / file, text);
      rep.files.push_back((dir / file).string());
    };
    struct Phase {
      const char* name;
      const Cfg* cfg;
      std::optional<LoopInfo> loops;
    };
    std::vector<Phase> phases;
    if (a.dag) {
      phases.push_back({"source", &a.source, loops_for_display(a.source)});
      phases.push_back({"dag", &a.dag_target, a.dag->loops});
    } else {
      phases.push_back({"dag", &a.dag_target, std::nullopt});
    }
    phases.push_back({"passive", &a.passive.target, std::nullopt});
    for (const auto& fmt : cfg_.formats) {
      for (const auto& p : phases) {
        std::string base = proc.name + "." + p.name;
        if (fmt == "dot") emit(base + ".dot", cfg_to_dot(*p.cfg, base, p.loops ? &*p.loops : nullptr));
        if (fmt == "json") emit(base + ".json", document_to_json(CfgDocument{proc.name, p.name, *p.cfg}));
        if (fmt == "text") emit(base + ".txt", to_string(*p.cfg));
      }
    }
    emit(proc.name + ".smt2", a.vc.render());
  }

  void dump_reports(const Procedure& proc, const std::vector<PhaseCertReport>& reports, ProcedureReport& rep) const {
    if (cfg_.dump_dir.empty()) return;
    std::filesystem::path dir(cfg_.dump_dir);
    std::string text;
    std::string json = "[\n";
    for (std::size_t k = 0; k < reports.size(); ++k) {
      text += reports[k].text();
      json += reports[k].to_json().dump(2) + (k + 1 < reports.size() ? ",\n" : "\n");
    }
    json += "]\n";
    for (const auto& fmt : cfg_.formats) {
      if (fmt == "text") {
        write_file(dir / (proc.name + ".report.txt"), text);
        rep.files.push_back((dir / (proc.name + ".report.txt")).string());
      }
      if (fmt == "json") {
        write_file(dir / (proc.name + ".report.json"), json);
        rep.files.push_back((dir / (proc.name + ".report.json")).string());
      }
    }
  }

  void run_phases(const Procedure& proc, ProcedureReport& rep) const {
    const CfgDocument* resume = resume_ && resume_->procedure == proc.name ? resume_ : nullptr;
    Artifacts a = build_artifacts(prog_, proc, cfg_.constprop, cfg_.mutations, resume);
    std::ostringstream os;
    if (cfg_.command == "dump" || !cfg_.dump_dir.empty()) dump(proc, a, rep);
    if (cfg_.command == "dump") {
      for (const auto& f : rep.files) os << proc.name << ": wrote " << f << "\n";
      rep.out = os.str();
      return;
    }
    if (cfg_.command == "verify") {
      std::string script = "(set-option :produce-models true)\n" + a.vc.render() + "(get-model)\n";
      SolverResult sr = run_solver(script, cfg_.solver, cfg_.timeout);
      rep.solver = sr;
      switch (sr.status) {
        case SolverResult::Status::Unsat: os << proc.name << ": VERIFIED (unsat)\n"; break;
        case SolverResult::Status::Sat: {
          os << proc.name << ": NOT VERIFIED (sat)\n";
          std::string init;
          for (const auto& [var, version] : a.passive.blocks.at(a.passive.target.entry).entry) {
            if (auto v = model_value(sr.output, value_symbol(version))) {
              init += (init.empty() ? "" : ", ") + var + " = " + *v;
            }
          }
          if (!init.empty()) os << "  initial state: " << init << "\n";
          std::vector<std::pair<std::size_t, std::string>> versions;
          for (std::size_t p = sr.output.find("(define-fun x@v"); p != std::string::npos;
               p = sr.output.find("(define-fun x@v", p + 1)) {
            std::size_t start = p + 14;
            std::size_t end = sr.output.find(' ', start);
            std::string name = sr.output.substr(start, end - start);
            versions.emplace_back(std::stoul(name.substr(1)), name);
          }
          std::sort(versions.begin(), versions.end());
          std::string line;
          for (const auto& [n, name] : versions) {
            line += (line.empty() ? "" : ", ") + name + " = " + model_value(sr.output, value_symbol(name)).value_or("?");
          }
          if (!line.empty()) os << "  versions: " << line << "\n";
          if (!cfg_.dump_dir.empty()) {
            std::filesystem::path file = std::filesystem::path(cfg_.dump_dir) / (proc.name + ".model.smt2");
            write_file(file, sr.output);
            rep.files.push_back(file.string());
          }
          rep.status = kExitSat;
          break;
        }
        case SolverResult::Status::Unknown:
          os << proc.name << ": UNKNOWN (" << (sr.message.empty() ? "solver gave up" : sr.message) << ")\n";
          rep.status = kExitSolverError;
          break;
        case SolverResult::Status::Error:
          os << proc.name << ": ERROR (" << sr.message << ")\n";
          rep.status = kExitSolverError;
          break;
      }
    }
    if (cfg_.command == "validate" || cfg_.validate) {
      Context ctx = make_context(prog_, procedure_context(prog_, proc), cfg_.seed, cfg_.bounds);
      ValidateOptions vo;
      vo.samples = cfg_.samples;
      vo.fuel = cfg_.fuel;
      vo.seed = cfg_.seed;
      if (a.dag) rep.reports.push_back(certify_dag(ctx, a.source, *a.dag, vo));
      rep.reports.push_back(certify_passive(ctx, a.passive, vo));
      rep.reports.push_back(validate_vc_blocks(ctx, a.passive, a.vc, vo));
      bool ok = true;
      for (const auto& r : rep.reports) ok = ok && r.validated();
      os << proc.name << ": " << (ok ? "PHASES VALIDATED" : "VALIDATION FALSIFIED") << "\n";
      if (cfg_.command == "validate" || !ok) {
        for (const auto& r : rep.reports) os << indent(r.text(), "  ");
      }
      if (!ok) rep.status = worse_exit(rep.status, kExitFalsified);
      dump_reports(proc, rep.reports, rep);
    }
    rep.out = os.str();
  }

  const PipelineConfig& cfg_;
  const Program& prog_;
  const CfgDocument* resume_;
};

}  // namespace detail

/// Runs the configured command on program text. Procedures are processed
/// by up to `jobs` threads; their output is joined in declaration order.
inline PipelineResult run_pipeline_text(const PipelineConfig& cfg, const std::string& text,
                                        const std::string& file = {}) {
  PipelineResult res;
  try {
    cfg.check();
    std::vector<Diagnostic> warnings;
    Program parsed = parse_program(text, file, &warnings);
    for (const auto& w : warnings) res.err += "warning: " + w.to_string() + "\n";
    if (cfg.command == "parse") {
      res.out = to_string(parsed);
      return res;
    }
    Program prog = typecheck(parsed);
    if (cfg.command == "typecheck") {
      for (const auto& p : prog.procedures) res.out += p.name + ": well-typed\n";
      return res;
    }
    std::optional<CfgDocument> resume;
    if (!cfg.resume.empty()) {
      resume = document_from_json(detail::read_file(cfg.resume));
      if (resume->phase != "source" && resume->phase != "dag") {
        throw MalformedInput("can only resume from a source or dag dump, not " + resume->phase);
      }
      bool known = false;
      for (const auto& p : prog.procedures) known = known || p.name == resume->procedure;
      if (!known) throw MalformedInput("dump refers to unknown procedure " + resume->procedure);
    }
    if (cfg.command != "run" && cfg.command != "dump" && cfg.command != "verify" && cfg.command != "validate") {
      throw MalformedInput("unknown command '" + cfg.command + "'");
    }
    detail::Runner runner(cfg, prog, resume ? &*resume : nullptr);
    res.procedures.resize(prog.procedures.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t k = next++; k < prog.procedures.size(); k = next++) {
        res.procedures[k] = runner.run(prog.procedures[k]);
      }
    };
    std::size_t n = std::min(cfg.jobs, std::max<std::size_t>(prog.procedures.size(), 1));
    if (n <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < n; ++k) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    for (const auto& p : res.procedures) {
      res.out += p.out;
      res.err += p.err;
      res.exit_code = worse_exit(res.exit_code, p.status);
    }
  } catch (const SyntaxError& e) {
    res.err += std::string("error: ") + e.what() + "\n";
    res.exit_code = kExitInputError;
  } catch (const TypeError& e) {
    res.err += std::string("error: type errors:\n") + e.what() + "\n";
    res.exit_code = kExitInputError;
  } catch (const MalformedInput& e) {
    res.err += std::string("error: ") + e.what() + "\n";
    res.exit_code = kExitInputError;
  } catch (const IrreducibleCfg& e) {
    res.err += std::string("error: ") + e.what() + "\n";
    res.exit_code = kExitInputError;
  }
  return res;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  std::string text;
  try {
    if (cfg.input == "-") {
      std::stringstream ss;
      ss << std::cin.rdbuf();
      text = ss.str();
    } else {
      text = detail::read_file(cfg.input);
    }
  } catch (const MalformedInput& e) {
    PipelineResult res;
    res.err = std::string("error: ") + e.what() + "\n";
    res.exit_code = kExitInputError;
    return res;
  }
  return run_pipeline_text(cfg, text, cfg.input);
}

}  // namespace ivl
