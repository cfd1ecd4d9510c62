#include <CLI11.hpp>

#include <iostream>

#include "ivl/pipeline.hpp"

namespace {

void add_common(CLI::App* cmd, ivl::PipelineConfig& cfg, std::vector<std::string>& mutate) {
  cmd->add_option("input", cfg.input, "Program file, - for standard input")->required();
  cmd->add_option("--seed", cfg.seed, "Seed for state sampling and interpretations");
  cmd->add_option("--samples", cfg.samples, "Sampled states per check");
  cmd->add_option("--fuel", cfg.fuel, "Block executions per sampled run");
  cmd->add_option("--int-min", cfg.bounds.int_min, "Smallest enumerated integer");
  cmd->add_option("--int-max", cfg.bounds.int_max, "Largest enumerated integer");
  cmd->add_option("--jobs,-j", cfg.jobs, "Procedures processed in parallel")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-constprop", [&cfg](std::int64_t) { cfg.constprop = false; }, "Skip constant propagation");
  cmd->add_option("--dump", cfg.dump_dir, "Directory for dumped artifacts");
  cmd->add_option("--format", cfg.formats, "Dump formats: dot, json, text")
      ->delimiter(',')
      ->check(CLI::IsMember({"dot", "json", "text"}));
  cmd->add_option("--resume", cfg.resume, "Continue from a dumped source or dag JSON document")
      ->check(CLI::ExistingFile);
  cmd->add_option("--mutate", mutate, "Seed a fault into a phase")
      ->check(CLI::IsMember({"drop_assert_move", "drop_havoc", "double_constrain", "drop_sync", "assume_as_and"}))
      ->group("Testing");
}

void add_solver(CLI::App* cmd, ivl::PipelineConfig& cfg) {
  cmd->add_option("--solver", cfg.solver, "SMT-LIB solver command line")->capture_default_str();
  cmd->add_option("--timeout", cfg.timeout, "Solver timeout in seconds")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  ivl::PipelineConfig cfg;
  std::vector<std::string> mutate;
  CLI::App app{"ivlc: verification condition generation for a small intermediate verification language"};
  app.require_subcommand(1);

  auto* parse = app.add_subcommand("parse", "Parse and pretty-print the program");
  auto* typecheck = app.add_subcommand("typecheck", "Parse and type check the program");
  auto* run = app.add_subcommand("run", "Search for failing executions with the interpreter");
  auto* dump = app.add_subcommand("dump", "Write the CFG of each phase and the SMT query");
  auto* verify = app.add_subcommand("verify", "Generate the verification condition and ask the solver");
  auto* validate = app.add_subcommand("validate", "Check each phase against the semantics by sampling");
  for (auto* cmd : {parse, typecheck, run, dump, verify, validate}) add_common(cmd, cfg, mutate);
  add_solver(verify, cfg);
  verify->add_flag("--validate", cfg.validate, "Also validate the phases");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : ivl::kExitInputError;
  }
  for (auto* cmd : {parse, typecheck, run, dump, verify, validate}) {
    if (cmd->parsed()) cfg.command = cmd->get_name();
  }
  for (const auto& m : mutate) {
    if (m == "drop_assert_move") cfg.mutations.dag.drop_assert_move = true;
    if (m == "drop_havoc") cfg.mutations.dag.drop_havoc = true;
    if (m == "double_constrain") cfg.mutations.passify.double_constrain = true;
    if (m == "drop_sync") cfg.mutations.passify.drop_sync = true;
    if (m == "assume_as_and") cfg.mutations.vc.assume_as_and = true;
  }

  ivl::PipelineResult r = ivl::run_pipeline(cfg);
  std::cout << r.out << std::flush;
  std::cerr << r.err << std::flush;
  return r.exit_code;
}
