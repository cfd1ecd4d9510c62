#include <gtest/gtest.h>

#include <filesystem>

#include "ivl/pipeline.hpp"
#include "support/common.hpp"

using namespace ivl;
using ivl::test::read_sample;

namespace {

bool have_solver() {
  static bool ok = solver_available();
  return ok;
}

PipelineConfig config(const std::string& command) {
  PipelineConfig c;
  c.command = command;
  c.samples = 60;
  return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ivlc-test-" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) { return detail::read_file(p.string()); }

const char* kTwo =
    "procedure first() { var x: int; x := 1; assert x == 1; }\n"
    "procedure second() { var y: int; assert y > 0; }\n"
    "procedure third() { var z: int; z := 2; assert z > 1; }\n";

}  // namespace

TEST(ExitCodes, Priority) {
  EXPECT_EQ(worse_exit(kExitOk, kExitSat), kExitSat);
  EXPECT_EQ(worse_exit(kExitSat, kExitSolverError), kExitSolverError);
  EXPECT_EQ(worse_exit(kExitFalsified, kExitSolverError), kExitFalsified);
  EXPECT_EQ(worse_exit(kExitFalsified, kExitInputError), kExitInputError);
}

TEST(Pipeline, InputErrors) {
  PipelineResult r = run_pipeline_text(config("verify"), "procedure p( {");
  EXPECT_EQ(r.exit_code, kExitInputError);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  r = run_pipeline_text(config("verify"), "procedure p() { var x: int; x := true; }");
  EXPECT_EQ(r.exit_code, kExitInputError);
  PipelineConfig c = config("verify");
  c.input = "/nonexistent/file.ivl";
  EXPECT_EQ(run_pipeline(c).exit_code, kExitInputError);
  c = config("frobnicate");
  EXPECT_EQ(run_pipeline_text(c, kTwo).exit_code, kExitInputError);
  c = config("verify");
  c.timeout = 0;
  EXPECT_EQ(run_pipeline_text(c, kTwo).exit_code, kExitInputError);
}

TEST(Pipeline, ParseAndTypecheck) {
  PipelineResult r = run_pipeline_text(config("parse"), kTwo);
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_NE(r.out.find("procedure second"), std::string::npos);
  r = run_pipeline_text(config("typecheck"), kTwo);
  EXPECT_EQ(r.out, "first: well-typed\nsecond: well-typed\nthird: well-typed\n");
}

TEST(Pipeline, RunFindsFailingTrace) {
  PipelineResult r = run_pipeline_text(config("run"), read_sample("running_no_assume.ivl"));
  EXPECT_EQ(r.exit_code, kExitSat);
  EXPECT_NE(r.out.find("FailingTrace"), std::string::npos);
  EXPECT_NE(r.out.find("i=0"), std::string::npos) << r.out;
  r = run_pipeline_text(config("run"), read_sample("running.ivl"));
  EXPECT_EQ(r.exit_code, kExitOk) << r.out;
}

TEST(Pipeline, VerifyRunningExample) {
  if (!have_solver()) GTEST_SKIP() << "no SMT solver available";
  PipelineResult r = run_pipeline_text(config("verify"), read_sample("running.ivl"));
  EXPECT_EQ(r.exit_code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "running_example: VERIFIED (unsat)\n");
  r = run_pipeline_text(config("verify"), read_sample("running_no_assume.ivl"));
  EXPECT_EQ(r.exit_code, kExitSat);
  EXPECT_NE(r.out.find("NOT VERIFIED (sat)"), std::string::npos);
  EXPECT_NE(r.out.find("initial state: i = 0"), std::string::npos) << r.out;
}

TEST(Pipeline, SolverFailureIsReported) {
  PipelineConfig c = config("verify");
  c.solver = "/nonexistent/solver";
  PipelineResult r = run_pipeline_text(c, kTwo);
  EXPECT_EQ(r.exit_code, kExitSolverError);
  EXPECT_NE(r.out.find("first: ERROR"), std::string::npos);
}

TEST(Pipeline, JobsKeepDeclarationOrder) {
  if (!have_solver()) GTEST_SKIP() << "no SMT solver available";
  PipelineConfig c = config("verify");
  PipelineResult serial = run_pipeline_text(c, kTwo);
  c.jobs = 3;
  PipelineResult parallel = run_pipeline_text(c, kTwo);
  EXPECT_EQ(serial.out, parallel.out);
  EXPECT_EQ(parallel.exit_code, kExitSat);
  EXPECT_EQ(parallel.out.find("first: VERIFIED"), 0u);
  EXPECT_LT(parallel.out.find("second: NOT VERIFIED"), parallel.out.find("third: VERIFIED"));
}

TEST(Pipeline, ValidateCleanAndMutated) {
  PipelineConfig c = config("validate");
  PipelineResult r = run_pipeline_text(c, read_sample("running.ivl"));
  EXPECT_EQ(r.exit_code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("PHASES VALIDATED"), std::string::npos);
  EXPECT_NE(r.out.find("phase cfg_to_dag: validated"), std::string::npos);
  c.mutations.passify.drop_sync = true;
  r = run_pipeline_text(c, read_sample("running.ivl"));
  EXPECT_EQ(r.exit_code, kExitFalsified) << r.out;
  EXPECT_NE(r.out.find("phase passify: falsified"), std::string::npos);
}

TEST(Pipeline, DumpWritesArtifactsDeterministically) {
  auto dir = scratch_dir("dump");
  PipelineConfig c = config("dump");
  c.dump_dir = dir.string();
  PipelineResult r = run_pipeline_text(c, read_sample("running.ivl"));
  ASSERT_EQ(r.exit_code, kExitOk) << r.err;
  for (const char* phase : {"source", "dag", "passive"}) {
    for (const char* ext : {"dot", "json", "txt"}) {
      EXPECT_TRUE(std::filesystem::exists(dir / (std::string("running_example.") + phase + "." + ext)));
    }
  }
  std::string smt = slurp(dir / "running_example.smt2");
  std::string json = slurp(dir / "running_example.dag.json");
  run_pipeline_text(c, read_sample("running.ivl"));
  EXPECT_EQ(slurp(dir / "running_example.smt2"), smt);
  EXPECT_EQ(slurp(dir / "running_example.dag.json"), json);

  c.formats = {"json"};
  EXPECT_EQ(run_pipeline_text(c, read_sample("running.ivl")).exit_code, kExitOk);
  c.formats = {"pdf"};
  EXPECT_EQ(run_pipeline_text(c, read_sample("running.ivl")).exit_code, kExitInputError);
  std::filesystem::remove_all(dir);
}

TEST(Pipeline, ResumeFromDagDump) {
  auto dir = scratch_dir("resume");
  auto again = scratch_dir("resume-again");
  PipelineConfig c = config("dump");
  c.dump_dir = dir.string();
  ASSERT_EQ(run_pipeline_text(c, read_sample("running.ivl")).exit_code, kExitOk);
  c.dump_dir = again.string();
  c.resume = (dir / "running_example.dag.json").string();
  PipelineResult r = run_pipeline_text(c, read_sample("running.ivl"));
  ASSERT_EQ(r.exit_code, kExitOk) << r.err;
  EXPECT_EQ(slurp(again / "running_example.smt2"), slurp(dir / "running_example.smt2"));
  EXPECT_EQ(slurp(again / "running_example.passive.json"), slurp(dir / "running_example.passive.json"));
  c.resume = (dir / "running_example.passive.json").string();
  EXPECT_EQ(run_pipeline_text(c, read_sample("running.ivl")).exit_code, kExitInputError);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(again);
}

TEST(Pipeline, ReportsAreDumped) {
  auto dir = scratch_dir("reports");
  PipelineConfig c = config("validate");
  c.dump_dir = dir.string();
  ASSERT_EQ(run_pipeline_text(c, read_sample("running.ivl")).exit_code, kExitOk);
  std::string text = slurp(dir / "running_example.report.txt");
  std::string json = slurp(dir / "running_example.report.json");
  EXPECT_EQ(text.rfind("phase cfg_to_dag: validated", 0), 0u);
  EXPECT_NE(json.find("\"verdict\": \"validated\""), std::string::npos);
  run_pipeline_text(c, read_sample("running.ivl"));
  EXPECT_EQ(slurp(dir / "running_example.report.json"), json);
  std::filesystem::remove_all(dir);
}
