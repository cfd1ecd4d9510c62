#pragma once

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

extern char** environ;

namespace ivl {

struct SolverResult {
  enum class Status { Unsat, Sat, Unknown, Error };
  Status status = Status::Error;
  std::string output;  // full standard output
  std::string message;

  [[nodiscard]] bool unsat() const { return status == Status::Unsat; }
};

inline const char* to_string(SolverResult::Status s) {
  switch (s) {
    case SolverResult::Status::Unsat: return "unsat";
    case SolverResult::Status::Sat: return "sat";
    case SolverResult::Status::Unknown: return "unknown";
    case SolverResult::Status::Error: return "error";
  }
  return "?";
}

inline std::string default_solver_command() {
  if (const char* env = std::getenv("IVLC_SOLVER"); env && *env) return env;
  return "z3 -smt2";
}

/// Splits a command line on whitespace. `{}` marks where the script path
/// goes; without it the path is appended.
inline std::vector<std::string> solver_argv(const std::string& command, const std::string& path) {
  std::istringstream in(command);
  std::vector<std::string> argv;
  bool placed = false;
  for (std::string w; in >> w;) {
    if (w == "{}") {
      w = path;
      placed = true;
    }
    argv.push_back(w);
  }
  if (!placed) argv.push_back(path);
  return argv;
}

inline std::filesystem::path scratch_file(const std::string& suffix) {
  std::string tmpl = (std::filesystem::temp_directory_path() / ("ivlc-XXXXXX" + suffix)).string();
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  int fd = mkstemps(buf.data(), static_cast<int>(suffix.size()));
  if (fd < 0) throw std::runtime_error("cannot create a temporary file");
  close(fd);
  return std::filesystem::path(buf.data());
}

/// Runs an SMT-LIB script through an external solver and reads the first
/// status token of its output. A timeout kills the process and reports
/// Unknown; failure to start or unparseable output is Error.
inline SolverResult run_solver(const std::string& script, const std::string& command = default_solver_command(),
                               double timeout_seconds = 30.0) {
  SolverResult r;
  std::filesystem::path in = scratch_file(".smt2");
  std::filesystem::path out = scratch_file(".out");
  {
    std::ofstream f(in);
    f << script;
  }
  std::vector<std::string> args = solver_argv(command, in.string());
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, out.c_str(), O_WRONLY | O_TRUNC, 0600);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  pid_t pid = 0;
  int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    std::filesystem::remove(in);
    std::filesystem::remove(out);
    r.message = "cannot start solver '" + args[0] + "'";
    return r;
  }

  auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
  int wstatus = 0;
  bool timed_out = false;
  for (;;) {
    pid_t w = waitpid(pid, &wstatus, WNOHANG);
    if (w == pid) break;
    if (w < 0) {
      r.message = "waitpid failed";
      break;
    }
    if (std::chrono::steady_clock::now() > deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &wstatus, 0);
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  {
    std::ifstream f(out);
    std::stringstream ss;
    ss << f.rdbuf();
    r.output = ss.str();
  }
  std::filesystem::remove(in);
  std::filesystem::remove(out);
  if (timed_out) {
    r.status = SolverResult::Status::Unknown;
    r.message = "timeout";
    return r;
  }
  std::istringstream s(r.output);
  std::string token;
  s >> token;
  if (token == "unsat") {
    r.status = SolverResult::Status::Unsat;
  } else if (token == "sat") {
    r.status = SolverResult::Status::Sat;
  } else if (token == "unknown") {
    r.status = SolverResult::Status::Unknown;
  } else {
    r.status = SolverResult::Status::Error;
    r.message = token.empty() ? "solver produced no output" : "unexpected solver output: " + token;
    if (WIFEXITED(wstatus) && WEXITSTATUS(wstatus) == 127) r.message = "cannot start solver '" + args[0] + "'";
  }
  return r;
}

/// True when the default solver can be started.
inline bool solver_available(const std::string& command = default_solver_command()) {
  return run_solver("(check-sat)\n", command, 10.0).status == SolverResult::Status::Sat;
}

}  // namespace ivl
