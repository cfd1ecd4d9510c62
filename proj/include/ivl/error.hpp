#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ivl {

struct SourceSpan {
  std::string file;
  int start_line = 0;
  int start_col = 0;
  int end_line = 0;
  int end_col = 0;

  [[nodiscard]] std::string to_string() const {
    std::string out = file.empty() ? std::string("<input>") : file;
    out += ':' + std::to_string(start_line) + ':' + std::to_string(start_col);
    return out;
  }
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates an operation's precondition (unmapped type index, bad JSON, ...).
class MalformedInput : public Error {
 public:
  using Error::Error;
};

/// A bug in one of our own phases or in the interpreter, never a user error.
class InternalError : public Error {
 public:
  using Error::Error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(SourceSpan span, const std::string& message)
      : Error(span.to_string() + ": syntax error: " + message), span_(std::move(span)) {}
  [[nodiscard]] const SourceSpan& span() const noexcept { return span_; }

 private:
  SourceSpan span_;
};

struct Diagnostic {
  SourceSpan span;
  std::string message;
  [[nodiscard]] std::string to_string() const { return span.to_string() + ": " + message; }
};

inline std::string join_diagnostics(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) {
    if (!out.empty()) out += '\n';
    out += d.to_string();
  }
  return out;
}

/// Collected type errors; thrown once per program so the user sees every problem.
class TypeError : public Error {
 public:
  explicit TypeError(std::vector<Diagnostic> diags)
      : Error(join_diagnostics(diags)), diagnostics_(std::move(diags)) {}
  [[nodiscard]] const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

class IrreducibleCfg : public Error {
 public:
  using Error::Error;
};

}  // namespace ivl
