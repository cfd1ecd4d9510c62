#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "ivl/parser.hpp"
#include "ivl/typecheck.hpp"

namespace ivl::test {

inline std::string read_sample(const std::string& name) {
  std::ifstream in(std::string(IVL_SAMPLES_DIR) + "/" + name);
  if (!in) throw std::runtime_error("cannot open sample " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Program checked(const std::string& text) { return typecheck(parse_program(text)); }

inline Program checked_sample(const std::string& name) { return checked(read_sample(name)); }

}  // namespace ivl::test
