#pragma once

#include <stdexcept>
#include <string>

namespace sfuda {

struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyIteration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroNorm : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FrozenModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoPrototypes : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  int line;
  ParseError(const std::string& msg, int line_no)
      : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

}  // namespace sfuda
