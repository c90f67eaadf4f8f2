#pragma once

#include <stdexcept>
#include <string>

namespace dvd {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller handed us something unusable: empty cloud, missing normals,
/// out-of-range parameter, degenerate geometry.
struct InvalidInput : Error {
  using Error::Error;
};

/// Tensor or vector dimensions disagree.
struct ShapeError : Error {
  using Error::Error;
};

/// Numerical failure: singular system, non-finite values, angle at the
/// logarithm cut, degenerate normal output.
struct NumericError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& what, int line_no)
      : Error(what + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
  int line;
};

}  // namespace dvd
