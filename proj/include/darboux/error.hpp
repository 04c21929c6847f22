#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace darboux {

// Base class for every error the library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Expression text could not be parsed. `offset` is the byte offset of the
// offending token in the source string.
struct ParseError : Error {
  std::size_t offset;
  ParseError(const std::string& what, std::size_t off)
      : Error(what + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

// Expression evaluation hit a domain violation (division by zero, ln of a
// non-positive value, ...). `offset` locates the offending node's token.
struct EvalError : Error {
  std::size_t offset;
  EvalError(const std::string& what, std::size_t off)
      : Error(what + " (node at byte " + std::to_string(off) + ")"), offset(off) {}
};

// Geometric preconditions violated: parameter outside the surface domain,
// irregular point, degenerate sample, non-convergent projection, ...
struct GeometryError : Error {
  using Error::Error;
};

// Curve tracing could not start or continue. The code tells callers which
// admissibility condition failed.
struct TraceError : Error {
  enum class Code {
    DiscriminantNegative,  // no real solution of the direction system
    Degenerate,            // direction pairing degenerate (axis parallel to normal, ...)
    Regularity,            // surface irregular at the point
    Domain,                // left the parameter domain / bounding box
    NotOnLevelSet,         // start point does not satisfy the defining level equation
    LevelSetSingular,      // level-set gradient vanished (f for surfaces, g for isophotes)
    ProjectionFailed,      // Newton projection back to the surface failed
  };
  Code code;
  TraceError(Code c, const std::string& what) : Error(what), code(c) {}
};

}  // namespace darboux
