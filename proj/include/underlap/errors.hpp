#pragma once

#include <stdexcept>
#include <string>

namespace underlap {

// Error taxonomy shared by every module. Shape errors mean the caller handed
// us structurally incompatible inputs (dimension/signature mismatch); argument
// errors mean a value is out of its documented domain; numeric errors mean a
// computation left its domain and could not be repaired; capacity errors guard
// the deliberately bounded exact algorithms; precondition errors mean a
// stated entry condition (e.g. quadrature grid coverage) failed at run time.

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace underlap
