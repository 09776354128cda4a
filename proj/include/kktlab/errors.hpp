#pragma once

#include <stdexcept>
#include <string>

namespace kktlab {

// Inputs violating an operation's preconditions. CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Hard-margin problem has no feasible point (or the solver could not find one
// within budget). CLI exit code 3.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training never reached the small-loss regime. CLI exit code 3.
class TrainingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A linear system that should be well posed was not (NNLS breakdown, zero
// variance, ...).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace kktlab
