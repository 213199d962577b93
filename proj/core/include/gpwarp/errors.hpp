#pragma once

#include <stdexcept>

namespace gpwarp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad arguments or inconsistent inputs. The CLI maps these to exit code 2.
struct InvalidInput : Error {
  using Error::Error;
};

// File-format and filesystem problems. CLI exit code 2.
struct IoError : Error {
  using Error::Error;
};

// Numerical breakdown (non-positive-definite kernel, singular normal
// equations, infeasible grid search). CLI exit code 3.
struct NumericalFailure : Error {
  using Error::Error;
};

}  // namespace gpwarp
