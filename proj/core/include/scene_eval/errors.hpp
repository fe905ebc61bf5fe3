#pragma once

#include <stdexcept>
#include <string>

namespace scene_eval {

// Input violates a declared contract (bad file, bad shape, unresolvable id).
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A numerical routine failed (non-PSD covariance, solver did not converge).
// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace scene_eval
