#pragma once

#include <stdexcept>
#include <string>

namespace scenegram {

/// Input file or object failed schema/invariant checks. The CLI maps this to
/// exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A ground-truth tree cannot be expressed with the rules of a grammar.
class NotDerivableError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace scenegram
