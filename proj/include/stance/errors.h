#pragma once

#include <stdexcept>
#include <string>

namespace stance {

// Bad input, bad configuration or a violated precondition. The CLI maps this
// to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A remote backend (inference, chat or embedding endpoint) failed or returned
// something unusable. The CLI maps this to exit code 3.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stance
