#pragma once

#include <stdexcept>
#include <string>

namespace paic {

// Bad inputs: malformed files, invalid specs, disallowed option combinations.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime numerical failures: non-convergence, singular systems, no overlap.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace paic
