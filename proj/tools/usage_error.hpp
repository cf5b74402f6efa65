#pragma once

#include <stdexcept>

namespace fawmf::cli {

/// Bad command-line or config input; maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fawmf::cli
