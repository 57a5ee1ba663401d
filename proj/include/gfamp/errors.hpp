#pragma once
#include <stdexcept>
#include <string>

namespace gfamp {

// Error taxonomy used across the library; the CLI maps these to exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gfamp
