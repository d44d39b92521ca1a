#pragma once

#include <stdexcept>
#include <string>

namespace polab {

// Thrown for malformed experiment configs (CLI maps this to exit code 2).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when training produces a non-finite quantity (exit code 3).
struct numeric_error : std::runtime_error {
  int step = -1;
  numeric_error(const std::string& what, int at_step)
      : std::runtime_error(what), step(at_step) {}
};

// Thrown when an artifact cannot be read or written (exit code 4).
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace polab
