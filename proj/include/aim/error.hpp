#pragma once

#include <stdexcept>
#include <string>

namespace aim {

// Malformed input file; message carries the offending line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value violates a documented precondition (shape, range, label set).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user configuration or missing input path. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite gradients or values encountered during an optimizer step.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every dimension gate of every field was driven to zero during the
// embedding-dimension search.
class SearchCollapsed : public std::runtime_error {
 public:
  SearchCollapsed() : std::runtime_error("search collapsed; lower c") {}
};

}  // namespace aim
