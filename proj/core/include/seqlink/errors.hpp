#pragma once

#include <stdexcept>
#include <string>

namespace seqlink {

// Input file or record could not be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parsed data violates a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes disagree.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration value is out of range or inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pipeline stage was invoked before its upstream artifacts exist.
class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace seqlink
