#pragma once

#include <stdexcept>
#include <string>

namespace gisad {

/// Bad or non-finite input data (CLI exit code 1).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or incompatible model/data (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fit could not be carried out on the supplied data, e.g. a degenerate
/// distribution or an under-populated conditional bin.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gisad
