#pragma once

#include <stdexcept>
#include <string>

namespace sfs {

/// Broad failure classes. The CLI maps each to its own exit code.
enum class ErrorCategory {
  shape = 2,
  numeric = 3,
  state = 4,
  io = 5,
  format = 6,
  config = 7,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::state: return "state";
    case ErrorCategory::io: return "io";
    case ErrorCategory::format: return "format";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(std::string(category_name(category)) + " error: " + what),
        category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorCategory::shape, what) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};
struct StateError : Error {
  explicit StateError(const std::string& what) : Error(ErrorCategory::state, what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorCategory::format, what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

}  // namespace sfs
