#pragma once

#include <stdexcept>
#include <string>

namespace maxrank {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid user-facing input: out-of-range parameters, malformed config
// or data files. The CLI maps this to exit code 1.
struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Shape/contract mismatch between objects that must agree (e.g. a rank
// matrix paired with a score matrix of different dimensions).
struct StructuralError : Error {
  explicit StructuralError(const std::string& msg) : Error(msg) {}
};

// Tie-handling violation: an operation that requires pairwise distinct
// values was handed duplicates. Callers are expected to jitter first.
struct TieError : Error {
  explicit TieError(const std::string& msg) : Error(msg) {}
};

}  // namespace maxrank
