#pragma once

#include <stdexcept>
#include <string>

namespace nearps {

/// Raised when a numerical procedure cannot produce a meaningful result
/// (rank deficiency, degenerate geometry, solver breakdown).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for inputs that violate a documented precondition.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised for unreadable, malformed or unwritable files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nearps
