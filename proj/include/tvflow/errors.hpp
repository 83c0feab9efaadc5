#pragma once

#include <stdexcept>
#include <string>

namespace tvflow {

enum class ErrorKind {
  Domain,       // invalid input geometry or parameters
  Singularity,  // evaluation at a singular point of the basis
  Range,        // parameters outside the supported numeric range
  Unsupported,  // mathematically valid but not treated (e.g. whole space)
  Internal,     // an invariant that should never fail did
  Integration,  // time stepping produced a non-finite or invalid state
  Runaway       // too many events during one evolution
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error domain_error(const std::string& what) {
  return Error(ErrorKind::Domain, what);
}

}  // namespace tvflow
