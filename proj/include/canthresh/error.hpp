#pragma once

#include <stdexcept>
#include <string>

namespace canthresh {

// Base for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Vector/matrix shapes that do not fit together.
struct DimensionMismatch : Error {
  using Error::Error;
};

// A parameter outside its admissible range (negative tau, delta outside (0,1), ...).
struct DomainError : Error {
  using Error::Error;
};

// The computation itself is impossible on the given data (zero design, non-PSD kernel).
struct NumericalError : Error {
  using Error::Error;
};

// Malformed external input: CSV, JSON, schema version.
struct ParseError : Error {
  using Error::Error;
};

namespace detail {

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch("dimension mismatch: " + what);
}

inline void require_domain(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace detail
}  // namespace canthresh
