#pragma once

#include <stdexcept>
#include <string>

namespace panodar {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Arguments violate an operation's contract (shape mismatch, non-finite
/// values, labels out of range).
struct InvalidInputError : Error {
  using Error::Error;
};

/// Window planning or extraction outside the canvas.
struct InvalidGeometryError : Error {
  using Error::Error;
};

/// A file deviates structurally from its declared format.
struct FormatError : Error {
  using Error::Error;
};

/// A configuration value is out of its allowed range. Carries the key name.
struct ConfigValueError : Error {
  using Error::Error;
};

/// Input is structurally valid but the quantity is undefined on it
/// (e.g. a boundary loss with an empty reference map).
struct DegenerateInputError : Error {
  using Error::Error;
};

/// An entropy score was requested for a label with no supporting pixels.
struct UndefinedScoreError : Error {
  using Error::Error;
};

}  // namespace panodar
