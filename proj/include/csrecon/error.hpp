#pragma once

#include <stdexcept>
#include <string>

namespace csrecon {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A size, count, fraction or tolerance outside its documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Operand lengths or shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A dense materialization would exceed the configured entry budget.
class TooLargeError : public Error {
 public:
  using Error::Error;
};

/// The measurements are not in the range of the sensing matrix.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Input carries no information to work with (e.g. an all-zero signal).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace csrecon
