#pragma once

#include <stdexcept>
#include <string>

namespace titepk {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: negative times, non-positive doses, malformed values.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration, e.g. a reference scale built for other PK
// parameters or a dose that is not on the panel.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

// Patient data that cannot be evaluated under the model.
class DataError : public Error {
 public:
  using Error::Error;
};

// Skeleton calibration left (0, 1).
class CalibrationError : public Error {
 public:
  using Error::Error;
};

// Quadrature range does not contain the posterior mass.
class WidenRangeError : public Error {
 public:
  using Error::Error;
};

// Sampler could not start: non-finite initial density or all proposals
// rejected during adaptation.
class InitializationError : public Error {
 public:
  using Error::Error;
};

// Sampler finished but failed the R-hat check.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace titepk
