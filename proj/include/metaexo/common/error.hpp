#pragma once

#include <stdexcept>
#include <string>

namespace metaexo {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- kinematics --------------------------------------------------------------

class DegenerateBoneError : public Error {
 public:
  using Error::Error;
};

class TopologyMismatchError : public Error {
 public:
  using Error::Error;
};

// -- dataset -----------------------------------------------------------------

class TooShortError : public Error {
 public:
  using Error::Error;
};

class TooFewTrajectoriesError : public Error {
 public:
  using Error::Error;
};

class BadParamsError : public Error {
 public:
  using Error::Error;
};

class ZeroScaleError : public Error {
 public:
  using Error::Error;
};

// -- autodiff ----------------------------------------------------------------

class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

class NaNDetectedError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// -- simulation --------------------------------------------------------------

class NonPositiveInertiaError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class LyapunovViolationError : public Error {
 public:
  using Error::Error;
};

// -- configuration / io ------------------------------------------------------

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace metaexo
