#pragma once

#include <stdexcept>
#include <string>

namespace ctxmri {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInputError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct CalibrationError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct TrainingDivergedError : Error {
  using Error::Error;
};

}  // namespace ctxmri
