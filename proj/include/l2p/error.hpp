#pragma once

#include <stdexcept>
#include <string>

namespace l2p {

// All library failures derive from Error so callers can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

// Corrupt or truncated file contents. The message names the offending path.
struct ParseError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  using Error::Error;
};

}  // namespace l2p
