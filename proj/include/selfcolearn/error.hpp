#pragma once

#include <stdexcept>
#include <string>

namespace scl {

// Base of every error thrown by the library.
struct Error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error
{
  using Error::Error;
};

// Non-finite values, invalid numeric preconditions.
struct NumericError : Error
{
  using Error::Error;
};

// Graph misuse: backward on a non-scalar, consumed graph, mutation of a non-leaf.
struct GraphError : Error
{
  using Error::Error;
};

// Malformed or truncated files.
struct FormatError : Error
{
  using Error::Error;
};

struct ConfigError : Error
{
  using Error::Error;
};

// Aborted training (divergence, non-finite loss).
struct TrainingError : Error
{
  using Error::Error;
};

} // namespace scl
