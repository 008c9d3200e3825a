#pragma once

#include <stdexcept>
#include <string>

namespace braindec {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file, text or binary (bad cell, bad magic, truncated stream).
struct ParseError : Error {
  using Error::Error;
};

// Dimension mismatches and domain violations (negative loading, label out of
// range, shift past the end of the track, ...).
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite values showing up where the math requires finite ones.
struct NumericError : Error {
  using Error::Error;
};

// Filesystem-level failures: missing file, unwritable directory.
struct IoError : Error {
  using Error::Error;
};

}  // namespace braindec
