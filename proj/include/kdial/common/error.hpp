#pragma once

#include <stdexcept>
#include <string>

namespace kdial {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape or table-size disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An id, index or score outside its permitted range.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or checksum-failing file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Input violates a documented precondition or data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace kdial
