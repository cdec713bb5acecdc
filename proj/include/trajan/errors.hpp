#pragma once

#include <stdexcept>
#include <string>

namespace trajan {

// Base of every error raised by the toolkit. The CLI maps subclasses to
// exit codes: UsageError -> 2, ResourceError -> 3, everything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a precondition (bad index, non-divisor block, bad flag).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes: bad magic, truncated payload, short buffer.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed container with invalid contents (NaN coordinates, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Memory budget exceeded or no capacity left to run work.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// A submitted task finished with status=error.
class TaskError : public Error {
 public:
  using Error::Error;
};

// Peer violated the worker wire protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace trajan
