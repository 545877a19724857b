#pragma once

#include <stdexcept>
#include <string>

namespace icprl {

// Every error the library raises derives from Error so callers at the
// episode boundary can record a failed attempt without catching std::exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationDiverged : public Error {
 public:
  using Error::Error;
};

class InvalidAction : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, long position = -1)
      : Error(what), position_(position) {}
  /// Offending token index, or -1 when not token-specific.
  long position() const { return position_; }

 private:
  long position_;
};

class CurationInfeasible : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace icprl
