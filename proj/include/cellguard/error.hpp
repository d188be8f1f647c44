#pragma once

#include <stdexcept>
#include <string>

namespace cellguard {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Central/normalized moments are undefined for a mask with no true pixel.
class EmptyMask : public Error {
 public:
  EmptyMask() : Error("mask has no foreground pixels") {}
};

class KernelDomainError : public Error {
 public:
  using Error::Error;
};

class InfeasibleNu : public Error {
 public:
  using Error::Error;
};

class DegenerateModel : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double kkt_violation)
      : Error(what), kkt_violation_(kkt_violation) {}

  double kkt_violation() const noexcept { return kkt_violation_; }

 private:
  double kkt_violation_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cellguard
