#pragma once

#include <stdexcept>
#include <string>

namespace topoctl {

// Base for every error raised by the library. Solver errors abort a run,
// agent-side errors are converted into fallback decisions by the caller.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularSystem : public Error {
 public:
  using Error::Error;
};

class CgNoConvergence : public Error {
 public:
  CgNoConvergence(const std::string& what, int iterations, double residual)
      : Error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

class BisectionFailure : public Error {
 public:
  using Error::Error;
};

class MalformedResponse : public Error {
 public:
  using Error::Error;
};

class ClientError : public Error {
 public:
  using Error::Error;
};

class UnknownConstant : public Error {
 public:
  using Error::Error;
};

class UnknownProblem : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed files.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace topoctl
