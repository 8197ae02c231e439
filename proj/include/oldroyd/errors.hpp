#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oldroyd {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (grid shape, parameter range, dt, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A field contained NaN or Inf where finite samples are required.
class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

/// The advective CFL bound of the stress transport substep was exceeded.
class CflViolation : public Error {
 public:
  CflViolation(const std::string& what, double cfl) : Error(what), cfl_(cfl) {}
  double cfl() const noexcept { return cfl_; }

 private:
  double cfl_;
};

/// Successive fixed-point iterates stopped contracting (ratio >= 1 on three consecutive iterates).
class NonContraction : public Error {
 public:
  NonContraction(const std::string& what, std::vector<double> ratios)
      : Error(what), ratios_(std::move(ratios)) {}
  const std::vector<double>& ratios() const noexcept { return ratios_; }

 private:
  std::vector<double> ratios_;
};

/// The fixed-point iteration hit its iteration cap before reaching the tolerance.
class MaxIterExceeded : public Error {
 public:
  MaxIterExceeded(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// No usable sample was available for an empirical constant.
class EmptyEstimate : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed, or its contents are malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace oldroyd
