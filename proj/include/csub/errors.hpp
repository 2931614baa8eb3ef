#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace csub {

/// Library exception root. `numerical()` separates breakdowns (domain exit,
/// singular matrices) from contract violations by the caller.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool numerical() const { return false; }
};

class DomainError : public Error {
 public:
  DomainError(const std::string &what, Eigen::VectorXd where);
  const Eigen::VectorXd &where() const { return where_; }
  bool numerical() const override { return true; }

 private:
  Eigen::VectorXd where_;
};

class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string &what, Eigen::VectorXd where);
  const Eigen::VectorXd &where() const { return where_; }
  bool numerical() const override { return true; }

 private:
  Eigen::VectorXd where_;
};

/// The differential is rank deficient at a point.
class NotSubmersionError : public SingularMatrixError {
 public:
  using SingularMatrixError::SingularMatrixError;
};

/// Horizontal part of the lifted covariant derivative varies along a fiber.
class NotProjectableError : public Error {
 public:
  NotProjectableError(const std::string &what, double spread);
  double spread() const { return spread_; }
  bool numerical() const override { return true; }

 private:
  double spread_;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Integrated curve drifted beyond tolerance; the step is too coarse.
class StepSizeError : public Error {
 public:
  using Error::Error;
  bool numerical() const override { return true; }
};

std::string format_coords(const Eigen::VectorXd &v);

}  // namespace csub
