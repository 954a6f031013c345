#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace gsre {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input. `line` is 1-based when the error points into a file.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what, std::optional<std::size_t> line = std::nullopt)
      : Error(line ? what + " (line " + std::to_string(*line) + ")" : what), line_(line) {}

  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  std::optional<std::size_t> line_;
};

/// An iterative routine ran out of iterations. Carries the last iterate so
/// callers can decide whether it is usable.
class MaxIterationsExceeded : public Error {
 public:
  MaxIterationsExceeded(const std::string& routine, Eigen::VectorXd last_iterate,
                        double residual, std::size_t iterations)
      : Error(routine + ": no convergence after " + std::to_string(iterations) +
              " iterations (residual " + std::to_string(residual) + ")"),
        last_iterate_(std::move(last_iterate)),
        residual_(residual),
        iterations_(iterations) {}

  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  Eigen::VectorXd last_iterate_;
  double residual_;
  std::size_t iterations_;
};

class NumericalBreakdown : public Error {
 public:
  using Error::Error;
};

/// The sample-size conditions behind the pilot tuning formula do not hold.
class HypothesisViolated : public Error {
 public:
  using Error::Error;
};

/// y == X beta, so the square-root loss has no gradient and the KKT ratio is undefined.
class ResidualZero : public Error {
 public:
  using Error::Error;
};

class NotPSD : public Error {
 public:
  using Error::Error;
};

}  // namespace gsre
