#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vpfp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Evaluation of the bare Coulomb field at the origin.
class SingularOrigin : public Error {
 public:
  SingularOrigin() : Error("coulomb kernel is singular at x = 0") {}
};

/// Adaptive quadrature stopped before reaching the requested tolerance.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : Error(what + " (achieved error estimate " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// A time step produced a non-finite position or velocity.
class IntegrationBlowUp : public Error {
 public:
  IntegrationBlowUp(std::size_t particle, std::size_t step)
      : Error("integration blow-up: particle " + std::to_string(particle) + " became non-finite at step " +
              std::to_string(step)),
        particle_(particle),
        step_(step) {}
  std::size_t particle() const noexcept { return particle_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t particle_;
  std::size_t step_;
};

/// Every value handed to a rate fit was zero, so there is no exponent to measure.
class DegenerateData : public Error {
 public:
  explicit DegenerateData(const std::string& what) : Error("degenerate zero data: " + what) {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed config text, with a 1-based position.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A config value that parses but breaks an invariant; key is "section.name".
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what) : Error(key + ": " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace vpfp
