#pragma once

#include <stdexcept>
#include <string>

namespace relayopt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error
{
public:
  using Error::Error;
};

/// A matrix that must be Hermitian / positive definite is not.
class MatrixPropertyError : public Error
{
public:
  using Error::Error;
};

/// The eavesdropper channel leaves no room for a zero-forcing weight vector.
class NoZeroForcingDirection : public Error
{
public:
  NoZeroForcingDirection()
    : Error("no zero-forcing direction exists: eavesdropper channel matrix has full row rank")
  {}
};

/// Invalid physical parameters (negative power, rho outside [0,1], ...).
class ParameterError : public Error
{
public:
  using Error::Error;
};

/// A rate target cannot be met by construction (zero source power with positive target).
class InfeasibleTarget : public Error
{
public:
  using Error::Error;
};

/// The harvesting requirement of a selected relay cannot be met.
class FeasibilityError : public Error
{
public:
  FeasibilityError(int relay, const std::string &what)
    : Error(what)
    , relay_(relay)
  {}

  /// Offending relay (global index), or -1 when the conflict is not tied to one relay.
  int relay() const noexcept
  {
    return relay_;
  }

private:
  int relay_;
};

/// Malformed experiment configuration.
class ConfigError : public Error
{
public:
  ConfigError(int line, const std::string &what)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what)
    , line_(line)
  {}

  int line() const noexcept
  {
    return line_;
  }

private:
  int line_;
};

}  // namespace relayopt
