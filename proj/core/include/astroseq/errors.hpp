// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace astroseq {

/// Base class for every error raised by the library. The CLI maps the
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input outside an operation's mathematical domain (non-positive base of a
/// fractional power, reciprocal of a non-positive value).
class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericalOverflow : public Error {
 public:
  NumericalOverflow(const std::string& variable, const std::string& detail)
      : Error("non-finite value in '" + variable + "': " + detail), variable_(variable) {}

  const std::string& variable() const noexcept { return variable_; }

 private:
  std::string variable_;
};

/// A second backward pass was requested on a tape whose intermediates were
/// released by an earlier non-retaining backward.
class TapeConsumed : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class DegenerateSchedule : public Error {
 public:
  using Error::Error;
};

class TrainingAbort : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace astroseq
