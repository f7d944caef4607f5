// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace irn {

// Base of every error raised by the library. The C API maps each subclass
// onto a distinct status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (empty input, id out of range,
// wrong rank).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Tensor or table dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf reached a loss, gradient or parameter.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; the message carries the file and line.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Binary or structured file with a bad magic, version or truncated payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Dataset construction ran out of candidates before reaching its targets.
class SupplyError : public Error {
 public:
  using Error::Error;
};

namespace detail {

[[noreturn]] inline void contract_failure(const std::string& what) {
  throw ContractViolation(what);
}

}  // namespace detail

#define IRN_EXPECTS(cond, msg)                       \
  do {                                               \
    if (!(cond)) ::irn::detail::contract_failure(msg); \
  } while (0)

}  // namespace irn
