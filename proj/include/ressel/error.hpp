// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ressel {

// Base of every error the library throws. `code` is a stable identifier
// surfaced in logs and HTTP error bodies; `exit_code` follows the CLI
// convention (1 = validation, 2 = runtime/transport).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, int exit_code)
      : std::runtime_error(message), code_(std::move(code)), exit_code_(exit_code) {}

  const std::string& code() const noexcept { return code_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  std::string code_;
  int exit_code_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string code, const std::string& message)
      : Error(std::move(code), message, 1) {}
};

class RuntimeFailure : public Error {
 public:
  RuntimeFailure(std::string code, const std::string& message)
      : Error(std::move(code), message, 2) {}
};

#define RESSEL_VALIDATION_ERROR(Name)                                   \
  class Name : public ValidationError {                                 \
   public:                                                              \
    explicit Name(const std::string& message)                           \
        : ValidationError(#Name, message) {}                            \
  }

#define RESSEL_RUNTIME_ERROR(Name)                                      \
  class Name : public RuntimeFailure {                                  \
   public:                                                              \
    explicit Name(const std::string& message)                           \
        : RuntimeFailure(#Name, message) {}                             \
  }

RESSEL_VALIDATION_ERROR(EmptyGroundTruth);
RESSEL_VALIDATION_ERROR(MenuError);
RESSEL_VALIDATION_ERROR(LengthMismatch);
RESSEL_VALIDATION_ERROR(DimensionMismatch);
RESSEL_VALIDATION_ERROR(EmptySupportedSet);
RESSEL_VALIDATION_ERROR(NonpositiveBaseline);
RESSEL_VALIDATION_ERROR(EmptyEvaluation);
RESSEL_VALIDATION_ERROR(EmptyDataset);
RESSEL_VALIDATION_ERROR(InconsistentDimensions);
RESSEL_VALIDATION_ERROR(DecodeError);
RESSEL_VALIDATION_ERROR(DuplicateId);
RESSEL_VALIDATION_ERROR(UnknownSample);
RESSEL_VALIDATION_ERROR(BadMix);
RESSEL_VALIDATION_ERROR(ConfigError);
RESSEL_VALIDATION_ERROR(InvalidArgument);

RESSEL_RUNTIME_ERROR(StoreError);
RESSEL_RUNTIME_ERROR(FeatureServiceUnavailable);

#undef RESSEL_VALIDATION_ERROR
#undef RESSEL_RUNTIME_ERROR

// A malformed record in a JSONL file. Line numbers are 1-based.
class SchemaError : public ValidationError {
 public:
  SchemaError(std::size_t line, const std::string& message)
      : ValidationError("SchemaError", "line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class VlmError : public RuntimeFailure {
 public:
  enum class Kind { Transport, Protocol, AuthRejected, Timeout };

  VlmError(Kind kind, const std::string& message, int attempts = 1)
      : RuntimeFailure(kind_name(kind), message), kind_(kind), attempts_(attempts) {}

  Kind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }

  static const char* kind_name(Kind kind) noexcept {
    switch (kind) {
      case Kind::Transport: return "VlmError::Transport";
      case Kind::Protocol: return "VlmError::Protocol";
      case Kind::AuthRejected: return "VlmError::AuthRejected";
      case Kind::Timeout: return "VlmError::Timeout";
    }
    return "VlmError";
  }

 private:
  Kind kind_;
  int attempts_;
};

}  // namespace ressel
