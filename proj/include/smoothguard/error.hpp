// Copyright 2026 The smoothguard Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smoothguard {

enum class ErrorCode {
  kInvalidArgument,
  kDecodeError,
  kUnsupportedFormat,
  kBackendUnavailable,
  kBackendError,
  kProtocolError,
  kPartialFailure,
  kEmptyText,
  kZeroVector,
  kDimensionMismatch,
  kDegenerateInput,
  kParseError,
  kSchemaError,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Base of every error thrown by the library. Catch this to handle any
/// failure uniformly; catch a subclass to handle one kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define SMOOTHGUARD_DEFINE_ERROR(Name)                   \
  class Name : public Error {                            \
   public:                                               \
    explicit Name(const std::string& message)            \
        : Error(ErrorCode::k##Name, message) {}          \
  };

SMOOTHGUARD_DEFINE_ERROR(InvalidArgument)
SMOOTHGUARD_DEFINE_ERROR(DecodeError)
SMOOTHGUARD_DEFINE_ERROR(UnsupportedFormat)
SMOOTHGUARD_DEFINE_ERROR(BackendUnavailable)
SMOOTHGUARD_DEFINE_ERROR(ProtocolError)
SMOOTHGUARD_DEFINE_ERROR(EmptyText)
SMOOTHGUARD_DEFINE_ERROR(ZeroVector)
SMOOTHGUARD_DEFINE_ERROR(DimensionMismatch)
SMOOTHGUARD_DEFINE_ERROR(DegenerateInput)
SMOOTHGUARD_DEFINE_ERROR(SchemaError)
SMOOTHGUARD_DEFINE_ERROR(IoError)

#undef SMOOTHGUARD_DEFINE_ERROR

/// Non-2xx reply from a remote service. `status()` is the HTTP status.
class BackendError : public Error {
 public:
  BackendError(int status, const std::string& message)
      : Error(ErrorCode::kBackendError, message), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// Malformed input file; `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::kParseError, message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace smoothguard
