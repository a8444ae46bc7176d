/* Copyright 2026 The Dredge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef DREDGE_ERROR_HPP_
#define DREDGE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dredge {

// Error families. The CLI maps each family to its own exit code.
enum class ErrorKind {
  kValidation,  // precondition, shape or range violation
  kIo,          // filesystem failure
  kFormat,      // malformed model / profile / manifest file
  kUsage,       // bad command line
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::kValidation, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message)
      : Error(ErrorKind::kIo, message) {}
};

class FormatError : public Error {
 public:
  enum class Reason {
    kBadMagic,
    kVersionMismatch,
    kTruncated,
    kChecksum,
    kMalformed,
  };

  FormatError(Reason reason, const std::string& message)
      : Error(ErrorKind::kFormat, message), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message)
      : Error(ErrorKind::kUsage, message) {}
};

}  // namespace dredge

#endif  // DREDGE_ERROR_HPP_
