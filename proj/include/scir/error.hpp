// Copyright 2026 The SCIR Lab Authors.
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

#ifndef SCIR_ERROR_HPP_
#define SCIR_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace scir {

enum class ErrorKind {
  kInvalidArgument,
  kConfig,
  kIo,
  kNumeric,
  kLocked,
  kCheckFailed,
};

// Base of every exception thrown by the library. The C API maps `kind()` onto
// its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::kInvalidArgument, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::kNumeric, what) {}
};

class LockedError : public Error {
 public:
  explicit LockedError(const std::string& what)
      : Error(ErrorKind::kLocked, what) {}
};

class CheckFailed : public Error {
 public:
  explicit CheckFailed(const std::string& what)
      : Error(ErrorKind::kCheckFailed, what) {}
};

}  // namespace scir

#endif  // SCIR_ERROR_HPP_
