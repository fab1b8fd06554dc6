// Copyright 2026 The p2pfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace p2pfl {

// Root of every error the library throws. The CLI maps the three families
// below onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments to a library call (out-of-range ids, layout mismatch, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Configuration file problems. `line`/`column` are 1-based, 0 when the error
// is semantic rather than lexical.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, std::size_t line = 0,
              std::size_t column = 0)
      : Error(line == 0 ? message
                        : "line " + std::to_string(line) + ", column " +
                              std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

  // Same error with `context: ` prepended to the message.
  ConfigError in_context(const std::string& context) const {
    ConfigError e(*this);
    static_cast<Error&>(e) = Error(context + ": " + what());
    return e;
  }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Malformed or missing dataset / metrics files.
class DataError : public Error {
 public:
  using Error::Error;
};

class ElectionError : public Error {
 public:
  enum class Kind { kNoCandidate, kExhausted };

  ElectionError(Kind kind, const std::string& message)
      : Error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class EmptyShardError : public Error {
 public:
  using Error::Error;
};

class RoundAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace p2pfl
