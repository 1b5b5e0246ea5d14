// Copyright 2026 The fivelm Authors
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
#include <utility>
#include <vector>

namespace fivelm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input text is not a syntactically valid scenario document.
class MalformedDocument : public Error {
 public:
  using Error::Error;
};

/// A document is well-formed but violates the scenario schema.
/// The path names the offending location, e.g. "layers[4].objects[1].category".
class SchemaViolation : public Error {
 public:
  SchemaViolation(std::string path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ModeMismatch : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroNorm : public Error {
 public:
  using Error::Error;
};

class EmptyReference : public Error {
 public:
  using Error::Error;
};

class EmptyGenerated : public Error {
 public:
  using Error::Error;
};

class TooFewSamples : public Error {
 public:
  using Error::Error;
};

class NotApplicable : public Error {
 public:
  using Error::Error;
};

class NotHardMode : public Error {
 public:
  using Error::Error;
};

class EmptySet : public Error {
 public:
  using Error::Error;
};

class EmptyField : public Error {
 public:
  using Error::Error;
};

class ProviderUnavailable : public Error {
 public:
  using Error::Error;
};

class ClientUnavailable : public Error {
 public:
  using Error::Error;
};

class MissingTaskText : public Error {
 public:
  using Error::Error;
};

/// Raised when a reply could not be turned into a valid scenario within the
/// configured number of repair re-prompts. Carries every violation message.
class ExhaustedRepairs : public Error {
 public:
  explicit ExhaustedRepairs(std::vector<std::string> attempts)
      : Error(join(attempts)), attempts_(std::move(attempts)) {}

  const std::vector<std::string>& attempts() const noexcept { return attempts_; }

 private:
  static std::string join(const std::vector<std::string>& attempts) {
    std::string out = "repairs exhausted after " + std::to_string(attempts.size()) + " attempt(s)";
    for (const auto& a : attempts) {
      out += "\n  - " + a;
    }
    return out;
  }

  std::vector<std::string> attempts_;
};

class ChecksumMismatch : public Error {
 public:
  using Error::Error;
};

class IoFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace fivelm
