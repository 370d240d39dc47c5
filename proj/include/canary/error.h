// Copyright 2026 The Canary Audit Authors
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

#ifndef CANARY_ERROR_H_
#define CANARY_ERROR_H_

#include <stdexcept>
#include <string>

namespace canary {

// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
  kInvalidArgument,
  kValidation,
  kNotFound,
  kIo,
  kTransport,
  kMissingFixture,
  kSynthesis,
  kDetectionPrecondition,
  kInternal,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by a synthesis stage after its retry budget is spent.
class SynthesisError : public Error {
 public:
  SynthesisError(std::string stage, int attempts, std::string raw_output,
                 const std::string& message)
      : Error(ErrorKind::kSynthesis, message),
        stage_(std::move(stage)),
        attempts_(attempts),
        raw_output_(std::move(raw_output)) {}

  const std::string& stage() const { return stage_; }
  int attempts() const { return attempts_; }
  const std::string& raw_output() const { return raw_output_; }

 private:
  std::string stage_;
  int attempts_;
  std::string raw_output_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void Require(bool condition, ErrorKind kind,
                    const std::string& message) {
  if (!condition) Fail(kind, message);
}

}  // namespace canary

#endif  // CANARY_ERROR_H_
