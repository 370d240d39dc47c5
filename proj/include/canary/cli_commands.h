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


#ifndef CANARY_CLI_COMMANDS_H_
#define CANARY_CLI_COMMANDS_H_

#include <ostream>
#include <string>
#include <vector>

#include "canary/error.h"
#include "canary/llm_gateway.h"
#include "json.hpp"

namespace canary::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;             // success, or watermark detected
inline constexpr int kExitNotWatermarked = 1;  // audit completed, verdict negative
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitTransport = 4;
inline constexpr int kExitSynthesis = 5;
inline constexpr int kExitDetectionPrecondition = 6;
inline constexpr int kExitMissingFixture = 7;
inline constexpr int kExitInternal = 70;

int ExitCodeFor(ErrorKind kind);

// Every leaf the CLI understands, with its default value.
nlohmann::json DefaultConfig();

// Overlays `overlay` onto `base`. Keys absent from `base` are rejected with
// kValidation naming the dotted path.
void MergeConfig(nlohmann::json& base, const nlohmann::json& overlay);

// "a.b.c=value". The value is parsed as JSON unless the current leaf is a
// string, in which case it is taken verbatim.
void ApplyOverride(nlohmann::json& config, const std::string& assignment);

// sha256 hex of the compact dump.
std::string ConfigFingerprint(const nlohmann::json& config);

struct RunHooks {
  HttpTransport transport;  // replaces the HTTPS client when set
};

// args excludes the program name.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const RunHooks& hooks = {});

}  // namespace canary::cli

#endif  // CANARY_CLI_COMMANDS_H_
