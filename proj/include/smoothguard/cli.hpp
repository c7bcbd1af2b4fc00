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

#include <iosfwd>
#include <span>
#include <string>

namespace smoothguard {

// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad flags, config, paths or data files
inline constexpr int kExitBackend = 2;  // backend failure or items failed without quorum

/// Entry point behind the `smoothguard` binary. `args` excludes argv[0].
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace smoothguard
