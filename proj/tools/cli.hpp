// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vidmerge::cli {

/// Exit codes of every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitOracleMismatch = 2;

/// Runs the command line `args` (without the program name). Failures are
/// reported on `err` as a single `ERROR <code>: <detail>` line.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace vidmerge::cli
