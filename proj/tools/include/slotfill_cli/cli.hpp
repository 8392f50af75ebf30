// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: train, eval, predict, benchmark and gen-synth.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace slotfill::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one command. `args` excludes the program name. Diagnostics go to
/// `err` as single lines; command output goes to `out`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace slotfill::cli
