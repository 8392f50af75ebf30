// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill_cli/cli.hpp"

int main(int argc, char** argv) { return slotfill::cli::run_cli(argc, argv); }
