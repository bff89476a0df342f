// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "svbrdf/checkpoint.hpp"
#include "svbrdf/networks.hpp"

namespace svbrdf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

// Runs one command. `args` excludes the program name. Help goes to `out`;
// failures print a single line "svbrdf: error kind=<kind> command=<cmd>
// message=<text>" to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args);

// Recovers the width scale and residual block count of a saved generator.
GeneratorSpec infer_generator_spec(const NamedTensors& checkpoint);

}  // namespace svbrdf::cli
