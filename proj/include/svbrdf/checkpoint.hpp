// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "svbrdf/tensor.hpp"

namespace svbrdf {

using NamedTensors = std::vector<std::pair<std::string, ad::TensorF>>;

// Binary layout: "SVCK", u32 version, u32 count, then per tensor
// {u32 name length, name bytes, u32 rank, u64 dims[rank]}, followed by every
// tensor's values as little-endian float32 in table order.
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

// Copies values from a checkpoint into existing tensors, matching by name.
// Missing names or shape mismatches throw.
void load_checkpoint_into(const std::filesystem::path& path, const NamedTensors& targets);

}  // namespace svbrdf
