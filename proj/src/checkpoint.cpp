// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace svbrdf {

namespace {

constexpr char kMagic[4] = {'S', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& is, const std::filesystem::path& path) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(U))) throw IoError("truncated checkpoint: " + path.string());
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint: " + path.string());
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put<std::uint64_t>(os, static_cast<std::uint64_t>(d));
  }
  for (const auto& [name, t] : tensors) {
    const auto v = t.data();
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a checkpoint: " + path.string());
  if (get<std::uint32_t>(is, path) != kVersion) throw IoError("unsupported checkpoint version: " + path.string());
  const auto count = get<std::uint32_t>(is, path);
  std::vector<std::pair<std::string, ad::Shape>> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(is, path);
    if (len > 4096) throw IoError("corrupt checkpoint name table: " + path.string());
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw IoError("truncated checkpoint: " + path.string());
    const auto rank = get<std::uint32_t>(is, path);
    if (rank > 8) throw IoError("corrupt checkpoint rank: " + path.string());
    ad::Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(get<std::uint64_t>(is, path)));
    table.emplace_back(std::move(name), std::move(shape));
  }
  NamedTensors out;
  for (auto& [name, shape] : table) {
    std::vector<float> data(ad::numel(shape));
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)))) {
      throw IoError("truncated checkpoint payload: " + path.string());
    }
    out.emplace_back(name, ad::TensorF::from(shape, std::move(data)));
  }
  return out;
}

void load_checkpoint_into(const std::filesystem::path& path, const NamedTensors& targets) {
  const auto loaded = load_checkpoint(path);
  std::map<std::string, const ad::TensorF*> by_name;
  for (const auto& [name, t] : loaded) by_name[name] = &t;
  for (const auto& [name, t] : targets) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("checkpoint " + path.string() + " has no tensor '" + name + "'");
    if (it->second->shape() != t.shape()) {
      throw ShapeError("checkpoint tensor '" + name + "' has shape " + ad::to_string(it->second->shape()) +
                       ", expected " + ad::to_string(t.shape()));
    }
    auto dst = ad::TensorF(t).mutable_data();
    const auto src = it->second->data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace svbrdf
