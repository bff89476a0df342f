// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/common.hpp"

#include <iostream>
#include <mutex>

namespace svbrdf {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

DiagnosticSink& current_sink() {
  static DiagnosticSink sink = [](const Diagnostic& d) {
    std::cerr << "warning[" << d.code << "]: " << d.message << '\n';
  };
  return sink;
}

}  // namespace

void report_diagnostic(std::string code, std::string message) {
  DiagnosticSink sink;
  {
    std::lock_guard lock(sink_mutex());
    sink = current_sink();
  }
  if (sink) sink(Diagnostic{std::move(code), std::move(message)});
}

ScopedDiagnosticSink::ScopedDiagnosticSink(DiagnosticSink sink) {
  std::lock_guard lock(sink_mutex());
  previous_ = std::move(current_sink());
  current_sink() = std::move(sink);
}

ScopedDiagnosticSink::~ScopedDiagnosticSink() {
  std::lock_guard lock(sink_mutex());
  current_sink() = std::move(previous_);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 is kept away from zero so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * kPi<double> * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace svbrdf
