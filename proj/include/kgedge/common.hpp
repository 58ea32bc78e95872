// Copyright 2026 The kgedge Authors.
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

#ifndef KGEDGE_COMMON_HPP_
#define KGEDGE_COMMON_HPP_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace kgedge {

enum class ErrorCode {
  kParse,
  kEmptyStore,
  kSchema,
  kConfig,
  kIo,
  kIndex,
  kShape,
  kFormat,
  kUndefinedMetric,
  kDegenerateDistribution,
  kNonFiniteLoss,
  kGeneration,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kEmptyStore: return "empty-store";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kIndex: return "index";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kDegenerateDistribution: return "degenerate-distribution";
    case ErrorCode::kNonFiniteLoss: return "non-finite-loss";
    case ErrorCode::kGeneration: return "generation";
  }
  return "unknown";
}

// Every failure surfaced by the library is an Error carrying a category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + " error: " +
                           message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::kParse,
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NonFiniteLossError : public Error {
 public:
  explicit NonFiniteLossError(std::size_t batch_index)
      : Error(ErrorCode::kNonFiniteLoss,
              "loss is not finite in batch " + std::to_string(batch_index)),
        batch_index_(batch_index) {}

  std::size_t batch_index() const noexcept { return batch_index_; }

 private:
  std::size_t batch_index_;
};

// Seeded generator with portable derived distributions. The standard
// <random> distributions are implementation-defined, so only the raw
// mt19937_64 stream is used and everything else is derived here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    const unsigned __int128 product =
        static_cast<unsigned __int128>(engine_()) * n;
    return static_cast<std::size_t>(product >> 64);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void log_warning(std::string_view message) {
  std::clog << "kgedge warning: " << message << '\n';
}

namespace detail {

inline std::uint64_t parse_uint(std::string_view key, const std::string& value) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty() || value.front() == '-') {
    throw Error(ErrorCode::kConfig, std::string(key) + ": expected an unsigned integer");
  }
  return v;
}

inline double parse_real(std::string_view key, const std::string& value) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty()) {
    throw Error(ErrorCode::kConfig, std::string(key) + ": expected a number");
  }
  return v;
}

}  // namespace detail

}  // namespace kgedge

#endif  // KGEDGE_COMMON_HPP_
