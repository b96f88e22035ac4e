/* Copyright 2026 The slidesim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace slidesim {

// All simulated time is integral nanoseconds.
using Duration = std::chrono::nanoseconds;
using Bytes = std::uint64_t;

/// Errors raised while reading or validating an experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A document that could be read but violates a model invariant.
class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

inline Duration seconds_to_duration(double seconds) {
  if (!(seconds >= 0.0) || !std::isfinite(seconds)) {
    throw std::domain_error("duration must be finite and non-negative");
  }
  if (seconds * 1e9 > 9.0e18) throw std::domain_error("duration exceeds the nanosecond range");
  return Duration(static_cast<std::int64_t>(std::llround(seconds * 1e9)));
}

inline double to_seconds(Duration d) { return static_cast<double>(d.count()) * 1e-9; }
inline double to_ms(Duration d) { return static_cast<double>(d.count()) * 1e-6; }

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline bool consume_suffix(std::string_view& s, std::string_view suffix) {
  if (s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix) {
    s.remove_suffix(suffix.size());
    return true;
  }
  return false;
}

}  // namespace detail

/// Parses "24GB", "1.5 GiB", "512", "25GB/s" into a byte count (or bytes/s).
///
/// KB/MB/GB/TB are powers of 1000, KiB/MiB/GiB/TiB powers of 1024. A bare
/// "B" is accepted. Fractional mantissas are rounded to the nearest byte.
/// When `allow_rate` is set a trailing "/s" is stripped.
inline Bytes parse_byte_quantity(std::string_view text, bool allow_rate = false) {
  std::string_view s = detail::trim(text);
  if (allow_rate) {
    detail::consume_suffix(s, "/s");
    s = detail::trim(s);
  }
  double scale = 1.0;
  struct Suffix {
    std::string_view name;
    double scale;
  };
  static constexpr Suffix kSuffixes[] = {
      {"KiB", 1024.0},         {"MiB", 1048576.0},     {"GiB", 1073741824.0},
      {"TiB", 1099511627776.0}, {"KB", 1e3},            {"MB", 1e6},
      {"GB", 1e9},              {"TB", 1e12},           {"B", 1.0},
  };
  for (const auto& suffix : kSuffixes) {
    if (detail::consume_suffix(s, suffix.name)) {
      scale = suffix.scale;
      break;
    }
  }
  s = detail::trim(s);
  double mantissa = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, mantissa);
  if (s.empty() || ec != std::errc() || ptr != end || !(mantissa >= 0.0)) {
    throw ConfigError("cannot parse byte quantity '" + std::string(text) + "'");
  }
  const double value = mantissa * scale;
  if (value > 9.0e18) {
    throw ConfigError("byte quantity out of range '" + std::string(text) + "'");
  }
  return static_cast<Bytes>(std::llround(value));
}

}  // namespace slidesim
