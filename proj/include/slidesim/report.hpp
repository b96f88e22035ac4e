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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "slidesim/desim/graph.hpp"
#include "slidesim/desim/measure.hpp"
#include "slidesim/footprint.hpp"

namespace slidesim {

struct SweepPoint {
  double axis_value = 0.0;
  // Non-numeric axes (policy) print this instead of the value.
  std::string label;
  desim::StepMetrics metrics;
  TierUsage usage;
};

struct SweepResult {
  std::string label;  // schedule name, e.g. "slideformer" or "sync_update"
  std::string axis;   // batch_size | model_size | nvme_drives | policy
  std::vector<SweepPoint> points;
};

inline constexpr std::string_view kCsvHeader =
    "axis_value,makespan_ms,tokens_per_s,achieved_tflops,gpu_util_pct,eta_min,"
    "gpu_peak_bytes,cpu_peak_bytes,nvme_peak_bytes";

namespace report_detail {

// Locale-independent fixed-point formatting.
inline std::string fixed(double v, int precision) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

inline std::string axis_text(const SweepPoint& p) {
  if (!p.label.empty()) return p.label;
  if (std::floor(p.axis_value) == p.axis_value && std::abs(p.axis_value) < 9e15) {
    return std::to_string(static_cast<std::int64_t>(p.axis_value));
  }
  return fixed(p.axis_value, 6);
}

inline std::string pad(std::string s, std::size_t w, bool right) {
  if (s.size() >= w) return s;
  const std::string fill(w - s.size(), ' ');
  return right ? fill + s : s + fill;
}

}  // namespace report_detail

/// Renders rows as a space-aligned text table. The first row is the header;
/// every column but the first is right-aligned.
inline std::string format_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::string out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) line += "  ";
      line += report_detail::pad(r[i], width[i], i > 0);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (k == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
      out += std::string(total, '-') + "\n";
    }
  }
  return out;
}

inline std::vector<std::string> csv_row(const SweepPoint& p) {
  using report_detail::fixed;
  const auto& m = p.metrics;
  return {report_detail::axis_text(p),
          fixed(to_ms(m.makespan), 3),
          fixed(m.tokens_per_s, 2),
          fixed(m.achieved_flops / 1e12, 2),
          fixed(m.gpu_utilization * 100.0, 2),
          fixed(m.eta_min, 2),
          std::to_string(p.usage.gpu_peak),
          std::to_string(p.usage.cpu_peak),
          std::to_string(p.usage.nvme_peak)};
}

/// One header line, then one line per point, '\n' terminated.
inline std::string emit_csv(const SweepResult& result) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& p : result.points) {
    const auto row = csv_row(p);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

/// The same columns as emit_csv, aligned for a terminal.
inline std::string emit_table(const SweepResult& result) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;
  std::string_view h = kCsvHeader;
  while (!h.empty()) {
    const auto comma = h.find(',');
    header.emplace_back(h.substr(0, comma));
    h = comma == std::string_view::npos ? std::string_view{} : h.substr(comma + 1);
  }
  rows.push_back(std::move(header));
  for (const auto& p : result.points) rows.push_back(csv_row(p));
  return format_table(rows);
}

/// Trace-event JSON: one complete ("X") event per entry on a lane per
/// resource, microsecond timestamps (nanoseconds floored), and a name
/// record for every lane.
inline std::string emit_trace(const desim::Timeline& timeline) {
  nlohmann::ordered_json events = nlohmann::ordered_json::array();
  std::map<std::string, int> lane;
  std::vector<std::string> lane_order;
  for (const auto& e : timeline.entries) {
    const std::string r = e.resource.empty() ? "unassigned" : e.resource;
    if (lane.emplace(r, static_cast<int>(lane_order.size())).second) lane_order.push_back(r);
  }
  for (std::size_t i = 0; i < lane_order.size(); ++i) {
    nlohmann::ordered_json m;
    m["name"] = "thread_name";
    m["ph"] = "M";
    m["pid"] = 0;
    m["tid"] = static_cast<int>(i);
    m["args"] = {{"name", lane_order[i]}};
    events.push_back(std::move(m));
  }
  for (const auto& e : timeline.entries) {
    const std::int64_t ts = e.start.count() / 1000;
    const std::int64_t end = e.finish.count() / 1000;
    nlohmann::ordered_json x;
    x["name"] = e.task;
    x["ph"] = "X";
    x["pid"] = 0;
    x["tid"] = lane.at(e.resource.empty() ? "unassigned" : e.resource);
    x["ts"] = ts;
    x["dur"] = end - ts;
    events.push_back(std::move(x));
  }
  nlohmann::ordered_json doc;
  doc["traceEvents"] = std::move(events);
  return doc.dump();
}

/// Comparison table of each result against the baselines on the same axis:
/// %-of-peak against the "no_offload" baseline and speedup against
/// "sync_update", when present.
inline std::string summarize(const std::vector<SweepResult>& results,
                             const std::vector<SweepResult>& baselines) {
  using report_detail::fixed;
  const SweepResult* peak = nullptr;
  const SweepResult* sync = nullptr;
  for (const auto& b : baselines) {
    if (b.label == "no_offload") peak = &b;
    if (b.label == "sync_update") sync = &b;
  }
  auto check = [](const SweepResult& r, const SweepResult& b) {
    bool same = r.axis == b.axis && r.points.size() == b.points.size();
    for (std::size_t i = 0; same && i < r.points.size(); ++i) {
      same = r.points[i].axis_value == b.points[i].axis_value && r.points[i].label == b.points[i].label;
    }
    if (!same) {
      throw std::invalid_argument("axis mismatch between '" + r.label + "' (" + r.axis +
                                  ") and baseline '" + b.label + "' (" + b.axis + ")");
    }
  };

  std::string out;
  for (const auto& r : results) {
    if (peak) check(r, *peak);
    if (sync) check(r, *sync);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{r.axis, "step_ms", "tokens_per_s", "tflops", "gpu_util_pct", "eta_min"};
    if (peak) header.push_back("pct_of_peak");
    if (sync) header.push_back("speedup_vs_sync");
    rows.push_back(header);
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      const auto& p = r.points[i];
      const auto& m = p.metrics;
      std::vector<std::string> row{report_detail::axis_text(p), fixed(to_ms(m.makespan), 3),
                                   fixed(m.tokens_per_s, 2), fixed(m.achieved_flops / 1e12, 2),
                                   fixed(m.gpu_utilization * 100.0, 2), fixed(m.eta_min, 2)};
      if (peak) {
        const double denom = peak->points[i].metrics.achieved_flops;
        row.push_back(denom > 0 ? fixed(100.0 * m.achieved_flops / denom, 1) : "n/a");
      }
      if (sync) {
        const auto mk = m.makespan.count();
        row.push_back(mk > 0 ? fixed(static_cast<double>(sync->points[i].metrics.makespan.count()) /
                                         static_cast<double>(mk), 2)
                             : "n/a");
      }
      rows.push_back(std::move(row));
    }
    if (!out.empty()) out += "\n";
    out += "# " + r.label + "\n" + format_table(rows);
  }
  return out;
}

/// tier,component,bytes rows of the static layout.
inline std::string emit_footprint_csv(const std::vector<TierComponent>& rows) {
  std::string out = "tier,component,bytes\n";
  for (const auto& r : rows) out += r.tier + "," + r.component + "," + std::to_string(r.bytes) + "\n";
  return out;
}

}  // namespace slidesim
