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
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "slidesim/config_io.hpp"
#include "slidesim/costmodel.hpp"
#include "slidesim/desim/builders.hpp"
#include "slidesim/desim/engine.hpp"
#include "slidesim/desim/measure.hpp"
#include "slidesim/footprint.hpp"
#include "slidesim/report.hpp"

namespace slidesim::cli {

enum class Verb { kEstimate, kSimulate, kSweep, kMaxModel, kTrace };
enum class Format { kTable, kCsv };

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitInfeasible = 2;

struct Command {
  Verb verb = Verb::kEstimate;
  std::string config_path;
  std::vector<std::string> overrides;  // section.key=value
  std::string output_dir;              // empty: print only (estimate, max-model) or "."
  std::string name;                    // output file stem; defaults to the config file stem
  Format format = Format::kTable;
  std::string axis;  // sweep only, e.g. "batch=16,32,64"
  bool baselines = false;
  int jobs = 0;  // sweep workers; 0 = hardware concurrency
};

/// Raised when a config is valid but does not fit the hardware.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Policy presets accepted on the `policy` sweep axis.
inline const std::vector<std::string>& policy_presets() {
  static const std::vector<std::string> names{"gpu_act", "cpu", "opt_half", "opt_nvme", "full_nvme"};
  return names;
}

inline void apply_policy_preset(OffloadPolicy& p, const std::string& preset) {
  if (preset == "gpu_act") {
    p.activation_target = ActivationTarget::kGpuResident;
    p.optimizer_offload_fraction = 0.0;
  } else if (preset == "cpu") {
    p.activation_target = ActivationTarget::kCpu;
    p.optimizer_offload_fraction = 0.0;
  } else if (preset == "opt_half") {
    p.activation_target = ActivationTarget::kCpu;
    p.optimizer_offload_fraction = 0.5;
  } else if (preset == "opt_nvme") {
    p.activation_target = ActivationTarget::kCpu;
    p.optimizer_offload_fraction = 1.0;
  } else if (preset == "full_nvme") {
    p.activation_target = ActivationTarget::kNvme;
    p.optimizer_offload_fraction = 1.0;
  } else {
    throw ConfigError("unknown policy preset '" + preset + "'");
  }
}

struct AxisSpec {
  std::string axis;  // batch_size | model_size | nvme_drives | policy
  std::vector<double> values;
  std::vector<std::string> labels;  // policy only
};

inline AxisSpec parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("--axis: expected name=v1,v2,...");
  std::string name = text.substr(0, eq);
  if (name == "batch") name = "batch_size";
  if (name == "drives") name = "nvme_drives";
  if (name != "batch_size" && name != "model_size" && name != "nvme_drives" && name != "policy") {
    throw ConfigError("--axis: unknown axis '" + name + "'");
  }
  AxisSpec spec{name, {}, {}};
  std::stringstream ss(text.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = std::string(slidesim::detail::trim(item));
    if (item.empty()) throw ConfigError("--axis: empty value");
    if (name == "policy") {
      const auto& names = policy_presets();
      if (std::find(names.begin(), names.end(), item) == names.end()) {
        throw ConfigError("--axis: unknown policy preset '" + item + "'");
      }
      spec.values.push_back(static_cast<double>(spec.values.size()));
      spec.labels.push_back(item);
      continue;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(v > 0.0)) throw ConfigError("--axis: bad value '" + item + "'");
    if (name != "model_size" && v != std::floor(v)) {
      throw ConfigError("--axis: " + name + " takes integers, got '" + item + "'");
    }
    if (!spec.values.empty() && v <= spec.values.back()) {
      throw ConfigError("--axis: values must be strictly increasing");
    }
    spec.values.push_back(v);
  }
  if (spec.values.empty()) throw ConfigError("--axis: no values");
  return spec;
}

/// The config at one sweep point. model_size values are billions of
/// parameters, mapped to the smallest family member that reaches them.
inline ExperimentConfig config_at(const ExperimentConfig& base, const AxisSpec& spec, std::size_t i) {
  ExperimentConfig c = base;
  const double v = spec.values[i];
  if (spec.axis == "batch_size") {
    c.workload.batch_size = static_cast<std::int64_t>(v);
  } else if (spec.axis == "nvme_drives") {
    c.hardware.nvme_drives = static_cast<std::int64_t>(v);
  } else if (spec.axis == "policy") {
    apply_policy_preset(c.policy, spec.labels[i]);
  } else {
    ModelFamily family;
    family.vocab_size = c.model.vocab_size;
    std::int64_t k = 1;
    while (static_cast<double>(family.at(k).total_params()) < v * 1e9 && k < (1 << 20)) ++k;
    c.model = family.at(k);
  }
  c.policy.lce_chunk_rows = std::min(c.policy.lce_chunk_rows, c.workload.tokens());
  validate(c);
  return c;
}

inline void require_feasible(const ExperimentConfig& c) {
  const auto u = tier_usage(c);
  const auto& h = c.hardware;
  auto fail = [](const char* peak, Bytes need, const char* cap, Bytes have) {
    throw InfeasibleError("infeasible: " + std::string(peak) + " " + std::to_string(need) +
                          " bytes exceeds " + cap + " " + std::to_string(have) + " bytes");
  };
  if (u.gpu_peak > h.vram_bytes) fail("gpu_peak", u.gpu_peak, "vram_bytes", h.vram_bytes);
  if (u.cpu_peak > h.ram_bytes) fail("cpu_peak", u.cpu_peak, "ram_bytes", h.ram_bytes);
  if (h.nvme_capacity_bytes > 0 && u.nvme_peak > h.nvme_capacity_bytes) {
    fail("nvme_peak", u.nvme_peak, "nvme_capacity_bytes", h.nvme_capacity_bytes);
  }
}

struct Simulated {
  desim::Timeline timeline;
  SweepPoint point;
};

inline Simulated simulate_point(const ExperimentConfig& c, double axis_value, std::string label,
                                std::optional<desim::BaselineMode> mode = std::nullopt) {
  const auto g = mode ? desim::build_baseline_graph(c, *mode) : desim::build_slideformer_graph(c);
  Simulated s;
  s.timeline = desim::simulate(g);
  s.point.axis_value = axis_value;
  s.point.label = std::move(label);
  s.point.metrics = desim::measure(s.timeline, g, c);
  s.point.usage = tier_usage(c);
  return s;
}

/// Files are staged in memory and only written once the whole command has
/// succeeded; each is written to a temporary name and renamed into place.
class OutputSet {
 public:
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }
  bool empty() const { return files_.empty(); }

  void commit(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<fs::path> staged;
    try {
      for (const auto& [name, content] : files_) {
        fs::path tmp = dir / (name + ".tmp");
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        f << content;
        f.close();
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        staged.push_back(tmp);
      }
      for (std::size_t i = 0; i < files_.size(); ++i) fs::rename(staged[i], dir / files_[i].first);
    } catch (...) {
      std::error_code ec;
      for (const auto& p : staged) fs::remove(p, ec);
      throw;
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

inline ExperimentConfig load_config(const Command& cmd) {
  std::ifstream in(cmd.config_path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + cmd.config_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  auto doc = config_detail::parse_document(buf.str());
  for (const auto& o : cmd.overrides) apply_override(doc, o);
  return config_from_json(doc);
}

inline std::string ms(Duration d) { return report_detail::fixed(to_ms(d), 3); }

inline std::string estimate_text(const ExperimentConfig& c, Format fmt) {
  using report_detail::fixed;
  const auto rows = tier_layout(c);
  const auto t = transformer_layer_timings(c);
  const auto a = analytical_step_time(c);
  const auto bstar = critical_batch_size(c);
  const bool has_offload = (t.t_grad_d2h + t.t_update).count() > 0;
  std::vector<std::pair<std::string, std::string>> metrics{
      {"t_fwd_ms", ms(t.t_fwd)},
      {"t_bwd_ms", ms(t.t_bwd)},
      {"t_param_h2d_ms", ms(t.t_param_h2d)},
      {"t_grad_d2h_ms", ms(t.t_grad_d2h)},
      {"t_update_ms", ms(t.t_update)},
      {"t_act_offload_ms", ms(t.t_act_offload)},
      {"t_act_prefetch_ms", ms(t.t_act_prefetch)},
      {"eta", has_offload ? fixed(hiding_factor(t.t_bwd, t.t_grad_d2h, t.t_update), 2) : "inf"},
      {"forward_slack_ms", ms(forward_overlap_slack(t.t_fwd, t.t_param_h2d))},
      {"critical_batch_size", bstar ? std::to_string(*bstar) : "unbounded"},
      {"step_ms", ms(a.step)},
      {"tokens_per_s", fixed(a.tokens_per_s, 2)},
      {"achieved_tflops", fixed(a.achieved_flops / 1e12, 2)},
  };
  if (fmt == Format::kCsv) {
    std::string out = emit_footprint_csv(rows);
    out += "\nmetric,value\n";
    for (const auto& [k, v] : metrics) out += k + "," + v + "\n";
    return out;
  }
  std::vector<std::vector<std::string>> fp{{"tier", "component", "bytes", "GB"}};
  for (const auto& r : rows) {
    fp.push_back({r.tier, r.component, std::to_string(r.bytes), fixed(static_cast<double>(r.bytes) / 1e9, 3)});
  }
  const auto u = tier_usage(c);
  for (const auto& [tier, b] : {std::pair{"gpu", u.gpu_peak}, {"cpu", u.cpu_peak}, {"nvme", u.nvme_peak}}) {
    fp.push_back({tier, "peak", std::to_string(b), fixed(static_cast<double>(b) / 1e9, 3)});
  }
  std::vector<std::vector<std::string>> cm{{"metric", "value"}};
  for (const auto& [k, v] : metrics) cm.push_back({k, v});
  return format_table(fp) + "\n" + format_table(cm);
}

inline std::string max_model_text(const ExperimentConfig& c, Format fmt) {
  std::vector<std::vector<std::string>> rows{{"optimizer_offload_fraction", "max_params", "num_layers",
                                               "hidden_size", "binding_tier", "gpu_peak_bytes",
                                               "cpu_peak_bytes", "nvme_peak_bytes"}};
  ModelFamily family;
  family.vocab_size = c.model.vocab_size;
  for (double f : {0.0, 0.5, 1.0}) {
    OffloadPolicy p = c.policy;
    p.optimizer_offload_fraction = f;
    const auto r = max_trainable_model(c.hardware, p, c.workload, family);
    const std::string fs = report_detail::fixed(f, 2);
    if (!r) {
      rows.push_back({fs, "0", "-", "-", "infeasible", "-", "-", "-"});
      continue;
    }
    rows.push_back({fs, std::to_string(r->total_params), std::to_string(r->model.num_layers),
                    std::to_string(r->model.hidden_size), r->binding_tier.empty() ? "limit" : r->binding_tier,
                    std::to_string(r->usage.gpu_peak), std::to_string(r->usage.cpu_peak),
                    std::to_string(r->usage.nvme_peak)});
  }
  if (fmt == Format::kTable) return format_table(rows);
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
    out += "\n";
  }
  return out;
}

inline std::string stem_of(const Command& cmd) {
  if (!cmd.name.empty()) return cmd.name;
  const auto s = std::filesystem::path(cmd.config_path).stem().string();
  return s.empty() ? "slidesim" : s;
}

inline std::string axis_file_tag(const SweepPoint& p) {
  return p.label.empty() ? report_detail::axis_text(p) : p.label;
}

inline int run_sweep(const Command& cmd, const ExperimentConfig& base, std::ostream& out, OutputSet& files) {
  if (cmd.axis.empty()) throw ConfigError("sweep: --axis is required");
  const auto spec = parse_axis(cmd.axis);
  const std::size_t n = spec.values.size();
  std::vector<ExperimentConfig> configs;
  for (std::size_t i = 0; i < n; ++i) {
    configs.push_back(config_at(base, spec, i));
    require_feasible(configs.back());
  }

  std::vector<std::optional<desim::BaselineMode>> modes{std::nullopt};
  if (cmd.baselines) {
    modes.push_back(desim::BaselineMode::kSyncUpdate);
    modes.push_back(desim::BaselineMode::kNoOffload);
  }
  // Every (schedule, point) pair is independent; results land in fixed slots.
  std::vector<Simulated> results(modes.size() * n);
  std::vector<std::exception_ptr> errors(results.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(results.size(), cmd.jobs > 0 ? static_cast<std::size_t>(cmd.jobs) : hw);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t k = w; k < results.size(); k += workers) {
        try {
          const std::size_t i = k % n;
          const std::string label = spec.labels.empty() ? std::string() : spec.labels[i];
          results[k] = simulate_point(configs[i], spec.values[i], label, modes[k / n]);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  static const char* kLabels[] = {"slideformer", "sync_update", "no_offload"};
  std::vector<SweepResult> sweeps;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    SweepResult r{kLabels[m], spec.axis, {}};
    for (std::size_t i = 0; i < n; ++i) r.points.push_back(results[m * n + i].point);
    sweeps.push_back(std::move(r));
  }
  const std::string stem = stem_of(cmd);
  files.add(stem + ".csv", emit_csv(sweeps[0]));
  for (std::size_t m = 1; m < sweeps.size(); ++m) {
    files.add(stem + "." + sweeps[m].label + ".csv", emit_csv(sweeps[m]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    files.add(stem + "." + spec.axis + "-" + axis_file_tag(sweeps[0].points[i]) + ".trace.json",
              emit_trace(results[i].timeline));
  }
  if (cmd.format == Format::kCsv) {
    out << emit_csv(sweeps[0]);
  } else {
    const std::vector<SweepResult> baselines(sweeps.begin() + 1, sweeps.end());
    out << summarize({sweeps[0]}, baselines);
  }
  return kExitOk;
}

/// Executes one command. Errors go to `err` prefixed with the module that
/// raised them; output files appear only when the command succeeds.
inline int run(const Command& cmd, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig c = load_config(cmd);
    OutputSet files;
    const std::string stem = stem_of(cmd);
    switch (cmd.verb) {
      case Verb::kEstimate: {
        // The tables still print for an infeasible config, to show what overflows.
        out << estimate_text(c, cmd.format);
        require_feasible(c);
        if (!cmd.output_dir.empty()) {
          files.add(stem + ".footprint.csv", emit_footprint_csv(tier_layout(c)));
        }
        break;
      }
      case Verb::kMaxModel:
        out << max_model_text(c, cmd.format);
        break;
      case Verb::kSimulate:
      case Verb::kTrace: {
        require_feasible(c);
        auto s = simulate_point(c, static_cast<double>(c.workload.batch_size), {});
        files.add(stem + ".trace.json", emit_trace(s.timeline));
        if (cmd.verb == Verb::kSimulate) {
          SweepResult r{"slideformer", "batch_size", {s.point}};
          files.add(stem + ".csv", emit_csv(r));
          out << (cmd.format == Format::kCsv ? emit_csv(r) : emit_table(r));
        }
        break;
      }
      case Verb::kSweep:
        run_sweep(cmd, c, out, files);
        break;
    }
    if (!files.empty()) files.commit(std::filesystem::path(cmd.output_dir.empty() ? "." : cmd.output_dir));
    return kExitOk;
  } catch (const InfeasibleError& e) {
    err << "footprint: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ConfigError& e) {
    err << "workload: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const desim::GraphError& e) {
    err << "desim: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

}  // namespace slidesim::cli
