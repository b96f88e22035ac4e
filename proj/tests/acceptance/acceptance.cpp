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

// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "slidesim/cli.hpp"
#include "slidesim/slidesim.hpp"
#include "support/brute_force.hpp"
#include "support/configs.hpp"
#include "support/gen.hpp"
#include "support/tiny.hpp"

namespace {

using namespace slidesim;
namespace fs = std::filesystem;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

desim::StepMetrics simulated(const ExperimentConfig& c) {
  const auto g = desim::build_slideformer_graph(c);
  return desim::measure(desim::simulate(g), g, c);
}

Verdict hiding_factor_rows() {
  struct Row {
    double bwd, d2h, upd, want;
  };
  const std::vector<Row> rows{{340, 25, 195, 1.55}, {660, 25, 195, 3.00}, {225, 24, 152, 1.28},
                              {450, 25, 151, 2.56}, {910, 25, 153, 5.11}};
  auto eta = [](double b, double d, double u) {
    return hiding_factor(seconds_to_duration(b / 1e3), seconds_to_duration(d / 1e3),
                         seconds_to_duration(u / 1e3));
  };
  Verdict v{true, ""};
  for (const auto& r : rows) {
    const double got = round2(eta(r.bwd, r.d2h, r.upd));
    v.pass = v.pass && got == r.want;
    v.detail += fmt("%.2f ", got);
  }
  v.detail += fmt("(excluded row gives %.2f)", round2(eta(170, 22, 175)));
  return v;
}

Verdict static_128gb() {
  const auto f = static_requirement(8'000'000'000ULL);
  return {f.total_bytes == 128'000'000'000ULL, std::to_string(f.total_bytes) + " bytes"};
}

Verdict critical_batch_invariance() {
  testing::Rng r(31);
  int n = 0;
  for (; n < 2000; ++n) {
    const double bwd = r.log_uniform(1e-4, 1.0);
    const double d2h = r.log_uniform(1e-4, 1.0);
    const double upd = r.log_uniform(1e-4, 1.0);
    const double lambda = r.uniform(0.1, 100.0);
    if (critical_batch_size(bwd, d2h, upd) !=
        critical_batch_size(bwd * lambda, d2h * lambda, upd * lambda)) {
      return {false, "changed at sample " + std::to_string(n)};
    }
  }
  return {true, std::to_string(n) + " samples"};
}

Verdict regime_change() {
  auto c = testing::shipped_config("calibrated-4090");
  std::map<std::int64_t, desim::StepMetrics> m;
  for (std::int64_t b : {4, 8, 16, 32, 64, 128}) {
    c.workload.batch_size = b;
    m[b] = simulated(c);
  }
  auto ms = [&](std::int64_t b) { return to_ms(m[b].makespan); };
  const double flat = std::max({ms(4), ms(8), ms(16)}) / std::min({ms(4), ms(8), ms(16)}) - 1.0;
  const double per_lo = std::min({ms(32) / 32, ms(64) / 64, ms(128) / 128});
  const double per_hi = std::max({ms(32) / 32, ms(64) / 64, ms(128) / 128});
  const double linear = per_hi / per_lo - 1.0;
  const bool crosses = m[16].eta_min < 1.0 && m[32].eta_min >= 1.0;
  return {flat <= 0.02 && linear <= 0.05 && crosses,
          fmt("flat %.2f%%", 100 * flat) + fmt(", linear %.2f%%", 100 * linear) +
              fmt(", eta(16)=%.2f", m[16].eta_min) + fmt(" eta(32)=%.2f", m[32].eta_min)};
}

Verdict window_memory() {
  testing::Rng r(5);
  for (int i = 0; i < 1000; ++i) {
    ExperimentConfig c;
    c.policy.window_units = 3;
    c.model.params_per_layer = static_cast<std::uint64_t>(r.log_uniform(1e6, 2e9));
    c.model.hidden_size = 128 * r.uniform_int(4, 64);
    c.model.num_layers = r.uniform_int(7, 200);
    auto other = c;
    other.model.num_layers = r.uniform_int(7, 200);
    if (gpu_peak(c) != gpu_peak(other)) return {false, "gpu_peak depends on num_layers"};
    const double window = static_cast<double>(3 * cache_unit_bytes(c.model));
    const double all = 4.0 * static_cast<double>(c.model.total_params());
    if (!(window < 0.5 * all)) return {false, "window is not below half of 4N"};
  }
  return {true, "1000 samples"};
}

Verdict lce_reduction() {
  testing::Rng r(6);
  double worst = 1.0;
  for (int i = 0; i < 1000; ++i) {
    WorkloadShape s;
    s.seq_len = r.uniform_int(128, 8192);
    s.batch_size = std::max<std::int64_t>(r.uniform_int(1, 64), (5120 + s.seq_len - 1) / s.seq_len);
    const auto vocab = r.uniform_int(32000, 256000);
    worst = std::min(worst, lce_output_memory(s, vocab, 1024).reduction_fraction);
  }
  return {worst >= 0.80, fmt("min reduction %.3f", worst)};
}

Verdict nvme_scaling() {
  auto c = testing::shipped_config("nvme-scaling");
  auto tput = [&](std::int64_t k) {
    c.hardware.nvme_drives = k;
    return simulated(c).tokens_per_s;
  };
  const double t1 = tput(1);
  std::string detail;
  bool ok = true;
  for (std::int64_t k : {2, 3}) {
    const double ratio = tput(k) / t1;
    ok = ok && std::abs(ratio / static_cast<double>(k) - 1.0) <= 0.05;
    detail += fmt("x%.3f ", ratio);
  }
  // Far past the crossover compute or PCIe binds and throughput is flat.
  const double t32 = tput(32);
  const double t64 = tput(64);
  const double flat = std::abs(t64 / t32 - 1.0);
  ok = ok && flat <= 0.02 && t32 / t1 < 32.0 * 0.95;
  detail += fmt("at k=2,3; plateau x%.2f", t32 / t1) + fmt(" (32 vs 64 drives %.2f%%)", 100 * flat);
  return {ok, detail};
}

Verdict full_offload_tradeoff() {
  const auto base = testing::shipped_config("qwen14b-4090");
  const auto full = testing::shipped_config("qwen14b-4090-nvme");
  const double cut = 1.0 - static_cast<double>(cpu_peak(full)) / static_cast<double>(cpu_peak(base));
  const double slow = 1.0 - simulated(full).tokens_per_s / simulated(base).tokens_per_s;
  return {cut >= 0.60 && slow > 0.0,
          fmt("cpu_peak -%.1f%%", 100 * cut) + fmt(", throughput -%.1f%%", 100 * slow)};
}

Verdict tiny_oracle() {
  testing::Rng r(20240);
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const auto g = testing::random_graph(r);
    const auto bf = testing::BruteForce(g).run();
    try {
      const auto tl = desim::simulate(g);
      if (bf.deadlocks != 0 || bf.best != tl.makespan.count()) return {false, "graph " + std::to_string(i)};
    } catch (const desim::DeadlockError&) {
      if (bf.leaves != 0) return {false, "spurious deadlock in graph " + std::to_string(i)};
    }
    ++checked;
  }
  const auto tiny = testing::tiny_backward_graph();
  const std::vector<std::pair<desim::TaskGraph, std::int64_t>> hand{
      {tiny, 25}, {desim::to_sync_update(tiny), 28}, {desim::to_no_offload(tiny), 20}};
  for (const auto& [g, want] : hand) {
    const auto bf = testing::BruteForce(g).run();
    const auto got = desim::simulate(g).makespan;
    if (got != testing::ms(want) || bf.best != got.count()) return {false, "hand instance"};
  }
  return {true, std::to_string(checked) + " random graphs + 25/28/20 ms"};
}

Verdict schedule_safety() {
  int timelines = 0;
  auto check = [&](const desim::TaskGraph& g) {
    ++timelines;
    return desim::validate_timeline(g, desim::simulate(g)).empty();
  };
  testing::Rng r(77);
  for (int i = 0; i < 150; ++i) {
    const auto c = testing::random_config(r);
    if (!check(desim::build_slideformer_graph(c))) return {false, serialize_config(c)};
    for (const auto mode : {desim::BaselineMode::kSyncUpdate, desim::BaselineMode::kNoOffload}) {
      if (!check(desim::build_baseline_graph(c, mode))) return {false, serialize_config(c)};
    }
  }
  for (const char* name : {"calibrated-4090", "qwen14b-4090", "qwen14b-4090-nvme", "nvme-scaling",
                           "pc-4090", "server-a100"}) {
    if (!check(desim::build_slideformer_graph(testing::shipped_config(name)))) return {false, name};
  }
  testing::RandomGraphOptions opt;
  opt.allow_class_contention = true;
  for (int i = 0; i < 300; ++i) {
    const auto g = testing::random_graph(r, opt);
    try {
      if (!check(g)) return {false, "random graph " + std::to_string(i)};
    } catch (const desim::DeadlockError&) {
    }
  }
  return {true, std::to_string(timelines) + " timelines"};
}

std::map<std::string, std::string> read_dir(const fs::path& d) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(d)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[e.path().filename().string()] = s.str();
  }
  return out;
}

Verdict sweep_determinism() {
  const auto root = fs::temp_directory_path() / "slidesim_acceptance_sweep";
  fs::remove_all(root);
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* sub : {"a", "b"}) {
    cli::Command cmd;
    cmd.verb = cli::Verb::kSweep;
    cmd.config_path = testing::config_path("calibrated-4090");
    cmd.axis = "batch=4,16,32";
    cmd.baselines = true;
    cmd.output_dir = (root / sub).string();
    std::ostringstream out, err;
    if (cli::run(cmd, out, err) != cli::kExitOk) return {false, err.str()};
    runs.push_back(read_dir(root / sub));
  }
  fs::remove_all(root);
  return {runs[0] == runs[1] && !runs[0].empty(), std::to_string(runs[0].size()) + " files identical"};
}

Verdict baseline_dominance() {
  testing::Rng r(12);
  int n = 0;
  for (; n < 150; ++n) {
    const auto c = testing::random_config(r);
    const auto slide = desim::simulate(desim::build_slideformer_graph(c)).makespan;
    const auto sync = desim::simulate(desim::build_baseline_graph(c, desim::BaselineMode::kSyncUpdate)).makespan;
    const auto peak = desim::simulate(desim::build_baseline_graph(c, desim::BaselineMode::kNoOffload)).makespan;
    if (!(slide <= sync && peak <= sync)) return {false, serialize_config(c)};
  }
  return {true, std::to_string(n) + " configs"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"hiding-factor arithmetic", hiding_factor_rows},
      {"static footprint of 8e9 params", static_128gb},
      {"critical batch size scale invariance", critical_batch_invariance},
      {"step-time regime change", regime_change},
      {"window memory", window_memory},
      {"LCE reduction", lce_reduction},
      {"NVMe near-linear scaling", nvme_scaling},
      {"full-offload trade-off", full_offload_tradeoff},
      {"tiny-instance oracle", tiny_oracle},
      {"schedule safety", schedule_safety},
      {"sweep determinism", sweep_determinism},
      {"baseline dominance", baseline_dominance},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += v.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                v.detail.c_str(), secs);
  }
  return failed == 0 ? 0 : 1;
}
