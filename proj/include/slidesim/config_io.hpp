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

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "slidesim/units.hpp"
#include "slidesim/workload.hpp"

namespace slidesim {

namespace config_detail {

using json = nlohmann::json;

class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(std::string_view key) {
    seen_.insert(std::string(key));
    return node_.contains(std::string(key));
  }

  std::int64_t integer(std::string_view key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = node_.at(std::string(key));
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d) && std::abs(d) < 9e18) return static_cast<std::int64_t>(d);
    }
    throw ConfigError(where(key) + ": expected an integer");
  }

  std::uint64_t count(std::string_view key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = node_.at(std::string(key));
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) throw ConfigError(where(key) + ": must be ≥ 0");
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && d == std::floor(d) && d < 9e18) return static_cast<std::uint64_t>(d);
    }
    throw ConfigError(where(key) + ": expected a non-negative integer");
  }

  Bytes bytes(std::string_view key, Bytes fallback, bool rate = false) {
    if (!has(key)) return fallback;
    const auto& v = node_.at(std::string(key));
    if (v.is_string()) {
      try {
        return parse_byte_quantity(v.get<std::string>(), rate);
      } catch (const ConfigError& e) {
        throw ConfigError(where(key) + ": " + e.what());
      }
    }
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && d < 9e18) return static_cast<Bytes>(std::llround(d));
    }
    throw ConfigError(where(key) + ": expected a byte quantity");
  }

  double real(std::string_view key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = node_.at(std::string(key));
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    return v.get<double>();
  }

  bool flag(std::string_view key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = node_.at(std::string(key));
    if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string text(std::string_view key, std::string fallback) {
    if (!has(key)) return fallback;
    const auto& v = node_.at(std::string(key));
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    return v.get<std::string>();
  }

  // Must run after every known key has been queried.
  void reject_unknown() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError(where(key) + ": unknown key");
    }
  }

  std::string where(std::string_view key) const { return path_ + "." + std::string(key); }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json parse_document(std::string_view text) {
  try {
    return json::parse(text, /*cb=*/nullptr, /*allow_exceptions=*/true,
                       /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

}  // namespace config_detail

/// Builds an ExperimentConfig from an already-parsed document tree.
inline ExperimentConfig config_from_json(const nlohmann::json& doc) {
  using config_detail::Section;
  if (!doc.is_object()) throw ConfigError("config: expected an object at top level");
  for (const auto& [key, value] : doc.items()) {
    if (key != "model" && key != "workload" && key != "hardware" && key != "policy") {
      throw ConfigError(key + ": unknown section");
    }
  }
  static const nlohmann::json kEmpty = nlohmann::json::object();
  auto section = [&](const char* name) -> const nlohmann::json& {
    return doc.contains(name) ? doc.at(name) : kEmpty;
  };

  ExperimentConfig c;

  Section model(section("model"), "model");
  if (!model.has("num_layers")) throw ConfigError("model.num_layers: required");
  c.model.num_layers = model.integer("num_layers", 0);
  c.model.hidden_size = model.integer("hidden_size", c.model.hidden_size);
  c.model.vocab_size = model.integer("vocab_size", c.model.vocab_size);
  const double ff = model.real("ff_multiplier", kDefaultFfMultiplier);
  if (model.has("params_per_layer")) {
    c.model.params_per_layer = model.count("params_per_layer", 0);
  } else {
    if (c.model.hidden_size < 1) throw ValidationError("model.hidden_size ≥ 1");
    if (!(ff > 0.0)) throw ValidationError("model.ff_multiplier > 0");
    c.model.params_per_layer = derive_layer_params(c.model.hidden_size, ff);
  }
  c.model.embedding_params = model.count("embedding_params", 0);
  c.model.head_params = model.count("head_params", 0);
  c.model.tied_embeddings = model.flag("tied_embeddings", false);
  model.reject_unknown();

  Section work(section("workload"), "workload");
  c.workload.batch_size = work.integer("batch_size", c.workload.batch_size);
  c.workload.seq_len = work.integer("seq_len", c.workload.seq_len);
  c.workload.bytes_low_precision = work.integer("bytes_low_precision", 2);
  c.workload.bytes_full_precision = work.integer("bytes_full_precision", 4);
  work.reject_unknown();

  Section hw(section("hardware"), "hardware");
  auto& h = c.hardware;
  h.gpu_flops = hw.real("gpu_flops", h.gpu_flops);
  h.gpu_efficiency = hw.real("gpu_efficiency", h.gpu_efficiency);
  h.vram_bytes = hw.bytes("vram_bytes", h.vram_bytes);
  h.pcie_h2d_bw = hw.bytes("pcie_h2d_bw", h.pcie_h2d_bw, true);
  h.pcie_d2h_bw = hw.bytes("pcie_d2h_bw", h.pcie_d2h_bw, true);
  h.cpu_update_rate = hw.real("cpu_update_rate", h.cpu_update_rate);
  h.cpu_convert_rate = hw.real("cpu_convert_rate", h.cpu_convert_rate);
  h.ram_bytes = hw.bytes("ram_bytes", h.ram_bytes);
  h.nvme_drives = hw.integer("nvme_drives", h.nvme_drives);
  h.nvme_read_bw = hw.bytes("nvme_read_bw", h.nvme_read_bw, true);
  h.nvme_write_bw = hw.bytes("nvme_write_bw", h.nvme_write_bw, true);
  h.nvme_capacity_bytes = hw.bytes("nvme_capacity_bytes", h.nvme_capacity_bytes);
  h.gds_enabled = hw.flag("gds_enabled", h.gds_enabled);
  hw.reject_unknown();

  Section pol(section("policy"), "policy");
  auto& p = c.policy;
  p.window_units = pol.integer("window_units", p.window_units);
  p.grad_buffer_depth = pol.integer("grad_buffer_depth", p.grad_buffer_depth);
  p.convert_buffer_depth = pol.integer("convert_buffer_depth", p.convert_buffer_depth);
  p.optimizer_staging_depth = pol.integer("optimizer_staging_depth", p.optimizer_staging_depth);
  const std::string target = pol.text("activation_target", "cpu");
  if (auto t = activation_target_from_string(target)) {
    p.activation_target = *t;
  } else {
    throw ConfigError("policy.activation_target: expected gpu_resident, cpu or nvme, got '" +
                      target + "'");
  }
  p.optimizer_offload_fraction = pol.real("optimizer_offload_fraction", 0.0);
  p.master_params_on_nvme = pol.flag("master_params_on_nvme", false);
  p.lce_enabled = pol.flag("lce_enabled", true);
  p.lce_chunk_rows = pol.integer("lce_chunk_rows", p.lce_chunk_rows);
  p.workspace_bytes = pol.bytes("workspace_bytes", p.workspace_bytes);
  pol.reject_unknown();

  validate(c);
  return c;
}

/// Parses a config document (JSON syntax, `//` comments allowed) and
/// validates it. Missing keys take their documented defaults.
inline ExperimentConfig parse_config(std::string_view text) {
  return config_from_json(config_detail::parse_document(text));
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json doc;
  doc["model"] = {
      {"num_layers", c.model.num_layers},
      {"params_per_layer", c.model.params_per_layer},
      {"hidden_size", c.model.hidden_size},
      {"vocab_size", c.model.vocab_size},
      {"embedding_params", c.model.embedding_params},
      {"head_params", c.model.head_params},
      {"tied_embeddings", c.model.tied_embeddings},
  };
  doc["workload"] = {
      {"batch_size", c.workload.batch_size},
      {"seq_len", c.workload.seq_len},
      {"bytes_low_precision", c.workload.bytes_low_precision},
      {"bytes_full_precision", c.workload.bytes_full_precision},
  };
  const auto& h = c.hardware;
  doc["hardware"] = {
      {"gpu_flops", h.gpu_flops},
      {"gpu_efficiency", h.gpu_efficiency},
      {"vram_bytes", h.vram_bytes},
      {"pcie_h2d_bw", h.pcie_h2d_bw},
      {"pcie_d2h_bw", h.pcie_d2h_bw},
      {"cpu_update_rate", h.cpu_update_rate},
      {"cpu_convert_rate", h.cpu_convert_rate},
      {"ram_bytes", h.ram_bytes},
      {"nvme_drives", h.nvme_drives},
      {"nvme_read_bw", h.nvme_read_bw},
      {"nvme_write_bw", h.nvme_write_bw},
      {"nvme_capacity_bytes", h.nvme_capacity_bytes},
      {"gds_enabled", h.gds_enabled},
  };
  const auto& p = c.policy;
  doc["policy"] = {
      {"window_units", p.window_units},
      {"grad_buffer_depth", p.grad_buffer_depth},
      {"convert_buffer_depth", p.convert_buffer_depth},
      {"optimizer_staging_depth", p.optimizer_staging_depth},
      {"activation_target", std::string(to_string(p.activation_target))},
      {"optimizer_offload_fraction", p.optimizer_offload_fraction},
      {"master_params_on_nvme", p.master_params_on_nvme},
      {"lce_enabled", p.lce_enabled},
      {"lce_chunk_rows", p.lce_chunk_rows},
      {"workspace_bytes", p.workspace_bytes},
  };
  return doc;
}

inline std::string serialize_config(const ExperimentConfig& c) {
  return config_to_json(c).dump(2) + "\n";
}

/// Applies a dotted-path override such as `policy.window_units=4` to a
/// document tree. The value is read as JSON when it parses as JSON and as a
/// plain string otherwise ("24GB" stays a string).
inline void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "': expected key=value");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  const auto dot = path.find('.');
  if (dot == std::string::npos || path.find('.', dot + 1) != std::string::npos) {
    throw ConfigError("override '" + path + "': expected section.key");
  }
  const std::string section = path.substr(0, dot);
  const std::string key = path.substr(dot + 1);
  // Check the key against the schema by asking the parser about a probe doc.
  {
    nlohmann::json probe = {{"model", {{"num_layers", 1}}}};
    probe[section][key] = nullptr;
    try {
      config_from_json(probe);
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      if (msg.find("unknown") != std::string::npos) {
        throw ConfigError("override '" + path + "': not a config key");
      }
    }
  }
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  if (!doc.is_object()) doc = nlohmann::json::object();
  doc[section][key] = std::move(value);
}

}  // namespace slidesim
