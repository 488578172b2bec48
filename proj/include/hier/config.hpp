// Copyright 2026 The HIER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hier/error.hpp"
#include "hier/relations.hpp"

namespace hier {

/// Run configuration. Serialized as `key = value` lines, one key per field.
struct Config {
  // model
  std::size_t d = 3584;
  std::size_t k = 50;
  std::size_t l = 25;
  double retention_ratio = 0.5;
  std::size_t iterations = 30;
  double alpha_init = 0.5;
  JsMode js_mode = JsMode::kStandard;
  bool mass_normalize = false;
  bool label_axis_weights = false;
  bool unit_centroids = false;
  std::string backend = "attention";
  std::size_t backend_layers = 2;
  bool freeze_gate_head = false;

  // ablations
  bool ablate_concept = false;
  bool ablate_relation = false;
  bool ablate_cot = false;
  bool ablate_evolution = false;

  // optimization
  double beta = 0.01;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  std::size_t epochs = 5;
  std::size_t batch_size = 2;
  std::uint64_t seed = 0;

  // data: an HSE file when hse_path is set, the synthetic generator otherwise
  std::string hse_path;
  std::size_t synthetic_classes = 4;
  std::size_t synthetic_samples_per_class = 50;
  std::size_t synthetic_tokens = 12;
  double synthetic_noise = 0.1;
  double synthetic_distractors = 0.25;
  std::uint64_t data_seed = 0;
  double train_fraction = 0.7;
  double validation_fraction = 0.15;

  bool any_ablation() const { return ablate_concept || ablate_relation || ablate_cot || ablate_evolution; }
};

inline std::string_view to_string(JsMode m) { return m == JsMode::kStandard ? "standard" : "paper-verbatim"; }

inline JsMode parse_js_mode(std::string_view s) {
  if (s == "standard") return JsMode::kStandard;
  if (s == "paper-verbatim") return JsMode::kVerbatim;
  throw InvalidArgument("unknown js mode '" + std::string(s) + "' (expected standard|paper-verbatim)");
}

/// Throws InvalidArgument describing the first violated constraint.
inline void validate(const Config& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("config: ") + what);
  };
  require(c.d >= 1, "d must be positive");
  require(c.k >= 1, "k must be positive");
  require(c.iterations >= 1, "iterations must be positive");
  require(c.retention_ratio > 0.0 && c.retention_ratio <= 1.0, "retention_ratio must lie in (0, 1]");
  require(c.alpha_init > 0.0 && c.alpha_init < 1.0, "alpha_init must lie in (0, 1)");
  require(c.beta >= 0.0, "beta must be >= 0");
  require(c.learning_rate > 0.0, "learning_rate must be positive");
  require(c.weight_decay >= 0.0, "weight_decay must be >= 0");
  require(c.epochs >= 1, "epochs must be positive");
  require(c.batch_size >= 1, "batch_size must be positive");
  require(c.backend == "attention" || c.backend == "identity", "backend must be attention|identity");
  require(c.train_fraction > 0.0 && c.validation_fraction >= 0.0 &&
              c.train_fraction + c.validation_fraction <= 1.0,
          "train/validation fractions must be positive and sum to at most 1");
}

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw InvalidArgument("config: bad value '" + std::string(text) + "' for " + std::string(key));
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw InvalidArgument("config: bad boolean '" + std::string(text) + "' for " + std::string(key));
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// One table drives both parsing and serialization.
template <typename Visitor>
void visit_fields(Config& c, Visitor&& v) {
  v("d", c.d);
  v("k", c.k);
  v("l", c.l);
  v("retention_ratio", c.retention_ratio);
  v("iterations", c.iterations);
  v("alpha_init", c.alpha_init);
  v("js_mode", c.js_mode);
  v("mass_normalize", c.mass_normalize);
  v("label_axis_weights", c.label_axis_weights);
  v("unit_centroids", c.unit_centroids);
  v("backend", c.backend);
  v("backend_layers", c.backend_layers);
  v("freeze_gate_head", c.freeze_gate_head);
  v("ablate_concept", c.ablate_concept);
  v("ablate_relation", c.ablate_relation);
  v("ablate_cot", c.ablate_cot);
  v("ablate_evolution", c.ablate_evolution);
  v("beta", c.beta);
  v("learning_rate", c.learning_rate);
  v("weight_decay", c.weight_decay);
  v("epochs", c.epochs);
  v("batch_size", c.batch_size);
  v("seed", c.seed);
  v("hse_path", c.hse_path);
  v("synthetic_classes", c.synthetic_classes);
  v("synthetic_samples_per_class", c.synthetic_samples_per_class);
  v("synthetic_tokens", c.synthetic_tokens);
  v("synthetic_noise", c.synthetic_noise);
  v("synthetic_distractors", c.synthetic_distractors);
  v("data_seed", c.data_seed);
  v("train_fraction", c.train_fraction);
  v("validation_fraction", c.validation_fraction);
}

}  // namespace detail

/// Parses `key = value` lines. Blank lines and `#` comments are ignored;
/// unknown keys and duplicate keys are errors. Missing keys keep defaults.
inline Config parse_config(std::string_view text) {
  Config c;
  std::vector<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    for (const auto& s : seen)
      if (s == key) throw InvalidArgument("config line " + std::to_string(line_no) + ": duplicate key " + key);
    seen.push_back(key);

    bool matched = false;
    detail::visit_fields(c, [&](std::string_view name, auto& field) {
      if (name != key) return;
      matched = true;
      using T = std::decay_t<decltype(field)>;
      if constexpr (std::is_same_v<T, bool>) {
        field = detail::parse_bool(key, value);
      } else if constexpr (std::is_same_v<T, std::string>) {
        field = std::string(value);
      } else if constexpr (std::is_same_v<T, JsMode>) {
        field = parse_js_mode(value);
      } else {
        field = detail::parse_number<T>(key, value);
      }
    });
    if (!matched) throw InvalidArgument("config line " + std::to_string(line_no) + ": unknown key " + key);
  }
  validate(c);
  return c;
}

inline std::string serialize_config(const Config& config) {
  Config c = config;
  std::string out;
  detail::visit_fields(c, [&](std::string_view name, auto& field) {
    using T = std::decay_t<decltype(field)>;
    out += name;
    out += " = ";
    if constexpr (std::is_same_v<T, bool>) {
      out += field ? "true" : "false";
    } else if constexpr (std::is_same_v<T, std::string>) {
      out += field;
    } else if constexpr (std::is_same_v<T, JsMode>) {
      out += to_string(field);
    } else if constexpr (std::is_same_v<T, double>) {
      out += detail::format_double(field);
    } else {
      out += std::to_string(field);
    }
    out += '\n';
  });
  return out;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace hier
