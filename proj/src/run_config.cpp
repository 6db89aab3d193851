// Copyright 2026 The Colearn Authors. All Rights Reserved.
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


#include "colearn/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "colearn/error.hpp"
#include "colearn/synthetic_benchmark.hpp"

namespace colearn {

namespace {

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
std::optional<T> parse_number(const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

template <typename T>
void set_number(std::optional<T>& field, const std::string& key, const std::string& value,
                std::vector<std::string>& errors) {
  if (auto v = parse_number<T>(value)) {
    field = *v;
  } else {
    errors.push_back("'" + key + "' has unparsable value '" + value + "'");
  }
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

template <typename T>
void take(std::optional<T>& out, const std::optional<T>& over) {
  if (over) out = over;
}

}  // namespace

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Colearn: return "colearn";
    case RunMode::ColearnPlusWeak: return "colearn++-weak";
    case RunMode::ColearnPlusStrong: return "colearn++-strong";
  }
  return "unknown";
}

std::optional<RunMode> parse_run_mode(std::string_view text) {
  const std::string t = lower(std::string(text));
  for (auto m : {RunMode::Colearn, RunMode::ColearnPlusWeak, RunMode::ColearnPlusStrong}) {
    if (t == to_string(m)) return m;
  }
  return std::nullopt;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {"mode",     "scheme", "gamma",      "alpha",
                                                "t",        "t-tilde", "episodes",  "batch-size",
                                                "lr",       "lr-decay-episode", "seed", "scenario"};
  return keys;
}

RunOptions parse_config_text(std::string_view text) {
  RunOptions o;
  std::vector<std::string> errors;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_no) + " is not key = value");
      continue;
    }
    const std::string key = lower(trim(std::string_view(body).substr(0, eq)));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (value.empty()) {
      errors.push_back("line " + std::to_string(line_no) + " has an empty value for '" + key + "'");
      continue;
    }
    if (key == "mode") o.mode = value;
    else if (key == "scheme") o.scheme = value;
    else if (key == "gamma") set_number(o.gamma, key, value, errors);
    else if (key == "alpha") set_number(o.alpha, key, value, errors);
    else if (key == "t") set_number(o.t, key, value, errors);
    else if (key == "t-tilde") o.t_tilde = value;
    else if (key == "episodes") set_number(o.episodes, key, value, errors);
    else if (key == "batch-size") set_number(o.batch_size, key, value, errors);
    else if (key == "lr") set_number(o.lr, key, value, errors);
    else if (key == "lr-decay-episode") set_number(o.lr_decay_episode, key, value, errors);
    else if (key == "seed") set_number(o.seed, key, value, errors);
    else if (key == "scenario") o.scenario = value;
    else errors.push_back("line " + std::to_string(line_no) + " has unknown key '" + key + "'");
  }
  if (!errors.empty()) {
    std::string msg = "invalid config file:";
    for (const auto& e : errors) msg += " [" + e + "]";
    throw Error(ErrorCode::InvalidConfig, msg);
  }
  return o;
}

RunOptions load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

RunOptions merge(const RunOptions& base, const RunOptions& overrides) {
  RunOptions o = base;
  take(o.mode, overrides.mode);
  take(o.scheme, overrides.scheme);
  take(o.gamma, overrides.gamma);
  take(o.alpha, overrides.alpha);
  take(o.t, overrides.t);
  take(o.t_tilde, overrides.t_tilde);
  take(o.episodes, overrides.episodes);
  take(o.batch_size, overrides.batch_size);
  take(o.lr, overrides.lr);
  take(o.lr_decay_episode, overrides.lr_decay_episode);
  take(o.seed, overrides.seed);
  take(o.scenario, overrides.scenario);
  return o;
}

ResolvedRun resolve(const RunOptions& options) {
  std::vector<std::string> errors;
  ResolvedRun run;
  if (options.mode) {
    if (auto m = parse_run_mode(*options.mode)) {
      run.mode = *m;
    } else {
      errors.push_back("unknown mode '" + *options.mode + "'");
    }
  }
  EngineConfig& cfg = run.engine;
  if (run.mode == RunMode::ColearnPlusWeak) cfg = colearn_plus_config(GuidanceKind::Weak, cfg);
  if (run.mode == RunMode::ColearnPlusStrong) cfg = colearn_plus_config(GuidanceKind::Strong, cfg);

  if (options.scheme) {
    if (auto s = parse_scheme(*options.scheme)) {
      cfg.scheme = *s;
    } else {
      errors.push_back("unknown scheme '" + *options.scheme + "'");
    }
  }
  if (options.gamma) cfg.gamma = *options.gamma;
  if (options.t) cfg.temperature = *options.t;
  if (options.alpha || options.t_tilde) {
    if (!cfg.guidance) {
      errors.push_back("alpha and t-tilde apply only to colearn++ modes");
    } else {
      if (options.alpha) cfg.guidance->alpha = *options.alpha;
      if (options.t_tilde) {
        if (lower(*options.t_tilde) == "auto") {
          cfg.guidance->t_tilde.reset();
        } else if (auto v = parse_number<double>(*options.t_tilde)) {
          cfg.guidance->t_tilde = *v;
        } else {
          errors.push_back("t-tilde must be 'auto' or a number, got '" + *options.t_tilde + "'");
        }
      }
    }
  }
  if (options.episodes) cfg.schedule.episodes = *options.episodes;
  if (options.batch_size) cfg.schedule.batch_size = *options.batch_size;
  if (options.lr) {
    cfg.schedule.lr_initial = *options.lr;
    cfg.schedule.lr_after_decay = *options.lr * 0.1;
  }
  if (options.lr_decay_episode) {
    cfg.schedule.decay_episode = *options.lr_decay_episode;
  } else if (options.episodes) {
    cfg.schedule.decay_episode = std::min(cfg.schedule.decay_episode, cfg.schedule.episodes);
  }
  if (options.seed) cfg.seed = *options.seed;
  if (options.scenario && !parse_scenario(*options.scenario)) {
    errors.push_back("unknown scenario '" + *options.scenario + "'");
  }

  for (auto& v : cfg.violations()) errors.push_back(std::move(v));
  if (!errors.empty()) {
    std::string msg = "invalid run configuration:";
    for (const auto& e : errors) msg += " [" + e + "]";
    throw Error(ErrorCode::InvalidConfig, msg);
  }
  return run;
}

nlohmann::json to_json(const EngineConfig& cfg) {
  nlohmann::json j;
  j["gamma"] = cfg.gamma;
  j["t"] = cfg.temperature;
  j["scheme"] = std::string(to_string(cfg.scheme));
  if (cfg.guidance) {
    j["guidance"] = {{"kind", cfg.guidance->kind == GuidanceKind::Weak ? "weak" : "strong"},
                     {"alpha", cfg.guidance->alpha},
                     {"t_tilde", cfg.guidance->t_tilde ? nlohmann::json(*cfg.guidance->t_tilde)
                                                       : nlohmann::json("auto")}};
  } else {
    j["guidance"] = nullptr;
  }
  j["episodes"] = cfg.schedule.episodes;
  j["batch_size"] = cfg.schedule.batch_size;
  j["lr"] = cfg.schedule.lr_initial;
  j["lr_after_decay"] = cfg.schedule.lr_after_decay;
  j["lr_decay_episode"] = cfg.schedule.decay_episode;
  j["seed"] = cfg.seed;
  return j;
}

nlohmann::json to_json(const ResolvedRun& run) {
  nlohmann::json j = to_json(run.engine);
  j["mode"] = std::string(to_string(run.mode));
  return j;
}

}  // namespace colearn
