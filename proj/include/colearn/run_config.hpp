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


// Run settings shared by the config file and command-line flags. A config
// file is flat `key = value` text ('#' starts a comment); keys are the flag
// names without the leading dashes. Flags override file values.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "colearn/colearn_engine.hpp"
#include "json.hpp"

namespace colearn {

enum class RunMode { Colearn, ColearnPlusWeak, ColearnPlusStrong };

std::string_view to_string(RunMode mode);
std::optional<RunMode> parse_run_mode(std::string_view text);

struct RunOptions {
  std::optional<std::string> mode;
  std::optional<std::string> scheme;
  std::optional<double> gamma;
  std::optional<double> alpha;
  std::optional<double> t;
  std::optional<std::string> t_tilde;  // "auto" or a number
  std::optional<int> episodes;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<int> lr_decay_episode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scenario;
};

/// Keys accepted in config files.
const std::vector<std::string>& config_keys();

/// Parses config text; throws InvalidConfig listing every malformed line,
/// unknown key and unparsable value.
RunOptions parse_config_text(std::string_view text);
RunOptions load_config_file(const std::filesystem::path& path);

/// Field-wise: values set in `overrides` win.
RunOptions merge(const RunOptions& base, const RunOptions& overrides);

struct ResolvedRun {
  RunMode mode = RunMode::Colearn;
  EngineConfig engine;
};

/// Applies options on top of the mode's defaults and validates the result.
/// `--lr` sets the initial rate; the decayed rate is a tenth of it.
/// Throws InvalidConfig listing every violation.
ResolvedRun resolve(const RunOptions& options);

nlohmann::json to_json(const EngineConfig& cfg);
nlohmann::json to_json(const ResolvedRun& run);

}  // namespace colearn
