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

// Seeded Gaussian-mixture stand-ins for real embedding banks.
//
// Each target sample has one latent point z (class mean + noise). Two
// "views" of z model the two feature extractors: the source-feature view is
// rotated by `rotation_angle` and translated by `mean_translation`; the
// pre-trained view applies the same map scaled down by
// `pretrained_shift_fraction`, so it stays closer to the source geometry.
// Text-template banks are noisy copies of the pre-trained view's class means.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "colearn/adaptation_model.hpp"
#include "colearn/feature_bank.hpp"
#include "json.hpp"

namespace colearn {

enum class Scenario { ClosedSet, OpenSet, PartialSet, OpenPartial };

std::string_view to_string(Scenario scenario);
std::optional<Scenario> parse_scenario(std::string_view text);

/// Partition of the global class indices [0, L).
struct LabelSplit {
  std::vector<int> shared;
  std::vector<int> source_private;
  std::vector<int> target_private;

  std::vector<int> source_classes() const;  // shared + source_private, sorted
  std::vector<int> target_classes() const;  // shared + target_private, sorted
};

/// Split with the usual 65-class benchmark proportions:
/// open-set 25 target-private then 40 shared; partial-set 25 shared then 40
/// source-private; open-partial 10 shared, 5 source-private, 50
/// target-private. Counts scale with `n_classes`.
LabelSplit default_split(Scenario scenario, int n_classes);

struct ShiftSpec {
  int n_classes = 6;
  int dim = 16;
  int n_source = 600;
  int n_target = 600;
  double class_separation = 4.0;
  double rotation_angle = 0.9;  // radians
  double mean_translation = 1.5;
  double noise_sigma = 1.0;
  double pretrained_shift_fraction = 0.25;
  int templates_per_class = 180;
  double template_noise = 1.0;
  Scenario scenario = Scenario::ClosedSet;
  /// Empty means default_split(scenario, n_classes).
  std::optional<LabelSplit> split;
  std::uint64_t seed = 0;

  LabelSplit resolved_split() const;
  /// Throws ImpossibleSplit or InvalidArgument.
  void validate() const;
};

nlohmann::json to_json(const ShiftSpec& spec);
ShiftSpec shift_spec_from_json(const nlohmann::json& j);

struct SyntheticBenchmark {
  FeatureBank source;       // labeled, source classes only
  FeatureBank target_a;     // source-feature view, labels are ground truth
  FeatureBank target_star;  // pre-trained view, index-aligned with target_a
  std::vector<FeatureBank> templates;  // one bank per class in [0, L)
  LabelSplit split;
};

SyntheticBenchmark generate(const ShiftSpec& spec);

/// Writes source.fbank, target_a.fbank, target_star.fbank,
/// templates/class_NNN.fbank and spec.json under `dir`.
void write_benchmark(const SyntheticBenchmark& bench, const ShiftSpec& spec,
                     const std::filesystem::path& dir);

/// Per-class template banks named class_NNN.fbank; throws MissingTemplates
/// when any class in [0, n_classes) has no file.
std::vector<FeatureBank> load_template_dir(const std::filesystem::path& dir, int n_classes);
std::filesystem::path template_bank_path(const std::filesystem::path& dir, int class_index);

struct SourceTrainingOptions {
  SgdSchedule schedule{0.05, 0.005, 20, 32, 30};
  int depth = 1;
  int hidden_dim = 0;
  /// Training fails with NonConvergence below this source accuracy.
  double min_accuracy = 0.95;
};

/// Supervised cross-entropy training of the whole model on the labeled
/// source bank. The returned model has its classifier frozen.
AdaptationModel train_source(const FeatureBank& source, const SourceTrainingOptions& options,
                             std::uint64_t seed);

double accuracy_on(const AdaptationModel& model, const FeatureBank& bank);

}  // namespace colearn
