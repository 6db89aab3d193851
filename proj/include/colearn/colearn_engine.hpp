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

// Two-branch co-learning.
//
// The adaptation branch starts as a copy of the source model and is trained
// with its classifier frozen. The pre-trained branch is a fixed feature bank
// plus a centroid head refit each episode from the adaptation branch's
// current probabilities. Each episode:
//
//   1. pseudolabels from both branches' predictions (scheme per config)
//   2. one shuffled SGD pass over the pseudolabeled samples
//   3. full forward pass of the adaptation branch, centroid refresh
//
// Co-learn++ additionally uses zero-shot text centroids: they weight the
// centroid fit (p_a .* p_zs) and, under strong guidance, enter the logits.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "colearn/adaptation_model.hpp"
#include "colearn/classifier_branch.hpp"
#include "colearn/feature_bank.hpp"
#include "colearn/pseudolabeler.hpp"
#include "json.hpp"

namespace colearn {

struct EngineConfig {
  double gamma = 0.5;
  double temperature = kCentroidTemperature;
  /// Empty selects plain Co-learn (no zero-shot branch).
  std::optional<GuidanceMode> guidance;
  SchemeKind scheme = SchemeKind::MatchOrConf;
  SgdSchedule schedule;
  std::uint64_t seed = 0;

  /// Every violated constraint, empty when valid.
  std::vector<std::string> violations() const;
  /// Throws InvalidConfig listing all violations.
  void validate() const;
};

/// Co-learn++ defaults: weak guidance with MatchOrConf, strong guidance
/// with StrongGuidance pseudolabels.
EngineConfig colearn_plus_config(GuidanceKind kind, EngineConfig base = {});

struct EpisodeReport {
  int episode = 0;  // 1-based
  double coverage = 0.0;
  int n_pseudolabels = 0;
  std::array<int, 3> provenance_counts{};
  std::optional<double> pseudolabel_accuracy;
  /// (adaptation branch, pre-trained branch) accuracy of the predictions
  /// used to build this episode's pseudolabels.
  std::optional<std::pair<double, double>> branch_accuracies;
  double loss_mean = 0.0;
  double lr = 0.0;
  /// Zero-shot temperature in effect (Co-learn++ only).
  std::optional<double> t_tilde;

  bool operator==(const EpisodeReport&) const = default;
};

nlohmann::json to_json(const EpisodeReport& report);
/// One JSON document per line.
std::string reports_to_jsonl(std::span<const EpisodeReport> reports);

/// Snapshot handed to an observer at each episode, before the SGD pass.
struct EpisodeTrace {
  int episode = 0;
  const Matrix* branch_logits = nullptr;  // pre-trained branch logits
  const ProbMatrix* p_a = nullptr;
  const ProbMatrix* p_star = nullptr;
  const PseudolabelSet* pseudolabels = nullptr;
};
using EpisodeObserver = std::function<void(const EpisodeTrace&)>;

struct ColearnResult {
  AdaptationModel model;
  std::vector<EpisodeReport> reports;
  /// Pseudolabels rebuilt from the final adaptation model and refreshed
  /// centroids, for export to other adaptation methods.
  PseudolabelSet final_pseudolabels;
};

/// Co-learn with a vision-only pre-trained branch. `bank_a` feeds the
/// adaptation model; `bank_star` holds the pre-trained embeddings of the
/// same samples in the same order. Labels in the banks are only used for
/// report accuracies.
ColearnResult run_colearn(const AdaptationModel& source_model, const FeatureBank& bank_a,
                          const FeatureBank& bank_star, const EngineConfig& cfg,
                          const EpisodeObserver& observer = {});

/// Co-learn++ with zero-shot text centroids from per-class template banks.
ColearnResult run_colearn_plus(const AdaptationModel& source_model, const FeatureBank& bank_a,
                               const FeatureBank& bank_star, std::span<const FeatureBank> template_banks,
                               const EngineConfig& cfg, const EpisodeObserver& observer = {});

/// Ratio below which the pre-trained extractor is treated as clearly more
/// target-compatible.
inline constexpr double kGammaRatioCutoff = 0.85;
inline constexpr double kLowGamma = 0.1;
inline constexpr double kDefaultGamma = 0.5;

double gamma_for_ratio(double ratio, double cutoff = kGammaRatioCutoff);

struct GammaRecommendation {
  double source_accuracy = 0.0;
  double pretrained_accuracy = 0.0;
  double ratio = 0.0;
  double gamma = 0.0;
};

/// Fits a nearest-centroid head on each bank against `proxy_labels` (true
/// labels for the oracle ratio, zero-shot predictions for the estimate) and
/// compares the resulting accuracies.
GammaRecommendation recommend_gamma(const FeatureBank& bank_src_feats, const FeatureBank& bank_pre_feats,
                                    std::span<const std::int32_t> proxy_labels,
                                    double cutoff = kGammaRatioCutoff);

/// Weak when the image classifier is at least as accurate as the text one.
GuidanceKind guidance_for_accuracies(double image_clf_acc, double text_clf_acc);

struct GuidanceSelection {
  double image_clf_acc = 0.0;
  double text_clf_acc = 0.0;
  GuidanceKind kind = GuidanceKind::Weak;
  GuidanceMode mode() const { return kind == GuidanceKind::Weak ? GuidanceMode::weak() : GuidanceMode::strong(); }
};

struct GuidanceSelectionOptions {
  int shots = 3;
  int seeds = 3;
  /// Per-class draws (shots per class) instead of shots * L random draws.
  bool macro = false;
  std::uint64_t seed = 0;
};

/// Scores the zero-shot text classifier and the text-weighted image
/// centroid classifier on labeled subsets given explicitly.
GuidanceSelection select_guidance(const FeatureBank& bank_star, std::span<const FeatureBank> template_banks,
                                  std::span<const std::vector<int>> labeled_subsets);

/// Draws `options.seeds` k-shot subsets from bank_star's labels and scores
/// them. Throws MissingShotClass in macro mode when a class has too few
/// labeled samples.
GuidanceSelection select_guidance(const FeatureBank& bank_star, std::span<const FeatureBank> template_banks,
                                  const GuidanceSelectionOptions& options);

std::vector<std::vector<int>> draw_shot_subsets(const LabelVector& labels, int n_classes,
                                                const GuidanceSelectionOptions& options);

}  // namespace colearn
