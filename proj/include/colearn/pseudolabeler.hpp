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

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "colearn/classifier_branch.hpp"

namespace colearn {

enum class Provenance { Match, AdaptationBranch, PretrainedBranch };

/// Pseudolabel selection rules.
///
///   SelfConf        adaptation prediction where its confidence > gamma
///   OtherConf       pre-trained prediction where its confidence > gamma
///   Match           both branches agree, confidence ignored
///   MatchOrConf     agree -> that label; disagree -> the single confident
///                   branch's label; both or neither confident -> none
///   MatchAndConf    agree and both confident
///   StrongGuidance  pre-trained (fused) prediction where confidence > gamma
enum class SchemeKind { SelfConf, OtherConf, Match, MatchOrConf, MatchAndConf, StrongGuidance };

struct Pseudolabel {
  int sample_index = 0;
  int label = 0;
  /// Probability of `label` under the branch that assigned it. Agreement
  /// rows store the adaptation branch's probability.
  double confidence = 0.0;
  Provenance provenance = Provenance::Match;

  bool operator==(const Pseudolabel&) const = default;
};

/// Sorted by sample_index; each index at most once.
struct PseudolabelSet {
  std::vector<Pseudolabel> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const PseudolabelSet&) const = default;
};

struct PseudolabelStats {
  double coverage = 0.0;
  std::array<int, 3> provenance_counts{};  // indexed by Provenance
  std::optional<double> accuracy;          // over entries with known truth

  int count(Provenance p) const { return provenance_counts[static_cast<int>(p)]; }
};

/// Throws InvalidArgument for gamma outside (0, 1), DimensionMismatch when
/// the two probability matrices differ in shape.
PseudolabelSet build_pseudolabels(const ProbMatrix& p_a, const ProbMatrix& p_star, double gamma,
                                  SchemeKind scheme);

/// `truth` entries equal to kUnlabeled are skipped for accuracy.
PseudolabelStats pseudolabel_stats(const PseudolabelSet& set, int n_total,
                                   const std::optional<LabelVector>& truth = std::nullopt);

std::string_view to_string(SchemeKind scheme);
std::string_view to_string(Provenance provenance);
/// Accepts the enum names case-insensitively, e.g. "matchorconf".
std::optional<SchemeKind> parse_scheme(std::string_view text);
std::optional<Provenance> parse_provenance(std::string_view text);

/// `sample_index,label,confidence,provenance` with a header row.
std::string pseudolabels_to_csv(const PseudolabelSet& set);
void write_pseudolabels_csv(const PseudolabelSet& set, const std::filesystem::path& path);
PseudolabelSet read_pseudolabels_csv(const std::filesystem::path& path);

}  // namespace colearn
