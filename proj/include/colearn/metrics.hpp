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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "colearn/types.hpp"
#include "json.hpp"

namespace colearn {

struct EvalReport {
  double micro_acc = 0.0;
  double macro_acc = 0.0;
  /// Accuracy per class index; empty optional for classes absent from truth.
  std::vector<std::optional<double>> per_class_acc;
  /// confusion[t][p] counts samples of true class t predicted as p.
  std::vector<std::vector<long long>> confusion;
  std::optional<double> acc_known;
  std::optional<double> acc_unknown;
  std::optional<double> h_score;
};

/// Harmonic mean of known- and unknown-class accuracy; 0 if either is 0.
double h_score(double acc_known, double acc_unknown);

/// `known_mask[i]` marks samples whose true class is shared with the source
/// label space. When given, acc_known/acc_unknown/h_score are filled.
/// `n_classes` sizes the confusion matrix; 0 infers it from the labels.
EvalReport evaluate(std::span<const std::int32_t> predictions, std::span<const std::int32_t> truth,
                    const std::optional<std::vector<bool>>& known_mask = std::nullopt,
                    int n_classes = 0);

nlohmann::json to_json(const EvalReport& report);

}  // namespace colearn
