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

#include "colearn/metrics.hpp"

#include <algorithm>

#include "colearn/error.hpp"

namespace colearn {

double h_score(double acc_known, double acc_unknown) {
  if (acc_known <= 0.0 || acc_unknown <= 0.0) return 0.0;
  return 2.0 * acc_known * acc_unknown / (acc_known + acc_unknown);
}

EvalReport evaluate(std::span<const std::int32_t> predictions, std::span<const std::int32_t> truth,
                    const std::optional<std::vector<bool>>& known_mask, int n_classes) {
  if (predictions.empty() || truth.empty()) throw Error(ErrorCode::InvalidArgument, "evaluate: empty inputs");
  if (predictions.size() != truth.size()) {
    throw Error(ErrorCode::DimensionMismatch, "evaluate: prediction and truth lengths differ");
  }
  if (known_mask && known_mask->size() != truth.size()) {
    throw Error(ErrorCode::DimensionMismatch, "evaluate: known mask length differs");
  }
  int inferred = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predictions[i] < 0) {
      throw Error(ErrorCode::LabelOutOfRange, "evaluate: negative label at index " + std::to_string(i));
    }
    inferred = std::max({inferred, truth[i] + 1, predictions[i] + 1});
  }
  if (n_classes == 0) n_classes = inferred;
  if (inferred > n_classes) throw Error(ErrorCode::LabelOutOfRange, "evaluate: label exceeds class count");

  EvalReport r;
  r.confusion.assign(n_classes, std::vector<long long>(n_classes, 0));
  std::size_t correct = 0;
  std::size_t known_total = 0, known_correct = 0, unknown_total = 0, unknown_correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++r.confusion[truth[i]][predictions[i]];
    const bool hit = truth[i] == predictions[i];
    correct += hit;
    if (known_mask) {
      if ((*known_mask)[i]) {
        ++known_total;
        known_correct += hit;
      } else {
        ++unknown_total;
        unknown_correct += hit;
      }
    }
  }
  r.micro_acc = static_cast<double>(correct) / static_cast<double>(truth.size());

  r.per_class_acc.resize(n_classes);
  double macro_sum = 0.0;
  int present = 0;
  for (int c = 0; c < n_classes; ++c) {
    long long total = 0;
    for (auto v : r.confusion[c]) total += v;
    if (total == 0) continue;
    const double acc = static_cast<double>(r.confusion[c][c]) / static_cast<double>(total);
    r.per_class_acc[c] = acc;
    macro_sum += acc;
    ++present;
  }
  r.macro_acc = macro_sum / present;

  if (known_mask) {
    r.acc_known = known_total ? static_cast<double>(known_correct) / known_total : 0.0;
    r.acc_unknown = unknown_total ? static_cast<double>(unknown_correct) / unknown_total : 0.0;
    r.h_score = h_score(*r.acc_known, *r.acc_unknown);
  }
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["micro_acc"] = report.micro_acc;
  j["macro_acc"] = report.macro_acc;
  auto per_class = nlohmann::json::array();
  for (const auto& a : report.per_class_acc) per_class.push_back(a ? nlohmann::json(*a) : nlohmann::json());
  j["per_class_acc"] = per_class;
  j["confusion"] = report.confusion;
  if (report.h_score) {
    j["acc_known"] = *report.acc_known;
    j["acc_unknown"] = *report.acc_unknown;
    j["h_score"] = *report.h_score;
  }
  return j;
}

}  // namespace colearn
