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

#include <algorithm>
#include <random>
#include <vector>

#include "colearn/adaptation_model.hpp"

namespace colearn::detail {

struct PassResult {
  AdaptationModel model;
  double mean_loss = 0.0;
};

/// One shuffled pass over (rows[i], labels[i]) in mini-batches; the last
/// partial batch is kept.
inline PassResult sgd_pass(AdaptationModel model, const Matrix& features, const std::vector<int>& rows,
                           const std::vector<std::int32_t>& labels, int batch_size, double lr,
                           std::mt19937_64& rng) {
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  double loss_sum = 0.0;
  int n_batches = 0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    Matrix batch(static_cast<Eigen::Index>(end - start), features.cols());
    std::vector<std::int32_t> batch_labels(end - start);
    for (std::size_t k = start; k < end; ++k) {
      batch.row(static_cast<Eigen::Index>(k - start)) = features.row(rows[order[k]]);
      batch_labels[k - start] = labels[order[k]];
    }
    StepResult step = sgd_step(model, batch, batch_labels, lr);
    loss_sum += step.loss_before;
    model = std::move(step.model);
    ++n_batches;
  }
  return {std::move(model), n_batches ? loss_sum / n_batches : 0.0};
}

}  // namespace colearn::detail
