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

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace colearn {

/// Working precision for all classifier and training math.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Storage precision for embedding banks (matches the on-disk float32 rows).
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using LabelVector = std::vector<std::int32_t>;

/// Sentinel for "no label" in banks and prediction vectors.
inline constexpr std::int32_t kUnlabeled = -1;

/// Index of the largest entry; ties go to the lowest index.
template <typename Row>
int argmax(const Row& row) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(row.size()); ++j) {
    if (row(j) > row(best)) best = j;
  }
  return best;
}

/// Named random streams derived from one user seed. Each consumer draws from
/// its own engine.
enum class RngStream : std::uint32_t { Generator = 1, ModelInit, SourceShuffle, EngineShuffle, ShotDraws };

inline std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace colearn
