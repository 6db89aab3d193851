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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "colearn/types.hpp"

namespace colearn {

/// A frozen matrix of per-sample embeddings plus optional labels.
///
/// Rows are samples. Labels, when present, are class indices into
/// `class_names` or `kUnlabeled`. Source banks are labeled; target banks may
/// carry ground truth for evaluation only.
struct FeatureBank {
  FeatureMatrix features;
  std::optional<LabelVector> labels;
  std::vector<std::string> class_names;
  std::string domain_name;

  int num_samples() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  int num_classes() const { return static_cast<int>(class_names.size()); }

  /// Features promoted to working precision.
  Matrix features_as_double() const { return features.cast<double>(); }

  /// Throws colearn::Error on the first violated invariant.
  void validate() const;

  bool operator==(const FeatureBank&) const = default;
};

/// Binary layout, all little-endian:
///   "FBNK" | u32 version=1 | u32 N | u32 D | u8 has_labels |
///   N*D float32 row-major | (N int32 labels if has_labels)
/// Class names and domain name live in `<path>.meta.json`.
inline constexpr char kBankMagic[4] = {'F', 'B', 'N', 'K'};
inline constexpr std::uint32_t kBankVersion = 1;

/// Loads an FBANK file, or a CSV file when `path` ends in ".csv".
///
/// When the sidecar is absent, class names default to "0".."L-1" with L one
/// past the largest label seen (or 0 for unlabeled banks).
FeatureBank load_bank(const std::filesystem::path& path);

/// Writes the FBANK file and its `.meta.json` sidecar. Validates first.
void save_bank(const FeatureBank& bank, const std::filesystem::path& path);

/// CSV alternative: header `d0,...,dK[,label]`, one sample per line.
FeatureBank load_bank_csv(const std::filesystem::path& path);
void save_bank_csv(const FeatureBank& bank, const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& bank_path);

/// Per-row L2 normalization; rows with norm below 1e-12 become zero rows.
Matrix l2_normalize_rows(const Matrix& features);

inline constexpr double kNormEpsilon = 1e-12;

}  // namespace colearn
