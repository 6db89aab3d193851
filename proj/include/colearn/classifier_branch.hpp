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

// Centroid classifiers on top of a frozen feature bank.
//
// The pre-trained branch never trains its feature extractor. Its classifier
// is a nearest-centroid head in cosine geometry whose centroids are
// probability-weighted means of L2-normalized features:
//
//   mu_i  = sum_x w(x)[i] * f(x)/|f(x)|  /  sum_x w(x)[i]
//   g(x)[i] = cos(f(x), mu_i)
//   p(x)  = softmax(g(x) / T)
//
// With w = p_a this is the plain weighted head. With w = p_a .* p_zs (the
// adaptation-branch probabilities times zero-shot text probabilities) it is
// the fused head, whose logits blend in the zero-shot logits:
//
//   g++(x) = alpha * cos(f(x), mu++_i) + (1 - alpha) * g_zs(x) / T_zs
//
// Zero-shot centroids are means of normalized text-template embeddings and
// are deliberately not renormalized.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "colearn/types.hpp"

namespace colearn {

/// Default sharpening temperature for cosine logits bounded in [-1, 1].
inline constexpr double kCentroidTemperature = 0.01;
/// Zero-shot temperature used by weak guidance.
inline constexpr double kWeakZeroShotTemperature = 0.05;
inline constexpr double kWeakAlpha = 1.0;
inline constexpr double kStrongAlpha = 0.5;
/// Classes with less total weight than this have no usable centroid.
inline constexpr double kMassEpsilon = 1e-8;
/// Row-sum tolerance for probability matrices.
inline constexpr double kProbTolerance = 1e-6;

/// Row-stochastic N x L matrix. Rows sum to 1 within kProbTolerance.
class ProbMatrix {
 public:
  ProbMatrix() = default;

  /// Throws InvalidArgument if `p` is not row-stochastic.
  static ProbMatrix from_matrix(Matrix p);
  /// One-hot rows from class indices in [0, n_classes).
  static ProbMatrix one_hot(std::span<const std::int32_t> labels, int n_classes);
  /// Every row equal to 1/n_classes.
  static ProbMatrix uniform(int n_rows, int n_classes);

  const Matrix& values() const { return p_; }
  int rows() const { return static_cast<int>(p_.rows()); }
  int cols() const { return static_cast<int>(p_.cols()); }
  double operator()(int i, int j) const { return p_(i, j); }

  /// Argmax of row i, lowest index on ties.
  int prediction(int i) const { return argmax(p_.row(i)); }
  /// Max probability of row i.
  double confidence(int i) const { return p_.row(i).maxCoeff(); }
  LabelVector predictions() const;

 private:
  explicit ProbMatrix(Matrix p) : p_(std::move(p)) {}
  friend ProbMatrix softmax_with_temperature(const Matrix& logits, double temperature);

  Matrix p_;
};

struct Centroids {
  Matrix mu;                 // L x D
  Vector mass;               // total weight per class
  std::vector<bool> valid;   // false iff mass < kMassEpsilon

  int num_classes() const { return static_cast<int>(mu.rows()); }
  int dim() const { return static_cast<int>(mu.cols()); }
};

enum class GuidanceKind { Weak, Strong };

/// How strongly zero-shot logits steer the fused head.
struct GuidanceMode {
  GuidanceKind kind = GuidanceKind::Weak;
  double alpha = kWeakAlpha;
  /// Zero-shot temperature. Empty means "auto" (std-ratio rule) and must be
  /// resolved with resolve_strong_t_tilde before computing fused logits.
  std::optional<double> t_tilde = kWeakZeroShotTemperature;

  static GuidanceMode weak() { return {GuidanceKind::Weak, kWeakAlpha, kWeakZeroShotTemperature}; }
  static GuidanceMode strong() { return {GuidanceKind::Strong, kStrongAlpha, std::nullopt}; }

  bool resolved() const { return t_tilde.has_value(); }
  GuidanceMode with_t_tilde(double t) const {
    GuidanceMode m = *this;
    m.t_tilde = t;
    return m;
  }
};

/// Weighted nearest-centroid fit. `features` are raw; rows are normalized
/// internally. Invalid classes get the global mean of normalized features.
Centroids weighted_centroids(const Matrix& features, const ProbMatrix& weights);

/// Same as weighted_centroids but accepts arbitrary non-negative weights
/// (rows need not sum to one).
Centroids weighted_centroids_unnormalized(const Matrix& features, const Matrix& weights);

/// Cosine similarity to every centroid. Invalid classes score -1; zero-norm
/// feature rows score 0 everywhere; zero-norm valid centroids score 0.
Matrix cosine_logits(const Matrix& features, const Centroids& centroids);

/// Row-wise softmax of logits / temperature with max subtraction.
ProbMatrix softmax_with_temperature(const Matrix& logits, double temperature);

/// Per-class mean of normalized template embeddings. Not renormalized.
Centroids zero_shot_centroids(std::span<const Matrix> templates_per_class);

Matrix zero_shot_logits(const Matrix& features, const Centroids& zs_centroids);
ProbMatrix zero_shot_probs(const Matrix& features, const Centroids& zs_centroids, double t_tilde);

/// Centroids weighted by p_a .* p_zs (elementwise, rows not renormalized).
Centroids fused_centroids(const Matrix& features, const ProbMatrix& p_a, const ProbMatrix& p_zs);

/// Blended logits; `mode` must be resolved.
Matrix fused_logits(const Matrix& features, const Centroids& fused, const Matrix& g_zs,
                    const GuidanceMode& mode);

/// Blend of precomputed cosine logits with zero-shot logits.
Matrix blend_logits(const Matrix& g_cos, const Matrix& g_zs, const GuidanceMode& mode);

/// std(all entries of g_zs) / std(all entries of g_cos), population std.
/// Throws DegenerateLogits when either is below 1e-12.
double resolve_strong_t_tilde(const Matrix& g_zs, const Matrix& g_cos);

/// Population standard deviation over every entry.
double population_std(const Matrix& m);

}  // namespace colearn
