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

#include "colearn/classifier_branch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "colearn/error.hpp"
#include "colearn/feature_bank.hpp"

namespace colearn {

namespace {

void require_same_rows(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": row counts differ (" + std::to_string(a.rows()) + " vs " +
                    std::to_string(b.rows()) + ")");
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": shapes differ");
  }
}

}  // namespace

ProbMatrix ProbMatrix::from_matrix(Matrix p) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double v = p(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "probability outside [0,1] in row " + std::to_string(i));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kProbTolerance) {
      throw Error(ErrorCode::InvalidArgument, "row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
  return ProbMatrix(std::move(p));
}

ProbMatrix ProbMatrix::one_hot(std::span<const std::int32_t> labels, int n_classes) {
  Matrix p = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw Error(ErrorCode::LabelOutOfRange, "one-hot label " + std::to_string(labels[i]));
    }
    p(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return ProbMatrix(std::move(p));
}

ProbMatrix ProbMatrix::uniform(int n_rows, int n_classes) {
  return ProbMatrix(Matrix::Constant(n_rows, n_classes, 1.0 / n_classes));
}

LabelVector ProbMatrix::predictions() const {
  LabelVector out(static_cast<std::size_t>(p_.rows()));
  for (Eigen::Index i = 0; i < p_.rows(); ++i) out[i] = argmax(p_.row(i));
  return out;
}

Centroids weighted_centroids(const Matrix& features, const ProbMatrix& weights) {
  return weighted_centroids_unnormalized(features, weights.values());
}

Centroids weighted_centroids_unnormalized(const Matrix& features, const Matrix& weights) {
  require_same_rows(features, weights, "weighted_centroids");
  if (features.rows() == 0) throw Error(ErrorCode::InvalidArgument, "weighted_centroids: no samples");

  const Matrix normalized = l2_normalize_rows(features);
  const Eigen::RowVectorXd global_mean = normalized.colwise().mean();

  Centroids c;
  c.mass = weights.colwise().sum().transpose();
  c.mu = weights.transpose() * normalized;
  c.valid.assign(static_cast<std::size_t>(weights.cols()), true);
  for (Eigen::Index i = 0; i < weights.cols(); ++i) {
    if (c.mass(i) < kMassEpsilon) {
      c.valid[i] = false;
      c.mu.row(i) = global_mean;
    } else {
      c.mu.row(i) /= c.mass(i);
    }
  }
  return c;
}

Matrix cosine_logits(const Matrix& features, const Centroids& centroids) {
  if (features.cols() != centroids.mu.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "cosine_logits: feature and centroid widths differ");
  }
  const Matrix x = l2_normalize_rows(features);
  const Matrix mu = l2_normalize_rows(centroids.mu);
  Matrix g = x * mu.transpose();
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    if (x.row(i).isZero(0.0)) {
      g.row(i).setZero();
      continue;
    }
    for (Eigen::Index k = 0; k < g.cols(); ++k) {
      if (!centroids.valid[k]) {
        g(i, k) = -1.0;
      } else {
        g(i, k) = std::clamp(g(i, k), -1.0, 1.0);
      }
    }
  }
  return g;
}

ProbMatrix softmax_with_temperature(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::InvalidArgument, "softmax temperature must be positive");
  }
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double row_max = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      p(i, j) = std::exp((logits(i, j) - row_max) / temperature);
      sum += p(i, j);
    }
    p.row(i) /= sum;
  }
  return ProbMatrix(std::move(p));
}

Centroids zero_shot_centroids(std::span<const Matrix> templates_per_class) {
  if (templates_per_class.empty()) {
    throw Error(ErrorCode::MissingTemplates, "zero_shot_centroids: no classes");
  }
  const Eigen::Index dim = templates_per_class.front().cols();
  Centroids c;
  c.mu.resize(static_cast<Eigen::Index>(templates_per_class.size()), dim);
  c.mass.resize(static_cast<Eigen::Index>(templates_per_class.size()));
  c.valid.assign(templates_per_class.size(), true);
  for (std::size_t i = 0; i < templates_per_class.size(); ++i) {
    const Matrix& t = templates_per_class[i];
    if (t.rows() < 1) {
      throw Error(ErrorCode::MissingTemplates, "class " + std::to_string(i) + " has no templates");
    }
    if (t.cols() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "template widths differ across classes");
    }
    c.mu.row(static_cast<Eigen::Index>(i)) = l2_normalize_rows(t).colwise().mean();
    c.mass(static_cast<Eigen::Index>(i)) = static_cast<double>(t.rows());
  }
  return c;
}

Matrix zero_shot_logits(const Matrix& features, const Centroids& zs_centroids) {
  return cosine_logits(features, zs_centroids);
}

ProbMatrix zero_shot_probs(const Matrix& features, const Centroids& zs_centroids, double t_tilde) {
  return softmax_with_temperature(zero_shot_logits(features, zs_centroids), t_tilde);
}

Centroids fused_centroids(const Matrix& features, const ProbMatrix& p_a, const ProbMatrix& p_zs) {
  require_same_shape(p_a.values(), p_zs.values(), "fused_centroids");
  return weighted_centroids_unnormalized(features, p_a.values().cwiseProduct(p_zs.values()));
}

Matrix blend_logits(const Matrix& g_cos, const Matrix& g_zs, const GuidanceMode& mode) {
  require_same_shape(g_cos, g_zs, "fused_logits");
  if (!mode.resolved()) {
    throw Error(ErrorCode::UnresolvedTemperature, "zero-shot temperature is 'auto' and unresolved");
  }
  const double t_tilde = *mode.t_tilde;
  if (!(t_tilde > 0.0)) throw Error(ErrorCode::InvalidArgument, "zero-shot temperature must be positive");
  // alpha = 1 must not read g_zs at all; alpha = 0 must not read g_cos.
  if (mode.alpha == 1.0) return g_cos;
  const double inv_t = 1.0 / t_tilde;
  if (mode.alpha == 0.0) return g_zs * inv_t;
  return mode.alpha * g_cos + (1.0 - mode.alpha) * inv_t * g_zs;
}

Matrix fused_logits(const Matrix& features, const Centroids& fused, const Matrix& g_zs,
                    const GuidanceMode& mode) {
  if (!mode.resolved()) {
    throw Error(ErrorCode::UnresolvedTemperature, "zero-shot temperature is 'auto' and unresolved");
  }
  return blend_logits(cosine_logits(features, fused), g_zs, mode);
}

double population_std(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const double mean = m.mean();
  return std::sqrt((m.array() - mean).square().mean());
}

double resolve_strong_t_tilde(const Matrix& g_zs, const Matrix& g_cos) {
  const double s_zs = population_std(g_zs);
  const double s_cos = population_std(g_cos);
  if (s_zs < 1e-12 || s_cos < 1e-12) {
    throw Error(ErrorCode::DegenerateLogits, "cannot balance near-constant logits (std " +
                                                 std::to_string(s_zs) + " / " + std::to_string(s_cos) + ")");
  }
  return s_zs / s_cos;
}

}  // namespace colearn
