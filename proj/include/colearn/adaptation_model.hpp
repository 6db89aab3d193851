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

// The trainable branch: a small feature map followed by a linear classifier.
//
//   depth 1:  z = W x + b                        logits = Psi z + c
//   depth 2:  z = W x + b,  h = tanh(V z + v)    logits = Psi h + c
//
// During co-learning the classifier (Psi, c) is frozen and only the feature
// map is updated. Loss is the mean cross-entropy over pseudolabeled samples.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "colearn/classifier_branch.hpp"
#include "colearn/types.hpp"

namespace colearn {

struct FeatureMap {
  Matrix weight;         // D x D
  Vector bias;           // D
  Matrix hidden_weight;  // H x D, empty for depth 1
  Vector hidden_bias;    // H, empty for depth 1
};

struct LinearClassifier {
  Matrix weight;  // L x D (depth 1) or L x H (depth 2)
  Vector bias;    // L
};

struct AdaptationModel {
  FeatureMap theta;
  LinearClassifier psi;
  bool frozen_classifier = false;

  int depth() const { return theta.hidden_weight.size() == 0 ? 1 : 2; }
  int input_dim() const { return static_cast<int>(theta.weight.cols()); }
  int hidden_dim() const { return depth() == 2 ? static_cast<int>(theta.hidden_weight.rows()) : 0; }
  int num_classes() const { return static_cast<int>(psi.weight.rows()); }

  /// Identity feature map (plus a seeded random hidden layer for depth 2)
  /// and a small seeded random classifier.
  static AdaptationModel initialize(int input_dim, int n_classes, int depth, int hidden_dim,
                                    std::uint64_t seed);

  /// Throws InvalidArgument when parameter shapes disagree.
  void validate_shapes() const;
  bool all_finite() const;
};

/// Exact comparison of every parameter byte and the freeze flag.
bool bitwise_equal(const AdaptationModel& a, const AdaptationModel& b);

/// Same layout as the trainable parameters of a model; classifier parts are
/// filled even when frozen so they can be checked.
struct Gradients {
  FeatureMap theta;
  LinearClassifier psi;
};

struct ForwardResult {
  Matrix logits;
  ProbMatrix probs;
};

/// Softmax at T = 1 on top of the classifier logits.
ForwardResult forward(const AdaptationModel& model, const Matrix& features);
Matrix forward_logits(const AdaptationModel& model, const Matrix& features);

/// Mean of -log p(label) over rows, with p floored at 1e-12.
/// Throws EmptyBatch when `labels` is empty.
double colearning_loss(const ProbMatrix& probs, std::span<const std::int32_t> labels);

/// Cross-entropy on softmax(logits / tau). tau = 1 reduces to
/// colearning_loss on the T = 1 probabilities.
double temperature_loss(const Matrix& logits, std::span<const std::int32_t> labels, double tau);

/// Weight applied when the co-learning loss is added to another method's
/// objective.
inline constexpr double kAuxiliaryLossWeight = 0.3;
/// Temperature of the auxiliary loss used for open/partial-set methods.
inline constexpr double kAuxiliaryLossTemperature = 0.1;

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Loss and analytic gradients for all parameters on one batch, where row i
/// of `batch_features` carries `labels[i]`.
LossAndGradients loss_and_gradients(const AdaptationModel& model, const Matrix& batch_features,
                                    std::span<const std::int32_t> labels);

/// One SGD step. Only the feature map moves when `model.frozen_classifier`.
/// Throws NumericalBlowup if any gradient entry is non-finite.
AdaptationModel backward_and_step(const AdaptationModel& model, const Matrix& batch_features,
                                  std::span<const std::int32_t> labels, double lr);

struct StepResult {
  AdaptationModel model;
  double loss_before = 0.0;  // batch loss at the pre-step parameters
};

/// backward_and_step that also reports the batch loss it differentiated.
StepResult sgd_step(const AdaptationModel& model, const Matrix& batch_features,
                    std::span<const std::int32_t> labels, double lr);

/// SGD learning-rate schedule measured in episodes.
struct SgdSchedule {
  double lr_initial = 0.01;
  double lr_after_decay = 0.001;
  int decay_episode = 10;
  int batch_size = 50;
  int episodes = 15;

  /// `episode` is 0-based; the first `decay_episode` episodes use lr_initial.
  double lr_for_episode(int episode) const {
    return episode < decay_episode ? lr_initial : lr_after_decay;
  }
};

/// CLMD binary layout, little-endian:
///   "CLMD" | u32 version=1 | u32 depth | u32 D | u32 H (0 for depth 1) |
///   u32 L | u8 frozen_classifier | float32 parameters in the order
///   W, b, [V, v], Psi, c  (matrices row-major)
inline constexpr char kModelMagic[4] = {'C', 'L', 'M', 'D'};
inline constexpr std::uint32_t kModelVersion = 1;

void save_model(const AdaptationModel& model, const std::filesystem::path& path);
AdaptationModel load_model(const std::filesystem::path& path);

/// Rounds every parameter to float32, the on-disk precision.
AdaptationModel round_to_storage_precision(const AdaptationModel& model);

}  // namespace colearn
