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

#include "colearn/adaptation_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "colearn/error.hpp"

namespace colearn {

namespace {

constexpr double kLogFloor = 1e-12;

template <typename Derived>
bool same_bits(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.derived().data(), b.derived().data(),
                     static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

template <typename Derived>
bool finite(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 || m.allFinite();
}

void check_labels(std::span<const std::int32_t> labels, int n_rows, int n_classes) {
  if (labels.empty()) throw Error(ErrorCode::EmptyBatch, "no pseudolabeled samples in batch");
  if (static_cast<int>(labels.size()) != n_rows) {
    throw Error(ErrorCode::DimensionMismatch, "label count does not match batch rows");
  }
  for (auto l : labels) {
    if (l < 0 || l >= n_classes) {
      throw Error(ErrorCode::LabelOutOfRange, "batch label " + std::to_string(l));
    }
  }
}

struct Activations {
  Matrix z;       // after affine map
  Matrix hidden;  // tanh output, depth 2 only
  Matrix logits;
};

Activations run_forward(const AdaptationModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input width " + std::to_string(x.cols()) +
                                                  " does not match model width " +
                                                  std::to_string(model.input_dim()));
  }
  Activations a;
  a.z = (x * model.theta.weight.transpose()).rowwise() + model.theta.bias.transpose();
  if (model.depth() == 2) {
    a.hidden = ((a.z * model.theta.hidden_weight.transpose()).rowwise() +
                model.theta.hidden_bias.transpose())
                   .array()
                   .tanh()
                   .matrix();
    a.logits = (a.hidden * model.psi.weight.transpose()).rowwise() + model.psi.bias.transpose();
  } else {
    a.logits = (a.z * model.psi.weight.transpose()).rowwise() + model.psi.bias.transpose();
  }
  return a;
}

std::string describe_batch(const Matrix& x, std::span<const std::int32_t> labels, double lr) {
  return "batch rows=" + std::to_string(x.rows()) + " labels=" + std::to_string(labels.size()) +
         " max|x|=" + std::to_string(x.size() ? x.cwiseAbs().maxCoeff() : 0.0) +
         " lr=" + std::to_string(lr);
}

}  // namespace

AdaptationModel AdaptationModel::initialize(int input_dim, int n_classes, int depth, int hidden_dim,
                                            std::uint64_t seed) {
  if (input_dim < 1 || n_classes < 1) throw Error(ErrorCode::InvalidArgument, "model dims must be >= 1");
  if (depth != 1 && depth != 2) throw Error(ErrorCode::InvalidArgument, "model depth must be 1 or 2");
  if (depth == 2 && hidden_dim < 1) throw Error(ErrorCode::InvalidArgument, "hidden width must be >= 1");

  std::mt19937_64 rng = make_rng(seed, RngStream::ModelInit);
  AdaptationModel m;
  m.theta.weight = Matrix::Identity(input_dim, input_dim);
  m.theta.bias = Vector::Zero(input_dim);
  int classifier_in = input_dim;
  if (depth == 2) {
    std::normal_distribution<double> hidden_init(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    m.theta.hidden_weight = Matrix::NullaryExpr(hidden_dim, input_dim, [&] { return hidden_init(rng); });
    m.theta.hidden_bias = Vector::Zero(hidden_dim);
    classifier_in = hidden_dim;
  }
  std::normal_distribution<double> clf_init(0.0, 0.1);
  m.psi.weight = Matrix::NullaryExpr(n_classes, classifier_in, [&] { return clf_init(rng); });
  m.psi.bias = Vector::Zero(n_classes);
  return m;
}

void AdaptationModel::validate_shapes() const {
  const auto d = theta.weight.rows();
  bool ok = theta.weight.cols() == d && theta.bias.size() == d;
  Eigen::Index clf_in = d;
  if (theta.hidden_weight.size() != 0) {
    ok = ok && theta.hidden_weight.cols() == d && theta.hidden_bias.size() == theta.hidden_weight.rows();
    clf_in = theta.hidden_weight.rows();
  } else {
    ok = ok && theta.hidden_bias.size() == 0;
  }
  ok = ok && psi.weight.cols() == clf_in && psi.bias.size() == psi.weight.rows() && psi.weight.rows() > 0;
  if (!ok || d == 0) throw Error(ErrorCode::InvalidArgument, "inconsistent model parameter shapes");
}

bool AdaptationModel::all_finite() const {
  return finite(theta.weight) && finite(theta.bias) && finite(theta.hidden_weight) &&
         finite(theta.hidden_bias) && finite(psi.weight) && finite(psi.bias);
}

bool bitwise_equal(const AdaptationModel& a, const AdaptationModel& b) {
  return a.frozen_classifier == b.frozen_classifier && same_bits(a.theta.weight, b.theta.weight) &&
         same_bits(a.theta.bias, b.theta.bias) && same_bits(a.theta.hidden_weight, b.theta.hidden_weight) &&
         same_bits(a.theta.hidden_bias, b.theta.hidden_bias) && same_bits(a.psi.weight, b.psi.weight) &&
         same_bits(a.psi.bias, b.psi.bias);
}

Matrix forward_logits(const AdaptationModel& model, const Matrix& features) {
  return run_forward(model, features).logits;
}

ForwardResult forward(const AdaptationModel& model, const Matrix& features) {
  Matrix logits = forward_logits(model, features);
  ProbMatrix probs = softmax_with_temperature(logits, 1.0);
  return {std::move(logits), std::move(probs)};
}

double colearning_loss(const ProbMatrix& probs, std::span<const std::int32_t> labels) {
  check_labels(labels, probs.rows(), probs.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total -= std::log(std::max(probs(static_cast<int>(i), labels[i]), kLogFloor));
  }
  return total / static_cast<double>(labels.size());
}

double temperature_loss(const Matrix& logits, std::span<const std::int32_t> labels, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "loss temperature must be positive");
  return colearning_loss(softmax_with_temperature(logits, tau), labels);
}

LossAndGradients loss_and_gradients(const AdaptationModel& model, const Matrix& batch_features,
                                    std::span<const std::int32_t> labels) {
  const Activations act = run_forward(model, batch_features);
  const ProbMatrix probs = softmax_with_temperature(act.logits, 1.0);
  check_labels(labels, probs.rows(), probs.cols());

  LossAndGradients out;
  out.loss = colearning_loss(probs, labels);

  // d(mean CE)/d logits = (p - onehot) / B
  const double inv_b = 1.0 / static_cast<double>(labels.size());
  Matrix d_logits = probs.values();
  for (std::size_t i = 0; i < labels.size(); ++i) d_logits(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
  d_logits *= inv_b;

  const Matrix& clf_input = model.depth() == 2 ? act.hidden : act.z;
  out.grads.psi.weight = d_logits.transpose() * clf_input;
  out.grads.psi.bias = d_logits.colwise().sum().transpose();

  Matrix d_z;
  if (model.depth() == 2) {
    const Matrix d_hidden = d_logits * model.psi.weight;
    const Matrix d_pre = d_hidden.cwiseProduct((1.0 - act.hidden.array().square()).matrix());
    out.grads.theta.hidden_weight = d_pre.transpose() * act.z;
    out.grads.theta.hidden_bias = d_pre.colwise().sum().transpose();
    d_z = d_pre * model.theta.hidden_weight;
  } else {
    d_z = d_logits * model.psi.weight;
  }
  out.grads.theta.weight = d_z.transpose() * batch_features;
  out.grads.theta.bias = d_z.colwise().sum().transpose();
  return out;
}

AdaptationModel backward_and_step(const AdaptationModel& model, const Matrix& batch_features,
                                  std::span<const std::int32_t> labels, double lr) {
  return sgd_step(model, batch_features, labels, lr).model;
}

StepResult sgd_step(const AdaptationModel& model, const Matrix& batch_features,
                    std::span<const std::int32_t> labels, double lr) {
  const LossAndGradients lg = loss_and_gradients(model, batch_features, labels);
  const Gradients& g = lg.grads;
  const bool finite_grads = finite(g.theta.weight) && finite(g.theta.bias) &&
                            finite(g.theta.hidden_weight) && finite(g.theta.hidden_bias) &&
                            (model.frozen_classifier || (finite(g.psi.weight) && finite(g.psi.bias)));
  if (!finite_grads || !std::isfinite(lg.loss)) {
    throw Error(ErrorCode::NumericalBlowup,
                "non-finite gradient; " + describe_batch(batch_features, labels, lr));
  }
  if (lr == 0.0) return {model, lg.loss};

  AdaptationModel next = model;
  next.theta.weight -= lr * g.theta.weight;
  next.theta.bias -= lr * g.theta.bias;
  if (model.depth() == 2) {
    next.theta.hidden_weight -= lr * g.theta.hidden_weight;
    next.theta.hidden_bias -= lr * g.theta.hidden_bias;
  }
  if (!model.frozen_classifier) {
    next.psi.weight -= lr * g.psi.weight;
    next.psi.bias -= lr * g.psi.bias;
  }
  if (!next.all_finite()) {
    throw Error(ErrorCode::NumericalBlowup,
                "parameters became non-finite; " + describe_batch(batch_features, labels, lr));
  }
  return {std::move(next), lg.loss};
}

namespace {

void put_matrix(detail::ByteWriter& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.put_f32(static_cast<float>(m(i, j)));
}

void put_vector(detail::ByteWriter& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out.put_f32(static_cast<float>(v(i)));
}

void get_matrix(detail::ByteReader& in, Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  m.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      float v = 0.0f;
      if (!in.get_f32(v)) throw Error(ErrorCode::Truncated, "model file ends inside the parameters");
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite model parameter");
      m(i, j) = v;
    }
  }
}

void get_vector(detail::ByteReader& in, Vector& v, Eigen::Index n) {
  Matrix tmp;
  get_matrix(in, tmp, n, 1);
  v = tmp.col(0);
}

}  // namespace

void save_model(const AdaptationModel& model, const std::filesystem::path& path) {
  model.validate_shapes();
  detail::ByteWriter out;
  out.put_bytes(kModelMagic, 4);
  out.put_u32(kModelVersion);
  out.put_u32(static_cast<std::uint32_t>(model.depth()));
  out.put_u32(static_cast<std::uint32_t>(model.input_dim()));
  out.put_u32(static_cast<std::uint32_t>(model.hidden_dim()));
  out.put_u32(static_cast<std::uint32_t>(model.num_classes()));
  out.put_u8(model.frozen_classifier ? 1 : 0);
  put_matrix(out, model.theta.weight);
  put_vector(out, model.theta.bias);
  if (model.depth() == 2) {
    put_matrix(out, model.theta.hidden_weight);
    put_vector(out, model.theta.hidden_bias);
  }
  put_matrix(out, model.psi.weight);
  put_vector(out, model.psi.bias);
  detail::write_file(path, out.bytes());
}

AdaptationModel load_model(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < 4) throw Error(ErrorCode::Truncated, "file shorter than magic: " + path.string());
  if (!std::equal(kModelMagic, kModelMagic + 4, bytes.begin())) {
    throw Error(ErrorCode::BadMagic, "not a CLMD model file: " + path.string());
  }
  detail::ByteReader in(bytes);
  char magic[4];
  in.get_bytes(magic, 4);
  std::uint32_t version = 0, depth = 0, d = 0, h = 0, l = 0;
  std::uint8_t frozen = 0;
  if (!in.get_u32(version)) throw Error(ErrorCode::Truncated, "model header truncated");
  if (version != kModelVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "CLMD version " + std::to_string(version));
  }
  if (!in.get_u32(depth) || !in.get_u32(d) || !in.get_u32(h) || !in.get_u32(l) || !in.get_u8(frozen)) {
    throw Error(ErrorCode::Truncated, "model header truncated");
  }
  if ((depth != 1 && depth != 2) || d == 0 || l == 0 || (depth == 2) != (h != 0) || frozen > 1) {
    throw Error(ErrorCode::MalformedFile, "inconsistent model header");
  }
  const std::uint64_t clf_in = depth == 2 ? h : d;
  std::uint64_t n_params = std::uint64_t{d} * d + d + std::uint64_t{l} * clf_in + l;
  if (depth == 2) n_params += std::uint64_t{h} * d + h;
  if (in.remaining() < n_params * 4) throw Error(ErrorCode::Truncated, "model parameters truncated");
  if (in.remaining() > n_params * 4) throw Error(ErrorCode::TrailingData, "bytes after model parameters");

  AdaptationModel m;
  m.frozen_classifier = frozen == 1;
  get_matrix(in, m.theta.weight, d, d);
  get_vector(in, m.theta.bias, d);
  if (depth == 2) {
    get_matrix(in, m.theta.hidden_weight, h, d);
    get_vector(in, m.theta.hidden_bias, h);
  }
  get_matrix(in, m.psi.weight, l, static_cast<Eigen::Index>(clf_in));
  get_vector(in, m.psi.bias, l);
  return m;
}

AdaptationModel round_to_storage_precision(const AdaptationModel& model) {
  auto round = [](auto& m) { m = m.template cast<float>().template cast<double>(); };
  AdaptationModel out = model;
  round(out.theta.weight);
  round(out.theta.bias);
  round(out.theta.hidden_weight);
  round(out.theta.hidden_bias);
  round(out.psi.weight);
  round(out.psi.bias);
  return out;
}

}  // namespace colearn
