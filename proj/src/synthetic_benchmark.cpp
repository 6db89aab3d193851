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

#include "colearn/synthetic_benchmark.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "binary_io.hpp"
#include "colearn/error.hpp"
#include "sgd_pass.hpp"

namespace colearn {

namespace {

constexpr std::array<std::string_view, 4> kScenarioNames = {"closed", "open", "partial", "open-partial"};

std::vector<int> iota_range(int begin, int end) {
  std::vector<int> v;
  for (int i = begin; i < end; ++i) v.push_back(i);
  return v;
}

std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out = a;
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Rotation by `angle` in the planes (q0,q1), (q2,q3), ... of basis Q.
Matrix plane_rotation(const Matrix& basis, double angle) {
  const auto d = basis.rows();
  Matrix givens = Matrix::Identity(d, d);
  const double c = std::cos(angle), s = std::sin(angle);
  for (Eigen::Index k = 0; k + 1 < d; k += 2) {
    givens(k, k) = c;
    givens(k, k + 1) = -s;
    givens(k + 1, k) = s;
    givens(k + 1, k + 1) = c;
  }
  return basis * givens * basis.transpose();
}

std::vector<std::string> class_names_for(int n_classes) {
  std::vector<std::string> names;
  char buf[32];
  for (int i = 0; i < n_classes; ++i) {
    std::snprintf(buf, sizeof(buf), "class_%03d", i);
    names.emplace_back(buf);
  }
  return names;
}

FeatureBank make_bank(const Matrix& x, LabelVector labels, int n_classes, std::string domain) {
  FeatureBank bank;
  bank.features = x.cast<float>();
  bank.labels = std::move(labels);
  bank.class_names = class_names_for(n_classes);
  bank.domain_name = std::move(domain);
  return bank;
}

}  // namespace

std::string_view to_string(Scenario scenario) { return kScenarioNames[static_cast<int>(scenario)]; }

std::optional<Scenario> parse_scenario(std::string_view text) {
  for (std::size_t i = 0; i < kScenarioNames.size(); ++i) {
    if (text == kScenarioNames[i]) return static_cast<Scenario>(i);
  }
  if (text == "closed-set") return Scenario::ClosedSet;
  if (text == "open-set") return Scenario::OpenSet;
  if (text == "partial-set") return Scenario::PartialSet;
  return std::nullopt;
}

std::vector<int> LabelSplit::source_classes() const { return sorted_union(shared, source_private); }
std::vector<int> LabelSplit::target_classes() const { return sorted_union(shared, target_private); }

LabelSplit default_split(Scenario scenario, int n_classes) {
  auto scaled = [n_classes](int count_of_65) {
    return std::max(1, static_cast<int>(std::lround(n_classes * count_of_65 / 65.0)));
  };
  LabelSplit s;
  switch (scenario) {
    case Scenario::ClosedSet:
      s.shared = iota_range(0, n_classes);
      break;
    case Scenario::OpenSet: {
      const int n_private = std::min(scaled(25), n_classes - 1);
      s.target_private = iota_range(0, n_private);
      s.shared = iota_range(n_private, n_classes);
      break;
    }
    case Scenario::PartialSet: {
      const int n_shared = std::min(scaled(25), n_classes - 1);
      s.shared = iota_range(0, n_shared);
      s.source_private = iota_range(n_shared, n_classes);
      break;
    }
    case Scenario::OpenPartial: {
      if (n_classes < 3) throw Error(ErrorCode::ImpossibleSplit, "open-partial needs at least 3 classes");
      const int n_shared = std::min(scaled(10), n_classes - 2);
      const int n_src = std::min(scaled(5), n_classes - n_shared - 1);
      s.shared = iota_range(0, n_shared);
      s.source_private = iota_range(n_shared, n_shared + n_src);
      s.target_private = iota_range(n_shared + n_src, n_classes);
      break;
    }
  }
  return s;
}

LabelSplit ShiftSpec::resolved_split() const { return split ? *split : default_split(scenario, n_classes); }

void ShiftSpec::validate() const {
  if (n_classes < 2 || dim < 1 || n_source < 1 || n_target < 1 || templates_per_class < 1) {
    throw Error(ErrorCode::InvalidArgument, "shift spec sizes must be positive (n_classes >= 2)");
  }
  if (!(noise_sigma >= 0.0) || !(class_separation > 0.0) || !(template_noise >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "shift spec scales must be non-negative");
  }
  const LabelSplit s = resolved_split();
  std::set<int> seen;
  for (const auto* part : {&s.shared, &s.source_private, &s.target_private}) {
    for (int c : *part) {
      if (c < 0 || c >= n_classes || !seen.insert(c).second) {
        throw Error(ErrorCode::ImpossibleSplit, "label split must partition [0, n_classes)");
      }
    }
  }
  if (static_cast<int>(seen.size()) != n_classes) {
    throw Error(ErrorCode::ImpossibleSplit, "label split must cover every class");
  }
  if (s.shared.empty()) throw Error(ErrorCode::ImpossibleSplit, "at least one shared class is required");
  const bool src_priv = !s.source_private.empty(), tgt_priv = !s.target_private.empty();
  const bool ok = (scenario == Scenario::ClosedSet && !src_priv && !tgt_priv) ||
                  (scenario == Scenario::OpenSet && !src_priv && tgt_priv) ||
                  (scenario == Scenario::PartialSet && src_priv && !tgt_priv) ||
                  (scenario == Scenario::OpenPartial && src_priv && tgt_priv);
  if (!ok) {
    throw Error(ErrorCode::ImpossibleSplit,
                "label split inconsistent with scenario '" + std::string(to_string(scenario)) + "'");
  }
}

nlohmann::json to_json(const ShiftSpec& spec) {
  const LabelSplit s = spec.resolved_split();
  return {
      {"n_classes", spec.n_classes},
      {"dim", spec.dim},
      {"n_source", spec.n_source},
      {"n_target", spec.n_target},
      {"class_separation", spec.class_separation},
      {"rotation_angle", spec.rotation_angle},
      {"mean_translation", spec.mean_translation},
      {"noise_sigma", spec.noise_sigma},
      {"pretrained_shift_fraction", spec.pretrained_shift_fraction},
      {"templates_per_class", spec.templates_per_class},
      {"template_noise", spec.template_noise},
      {"scenario", std::string(to_string(spec.scenario))},
      {"split", {{"shared", s.shared}, {"source_private", s.source_private}, {"target_private", s.target_private}}},
      {"seed", spec.seed},
  };
}

ShiftSpec shift_spec_from_json(const nlohmann::json& j) {
  ShiftSpec spec;
  try {
    spec.n_classes = j.value("n_classes", spec.n_classes);
    spec.dim = j.value("dim", spec.dim);
    spec.n_source = j.value("n_source", spec.n_source);
    spec.n_target = j.value("n_target", spec.n_target);
    spec.class_separation = j.value("class_separation", spec.class_separation);
    spec.rotation_angle = j.value("rotation_angle", spec.rotation_angle);
    spec.mean_translation = j.value("mean_translation", spec.mean_translation);
    spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
    spec.pretrained_shift_fraction = j.value("pretrained_shift_fraction", spec.pretrained_shift_fraction);
    spec.templates_per_class = j.value("templates_per_class", spec.templates_per_class);
    spec.template_noise = j.value("template_noise", spec.template_noise);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("scenario")) {
      auto sc = parse_scenario(j.at("scenario").get<std::string>());
      if (!sc) throw Error(ErrorCode::InvalidArgument, "unknown scenario " + j.at("scenario").dump());
      spec.scenario = *sc;
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      LabelSplit split;
      split.shared = s.value("shared", std::vector<int>{});
      split.source_private = s.value("source_private", std::vector<int>{});
      split.target_private = s.value("target_private", std::vector<int>{});
      spec.split = split;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("bad shift spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SyntheticBenchmark generate(const ShiftSpec& spec) {
  spec.validate();
  std::mt19937_64 rng = make_rng(spec.seed, RngStream::Generator);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto gaussian_matrix = [&](Eigen::Index r, Eigen::Index c) {
    return Matrix::NullaryExpr(r, c, [&] { return gauss(rng); }).eval();
  };

  const int d = spec.dim;
  const int n_cls = spec.n_classes;

  Matrix means = gaussian_matrix(n_cls, d);
  for (int c = 0; c < n_cls; ++c) means.row(c) *= spec.class_separation / means.row(c).norm();

  const Matrix basis = Eigen::HouseholderQR<Matrix>(gaussian_matrix(d, d)).householderQ();
  Vector direction = gaussian_matrix(d, 1).col(0);
  direction /= direction.norm();

  const double frac = spec.pretrained_shift_fraction;
  const Matrix rot_a = plane_rotation(basis, spec.rotation_angle);
  const Matrix rot_star = plane_rotation(basis, frac * spec.rotation_angle);
  const Vector shift_a = spec.mean_translation * direction;
  const Vector shift_star = frac * spec.mean_translation * direction;

  SyntheticBenchmark out;
  out.split = spec.resolved_split();
  const auto src_classes = out.split.source_classes();
  const auto tgt_classes = out.split.target_classes();

  auto sample = [&](const std::vector<int>& classes, int n, LabelVector& labels) {
    Matrix x(n, d);
    labels.resize(n);
    for (int i = 0; i < n; ++i) {
      const int c = classes[static_cast<std::size_t>(i) % classes.size()];
      labels[i] = c;
      x.row(i) = means.row(c) + spec.noise_sigma * gaussian_matrix(1, d);
    }
    return x;
  };

  LabelVector src_labels, tgt_labels;
  const Matrix xs = sample(src_classes, spec.n_source, src_labels);
  const Matrix latent = sample(tgt_classes, spec.n_target, tgt_labels);
  const Matrix xa = (latent * rot_a.transpose()).rowwise() + shift_a.transpose();
  const Matrix xstar = (latent * rot_star.transpose()).rowwise() + shift_star.transpose();

  out.source = make_bank(xs, src_labels, n_cls, "source");
  out.target_a = make_bank(xa, tgt_labels, n_cls, "target/source-view");
  out.target_star = make_bank(xstar, std::move(tgt_labels), n_cls, "target/pretrained-view");

  const Matrix star_means = (means * rot_star.transpose()).rowwise() + shift_star.transpose();
  for (int c = 0; c < n_cls; ++c) {
    Matrix t = gaussian_matrix(spec.templates_per_class, d) * spec.template_noise;
    t.rowwise() += star_means.row(c);
    out.templates.push_back(make_bank(t, LabelVector(spec.templates_per_class, c), n_cls, "templates"));
  }
  return out;
}

std::filesystem::path template_bank_path(const std::filesystem::path& dir, int class_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "class_%03d.fbank", class_index);
  return dir / buf;
}

void write_benchmark(const SyntheticBenchmark& bench, const ShiftSpec& spec,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "templates");
  save_bank(bench.source, dir / "source.fbank");
  save_bank(bench.target_a, dir / "target_a.fbank");
  save_bank(bench.target_star, dir / "target_star.fbank");
  for (std::size_t c = 0; c < bench.templates.size(); ++c) {
    save_bank(bench.templates[c], template_bank_path(dir / "templates", static_cast<int>(c)));
  }
  detail::write_text_file(dir / "spec.json", to_json(spec).dump(2) + "\n");
}

std::vector<FeatureBank> load_template_dir(const std::filesystem::path& dir, int n_classes) {
  std::vector<FeatureBank> banks;
  for (int c = 0; c < n_classes; ++c) {
    const auto path = template_bank_path(dir, c);
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::MissingTemplates, "no template bank for class " + std::to_string(c) +
                                                   " (expected " + path.string() + ")");
    }
    banks.push_back(load_bank(path));
  }
  return banks;
}

double accuracy_on(const AdaptationModel& model, const FeatureBank& bank) {
  if (!bank.labels) throw Error(ErrorCode::InvalidArgument, "accuracy needs a labeled bank");
  const LabelVector pred = forward(model, bank.features_as_double()).probs.predictions();
  int correct = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if ((*bank.labels)[i] == kUnlabeled) continue;
    ++total;
    correct += pred[i] == (*bank.labels)[i];
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

AdaptationModel train_source(const FeatureBank& source, const SourceTrainingOptions& options,
                             std::uint64_t seed) {
  if (!source.labels) throw Error(ErrorCode::InvalidArgument, "source bank must be labeled");
  const auto& sched = options.schedule;
  if (sched.batch_size < 1 || sched.episodes < 0) {
    throw Error(ErrorCode::InvalidArgument, "source schedule needs batch_size >= 1, epochs >= 0");
  }

  std::vector<int> rows;
  std::vector<std::int32_t> labels;
  for (int i = 0; i < source.num_samples(); ++i) {
    if ((*source.labels)[i] == kUnlabeled) continue;
    rows.push_back(i);
    labels.push_back((*source.labels)[i]);
  }
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "source bank has no labeled rows");

  AdaptationModel model =
      AdaptationModel::initialize(source.dim(), source.num_classes(), options.depth, options.hidden_dim, seed);
  const Matrix x = source.features_as_double();
  std::mt19937_64 rng = make_rng(seed, RngStream::SourceShuffle);
  for (int epoch = 0; epoch < sched.episodes; ++epoch) {
    model = detail::sgd_pass(std::move(model), x, rows, labels, sched.batch_size,
                             sched.lr_for_episode(epoch), rng)
                .model;
  }

  const double acc = accuracy_on(model, source);
  if (acc < options.min_accuracy) {
    throw Error(ErrorCode::NonConvergence, "source training reached accuracy " + std::to_string(acc) +
                                               " after " + std::to_string(sched.episodes) +
                                               " epochs (required " +
                                               std::to_string(options.min_accuracy) + ")");
  }
  model.frozen_classifier = true;
  return model;
}

}  // namespace colearn
