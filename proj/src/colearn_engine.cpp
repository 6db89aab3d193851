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

#include "colearn/colearn_engine.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "colearn/error.hpp"
#include "sgd_pass.hpp"

namespace colearn {

namespace {

std::optional<double> accuracy_vs(const LabelVector& pred, const std::optional<LabelVector>& truth) {
  if (!truth) return std::nullopt;
  int total = 0, correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if ((*truth)[i] == kUnlabeled) continue;
    ++total;
    correct += pred[i] == (*truth)[i];
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / total;
}

// Zero-shot state for Co-learn++; computed once per run.
struct ZeroShot {
  GuidanceMode mode;
  Matrix logits;     // g_zs
  ProbMatrix probs;  // p_zs, the centroid weights
};

struct Branch {
  Matrix logits;
  ProbMatrix probs;
  std::optional<double> t_tilde;
};

class PretrainedBranch {
 public:
  PretrainedBranch(Matrix features, std::optional<ZeroShot> zs, double temperature)
      : x_(std::move(features)), zs_(std::move(zs)), temperature_(temperature) {}

  void refit(const ProbMatrix& p_a) {
    centroids_ = zs_ ? fused_centroids(x_, p_a, zs_->probs) : weighted_centroids(x_, p_a);
  }

  Branch predict() const {
    Branch b;
    Matrix g_cos = cosine_logits(x_, centroids_);
    if (!zs_) {
      b.logits = std::move(g_cos);
    } else {
      GuidanceMode mode = zs_->mode;
      if (!mode.resolved()) mode = mode.with_t_tilde(resolve_strong_t_tilde(zs_->logits, g_cos));
      b.t_tilde = mode.t_tilde;
      b.logits = blend_logits(g_cos, zs_->logits, mode);
    }
    b.probs = softmax_with_temperature(b.logits, temperature_);
    return b;
  }

 private:
  Matrix x_;
  std::optional<ZeroShot> zs_;
  double temperature_;
  Centroids centroids_;
};

ColearnResult run_engine(const AdaptationModel& source_model, const FeatureBank& bank_a,
                         const FeatureBank& bank_star, std::optional<ZeroShot> zs, const EngineConfig& cfg,
                         const EpisodeObserver& observer) {
  if (bank_a.num_samples() != bank_star.num_samples()) {
    throw Error(ErrorCode::SampleCountMismatch,
                "adaptation bank has " + std::to_string(bank_a.num_samples()) + " samples, pre-trained bank has " +
                    std::to_string(bank_star.num_samples()));
  }
  source_model.validate_shapes();
  if (source_model.input_dim() != bank_a.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "source model width does not match adaptation bank");
  }

  const Matrix xa = bank_a.features_as_double();
  const std::optional<LabelVector>& truth = bank_a.labels;
  const int n = bank_a.num_samples();

  AdaptationModel model = source_model;
  model.frozen_classifier = true;

  PretrainedBranch branch(bank_star.features_as_double(), std::move(zs), cfg.temperature);
  ProbMatrix p_a = forward(model, xa).probs;
  branch.refit(p_a);

  std::mt19937_64 rng = make_rng(cfg.seed, RngStream::EngineShuffle);
  ColearnResult result;
  for (int ep = 0; ep < cfg.schedule.episodes; ++ep) {
    const Branch star = branch.predict();
    PseudolabelSet labels = build_pseudolabels(p_a, star.probs, cfg.gamma, cfg.scheme);

    if (observer) observer({ep + 1, &star.logits, &p_a, &star.probs, &labels});
    if (labels.empty()) {
      std::ostringstream msg;
      msg << "episode " << ep + 1 << " produced no pseudolabels (gamma=" << cfg.gamma
          << ", scheme=" << to_string(cfg.scheme) << ", max adaptation confidence="
          << p_a.values().rowwise().maxCoeff().maxCoeff()
          << ", max pre-trained confidence=" << star.probs.values().rowwise().maxCoeff().maxCoeff() << ")";
      throw Error(ErrorCode::EmptyPseudolabels, msg.str());
    }

    EpisodeReport report;
    report.episode = ep + 1;
    const PseudolabelStats stats = pseudolabel_stats(labels, n, truth);
    report.coverage = stats.coverage;
    report.n_pseudolabels = static_cast<int>(labels.size());
    report.provenance_counts = stats.provenance_counts;
    report.pseudolabel_accuracy = stats.accuracy;
    const auto acc_a = accuracy_vs(p_a.predictions(), truth);
    const auto acc_star = accuracy_vs(star.probs.predictions(), truth);
    if (acc_a && acc_star) report.branch_accuracies = std::make_pair(*acc_a, *acc_star);
    report.t_tilde = star.t_tilde;
    report.lr = cfg.schedule.lr_for_episode(ep);

    std::vector<int> rows;
    std::vector<std::int32_t> targets;
    rows.reserve(labels.size());
    targets.reserve(labels.size());
    for (const auto& e : labels.entries) {
      rows.push_back(e.sample_index);
      targets.push_back(e.label);
    }
    auto pass = detail::sgd_pass(std::move(model), xa, rows, targets, cfg.schedule.batch_size, report.lr, rng);
    model = std::move(pass.model);
    report.loss_mean = pass.mean_loss;

    p_a = forward(model, xa).probs;
    branch.refit(p_a);
    result.reports.push_back(report);
  }

  result.final_pseudolabels = build_pseudolabels(p_a, branch.predict().probs, cfg.gamma, cfg.scheme);
  result.model = std::move(model);
  return result;
}

}  // namespace

std::vector<std::string> EngineConfig::violations() const {
  std::vector<std::string> v;
  if (!(gamma > 0.0 && gamma < 1.0)) v.push_back("gamma must lie in (0, 1)");
  if (!(temperature > 0.0)) v.push_back("temperature T must be positive");
  if (!(schedule.lr_initial > 0.0) || !(schedule.lr_after_decay > 0.0)) {
    v.push_back("learning rates must be positive");
  }
  if (schedule.episodes < 0) v.push_back("episodes must be >= 0");
  if (schedule.batch_size < 1) v.push_back("batch size must be >= 1");
  if (schedule.decay_episode < 0 || schedule.decay_episode > schedule.episodes) {
    v.push_back("lr decay episode must lie in [0, episodes]");
  }
  if (!guidance) {
    if (scheme == SchemeKind::StrongGuidance) v.push_back("StrongGuidance scheme requires Co-learn++ strong guidance");
  } else {
    const GuidanceMode& g = *guidance;
    if (g.kind == GuidanceKind::Weak) {
      if (g.alpha != kWeakAlpha) v.push_back("weak guidance requires alpha = 1");
      if (!g.t_tilde || *g.t_tilde != kWeakZeroShotTemperature) v.push_back("weak guidance requires t_tilde = 0.05");
      if (scheme != SchemeKind::MatchOrConf) v.push_back("weak guidance uses the MatchOrConf scheme");
    } else {
      if (!(g.alpha >= 0.0 && g.alpha <= 1.0)) v.push_back("alpha must lie in [0, 1]");
      if (g.t_tilde && !(*g.t_tilde > 0.0)) v.push_back("t_tilde must be positive or auto");
      if (scheme != SchemeKind::StrongGuidance) v.push_back("strong guidance uses the StrongGuidance scheme");
    }
  }
  return v;
}

void EngineConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid engine config:";
  for (const auto& s : v) msg += " [" + s + "]";
  throw Error(ErrorCode::InvalidConfig, msg);
}

EngineConfig colearn_plus_config(GuidanceKind kind, EngineConfig base) {
  if (kind == GuidanceKind::Weak) {
    base.guidance = GuidanceMode::weak();
    base.scheme = SchemeKind::MatchOrConf;
  } else {
    base.guidance = GuidanceMode::strong();
    base.scheme = SchemeKind::StrongGuidance;
  }
  return base;
}

nlohmann::json to_json(const EpisodeReport& r) {
  nlohmann::json j;
  j["episode"] = r.episode;
  j["coverage"] = r.coverage;
  j["n_pseudolabels"] = r.n_pseudolabels;
  j["provenance"] = {{"Match", r.provenance_counts[0]},
                     {"AdaptationBranch", r.provenance_counts[1]},
                     {"PretrainedBranch", r.provenance_counts[2]}};
  j["pseudolabel_accuracy"] = r.pseudolabel_accuracy ? nlohmann::json(*r.pseudolabel_accuracy) : nlohmann::json();
  if (r.branch_accuracies) {
    j["branch_accuracies"] = {{"adaptation", r.branch_accuracies->first},
                              {"pretrained", r.branch_accuracies->second}};
  } else {
    j["branch_accuracies"] = nullptr;
  }
  j["loss_mean"] = r.loss_mean;
  j["lr"] = r.lr;
  if (r.t_tilde) j["t_tilde"] = *r.t_tilde;
  return j;
}

std::string reports_to_jsonl(std::span<const EpisodeReport> reports) {
  std::string out;
  for (const auto& r : reports) out += to_json(r).dump() + "\n";
  return out;
}

ColearnResult run_colearn(const AdaptationModel& source_model, const FeatureBank& bank_a,
                          const FeatureBank& bank_star, const EngineConfig& cfg, const EpisodeObserver& observer) {
  cfg.validate();
  if (cfg.guidance) {
    throw Error(ErrorCode::InvalidConfig, "run_colearn takes no zero-shot guidance; use run_colearn_plus");
  }
  return run_engine(source_model, bank_a, bank_star, std::nullopt, cfg, observer);
}

ColearnResult run_colearn_plus(const AdaptationModel& source_model, const FeatureBank& bank_a,
                               const FeatureBank& bank_star, std::span<const FeatureBank> template_banks,
                               const EngineConfig& cfg, const EpisodeObserver& observer) {
  cfg.validate();
  if (!cfg.guidance) throw Error(ErrorCode::InvalidConfig, "run_colearn_plus needs a guidance mode");
  const int n_classes = source_model.num_classes();
  if (static_cast<int>(template_banks.size()) != n_classes) {
    throw Error(ErrorCode::MissingTemplates, "expected template banks for " + std::to_string(n_classes) +
                                                 " classes, got " + std::to_string(template_banks.size()));
  }
  std::vector<Matrix> templates;
  for (const auto& b : template_banks) {
    if (b.dim() != bank_star.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "template embeddings and pre-trained bank widths differ");
    }
    templates.push_back(b.features_as_double());
  }

  ZeroShot zs;
  zs.mode = *cfg.guidance;
  const Centroids zs_centroids = zero_shot_centroids(templates);
  zs.logits = zero_shot_logits(bank_star.features_as_double(), zs_centroids);
  // Centroid weights use the zero-shot temperature; "auto" only governs the
  // logit blend, so fall back to the weak-guidance value there.
  zs.probs = softmax_with_temperature(zs.logits, zs.mode.t_tilde.value_or(kWeakZeroShotTemperature));
  return run_engine(source_model, bank_a, bank_star, std::move(zs), cfg, observer);
}

double gamma_for_ratio(double ratio, double cutoff) { return ratio < cutoff ? kLowGamma : kDefaultGamma; }

GammaRecommendation recommend_gamma(const FeatureBank& bank_src_feats, const FeatureBank& bank_pre_feats,
                                    std::span<const std::int32_t> proxy_labels, double cutoff) {
  const auto n = static_cast<std::size_t>(bank_src_feats.num_samples());
  if (static_cast<std::size_t>(bank_pre_feats.num_samples()) != n || proxy_labels.size() != n) {
    throw Error(ErrorCode::SampleCountMismatch, "banks and proxy labels must index the same samples");
  }
  std::set<int> distinct;
  int n_classes = std::max(bank_src_feats.num_classes(), bank_pre_feats.num_classes());
  for (auto l : proxy_labels) {
    if (l < 0) throw Error(ErrorCode::LabelOutOfRange, "proxy labels must be class indices");
    distinct.insert(l);
    n_classes = std::max(n_classes, l + 1);
  }
  if (distinct.size() < 2) {
    throw Error(ErrorCode::DegenerateProxyLabels, "proxy labels cover fewer than two classes");
  }

  const ProbMatrix one_hot = ProbMatrix::one_hot(proxy_labels, n_classes);
  auto ncc_accuracy = [&](const FeatureBank& bank) {
    const Matrix x = bank.features_as_double();
    const Matrix g = cosine_logits(x, weighted_centroids(x, one_hot));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += argmax(g.row(static_cast<Eigen::Index>(i))) == proxy_labels[i];
    return static_cast<double>(correct) / static_cast<double>(n);
  };

  GammaRecommendation r;
  r.source_accuracy = ncc_accuracy(bank_src_feats);
  r.pretrained_accuracy = ncc_accuracy(bank_pre_feats);
  if (r.pretrained_accuracy <= 0.0) {
    throw Error(ErrorCode::DegenerateProxyLabels, "pre-trained nearest-centroid accuracy is zero");
  }
  r.ratio = r.source_accuracy / r.pretrained_accuracy;
  r.gamma = gamma_for_ratio(r.ratio, cutoff);
  return r;
}

GuidanceKind guidance_for_accuracies(double image_clf_acc, double text_clf_acc) {
  return image_clf_acc >= text_clf_acc ? GuidanceKind::Weak : GuidanceKind::Strong;
}

GuidanceSelection select_guidance(const FeatureBank& bank_star, std::span<const FeatureBank> template_banks,
                                  std::span<const std::vector<int>> labeled_subsets) {
  if (!bank_star.labels) throw Error(ErrorCode::InvalidArgument, "guidance selection needs labeled samples");
  if (labeled_subsets.empty()) throw Error(ErrorCode::InvalidArgument, "guidance selection needs >= 1 subset");
  std::vector<Matrix> templates;
  for (const auto& b : template_banks) templates.push_back(b.features_as_double());

  const Matrix x = bank_star.features_as_double();
  const Centroids zs = zero_shot_centroids(templates);
  const Matrix g_text = zero_shot_logits(x, zs);
  const ProbMatrix p_text = softmax_with_temperature(g_text, kWeakZeroShotTemperature);
  // Weak-guidance image classifier: alpha = 1 head whose centroids are
  // weighted by the text classifier's predictions.
  const Matrix g_image = cosine_logits(x, weighted_centroids(x, p_text));

  const auto& truth = *bank_star.labels;
  double text_sum = 0.0, image_sum = 0.0;
  for (const auto& subset : labeled_subsets) {
    if (subset.empty()) throw Error(ErrorCode::InvalidArgument, "empty labeled subset");
    int text_hits = 0, image_hits = 0;
    for (int i : subset) {
      if (i < 0 || i >= bank_star.num_samples() || truth[i] == kUnlabeled) {
        throw Error(ErrorCode::InvalidArgument, "subset index " + std::to_string(i) + " is not a labeled sample");
      }
      text_hits += argmax(g_text.row(i)) == truth[i];
      image_hits += argmax(g_image.row(i)) == truth[i];
    }
    text_sum += static_cast<double>(text_hits) / static_cast<double>(subset.size());
    image_sum += static_cast<double>(image_hits) / static_cast<double>(subset.size());
  }
  GuidanceSelection s;
  s.text_clf_acc = text_sum / static_cast<double>(labeled_subsets.size());
  s.image_clf_acc = image_sum / static_cast<double>(labeled_subsets.size());
  s.kind = guidance_for_accuracies(s.image_clf_acc, s.text_clf_acc);
  return s;
}

std::vector<std::vector<int>> draw_shot_subsets(const LabelVector& labels, int n_classes,
                                                const GuidanceSelectionOptions& options) {
  if (options.shots < 1 || options.seeds < 1) {
    throw Error(ErrorCode::InvalidArgument, "shots and seeds must be >= 1");
  }
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
  std::vector<int> labeled;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kUnlabeled) continue;
    by_class[labels[i]].push_back(static_cast<int>(i));
    labeled.push_back(static_cast<int>(i));
  }

  std::vector<std::vector<int>> subsets;
  for (int s = 0; s < options.seeds; ++s) {
    std::mt19937_64 rng = make_rng(options.seed + static_cast<std::uint64_t>(s), RngStream::ShotDraws);
    std::vector<int> subset;
    if (options.macro) {
      for (int c = 0; c < n_classes; ++c) {
        auto pool = by_class[c];
        if (static_cast<int>(pool.size()) < options.shots) {
          throw Error(ErrorCode::MissingShotClass, "class " + std::to_string(c) + " has " +
                                                       std::to_string(pool.size()) + " labeled samples, need " +
                                                       std::to_string(options.shots));
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        subset.insert(subset.end(), pool.begin(), pool.begin() + options.shots);
      }
    } else {
      auto pool = labeled;
      std::shuffle(pool.begin(), pool.end(), rng);
      const auto k = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(options.shots) * n_classes);
      subset.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
    std::sort(subset.begin(), subset.end());
    subsets.push_back(std::move(subset));
  }
  return subsets;
}

GuidanceSelection select_guidance(const FeatureBank& bank_star, std::span<const FeatureBank> template_banks,
                                  const GuidanceSelectionOptions& options) {
  if (!bank_star.labels) throw Error(ErrorCode::InvalidArgument, "guidance selection needs labeled samples");
  const int n_classes = std::max(bank_star.num_classes(), static_cast<int>(template_banks.size()));
  const auto subsets = draw_shot_subsets(*bank_star.labels, n_classes, options);
  return select_guidance(bank_star, template_banks, subsets);
}

}  // namespace colearn
