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


// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "colearn/colearn_engine.hpp"
#include "colearn/feature_bank.hpp"
#include "colearn/metrics.hpp"
#include "colearn/synthetic_benchmark.hpp"
#include "oracle/fd_gradients.hpp"
#include "oracle/ncc_oracle.hpp"

namespace fs = std::filesystem;
using namespace colearn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Row of length L whose argmax is `label` with probability `conf`.
std::vector<double> realize_row(int n_classes, int label, double conf, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (;;) {
    std::vector<double> row(n_classes);
    double s = 0.0;
    for (int i = 0; i < n_classes; ++i) {
      if (i == label) continue;
      row[i] = u(rng);
      s += row[i];
    }
    bool ok = true;
    for (int i = 0; i < n_classes; ++i) {
      if (i == label) continue;
      row[i] *= (1.0 - conf) / s;
      ok = ok && row[i] < conf;
    }
    row[label] = conf;
    if (ok) return row;
  }
}

Outcome truth_table() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int cell = trial % 8;
    const bool match = cell & 1, a_conf = cell & 2, s_conf = cell & 4;
    const int n_classes = std::uniform_int_distribution<int>(4, 8)(rng);
    const double gamma = std::uniform_real_distribution<double>(0.3, 0.8)(rng);
    std::uniform_int_distribution<int> pick(0, n_classes - 1);
    const int ya = pick(rng);
    int ys = ya;
    while (!match && ys == ya) ys = pick(rng);
    auto conf = [&](bool high) {
      return high ? std::uniform_real_distribution<double>(gamma + 1e-3, 0.99)(rng)
                  : std::uniform_real_distribution<double>(0.3, gamma)(rng);
    };
    const double ca = conf(a_conf), cs = conf(s_conf);
    Matrix pa(1, n_classes), ps(1, n_classes);
    const auto ra = realize_row(n_classes, ya, ca, rng), rs = realize_row(n_classes, ys, cs, rng);
    for (int i = 0; i < n_classes; ++i) {
      pa(0, i) = ra[i];
      ps(0, i) = rs[i];
    }
    const PseudolabelSet set = build_pseudolabels(ProbMatrix::from_matrix(pa), ProbMatrix::from_matrix(ps), gamma,
                                                  SchemeKind::MatchOrConf);
    // Expected row of the lookup table.
    std::optional<Pseudolabel> expected;
    if (match) expected = Pseudolabel{0, ya, ca, Provenance::Match};
    else if (a_conf && !s_conf) expected = Pseudolabel{0, ya, ca, Provenance::AdaptationBranch};
    else if (!a_conf && s_conf) expected = Pseudolabel{0, ys, cs, Provenance::PretrainedBranch};

    const bool ok = expected ? set.size() == 1 && set.entries[0].label == expected->label &&
                                   set.entries[0].provenance == expected->provenance &&
                                   set.entries[0].confidence == expected->confidence
                             : set.empty();
    mismatches += !ok;
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 1.0, fmt("1000 trials, %d mismatches, %.3fs", mismatches, t)};
}

oracle::Rows to_rows(const Matrix& m) {
  oracle::Rows r(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

double max_abs_diff(const Matrix& m, const oracle::Rows& r) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) worst = std::max(worst, std::abs(m(i, j) - r[i][j]));
  return worst;
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const int n = std::uniform_int_distribution<int>(1, 64)(rng);
    const int d = std::uniform_int_distribution<int>(1, 8)(rng);
    const int l = std::uniform_int_distribution<int>(1, 5)(rng);
    Matrix x(n, d);
    for (auto& v : x.reshaped()) v = normal(rng);
    Matrix la(n, l);
    for (auto& v : la.reshaped()) v = 3.0 * normal(rng);
    // Every fourth instance uses hard labels that may leave a class empty.
    ProbMatrix p_a = inst % 4 == 0 ? ProbMatrix::one_hot([&] {
      LabelVector y(n);
      for (auto& v : y) v = std::uniform_int_distribution<int>(0, std::max(0, l - 2))(rng);
      return y;
    }(), l)
                                   : softmax_with_temperature(la, 1.0);

    const Matrix g = cosine_logits(x, weighted_centroids(x, p_a));
    const auto xr = to_rows(x);
    const auto g_ref = oracle::cosine(xr, oracle::centroids(xr, to_rows(p_a.values())));
    worst = std::max(worst, max_abs_diff(g, g_ref));
    worst = std::max(worst, max_abs_diff(softmax_with_temperature(g, kCentroidTemperature).values(),
                                         oracle::softmax(g_ref, kCentroidTemperature)));

    std::vector<Matrix> templates;
    std::vector<oracle::Rows> templates_ref;
    for (int c = 0; c < l; ++c) {
      Matrix t(std::uniform_int_distribution<int>(1, 6)(rng), d);
      for (auto& v : t.reshaped()) v = normal(rng);
      templates.push_back(t);
      templates_ref.push_back(to_rows(t));
    }
    const Centroids zs = zero_shot_centroids(templates);
    const Matrix g_zs = zero_shot_logits(x, zs);
    const auto g_zs_ref = oracle::cosine(xr, oracle::zero_shot(templates_ref));
    worst = std::max(worst, max_abs_diff(g_zs, g_zs_ref));

    const double t_zs = kWeakZeroShotTemperature;
    const ProbMatrix p_zs = softmax_with_temperature(g_zs, t_zs);
    const Centroids fc = fused_centroids(x, p_a, p_zs);
    const auto fc_ref = oracle::fused(xr, to_rows(p_a.values()), oracle::softmax(g_zs_ref, t_zs));
    const Matrix g_cos = cosine_logits(x, fc);
    const auto g_cos_ref = oracle::cosine(xr, fc_ref);

    const double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    GuidanceMode mode{GuidanceKind::Strong, alpha, std::uniform_real_distribution<double>(0.02, 3.0)(rng)};
    if (inst % 3 == 0 && n * l > 1 && population_std(g_cos) > 1e-9 && population_std(g_zs) > 1e-9) {
      mode.t_tilde = resolve_strong_t_tilde(g_zs, g_cos);
      const double t_ref = oracle::population_std(g_zs_ref) / oracle::population_std(g_cos_ref);
      worst = std::max(worst, std::abs(*mode.t_tilde - t_ref) / t_ref);
    }
    const Matrix g_pp = fused_logits(x, fc, g_zs, mode);
    worst = std::max(worst, max_abs_diff(g_pp, oracle::blend(g_cos_ref, g_zs_ref, alpha, *mode.t_tilde)));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-5 && t < 5.0, fmt("200 instances, max abs error %.3g, %.3fs", worst, t)};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const int d = std::uniform_int_distribution<int>(2, 6)(rng);
    const int l = std::uniform_int_distribution<int>(2, 5)(rng);
    const int b = std::uniform_int_distribution<int>(1, 8)(rng);
    const int depth = draw % 2 + 1;
    const int h = depth == 2 ? std::uniform_int_distribution<int>(2, 5)(rng) : 0;
    AdaptationModel model = AdaptationModel::initialize(d, l, depth, h, rng());
    for (double* p : oracle::scalar_refs(model)) *p += 0.3 * normal(rng);
    Matrix x(b, d);
    for (auto& v : x.reshaped()) v = normal(rng);
    std::vector<std::int32_t> y(b);
    for (auto& v : y) v = std::uniform_int_distribution<int>(0, l - 1)(rng);

    const auto analytic = oracle::flatten(loss_and_gradients(model, x, y).grads);
    const auto numeric = oracle::finite_difference_gradients(model, x, y);
    worst = std::max(worst, oracle::max_relative_error(analytic, numeric));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 10.0, fmt("100 draws, max relative error %.3g, %.3fs", worst, t)};
}

struct SeedRun {
  double source_only = 0.0;
  double colearn = 0.0;
  double colearn_plus = 0.0;
  GuidanceKind guidance = GuidanceKind::Weak;
};

std::vector<SeedRun> run_sweep(double& elapsed) {
  const auto t0 = Clock::now();
  std::vector<SeedRun> runs;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ShiftSpec spec;
    spec.seed = seed;
    const SyntheticBenchmark b = generate(spec);
    const AdaptationModel source = train_source(b.source, {}, seed);
    EngineConfig cfg;
    cfg.seed = seed;
    SeedRun r;
    r.source_only = accuracy_on(source, b.target_a);
    r.colearn = accuracy_on(run_colearn(source, b.target_a, b.target_star, cfg).model, b.target_a);
    GuidanceSelectionOptions sel;
    sel.seed = seed;
    r.guidance = select_guidance(b.target_star, b.templates, sel).kind;
    r.colearn_plus = accuracy_on(
        run_colearn_plus(source, b.target_a, b.target_star, b.templates, colearn_plus_config(r.guidance, cfg)).model,
        b.target_a);
    runs.push_back(r);
  }
  elapsed = seconds_since(t0);
  return runs;
}

Outcome synthetic_gain(const std::vector<SeedRun>& runs, double elapsed) {
  int wins = 0;
  double mean_gain = 0.0;
  for (const auto& r : runs) {
    wins += r.colearn - r.source_only >= 0.05;
    mean_gain += (r.colearn - r.source_only) / runs.size();
  }
  return {wins >= 18 && elapsed < 60.0,
          fmt("%d/20 seeds gain >= 5pp, mean gain %.1fpp, sweep %.2fs", wins, 100 * mean_gain, elapsed)};
}

Outcome plus_vs_colearn(const std::vector<SeedRun>& runs) {
  int wins = 0, strong = 0;
  for (const auto& r : runs) {
    wins += r.colearn_plus >= r.colearn;
    strong += r.guidance == GuidanceKind::Strong;
  }
  return {wins >= 15, fmt("%d/20 paired seeds, %d chose strong guidance", wins, strong)};
}

Outcome weak_reduction() {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(40, 6), la(40, 4), g1(40, 4), g2(40, 4);
  for (auto* m : {&x, &la, &g1, &g2})
    for (auto& v : m->reshaped()) v = normal(rng);
  const Centroids fc = weighted_centroids(x, softmax_with_temperature(la, 1.0));
  const Matrix a = fused_logits(x, fc, g1, GuidanceMode::weak());
  const Matrix b = fused_logits(x, fc, g2, GuidanceMode::weak());
  const Matrix cos = cosine_logits(x, fc);
  const bool independent = std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0 &&
                           std::memcmp(a.data(), cos.data(), sizeof(double) * a.size()) == 0;
  const Matrix z = fused_logits(x, fc, g1, GuidanceMode{GuidanceKind::Strong, 0.0, 0.05});
  const Matrix twenty = 20.0 * g1;
  const bool pure = std::memcmp(z.data(), twenty.data(), sizeof(double) * z.size()) == 0;
  return {independent && pure, fmt("alpha=1 independent of zero-shot logits: %s; alpha=0 equals 20*g: %s",
                                   independent ? "yes" : "no", pure ? "yes" : "no")};
}

Outcome gamma_directions() {
  const double low = gamma_for_ratio(0.844), high = gamma_for_ratio(0.982);
  return {low == 0.1 && high == 0.5, fmt("ratio 0.844 -> %.1f, ratio 0.982 -> %.1f", low, high)};
}

Outcome guidance_decisions() {
  const auto a = guidance_for_accuracies(90.6, 88.4), b = guidance_for_accuracies(86.1, 88.9);
  auto name = [](GuidanceKind k) { return k == GuidanceKind::Weak ? "Weak" : "Strong"; };
  return {a == GuidanceKind::Weak && b == GuidanceKind::Strong,
          fmt("(90.6, 88.4) -> %s, (86.1, 88.9) -> %s", name(a), name(b))};
}

Outcome h_score_check() {
  const double h = h_score(0.8, 0.6);
  return {std::abs(h - 0.685714) <= 1e-6, fmt("h_score(0.8, 0.6) = %.6f", h)};
}

Outcome determinism() {
  ShiftSpec spec;
  spec.seed = 5;
  const SyntheticBenchmark b = generate(spec);
  const AdaptationModel source = train_source(b.source, {}, 5);
  EngineConfig cfg;
  cfg.seed = 9;
  const auto r1 = run_colearn(source, b.target_a, b.target_star, cfg);
  const auto r2 = run_colearn(source, b.target_a, b.target_star, cfg);
  const auto strong = colearn_plus_config(GuidanceKind::Strong, cfg);
  const auto p1 = run_colearn_plus(source, b.target_a, b.target_star, b.templates, strong);
  const auto p2 = run_colearn_plus(source, b.target_a, b.target_star, b.templates, strong);
  const bool same = bitwise_equal(r1.model, r2.model) && r1.reports == r2.reports &&
                    bitwise_equal(p1.model, p2.model) && p1.reports == p2.reports &&
                    reports_to_jsonl(r1.reports) == reports_to_jsonl(r2.reports);
  return {same, fmt("Co-learn and Co-learn++ reruns bit-identical: %s", same ? "yes" : "no")};
}

Outcome fbank_round_trip() {
  const fs::path dir = fs::temp_directory_path() / ("colearn_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::mt19937_64 rng(19);
  std::normal_distribution<float> normal(0.0f, 10.0f);
  int failures = 0;
  for (int k = 0; k < 100; ++k) {
    FeatureBank bank;
    const int n = std::uniform_int_distribution<int>(1, 50)(rng);
    const int d = std::uniform_int_distribution<int>(1, 20)(rng);
    const int l = std::uniform_int_distribution<int>(1, 8)(rng);
    bank.features.resize(n, d);
    for (auto& v : bank.features.reshaped()) v = normal(rng);
    bank.features(0, 0) = k % 3 == 0 ? -0.0f : bank.features(0, 0);
    if (k % 2 == 0) {
      LabelVector y(n);
      for (auto& v : y) v = std::uniform_int_distribution<int>(-1, l - 1)(rng);
      bank.labels = y;
    }
    for (int c = 0; c < l; ++c) bank.class_names.push_back("class " + std::to_string(c) + (k % 5 ? "" : " \xc3\xa9"));
    bank.domain_name = "domain_" + std::to_string(k);
    const fs::path path = dir / ("bank_" + std::to_string(k) + ".fbank");
    save_bank(bank, path);
    const FeatureBank back = load_bank(path);
    const bool bits = back.features.size() == bank.features.size() &&
                      std::memcmp(back.features.data(), bank.features.data(), sizeof(float) * bank.features.size()) == 0;
    failures += !(bits && back.labels == bank.labels && back.class_names == bank.class_names &&
                  back.domain_name == bank.domain_name);
  }
  fs::remove_all(dir);
  return {failures == 0, fmt("100 random banks, %d mismatches", failures)};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](const char* name, const Outcome& o) {
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    failed += !o.pass;
  };
  auto guarded = [&](const char* name, const std::function<Outcome()>& f) {
    try {
      report(name, f());
    } catch (const std::exception& e) {
      report(name, {false, std::string("threw: ") + e.what()});
    }
  };

  guarded("matchorconf_truth_table", truth_table);
  guarded("brute_force_oracle_equivalence", oracle_equivalence);
  guarded("gradient_correctness", gradient_check);
  double elapsed = 0.0;
  std::vector<SeedRun> runs;
  try {
    runs = run_sweep(elapsed);
  } catch (const std::exception& e) {
    std::printf("sweep threw: %s\n", e.what());
  }
  guarded("synthetic_adaptation_gain", [&] { return runs.size() == 20 ? synthetic_gain(runs, elapsed) : Outcome{}; });
  guarded("colearn_plus_not_worse", [&] { return runs.size() == 20 ? plus_vs_colearn(runs) : Outcome{}; });
  guarded("weak_guidance_reduction", weak_reduction);
  guarded("gamma_recommendation_directions", gamma_directions);
  guarded("guidance_selection_decisions", guidance_decisions);
  guarded("h_score_hand_check", h_score_check);
  guarded("engine_determinism", determinism);
  guarded("fbank_round_trip_bit_exact", fbank_round_trip);

  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
