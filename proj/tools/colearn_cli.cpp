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


#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "colearn/colearn_engine.hpp"
#include "colearn/error.hpp"
#include "colearn/metrics.hpp"
#include "colearn/run_config.hpp"
#include "colearn/synthetic_benchmark.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace colearn::cli {
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("colearn");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("COLEARN_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level != spdlog::level::off || std::string_view(env) == "off") spdlog::set_level(level);
  }
}

/// Labeled rows of `bank` scored against `model`.
EvalReport evaluate_model(const AdaptationModel& model, const FeatureBank& bank,
                          const std::vector<int>& known_classes) {
  if (!bank.labels) throw Error(ErrorCode::InvalidArgument, "evaluation bank has no labels");
  const LabelVector predictions = forward(model, bank.features_as_double()).probs.predictions();
  const int n_classes = std::max(model.num_classes(), bank.num_classes());
  const std::set<int> known(known_classes.begin(), known_classes.end());
  LabelVector pred, truth;
  std::vector<bool> mask;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int t = (*bank.labels)[i];
    if (t == kUnlabeled) continue;
    if (known.empty()) {
      pred.push_back(predictions[i]);
      truth.push_back(t);
      continue;
    }
    // Every class outside the known set collapses to one "unknown" label.
    const auto collapse = [&](int c) { return known.count(c) ? c : n_classes; };
    pred.push_back(collapse(predictions[i]));
    truth.push_back(collapse(t));
    mask.push_back(known.count(t) > 0);
  }
  if (known.empty()) return evaluate(pred, truth, std::nullopt, n_classes);
  return evaluate(pred, truth, mask, n_classes + 1);
}

struct EngineFlags {
  RunOptions options;
  std::optional<fs::path> config;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "Flat key=value config file")->check(CLI::ExistingFile);
    app->add_option("--mode", options.mode, "colearn | colearn++-weak | colearn++-strong");
    app->add_option("--scheme", options.scheme, "SelfConf | OtherConf | Match | MatchOrConf | MatchAndConf | StrongGuidance");
    app->add_option("--gamma", options.gamma, "Confidence threshold in (0, 1)");
    app->add_option("--alpha", options.alpha, "Cosine weight of the fused logits");
    app->add_option("--t", options.t, "Softmax temperature of the pre-trained branch");
    app->add_option("--t-tilde", options.t_tilde, "Zero-shot temperature: auto or a number");
    app->add_option("--episodes", options.episodes, "Adaptation episodes");
    app->add_option("--batch-size", options.batch_size, "SGD batch size");
    app->add_option("--lr", options.lr, "Initial learning rate (decays tenfold)");
    app->add_option("--lr-decay-episode", options.lr_decay_episode, "Episode at which the rate decays");
    app->add_option("--seed", options.seed, "Random seed");
    app->add_option("--scenario", options.scenario, "closed | open | partial | open-partial");
  }

  ResolvedRun resolve_run() const {
    const RunOptions base = config ? load_config_file(*config) : RunOptions{};
    return resolve(merge(base, options));
  }
};

struct BranchInputs {
  fs::path model;
  fs::path bank_a;
  fs::path bank_star;
  std::optional<fs::path> templates;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "Source model (CLMD)")->required()->check(CLI::ExistingFile);
    app->add_option("--bank-a", bank_a, "Target embeddings from the source feature extractor")
        ->required()->check(CLI::ExistingFile);
    app->add_option("--bank-star", bank_star, "Target embeddings from the pre-trained extractor")
        ->required()->check(CLI::ExistingFile);
    app->add_option("--templates", templates, "Directory of class_NNN.fbank template banks")
        ->check(CLI::ExistingDirectory);
  }
};

struct LoadedInputs {
  AdaptationModel model;
  FeatureBank bank_a;
  FeatureBank bank_star;
  std::vector<FeatureBank> templates;
};

LoadedInputs load_inputs(const BranchInputs& in, const ResolvedRun& run, RunManifest& manifest) {
  LoadedInputs l;
  l.model = load_model(in.model);
  l.bank_a = load_bank(in.bank_a);
  l.bank_star = load_bank(in.bank_star);
  manifest.add_input(in.model);
  manifest.add_input(in.bank_a);
  manifest.add_input(in.bank_star);
  if (run.engine.guidance) {
    if (!in.templates) throw Error(ErrorCode::MissingTemplates, "colearn++ modes need --templates");
    l.templates = load_template_dir(*in.templates, l.model.num_classes());
    for (int c = 0; c < l.model.num_classes(); ++c) manifest.add_input(template_bank_path(*in.templates, c));
  }
  return l;
}

ColearnResult run_mode(const LoadedInputs& in, const ResolvedRun& run) {
  if (run.engine.guidance) {
    return run_colearn_plus(in.model, in.bank_a, in.bank_star, in.templates, run.engine);
  }
  return run_colearn(in.model, in.bank_a, in.bank_star, run.engine);
}

std::string joined_command(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int run(int argc, char** argv) {
  setup_logging();
  const std::string command = joined_command(argc, argv);

  CLI::App app{"Co-learning source-free domain adaptation on embedding banks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", COLEARN_VERSION);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a seeded synthetic benchmark");
  std::optional<fs::path> gen_spec;
  std::optional<std::string> gen_scenario;
  std::optional<std::uint64_t> gen_seed;
  fs::path gen_out;
  gen->add_option("--spec", gen_spec, "ShiftSpec JSON file")->check(CLI::ExistingFile);
  gen->add_option("--scenario", gen_scenario, "closed | open | partial | open-partial");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train-source
  auto* train = app.add_subcommand("train-source", "Train the source model on a labeled bank");
  fs::path train_bank, train_out;
  std::uint64_t train_seed = 0;
  SourceTrainingOptions train_opts;
  train->add_option("--bank", train_bank, "Labeled source bank")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--seed", train_seed, "Initialisation and shuffling seed");
  train->add_option("--depth", train_opts.depth, "Feature-map depth (1 or 2)")->check(CLI::Range(1, 2));
  train->add_option("--hidden", train_opts.hidden_dim, "Hidden width for depth 2");
  train->add_option("--epochs", train_opts.schedule.episodes, "Training epochs");
  train->add_option("--lr", train_opts.schedule.lr_initial, "Initial learning rate");
  train->add_option("--min-accuracy", train_opts.min_accuracy, "Required source accuracy");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score a model on a labeled bank");
  fs::path eval_model, eval_bank;
  std::optional<fs::path> eval_out;
  std::vector<int> eval_known;
  eval->add_option("--model", eval_model, "Model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--bank", eval_bank, "Labeled bank")->required()->check(CLI::ExistingFile);
  eval->add_option("--known-classes", eval_known, "Known classes for H-score, comma separated")->delimiter(',');
  eval->add_option("--out", eval_out, "Also write metrics.json and a manifest here");

  // adapt
  auto* adapt = app.add_subcommand("adapt", "Run co-learning adaptation");
  BranchInputs adapt_in;
  EngineFlags adapt_flags;
  fs::path adapt_out;
  adapt_in.attach(adapt);
  adapt_flags.attach(adapt);
  adapt->add_option("--out", adapt_out, "Output directory")->required();

  // pseudolabels
  auto* pl = app.add_subcommand("pseudolabels", "Export pseudolabels from a model and the pre-trained bank");
  BranchInputs pl_in;
  EngineFlags pl_flags;
  fs::path pl_out;
  pl_in.attach(pl);
  pl_flags.attach(pl);
  pl->add_option("--out", pl_out, "Output directory")->required();

  // recommend
  auto* rec = app.add_subcommand("recommend", "Recommend gamma and the guidance mode");
  std::optional<double> rec_ratio, rec_image, rec_text;
  std::optional<fs::path> rec_src, rec_star, rec_templates, rec_out;
  std::string rec_proxy = "truth";
  double rec_cutoff = kGammaRatioCutoff;
  GuidanceSelectionOptions rec_sel;
  rec->add_option("--ratio", rec_ratio, "Known source/pre-trained NCC accuracy ratio");
  rec->add_option("--image-acc", rec_image, "Image-classifier few-shot accuracy");
  rec->add_option("--text-acc", rec_text, "Text-classifier few-shot accuracy");
  rec->add_option("--bank-src", rec_src, "Target bank from the source extractor")->check(CLI::ExistingFile);
  rec->add_option("--bank-star", rec_star, "Target bank from the pre-trained extractor")->check(CLI::ExistingFile);
  rec->add_option("--templates", rec_templates, "Template bank directory")->check(CLI::ExistingDirectory);
  rec->add_option("--proxy", rec_proxy, "Labels for the NCC ratio: truth | zero-shot")
      ->check(CLI::IsMember({"truth", "zero-shot"}));
  rec->add_option("--cutoff", rec_cutoff, "Ratio below which gamma drops to 0.1");
  rec->add_option("--shots", rec_sel.shots, "Labeled samples per class for guidance selection");
  rec->add_option("--draws", rec_sel.seeds, "Number of few-shot draws");
  rec->add_flag("--macro", rec_sel.macro, "Draw shots per class");
  rec->add_option("--seed", rec_sel.seed, "Seed of the few-shot draws");
  rec->add_option("--out", rec_out, "Also write recommendation.json and a manifest here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << json{{"error", "Usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  if (*gen) {
    ShiftSpec spec;
    if (gen_spec) {
      std::ifstream in(*gen_spec);
      try {
        spec = shift_spec_from_json(json::parse(in));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFile, std::string("spec file: ") + e.what());
      }
    }
    if (gen_scenario) {
      auto s = parse_scenario(*gen_scenario);
      if (!s) throw Error(ErrorCode::InvalidConfig, "unknown scenario '" + *gen_scenario + "'");
      spec.scenario = *s;
      spec.split.reset();
    }
    if (gen_seed) spec.seed = *gen_seed;
    RunManifest manifest(command, spec.seed);
    if (gen_spec) manifest.add_input(*gen_spec);
    manifest.set_config(to_json(spec));
    spdlog::info("generating {} benchmark, seed {}", to_string(spec.scenario), spec.seed);
    write_benchmark(generate(spec), spec, gen_out);
    manifest.write(gen_out);
  } else if (*train) {
    RunManifest manifest(command, train_seed);
    manifest.add_input(train_bank);
    const FeatureBank source = load_bank(train_bank);
    manifest.set_config({{"depth", train_opts.depth},
                         {"hidden", train_opts.hidden_dim},
                         {"epochs", train_opts.schedule.episodes},
                         {"lr", train_opts.schedule.lr_initial},
                         {"batch_size", train_opts.schedule.batch_size},
                         {"min_accuracy", train_opts.min_accuracy}});
    const AdaptationModel model = train_source(source, train_opts, train_seed);
    fs::create_directories(train_out);
    save_model(model, train_out / "model.clmd");
    write_json(train_out / "metrics.json", {{"source_accuracy", accuracy_on(model, source)}});
    manifest.write(train_out);
  } else if (*eval) {
    RunManifest manifest(command, 0);
    manifest.add_input(eval_model);
    manifest.add_input(eval_bank);
    manifest.set_config({{"known_classes", eval_known}});
    const json report = to_json(evaluate_model(load_model(eval_model), load_bank(eval_bank), eval_known));
    std::cout << report.dump(2) << '\n';
    if (eval_out) {
      fs::create_directories(*eval_out);
      write_json(*eval_out / "metrics.json", report);
      manifest.write(*eval_out);
    }
  } else if (*adapt) {
    const ResolvedRun run = adapt_flags.resolve_run();
    RunManifest manifest(command, run.engine.seed);
    manifest.set_config(to_json(run));
    const LoadedInputs in = load_inputs(adapt_in, run, manifest);
    spdlog::info("adapting with {} for {} episodes", to_string(run.mode), run.engine.schedule.episodes);
    const ColearnResult result = run_mode(in, run);
    for (const auto& r : result.reports) spdlog::info("episode {}: {}", r.episode, to_json(r).dump());
    fs::create_directories(adapt_out);
    save_model(result.model, adapt_out / "model.clmd");
    write_text(adapt_out / "reports.jsonl", reports_to_jsonl(result.reports));
    write_pseudolabels_csv(result.final_pseudolabels, adapt_out / "pseudolabels.csv");
    json metrics = json::object();
    if (in.bank_a.labels) {
      metrics["source_model"] = to_json(evaluate_model(in.model, in.bank_a, {}));
      metrics["adapted_model"] = to_json(evaluate_model(result.model, in.bank_a, {}));
    }
    write_json(adapt_out / "metrics.json", metrics);
    manifest.write(adapt_out);
  } else if (*pl) {
    ResolvedRun run = pl_flags.resolve_run();
    run.engine.schedule.episodes = 0;
    run.engine.schedule.decay_episode = 0;
    RunManifest manifest(command, run.engine.seed);
    manifest.set_config(to_json(run));
    const LoadedInputs in = load_inputs(pl_in, run, manifest);
    const ColearnResult result = run_mode(in, run);
    fs::create_directories(pl_out);
    write_pseudolabels_csv(result.final_pseudolabels, pl_out / "pseudolabels.csv");
    manifest.write(pl_out);
  } else if (*rec) {
    RunManifest manifest(command, rec_sel.seed);
    json out = json::object();
    std::optional<FeatureBank> star;
    std::vector<FeatureBank> templates;
    if (rec_star) {
      star = load_bank(*rec_star);
      manifest.add_input(*rec_star);
    }
    if (rec_templates) {
      const int n_classes = star ? star->num_classes() : 0;
      if (n_classes == 0) throw Error(ErrorCode::InvalidArgument, "--templates needs --bank-star with class names");
      templates = load_template_dir(*rec_templates, n_classes);
      for (int c = 0; c < n_classes; ++c) manifest.add_input(template_bank_path(*rec_templates, c));
    }

    if (rec_ratio) {
      out["ratio"] = *rec_ratio;
      out["gamma"] = gamma_for_ratio(*rec_ratio, rec_cutoff);
    } else if (rec_src && star) {
      const FeatureBank src = load_bank(*rec_src);
      manifest.add_input(*rec_src);
      LabelVector proxy;
      if (rec_proxy == "truth") {
        if (!star->labels) throw Error(ErrorCode::InvalidArgument, "--proxy truth needs a labeled --bank-star");
        proxy = *star->labels;
      } else {
        if (templates.empty()) throw Error(ErrorCode::MissingTemplates, "--proxy zero-shot needs --templates");
        std::vector<Matrix> t;
        for (const auto& b : templates) t.push_back(b.features_as_double());
        proxy = softmax_with_temperature(zero_shot_logits(star->features_as_double(), zero_shot_centroids(t)),
                                         kWeakZeroShotTemperature)
                    .predictions();
      }
      const GammaRecommendation g = recommend_gamma(src, *star, proxy, rec_cutoff);
      out["source_accuracy"] = g.source_accuracy;
      out["pretrained_accuracy"] = g.pretrained_accuracy;
      out["ratio"] = g.ratio;
      out["gamma"] = g.gamma;
    }

    std::optional<GuidanceKind> kind;
    if (rec_image && rec_text) {
      out["image_clf_acc"] = *rec_image;
      out["text_clf_acc"] = *rec_text;
      kind = guidance_for_accuracies(*rec_image, *rec_text);
    } else if (star && !templates.empty()) {
      const GuidanceSelection s = select_guidance(*star, templates, rec_sel);
      out["image_clf_acc"] = s.image_clf_acc;
      out["text_clf_acc"] = s.text_clf_acc;
      kind = s.kind;
    }
    if (kind) out["guidance"] = *kind == GuidanceKind::Weak ? "weak" : "strong";
    if (out.empty()) {
      throw Error(ErrorCode::InvalidArgument,
                  "recommend needs --ratio, --image-acc/--text-acc, or --bank-src/--bank-star[/--templates]");
    }
    manifest.set_config({{"cutoff", rec_cutoff},
                         {"proxy", rec_proxy},
                         {"shots", rec_sel.shots},
                         {"draws", rec_sel.seeds},
                         {"macro", rec_sel.macro}});
    std::cout << out.dump(2) << '\n';
    if (rec_out) {
      fs::create_directories(*rec_out);
      write_json(*rec_out / "recommendation.json", out);
      manifest.write(*rec_out);
    }
  }
  return 0;
}

}  // namespace colearn::cli

int main(int argc, char** argv) {
  try {
    return colearn::cli::run(argc, argv);
  } catch (const colearn::Error& e) {
    std::cerr << nlohmann::json{{"error", std::string(colearn::to_string(e.code()))}, {"message", e.what()}}.dump()
              << '\n';
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
  }
  return 1;
}
