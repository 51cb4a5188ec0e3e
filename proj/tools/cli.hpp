// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line front end. Exit codes: 0 success, 1 pipeline error, 2 usage/config error.

#include <filesystem>
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "eep3dqa/eep3dqa.hpp"

namespace eep3dqa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPipeline = 1;
inline constexpr int kExitUsage = 2;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string preset = "base";
  std::optional<int> n;
  std::string grid = "7x7x32";
  int viewport = 1024;
  int splat = 2;
  std::string extractor = "baseline";
  std::string backend_dir;
  std::string backend_cmd;
  std::string weights;
  int jobs = 1;
  std::string out;
  bool table = false;
  bool parallel = false;
  // training
  int epochs = 50;
  int batch = 32;
  double lr = 1e-4;
  double lr_decay = 0.9;
  int decay_every = 5;
  std::size_t hidden = kDefaultHidden;
  bool per_projection_loss = false;
};

inline PipelineConfig build_config(const GlobalOptions& g, std::ostream& err) {
  PipelineConfig cfg;
  apply_preset(cfg, g.preset);
  if (g.n) {
    cfg.n_projections = *g.n;
    cfg.preset = "custom";
  }
  cfg.grid = parse_grid_spec(g.grid);
  cfg.render.viewport = g.viewport;
  cfg.render.splat_radius = g.splat;
  cfg.extractor.kind = parse_extractor_kind(g.extractor);
  if (!g.backend_cmd.empty()) cfg.extractor.parameters["backend_cmd"] = g.backend_cmd;
  if (!g.backend_dir.empty()) cfg.extractor.parameters["backend_dir"] = g.backend_dir;
  if (!g.weights.empty()) cfg.weights = g.weights;
  if (g.seed) {
    cfg.seed = *g.seed;
  } else {
    cfg.seed = entropy_seed();
    err << "seed: " << cfg.seed << '\n';
  }
  cfg.jobs = g.jobs;
  cfg.parallel_render = g.parallel;
  cfg.train.epochs = g.epochs;
  cfg.train.batch_size = g.batch;
  cfg.train.learning_rate = g.lr;
  cfg.train.lr_decay = g.lr_decay;
  cfg.train.decay_every = g.decay_every;
  cfg.train.hidden = g.hidden;
  cfg.train.per_projection_loss = g.per_projection_loss;
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

inline void emit_json(const nlohmann::json& j, const GlobalOptions& g, std::ostream& out, bool write_out_file) {
  if (write_out_file && !g.out.empty()) {
    const std::filesystem::path p(g.out);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p);
    if (!f) throw Error("cannot write '" + g.out + "'");
    f << j.dump(2) << '\n';
  }
  out << j.dump(2) << '\n';
}

inline std::optional<HeadWeights> maybe_weights(const PipelineConfig& cfg) {
  if (!cfg.weights) return std::nullopt;
  return load_weights(*cfg.weights);
}

// ---------------------------------------------------------------------------

inline int cmd_render(const GlobalOptions& g, const std::string& model_path, const std::string& viewpoints,
                      std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = build_config(g, err);
  const Model model = load_model(model_path);
  const auto vps = viewpoints.empty() ? std::vector<ViewpointId>(kAllViewpoints.begin(), kAllViewpoints.end())
                                      : parse_viewpoint_list(viewpoints);
  const auto images = render_selected(model, vps, cfg.render, {nullptr, cfg.parallel_render});
  const std::filesystem::path dir = g.out.empty() ? "." : g.out;
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& img : images) {
    const auto png = export_projection(img, dir, viewpoint_file_stem(img.viewpoint), cfg.render);
    outputs.push_back({{"viewpoint", to_string(img.viewpoint)},
                       {"png", png.string()},
                       {"sidecar", (dir / (viewpoint_file_stem(img.viewpoint) + ".json")).string()},
                       {"width", img.width()},
                       {"height", img.height()}});
  }
  emit_json({{"command", "render"}, {"model", model_path}, {"config", to_json(cfg)}, {"outputs", outputs}}, g, out,
            false);
  return kExitOk;
}

inline int cmd_sample(const GlobalOptions& g, const std::string& model_path, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = build_config(g, err);
  const Model model = load_model(model_path);
  Rng rng(cfg.seed);
  SampledProjectionSet set =
      sample_projection_set(model, cfg.n_projections, cfg.grid, cfg.render, rng, cfg.sampling_options());
  set.model_id = std::filesystem::path(model_path).stem().string();
  const std::filesystem::path dir = g.out.empty() ? "." : g.out;
  const auto manifest = write_manifest(set, dir);
  nlohmann::json vps = nlohmann::json::array();
  for (ViewpointId vp : set.viewpoints) vps.push_back(to_string(vp));
  emit_json({{"command", "sample"},
             {"model", model_path},
             {"manifest", manifest.string()},
             {"viewpoints", vps},
             {"config", to_json(cfg)}},
            g, out, false);
  return kExitOk;
}

inline int cmd_score(const GlobalOptions& g, const std::string& model_path, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = build_config(g, err);
  if (cfg.extractor.kind == ExtractorSpec::Kind::baseline && !cfg.weights) {
    throw ConfigError("weights not found: --weights is required with the baseline extractor");
  }
  const auto head = maybe_weights(cfg);
  const Model model = load_model(model_path);
  const QualityResult r = score_model(model, cfg, head ? &*head : nullptr, cfg.seed);
  nlohmann::json j = to_json(r);
  j["command"] = "score";
  j["model"] = model_path;
  j["config"] = to_json(cfg);
  emit_json(j, g, out, true);
  return kExitOk;
}

inline int cmd_train(const GlobalOptions& g, const std::string& dataset, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = build_config(g, err);
  if (g.out.empty()) throw ConfigError("train requires --out <weights.json>");
  const auto items = load_dataset_csv(dataset);
  const auto features = dataset_features(items, cfg);
  const TrainResult res = train_head_detailed(features, cfg.train);
  save_weights(res.weights, g.out);
  emit_json({{"command", "train"},
             {"dataset", dataset},
             {"weights", g.out},
             {"items", items.size()},
             {"final_train_loss", res.train_loss.back()},
             {"best_epoch", res.best_epoch},
             {"config", to_json(cfg)}},
            g, out, false);
  return kExitOk;
}

inline int cmd_evaluate(const GlobalOptions& g, const std::string& dataset, std::size_t folds, std::ostream& out,
                        std::ostream& err) {
  const PipelineConfig cfg = build_config(g, err);
  const auto items = load_dataset_csv(dataset);
  const auto features = dataset_features(items, cfg);
  std::vector<double> mos;
  for (const auto& it : items) mos.push_back(it.mos);
  nlohmann::json j = {{"command", "evaluate"}, {"dataset", dataset}, {"config", to_json(cfg)}};
  std::vector<std::string> labels;
  std::vector<EvalReport> rows;
  if (cfg.weights) {
    const HeadWeights head = load_weights(*cfg.weights);
    std::vector<double> pred;
    for (const auto& f : features) pred.push_back(score_projections(f.projections, head).aggregate);
    const EvalReport r = evaluate_run(pred, mos);
    j["report"] = to_json(r);
    j["protocol"] = "fixed-weights";
    labels.push_back("all");
    rows.push_back(r);
  } else {
    const std::size_t k = folds ? folds : group_count(items);
    const auto cv = cross_validate(items, features, k, cfg.train, cfg.seed);
    j["protocol"] = std::to_string(k) + "-fold";
    j["fold_seed"] = cv.plan.seed;
    j["report"] = to_json(cv.mean);
    nlohmann::json per_fold = nlohmann::json::array();
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
      per_fold.push_back(to_json(cv.folds[f]));
      labels.push_back("fold " + std::to_string(f));
      rows.push_back(cv.folds[f]);
    }
    j["folds"] = per_fold;
    labels.push_back("mean");
    rows.push_back(cv.mean);
  }
  if (g.table) {
    out << format_report_table(labels, rows);
    if (!g.out.empty()) std::ofstream(g.out) << j.dump(2) << '\n';
  } else {
    emit_json(j, g, out, true);
  }
  return kExitOk;
}

inline int cmd_sweep_n(const GlobalOptions& g, const std::vector<std::string>& datasets, std::size_t folds,
                       std::ostream& out, std::ostream& err) {
  PipelineConfig cfg = build_config(g, err);
  std::vector<std::vector<DatasetItem>> data;
  for (const auto& d : datasets) data.push_back(load_dataset_csv(d));
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream table;
  table << std::left << std::setw(4) << "N";
  for (const auto& d : datasets) table << "  " << std::setw(14) << std::filesystem::path(d).parent_path().filename().string() + "/" + std::filesystem::path(d).stem().string();
  table << '\n';
  for (int n = 1; n <= 6; ++n) {
    cfg.n_projections = n;
    nlohmann::json row = {{"n", n}};
    nlohmann::json srccs = nlohmann::json::object();
    table << std::left << std::setw(4) << n;
    for (std::size_t d = 0; d < data.size(); ++d) {
      const auto features = dataset_features(data[d], cfg);
      const std::size_t k = folds ? folds : group_count(data[d]);
      const auto cv = cross_validate(data[d], features, k, cfg.train, cfg.seed);
      srccs[datasets[d]] = cv.mean.srcc;
      table << "  " << std::setw(14) << std::fixed << std::setprecision(4) << cv.mean.srcc;
    }
    table << '\n';
    row["srcc"] = srccs;
    rows.push_back(row);
  }
  nlohmann::json j = {{"command", "sweep-n"}, {"datasets", datasets}, {"rows", rows}};
  cfg.preset = "sweep";
  j["config"] = to_json(cfg);
  if (!g.out.empty()) {
    std::ofstream(g.out) << j.dump(2) << '\n';
    // Plot-ready series: one column per dataset.
    std::ofstream csv(std::filesystem::path(g.out).replace_extension(".csv"));
    csv << "n";
    for (const auto& d : datasets) csv << ',' << d;
    csv << '\n';
    for (const auto& r : rows) {
      csv << r["n"].get<int>();
      for (const auto& d : datasets) csv << ',' << r["srcc"][d].get<double>();
      csv << '\n';
    }
  }
  if (g.table) {
    out << table.str();
  } else {
    out << j.dump(2) << '\n';
  }
  return kExitOk;
}

inline std::vector<std::vector<ViewpointId>> parse_fixed_sets(const std::string& spec, int n) {
  if (spec == "preset") return preset_fixed_viewpoint_sets(n);
  std::vector<std::vector<ViewpointId>> sets;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    auto vps = parse_viewpoint_list(item);
    require_distinct_viewpoints(vps);
    sets.push_back(std::move(vps));
  }
  return sets;
}

inline std::vector<bool> parse_switch(const std::string& s, const char* name) {
  if (s == "on") return {true};
  if (s == "off") return {false};
  if (s == "both") return {true, false};
  throw ConfigError(std::string("--") + name + " must be on, off or both");
}

inline int cmd_ablate(const GlobalOptions& g, const std::string& dataset, const std::string& rps,
                      const std::string& gms, const std::string& fixed, std::size_t folds, std::ostream& out,
                      std::ostream& err) {
  PipelineConfig cfg = build_config(g, err);
  const auto rps_modes = parse_switch(rps, "rps");
  const auto gms_modes = parse_switch(gms, "gms");
  const bool need_fixed = std::find(rps_modes.begin(), rps_modes.end(), false) != rps_modes.end();
  std::vector<std::vector<ViewpointId>> fixed_sets;
  if (need_fixed) {
    if (fixed.empty()) {
      throw ConfigError("--rps off needs --fixed-viewpoints (semicolon-separated lists, or 'preset')");
    }
    fixed_sets = parse_fixed_sets(fixed, cfg.n_projections);
    if (fixed_sets.empty()) throw ConfigError("--fixed-viewpoints contained no lists");
  }
  const auto items = load_dataset_csv(dataset);
  const std::size_t k = folds ? folds : group_count(items);
  nlohmann::json rows = nlohmann::json::array();
  std::vector<std::string> labels;
  std::vector<EvalReport> reports;
  for (bool use_rps : rps_modes) {
    for (bool use_gms : gms_modes) {
      PipelineConfig row_cfg = cfg;
      row_cfg.gms = use_gms;
      row_cfg.rps = use_rps;
      std::vector<EvalReport> runs;
      if (use_rps) {
        runs.push_back(cross_validate(items, dataset_features(items, row_cfg), k, cfg.train, cfg.seed).mean);
      } else {
        for (const auto& set : fixed_sets) {
          row_cfg.fixed_viewpoints = set;
          runs.push_back(cross_validate(items, dataset_features(items, row_cfg), k, cfg.train, cfg.seed).mean);
        }
      }
      const EvalReport mean = aggregate_folds(runs);
      const std::string label = std::string("RPS ") + (use_rps ? "on" : "off") + ", GMS " + (use_gms ? "on" : "off");
      rows.push_back({{"rps", use_rps}, {"gms", use_gms}, {"runs", runs.size()}, {"report", to_json(mean)}});
      labels.push_back(label);
      reports.push_back(mean);
    }
  }
  nlohmann::json j = {{"command", "ablate"}, {"dataset", dataset}, {"folds", k}, {"rows", rows}, {"config", to_json(cfg)}};
  if (g.table) {
    out << format_report_table(labels, reports);
    if (!g.out.empty()) std::ofstream(g.out) << j.dump(2) << '\n';
  } else {
    emit_json(j, g, out, true);
  }
  return kExitOk;
}

inline int cmd_bench(const GlobalOptions& g, const std::vector<std::string>& models, const std::string& presets,
                     int repeats, const std::string& baseline, std::ostream& out, std::ostream& err) {
  const PipelineConfig base_cfg = build_config(g, err);
  std::vector<std::string> preset_list;
  {
    std::stringstream ss(presets);
    std::string p;
    while (std::getline(ss, p, ',')) {
      if (!p.empty()) preset_list.push_back(p);
    }
  }
  if (preset_list.empty()) throw ConfigError("--presets is empty");
  std::vector<StageTimings> timings;
  std::vector<std::string> labels;
  std::size_t baseline_index = 0;
  for (const auto& model : models) {
    for (const auto& preset : preset_list) {
      PipelineConfig cfg = base_cfg;
      apply_preset(cfg, preset);
      const std::string label = models.size() > 1 ? std::filesystem::path(model).stem().string() + ":" + preset : preset;
      if (preset == baseline && timings.size() < preset_list.size()) baseline_index = timings.size();
      timings.push_back(time_pipeline(model, cfg, repeats, label));
      labels.push_back(label);
    }
  }
  const BenchReport rep = compare_report(timings, labels, baseline_index);
  nlohmann::json details = nlohmann::json::array();
  for (const auto& t : timings) details.push_back(to_json(t));
  nlohmann::json j = {{"command", "bench"}, {"models", models}, {"report", to_json(rep)}, {"timings", details},
                      {"config", to_json(base_cfg)}};
  if (g.table) {
    out << format_bench_table(rep);
    if (!g.out.empty()) std::ofstream(g.out) << j.dump(2) << '\n';
  } else {
    emit_json(j, g, out, true);
  }
  return kExitOk;
}

inline int cmd_make_synthetic(const std::string& dir, const synthetic::DatasetSpec& spec, std::ostream& out) {
  const auto items = synthetic::make_dataset(dir, spec);
  out << nlohmann::json({{"command", "make-synthetic"},
                         {"dataset", (std::filesystem::path(dir) / "dataset.csv").string()},
                         {"items", items.size()}})
             .dump(2)
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"eep3dqa: no-reference projection-based 3D model quality assessment"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "RNG seed for all sampling (default: drawn from entropy)");
  app.add_option("--preset", g.preset, "tiny (2 projections) or base (5)")->check(CLI::IsMember({"tiny", "base"}));
  int n_value = 0;
  auto* n_opt = app.add_option("--n", n_value, "explicit projection count 1..6 (overrides --preset)");
  app.add_option("--grid", g.grid, "grid mini-patch spec RxCxP");
  app.add_option("--viewport", g.viewport, "render viewport side in pixels");
  app.add_option("--splat", g.splat, "point splat radius in pixels");
  app.add_option("--extractor", g.extractor, "baseline or bridge")->check(CLI::IsMember({"baseline", "bridge"}));
  app.add_option("--backend-dir", g.backend_dir, "exchange directory for the bridge extractor");
  app.add_option("--backend-cmd", g.backend_cmd, "backend command; {manifest} and {reply} are substituted");
  app.add_option("--weights", g.weights, "head weights JSON");
  app.add_option("--jobs", g.jobs, "parallel workers across models");
  app.add_option("--out", g.out, "output file or directory");
  app.add_flag("--table", g.table, "print a text table instead of JSON");
  app.add_flag("--parallel", g.parallel, "render selected viewpoints concurrently");
  app.add_option("--epochs", g.epochs, "training epochs");
  app.add_option("--batch", g.batch, "training batch size");
  app.add_option("--lr", g.lr, "initial learning rate");
  app.add_option("--lr-decay", g.lr_decay, "learning-rate decay ratio");
  app.add_option("--decay-every", g.decay_every, "epochs between learning-rate decays");
  app.add_option("--hidden", g.hidden, "head hidden width");
  app.add_flag("--per-projection-loss", g.per_projection_loss, "apply the loss to every projection score");

  std::string model;
  std::string dataset;
  std::vector<std::string> datasets;
  std::vector<std::string> models;
  std::string viewpoints;
  std::size_t folds = 0;
  std::string rps = "both", gms = "both", fixed;
  std::string presets = "tiny,base", baseline = "base";
  int repeats = 5;
  std::string synth_dir;
  synthetic::DatasetSpec synth;

  auto* render = app.add_subcommand("render", "render cropped cube-face projections to PNG + sidecar JSON");
  render->add_option("model", model, "PLY point cloud or OBJ mesh")->required();
  render->add_option("--viewpoints", viewpoints, "comma-separated subset of +X,-X,+Y,-Y,+Z,-Z (default all)");
  auto* sample = app.add_subcommand("sample", "write sampled canvases and the backend manifest");
  sample->add_option("model", model)->required();
  auto* score = app.add_subcommand("score", "score one model; prints per-projection and aggregate quality");
  score->add_option("model", model)->required();
  auto* train = app.add_subcommand("train", "train the quality head on a dataset manifest");
  train->add_option("dataset", dataset, "CSV: model_path,group_id,mos")->required();
  auto* evaluate = app.add_subcommand("evaluate", "k-fold cross validation, or fixed weights with --weights");
  evaluate->add_option("dataset", dataset)->required();
  evaluate->add_option("--folds", folds, "fold count (default: one per group)");
  auto* sweep = app.add_subcommand("sweep-n", "cross-validated SRCC for every projection count 1..6");
  sweep->add_option("datasets", datasets)->required();
  sweep->add_option("--folds", folds, "fold count (default: one per group)");
  auto* ablate = app.add_subcommand("ablate", "RPS / GMS ablation rows");
  ablate->add_option("dataset", dataset)->required();
  ablate->add_option("--rps", rps, "on, off or both");
  ablate->add_option("--gms", gms, "on, off or both");
  ablate->add_option("--fixed-viewpoints", fixed, "lists for RPS off, e.g. '+X,+Y;-Z,+Z' or 'preset'");
  ablate->add_option("--folds", folds, "fold count (default: one per group)");
  auto* bench = app.add_subcommand("bench", "per-stage timing of the presets");
  bench->add_option("models", models)->required();
  bench->add_option("--presets", presets, "comma-separated presets to time");
  bench->add_option("--repeats", repeats, "measured repeats after one warm-up");
  bench->add_option("--baseline", baseline, "preset whose time is the 1.00x reference");
  auto* synth_cmd = app.add_subcommand("make-synthetic", "generate a graded-distortion synthetic dataset");
  synth_cmd->add_option("dir", synth_dir)->required();
  synth_cmd->add_option("--shapes", synth.shapes, "reference shapes (groups)")->capture_default_str();
  synth_cmd->add_option("--levels", synth.levels, "distortion levels per shape, level 0 is pristine")->capture_default_str();
  synth_cmd->add_option("--points", synth.points, "points per reference cloud")->capture_default_str();
  synth_cmd->add_option("--synth-seed", synth.seed, "generator seed")->capture_default_str();

  for (auto* sub : {render, sample, score, train, evaluate, sweep, ablate, bench, synth_cmd}) sub->fallthrough();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (seed_opt->count()) g.seed = seed_value;
  if (n_opt->count()) g.n = n_value;

  try {
    if (*render) return cmd_render(g, model, viewpoints, out, err);
    if (*sample) return cmd_sample(g, model, out, err);
    if (*score) return cmd_score(g, model, out, err);
    if (*train) return cmd_train(g, dataset, out, err);
    if (*evaluate) return cmd_evaluate(g, dataset, folds, out, err);
    if (*sweep) return cmd_sweep_n(g, datasets, folds, out, err);
    if (*ablate) return cmd_ablate(g, dataset, rps, gms, fixed, folds, out, err);
    if (*bench) return cmd_bench(g, models, presets, repeats, baseline, out, err);
    if (*synth_cmd) return cmd_make_synthetic(synth_dir, synth, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitPipeline;
  }
  return kExitUsage;
}

}  // namespace eep3dqa::cli
