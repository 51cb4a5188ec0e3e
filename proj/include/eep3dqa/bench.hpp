// SPDX-License-Identifier: Apache-2.0
#pragma once

// Per-stage wall-clock timing of the scoring pipeline and relative-time reports.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eep3dqa/pipeline.hpp"

namespace eep3dqa {

enum class Stage { load, render, crop, gms, features, head };
inline constexpr std::array<const char*, 6> kStageNames = {"load", "render", "crop", "gms", "features", "head"};

struct StageSample {
  std::array<double, 6> seconds{};  // indexed by Stage
  double total = 0.0;

  double operator[](Stage s) const { return seconds[static_cast<std::size_t>(s)]; }
};

struct StageTimings {
  std::string label;
  std::vector<StageSample> samples;  // measured repeats; the warm-up run is not included
  std::array<double, 6> stage_mean{};
  double total_mean = 0.0;
  double total_stddev = 0.0;
  bool parallel = false;
  std::size_t projections = 0;
  std::optional<double> params_m;
  std::optional<double> gflops;
  QualityResult last_result;

  std::size_t repeats() const { return samples.size(); }
  double mean(Stage s) const { return stage_mean[static_cast<std::size_t>(s)]; }
};

namespace detail {

using BenchClock = std::chrono::steady_clock;

inline double seconds_since(BenchClock::time_point t0) {
  return std::chrono::duration<double>(BenchClock::now() - t0).count();
}

template <typename F>
auto timed_stage(Stage stage, StageSample& sample, F&& fn) {
  const auto t0 = BenchClock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      sample.seconds[static_cast<std::size_t>(stage)] += seconds_since(t0);
    } else {
      auto r = fn();
      sample.seconds[static_cast<std::size_t>(stage)] += seconds_since(t0);
      return r;
    }
  } catch (const std::exception& e) {
    throw Error(std::string("stage '") + kStageNames[static_cast<std::size_t>(stage)] + "' failed: " + e.what());
  }
}

struct StagedRun {
  StageSample sample;
  QualityResult result;
  std::optional<double> backend_gflops;
  std::optional<double> backend_params_m;
  std::size_t feature_dim = 0;
};

// Same rng consumption as sample_projection_set, split at stage boundaries.
inline StagedRun run_staged(const std::filesystem::path& model_path, const PipelineConfig& cfg,
                            std::optional<HeadWeights>& head) {
  StagedRun run;
  StageSample& s = run.sample;
  const auto t_start = BenchClock::now();
  const Model model = timed_stage(Stage::load, s, [&] { return load_model(model_path); });
  Rng rng(cfg.seed);
  std::vector<ViewpointId> vps = cfg.rps ? sample_viewpoints(cfg.n_projections, rng) : cfg.fixed_viewpoints;
  require_distinct_viewpoints(vps);
  std::vector<ProjectionImage> raw;
  timed_stage(Stage::render, s, [&] {
    for (ViewpointId vp : vps) raw.push_back(render_view(model, vp, cfg.render));
  });
  std::vector<ProjectionImage> cropped;
  timed_stage(Stage::crop, s, [&] {
    for (const auto& p : raw) cropped.push_back(crop_background(p));
  });
  SampledProjectionSet set;
  set.seed = cfg.seed;
  set.grid = cfg.grid;
  set.viewpoints = vps;
  timed_stage(Stage::gms, s, [&] {
    for (const auto& p : cropped) set.canvases.push_back(canvas_from_projection(p, cfg.grid, cfg.gms, rng));
  });
  std::optional<BackendReply> reply;
  std::vector<FeatureVector> features = timed_stage(Stage::features, s, [&] {
    if (cfg.extractor.kind == ExtractorSpec::Kind::bridge) {
      reply = bridge_exchange(set, cfg.extractor);
      return reply->has_features() ? features_from_reply(*reply) : std::vector<FeatureVector>{};
    }
    return extract_features(set, cfg.extractor);
  });
  if (reply) {
    run.backend_gflops = reply->gflops;
    run.backend_params_m = reply->params_m;
  }
  run.result = timed_stage(Stage::head, s, [&] {
    if (features.empty()) {
      if (!reply || !reply->has_scores()) throw Error("backend reply has neither features nor scores");
      QualityResult r;
      for (const auto& e : reply->entries) r.per_projection.push_back(*e.score);
      r.aggregate = aggregate_scores(r.per_projection);
      return r;
    }
    if (!head) {
      // Untrained stand-in; timing does not depend on the parameter values.
      Rng init(mix_seed(cfg.seed, 0x68656164));
      head = init_head(kDefaultHidden, features.front().dim(), init, features.front().extractor_id).cast<float>();
    }
    return score_projections(features, *head);
  });
  run.result.seed = cfg.seed;
  run.result.viewpoints = vps;
  run.feature_dim = features.empty() ? 0 : features.front().dim();
  s.total = seconds_since(t_start);
  return run;
}

}  // namespace detail

// One warm-up run, then `repeats` measured runs with a monotonic clock.
inline StageTimings time_pipeline(const std::filesystem::path& model_path, const PipelineConfig& cfg, int repeats,
                                  std::string label = {}) {
  if (repeats < 3) throw ConfigError("bench repeats must be >= 3");
  cfg.validate();
  std::optional<HeadWeights> head;
  if (cfg.weights) head = load_weights(*cfg.weights);

  StageTimings t;
  t.label = label.empty() ? cfg.preset : std::move(label);
  t.parallel = cfg.parallel_render;
  t.projections = static_cast<std::size_t>(cfg.rps ? cfg.n_projections : static_cast<int>(cfg.fixed_viewpoints.size()));
  detail::run_staged(model_path, cfg, head);
  detail::StagedRun last;
  for (int r = 0; r < repeats; ++r) {
    last = detail::run_staged(model_path, cfg, head);
    t.samples.push_back(last.sample);
  }
  const auto n = static_cast<double>(t.samples.size());
  for (const auto& s : t.samples) {
    for (std::size_t k = 0; k < 6; ++k) t.stage_mean[k] += s.seconds[k] / n;
    t.total_mean += s.total / n;
  }
  double var = 0.0;
  for (const auto& s : t.samples) var += (s.total - t.total_mean) * (s.total - t.total_mean);
  t.total_stddev = std::sqrt(var / n);
  t.last_result = last.result;

  // Head cost is analytic; backbone cost, when present, is whatever the backend reports.
  if (head) {
    const double head_params = static_cast<double>(head->parameter_count()) / 1e6;
    const double head_gflops =
        2.0 * static_cast<double>(head_macs(head->hidden, head->dim)) * static_cast<double>(t.projections) / 1e9;
    t.params_m = head_params + last.backend_params_m.value_or(0.0);
    t.gflops = head_gflops + last.backend_gflops.value_or(0.0);
  } else {
    t.params_m = last.backend_params_m;
    t.gflops = last.backend_gflops;
  }
  return t;
}

inline nlohmann::json to_json(const StageTimings& t) {
  nlohmann::json stages = nlohmann::json::object();
  for (std::size_t k = 0; k < 6; ++k) stages[kStageNames[k]] = t.stage_mean[k];
  nlohmann::json totals = nlohmann::json::array();
  for (const auto& s : t.samples) totals.push_back(s.total);
  nlohmann::json j = {{"label", t.label},         {"repeats", t.repeats()},     {"stage_mean_s", stages},
                      {"totals_s", totals},       {"total_mean_s", t.total_mean}, {"total_stddev_s", t.total_stddev},
                      {"mode", t.parallel ? "parallel" : "single-threaded"},      {"projections", t.projections}};
  j["params_m"] = t.params_m ? nlohmann::json(*t.params_m) : nlohmann::json(nullptr);
  j["gflops"] = t.gflops ? nlohmann::json(*t.gflops) : nlohmann::json(nullptr);
  return j;
}

struct BenchRow {
  std::string label;
  std::optional<double> params_m;
  std::optional<double> gflops;
  double time_s = 0.0;
  double ratio = 0.0;  // time_s / baseline time_s
  bool baseline = false;
  bool parallel = false;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::size_t baseline = 0;
};

inline BenchReport compare_report(std::span<const StageTimings> timings, std::span<const std::string> labels,
                                  std::size_t baseline = 0) {
  if (timings.empty()) throw Error("compare_report: no timings");
  detail::require(labels.size() == timings.size(), "compare_report: label/timing count mismatch");
  detail::require(baseline < timings.size(), "compare_report: baseline index out of range");
  const double base = timings[baseline].total_mean;
  detail::require(base > 0.0, "compare_report: baseline time must be > 0");
  BenchReport rep;
  rep.baseline = baseline;
  for (std::size_t i = 0; i < timings.size(); ++i) {
    rep.rows.push_back({labels[i], timings[i].params_m, timings[i].gflops, timings[i].total_mean,
                        timings[i].total_mean / base, i == baseline, timings[i].parallel});
  }
  return rep;
}

// Columns: label, Param(M), Gflops, time_s, ratio ("A.AAx"); the baseline row is starred.
inline std::string format_bench_table(const BenchReport& rep) {
  std::size_t width = 5;
  for (const auto& r : rep.rows) width = std::max(width, r.label.size() + 2);
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "label" << std::right << std::setw(10) << "Param(M)"
     << std::setw(10) << "Gflops" << std::setw(12) << "time_s" << std::setw(10) << "ratio" << "  mode\n";
  auto opt = [](const std::optional<double>& v, int prec) {
    std::ostringstream s;
    if (v) {
      s << std::fixed << std::setprecision(prec) << *v;
    } else {
      s << "-";
    }
    return s.str();
  };
  for (const auto& r : rep.rows) {
    std::ostringstream ratio;
    ratio << std::fixed << std::setprecision(2) << r.ratio << "x";
    std::ostringstream time;
    time << std::fixed << std::setprecision(4) << r.time_s;
    os << std::left << std::setw(static_cast<int>(width)) << (r.baseline ? r.label + " *" : r.label) << std::right
       << std::setw(10) << opt(r.params_m, 4) << std::setw(10) << opt(r.gflops, 6) << std::setw(12) << time.str()
       << std::setw(10) << ratio.str() << "  " << (r.parallel ? "parallel" : "single-threaded") << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json(const BenchReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"label", r.label},
                    {"params_m", r.params_m ? nlohmann::json(*r.params_m) : nlohmann::json(nullptr)},
                    {"gflops", r.gflops ? nlohmann::json(*r.gflops) : nlohmann::json(nullptr)},
                    {"time_s", r.time_s},
                    {"ratio", r.ratio},
                    {"baseline", r.baseline},
                    {"mode", r.parallel ? "parallel" : "single-threaded"}});
  }
  return {{"rows", rows}, {"baseline", rep.rows[rep.baseline].label}};
}

}  // namespace eep3dqa
