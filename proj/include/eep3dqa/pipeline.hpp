// SPDX-License-Identifier: Apache-2.0
#pragma once

// End-to-end orchestration shared by the CLI, the benchmarks and the acceptance suite:
// per-model sampling + features + scoring, dataset feature extraction, and k-fold
// cross validation of a trained head.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "eep3dqa/evaluation.hpp"
#include "eep3dqa/features.hpp"
#include "eep3dqa/model_io.hpp"
#include "eep3dqa/projection.hpp"
#include "eep3dqa/rng.hpp"
#include "eep3dqa/sampling.hpp"
#include "eep3dqa/scoring.hpp"

namespace eep3dqa {

inline constexpr int kTinyProjections = 2;
inline constexpr int kBaseProjections = 5;

struct PipelineConfig {
  std::string preset = "base";
  int n_projections = kBaseProjections;
  GridSpec grid;
  RenderConfig render;
  ExtractorSpec extractor;
  std::optional<std::filesystem::path> weights;
  std::uint64_t seed = 0;
  bool rps = true;
  std::vector<ViewpointId> fixed_viewpoints;
  bool gms = true;
  int jobs = 1;
  bool parallel_render = false;
  TrainConfig train;

  SamplingOptions sampling_options(RenderLog* log = nullptr) const {
    return {rps, fixed_viewpoints, gms, parallel_render, log};
  }

  void validate() const {
    detail::require_config(n_projections >= 1 && n_projections <= 6, "projection count must be in 1..6");
    grid.validate();
    render.validate();
    train.validate();
    detail::require_config(jobs >= 1, "--jobs must be >= 1");
    if (!rps) require_distinct_viewpoints(fixed_viewpoints);
  }
};

// "tiny" -> 2 projections, "base" -> 5.
inline void apply_preset(PipelineConfig& cfg, const std::string& preset) {
  if (preset == "tiny") {
    cfg.n_projections = kTinyProjections;
  } else if (preset == "base") {
    cfg.n_projections = kBaseProjections;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected tiny or base)");
  }
  cfg.preset = preset;
}

inline nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json vps = nlohmann::json::array();
  for (ViewpointId vp : cfg.fixed_viewpoints) vps.push_back(to_string(vp));
  nlohmann::json j = {
      {"preset", cfg.preset},
      {"n_projections", cfg.n_projections},
      {"grid", {{"rows", cfg.grid.rows}, {"cols", cfg.grid.cols}, {"patch", cfg.grid.patch}}},
      {"render", to_json(cfg.render)},
      {"extractor", cfg.extractor.kind == ExtractorSpec::Kind::baseline ? "baseline" : "bridge"},
      {"extractor_parameters", cfg.extractor.parameters},
      {"weights", cfg.weights ? cfg.weights->string() : ""},
      {"seed", cfg.seed},
      {"rps", cfg.rps},
      {"fixed_viewpoints", vps},
      {"gms", cfg.gms},
      {"jobs", cfg.jobs},
      {"train", to_json(cfg.train)},
  };
  return j;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct ModelFeatures {
  SampledProjectionSet set;
  std::vector<FeatureVector> features;  // empty when the backend replied with scores only
  std::optional<BackendReply> reply;
};

inline ModelFeatures extract_model_features(const Model& model, const PipelineConfig& cfg, std::uint64_t seed,
                                            RenderLog* log = nullptr, const std::string& model_id = {}) {
  Rng rng(seed);
  ModelFeatures out;
  out.set = sample_projection_set(model, cfg.n_projections, cfg.grid, cfg.render, rng, cfg.sampling_options(log));
  out.set.model_id = model_id;
  if (cfg.extractor.kind == ExtractorSpec::Kind::bridge) {
    out.reply = bridge_exchange(out.set, cfg.extractor);
    if (out.reply->has_features()) out.features = features_from_reply(*out.reply);
  } else {
    out.features = extract_features(out.set, cfg.extractor);
  }
  return out;
}

// Per-projection scores come from the head when one is given, else from a score-serving backend.
inline QualityResult score_model(const Model& model, const PipelineConfig& cfg, const HeadWeights* head,
                                 std::uint64_t seed, RenderLog* log = nullptr) {
  ModelFeatures mf = extract_model_features(model, cfg, seed, log);
  QualityResult r;
  if (head) {
    r = score_projections(mf.features, *head);
  } else if (mf.reply && mf.reply->has_scores()) {
    for (const auto& e : mf.reply->entries) r.per_projection.push_back(*e.score);
    r.aggregate = aggregate_scores(r.per_projection);
  } else {
    throw ConfigError("no head weights given and the extractor does not produce scores");
  }
  r.seed = seed;
  r.viewpoints = mf.set.viewpoints;
  return r;
}

inline nlohmann::json to_json(const QualityResult& r) {
  nlohmann::json vps = nlohmann::json::array();
  for (ViewpointId vp : r.viewpoints) vps.push_back(to_string(vp));
  return {{"per_projection", r.per_projection}, {"aggregate", r.aggregate}, {"seed", r.seed}, {"viewpoints", vps}};
}

// Seed of dataset item i under run seed s.
inline std::uint64_t item_seed(std::uint64_t run_seed, std::size_t index) { return mix_seed(run_seed, index); }

// Samples and extracts features for every item (models load inside the workers).
inline std::vector<TrainItem> dataset_features(std::span<const DatasetItem> items, const PipelineConfig& cfg,
                                               RenderLog* log = nullptr) {
  std::vector<TrainItem> out(items.size());
  parallel_for(items.size(), cfg.jobs, [&](std::size_t i) {
    const Model model = load_model(items[i].model_path);
    ModelFeatures mf = extract_model_features(model, cfg, item_seed(cfg.seed, i), log, items[i].model_path.string());
    if (mf.features.empty()) throw Error("extractor produced no features for '" + items[i].model_path.string() + "'");
    out[i] = {std::move(mf.features), items[i].mos};
  });
  return out;
}

struct CrossValidationResult {
  FoldPlan plan;
  std::vector<EvalReport> folds;
  EvalReport mean;
  std::vector<double> predictions;  // out-of-fold, aligned with the items
};

// Trains a head on k-1 folds and evaluates it on the held-out fold, for every fold.
inline CrossValidationResult cross_validate(std::span<const DatasetItem> items, std::span<const TrainItem> features,
                                            std::size_t k, const TrainConfig& train_cfg, std::uint64_t seed) {
  detail::require(items.size() == features.size(), "cross_validate: items/features mismatch");
  std::vector<FoldItem> fold_items;
  for (std::size_t i = 0; i < items.size(); ++i) fold_items.push_back({std::to_string(i), items[i].group_id});
  CrossValidationResult cv;
  cv.plan = kfold_split(fold_items, k, seed);
  cv.predictions.assign(items.size(), 0.0);
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<TrainItem> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (cv.plan.fold_of(std::to_string(i)) == fold) {
        test.push_back(i);
      } else {
        train.push_back(features[i]);
      }
    }
    TrainConfig cfg = train_cfg;
    cfg.seed = mix_seed(train_cfg.seed, fold);
    const HeadWeights head = train_head(train, cfg);
    std::vector<double> pred, mos;
    for (std::size_t i : test) {
      const double q = score_projections(features[i].projections, head).aggregate;
      cv.predictions[i] = q;
      pred.push_back(q);
      mos.push_back(items[i].mos);
    }
    cv.folds.push_back(evaluate_run(pred, mos));
  }
  cv.mean = aggregate_folds(cv.folds);
  return cv;
}

// Number of distinct groups, the default (leave-one-group-out) fold count.
inline std::size_t group_count(std::span<const DatasetItem> items) {
  std::vector<std::string> g;
  for (const auto& it : items) g.push_back(it.group_id);
  std::sort(g.begin(), g.end());
  return static_cast<std::size_t>(std::unique(g.begin(), g.end()) - g.begin());
}

// Five fixed viewpoint lists of size n (cyclic windows over +X,-X,+Y,-Y,+Z,-Z), used when
// random projection sampling is disabled and no lists are supplied.
inline std::vector<std::vector<ViewpointId>> preset_fixed_viewpoint_sets(int n) {
  detail::require_config(n >= 1 && n <= 6, "projection count must be in 1..6");
  std::vector<std::vector<ViewpointId>> sets;
  for (std::size_t s = 0; s < 5; ++s) {
    std::vector<ViewpointId> vps;
    for (int j = 0; j < n; ++j) vps.push_back(kAllViewpoints[(s + static_cast<std::size_t>(j)) % 6]);
    sets.push_back(std::move(vps));
  }
  return sets;
}

}  // namespace eep3dqa
