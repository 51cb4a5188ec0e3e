// SPDX-License-Identifier: Apache-2.0
#pragma once

// Two-stage fully connected quality head, score averaging, and MSE head training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eep3dqa/error.hpp"
#include "eep3dqa/features.hpp"
#include "eep3dqa/projection.hpp"
#include "eep3dqa/rng.hpp"

namespace eep3dqa {

// q = w2 . relu(W1 f + b1) + b2, W1 stored row-major (hidden x dim).
template <typename T>
struct BasicHeadWeights {
  std::size_t hidden = 0;
  std::size_t dim = 0;
  std::vector<T> w1;
  std::vector<T> b1;
  std::vector<T> w2;
  T b2 = 0;
  std::string extractor_id;

  BasicHeadWeights() = default;
  BasicHeadWeights(std::size_t hidden_, std::size_t dim_, std::string id = {})
      : hidden(hidden_), dim(dim_), w1(hidden_ * dim_), b1(hidden_), w2(hidden_), extractor_id(std::move(id)) {}

  T& weight1(std::size_t h, std::size_t k) { return w1[h * dim + k]; }
  T weight1(std::size_t h, std::size_t k) const { return w1[h * dim + k]; }

  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }

  void validate() const {
    detail::require(hidden >= 1 && dim >= 1, "head weights: hidden and dim must be >= 1");
    detail::require(w1.size() == hidden * dim && b1.size() == hidden && w2.size() == hidden,
                    "head weights: inconsistent shapes");
    auto finite = [](T v) { return std::isfinite(static_cast<double>(v)); };
    detail::require(std::all_of(w1.begin(), w1.end(), finite) && std::all_of(b1.begin(), b1.end(), finite) &&
                        std::all_of(w2.begin(), w2.end(), finite) && finite(b2),
                    "head weights: non-finite parameter");
  }

  template <typename U>
  BasicHeadWeights<U> cast() const {
    BasicHeadWeights<U> out(hidden, dim, extractor_id);
    std::transform(w1.begin(), w1.end(), out.w1.begin(), [](T v) { return static_cast<U>(v); });
    std::transform(b1.begin(), b1.end(), out.b1.begin(), [](T v) { return static_cast<U>(v); });
    std::transform(w2.begin(), w2.end(), out.w2.begin(), [](T v) { return static_cast<U>(v); });
    out.b2 = static_cast<U>(b2);
    return out;
  }

  friend bool operator==(const BasicHeadWeights&, const BasicHeadWeights&) = default;
};

using HeadWeights = BasicHeadWeights<float>;

inline constexpr std::size_t kDefaultHidden = 128;

// Multiply-adds of one head evaluation.
inline std::size_t head_macs(std::size_t hidden, std::size_t dim) { return hidden * dim + hidden; }

template <typename T>
double head_forward(std::span<const double> f, const BasicHeadWeights<T>& w, std::vector<double>* pre = nullptr) {
  if (pre) pre->assign(w.hidden, 0.0);
  double q = static_cast<double>(w.b2);
  for (std::size_t h = 0; h < w.hidden; ++h) {
    double z = static_cast<double>(w.b1[h]);
    const T* row = w.w1.data() + h * w.dim;
    for (std::size_t k = 0; k < w.dim; ++k) z += static_cast<double>(row[k]) * f[k];
    if (pre) (*pre)[h] = z;
    if (z > 0.0) q += static_cast<double>(w.w2[h]) * z;
  }
  return q;
}

inline void check_compatible(const FeatureVector& f, std::size_t dim, const std::string& extractor_id) {
  if (f.dim() != dim) {
    throw Error("feature/head mismatch: features have dim " + std::to_string(f.dim()) + ", head expects " +
                std::to_string(dim));
  }
  if (!extractor_id.empty() && !f.extractor_id.empty() && f.extractor_id != extractor_id) {
    throw Error("feature/head mismatch: features from '" + f.extractor_id + "', head trained for '" +
                extractor_id + "'");
  }
}

inline double regress_quality(const FeatureVector& f, const HeadWeights& w) {
  check_compatible(f, w.dim, w.extractor_id);
  return head_forward(std::span<const double>(f.values), w);
}

inline double aggregate_scores(std::span<const double> scores) {
  if (scores.empty()) throw Error("aggregate_scores: empty score list");
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

struct QualityResult {
  std::vector<double> per_projection;
  double aggregate = 0.0;
  std::uint64_t seed = 0;
  std::vector<ViewpointId> viewpoints;
};

inline QualityResult score_projections(std::span<const FeatureVector> features, const HeadWeights& w) {
  QualityResult r;
  for (const auto& f : features) r.per_projection.push_back(regress_quality(f, w));
  r.aggregate = aggregate_scores(r.per_projection);
  return r;
}

// ---------------------------------------------------------------------------
// Training

// One labelled model: the features of its N sampled projections.
struct TrainItem {
  std::vector<FeatureVector> projections;
  double label = 0.0;
};

enum class Optimizer { adam, gradient_descent };

struct TrainConfig {
  double learning_rate = 1e-4;
  double lr_decay = 0.9;  // multiplied in every decay_every epochs
  int decay_every = 5;
  int batch_size = 32;
  int epochs = 50;
  std::size_t hidden = kDefaultHidden;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;
  bool per_projection_loss = false;  // loss on each projection score instead of the item mean
  bool standardize = true;           // train on z-scored features, folded into W1/b1 afterwards
  bool guarded = false;              // full-batch descent, halve the step whenever the loss rises
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    detail::require_config(learning_rate > 0 && std::isfinite(learning_rate), "learning rate must be > 0");
    detail::require_config(lr_decay > 0 && lr_decay <= 1, "lr decay must be in (0,1]");
    detail::require_config(decay_every >= 1 && batch_size >= 1 && epochs >= 1 && hidden >= 1,
                           "decay_every, batch_size, epochs and hidden must be >= 1");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"lr_decay", c.lr_decay},     {"decay_every", c.decay_every},
          {"batch_size", c.batch_size},       {"epochs", c.epochs},         {"hidden", c.hidden},
          {"seed", c.seed},                   {"optimizer", c.optimizer == Optimizer::adam ? "adam" : "gd"},
          {"per_projection_loss", c.per_projection_loss}, {"standardize", c.standardize}};
}

using HeadGradient = BasicHeadWeights<double>;

// Mean squared error over `batch` and its gradient (accumulated into `grad`, which is reset).
// Item prediction is the mean of its projection scores unless per_projection is set.
inline double head_loss_and_gradient(const BasicHeadWeights<double>& w, std::span<const TrainItem* const> batch,
                                     bool per_projection, HeadGradient* grad) {
  if (grad) *grad = HeadGradient(w.hidden, w.dim, w.extractor_id);
  std::size_t denom = 0;
  for (const TrainItem* item : batch) denom += per_projection ? item->projections.size() : 1;
  const double n = static_cast<double>(denom);
  double loss = 0.0;
  std::vector<double> pre;
  std::vector<std::vector<double>> pres;
  std::vector<double> qs;
  for (const TrainItem* item : batch) {
    const std::size_t np = item->projections.size();
    pres.resize(np);
    qs.resize(np);
    for (std::size_t j = 0; j < np; ++j) {
      qs[j] = head_forward(std::span<const double>(item->projections[j].values), w, &pres[j]);
    }
    std::vector<double> dq(np);
    if (per_projection) {
      for (std::size_t j = 0; j < np; ++j) {
        const double r = qs[j] - item->label;
        loss += r * r / n;
        dq[j] = 2.0 * r / n;
      }
    } else {
      const double q = std::accumulate(qs.begin(), qs.end(), 0.0) / static_cast<double>(np);
      const double r = q - item->label;
      loss += r * r / n;
      std::fill(dq.begin(), dq.end(), 2.0 * r / n / static_cast<double>(np));
    }
    if (!grad) continue;
    for (std::size_t j = 0; j < np; ++j) {
      const auto& f = item->projections[j].values;
      grad->b2 += dq[j];
      for (std::size_t h = 0; h < w.hidden; ++h) {
        const double z = pres[j][h];
        if (z <= 0.0) continue;
        grad->w2[h] += dq[j] * z;
        const double dz = dq[j] * w.w2[h];
        grad->b1[h] += dz;
        double* row = grad->w1.data() + h * w.dim;
        for (std::size_t k = 0; k < w.dim; ++k) row[k] += dz * f[k];
      }
    }
  }
  return loss;
}

inline double head_loss(const BasicHeadWeights<double>& w, std::span<const TrainItem> items, bool per_projection) {
  std::vector<const TrainItem*> ptrs;
  for (const auto& it : items) ptrs.push_back(&it);
  return head_loss_and_gradient(w, ptrs, per_projection, nullptr);
}

// Uniform in +-sqrt(6/(fan_in+fan_out)) per layer, biases zero.
inline BasicHeadWeights<double> init_head(std::size_t hidden, std::size_t dim, Rng& rng, std::string extractor_id = {}) {
  BasicHeadWeights<double> w(hidden, dim, std::move(extractor_id));
  const double a1 = std::sqrt(6.0 / static_cast<double>(dim + hidden));
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  for (double& v : w.w1) v = rng.uniform(-a1, a1);
  for (double& v : w.w2) v = rng.uniform(-a2, a2);
  return w;
}

struct TrainResult {
  HeadWeights weights;
  std::vector<double> train_loss;       // per epoch, after the epoch's updates
  std::vector<double> validation_loss;  // per epoch when a validation set was given
  int best_epoch = 0;
};

namespace detail {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(std::span<const TrainItem> items, std::size_t dim) {
    Standardizer s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
    std::size_t count = 0;
    for (const auto& it : items) {
      for (const auto& f : it.projections) {
        for (std::size_t k = 0; k < dim; ++k) s.mean[k] += f.values[k];
        ++count;
      }
    }
    for (double& m : s.mean) m /= static_cast<double>(count);
    std::vector<double> var(dim, 0.0);
    for (const auto& it : items) {
      for (const auto& f : it.projections) {
        for (std::size_t k = 0; k < dim; ++k) var[k] += (f.values[k] - s.mean[k]) * (f.values[k] - s.mean[k]);
      }
    }
    for (std::size_t k = 0; k < dim; ++k) {
      const double sd = std::sqrt(var[k] / static_cast<double>(count));
      s.scale[k] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  std::vector<TrainItem> apply(std::span<const TrainItem> items) const {
    std::vector<TrainItem> out(items.begin(), items.end());
    for (auto& it : out) {
      for (auto& f : it.projections) {
        for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] = (f.values[k] - mean[k]) / scale[k];
      }
    }
    return out;
  }

  // Rewrites a head trained on standardized inputs so it accepts raw features.
  BasicHeadWeights<double> fold(const BasicHeadWeights<double>& w) const {
    BasicHeadWeights<double> out = w;
    for (std::size_t h = 0; h < w.hidden; ++h) {
      double shift = 0.0;
      for (std::size_t k = 0; k < w.dim; ++k) {
        out.weight1(h, k) = w.weight1(h, k) / scale[k];
        shift += w.weight1(h, k) * mean[k] / scale[k];
      }
      out.b1[h] = w.b1[h] - shift;
    }
    return out;
  }
};

inline void check_items(std::span<const TrainItem> items, std::size_t dim, const std::string& id, const char* what) {
  for (const auto& it : items) {
    detail::require(!it.projections.empty(), std::string(what) + " item without projections");
    detail::require(std::isfinite(it.label), std::string(what) + " item with non-finite label");
    for (const auto& f : it.projections) {
      f.validate();
      check_compatible(f, dim, id);
    }
  }
}

}  // namespace detail

// Minimizes the batch MSE over the head parameters. Returns the weights of the epoch with
// the lowest validation loss (training loss when no validation items are given).
inline TrainResult train_head_detailed(std::span<const TrainItem> items, const TrainConfig& cfg,
                                       std::span<const TrainItem> validation = {}) {
  cfg.validate();
  if (items.size() < 2) throw Error("train_head needs at least 2 training items");
  detail::require(!items.front().projections.empty(), "training item without projections");
  const std::size_t dim = items.front().projections.front().dim();
  const std::string id = items.front().projections.front().extractor_id;
  detail::check_items(items, dim, id, "training");
  detail::check_items(validation, dim, id, "validation");

  const detail::Standardizer standardizer =
      cfg.standardize ? detail::Standardizer::fit(items, dim)
                      : detail::Standardizer{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  const std::vector<TrainItem> train = standardizer.apply(items);
  const std::vector<TrainItem> val = standardizer.apply(validation);

  Rng rng(cfg.seed);
  BasicHeadWeights<double> w = init_head(cfg.hidden, dim, rng, id);
  double label_mean = 0.0;
  for (const auto& it : train) label_mean += it.label;
  w.b2 = label_mean / static_cast<double>(train.size());

  const std::size_t np = w.parameter_count();
  std::vector<double> m(np, 0.0), v(np, 0.0);
  long long step = 0;
  auto params = [](BasicHeadWeights<double>& h, std::size_t i) -> double& {
    if (i < h.w1.size()) return h.w1[i];
    i -= h.w1.size();
    if (i < h.b1.size()) return h.b1[i];
    i -= h.b1.size();
    if (i < h.w2.size()) return h.w2[i];
    return h.b2;
  };
  auto gradient_at = [](const HeadGradient& g, std::size_t i) -> double {
    if (i < g.w1.size()) return g.w1[i];
    i -= g.w1.size();
    if (i < g.b1.size()) return g.b1[i];
    i -= g.b1.size();
    if (i < g.w2.size()) return g.w2[i];
    return g.b2;
  };

  std::vector<const TrainItem*> all;
  for (const auto& it : train) all.push_back(&it);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  BasicHeadWeights<double> best = w;
  double best_loss = std::numeric_limits<double>::infinity();
  double guarded_lr = cfg.learning_rate;
  double prev_loss = head_loss(w, train, cfg.per_projection_loss);
  HeadGradient grad;
  std::vector<const TrainItem*> batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, epoch / cfg.decay_every);
    if (cfg.guarded) {
      // Full-batch gradient descent; reject any step that raises the loss.
      head_loss_and_gradient(w, all, cfg.per_projection_loss, &grad);
      for (int attempt = 0; attempt < 60; ++attempt) {
        BasicHeadWeights<double> trial = w;
        for (std::size_t i = 0; i < np; ++i) params(trial, i) -= guarded_lr * gradient_at(grad, i);
        const double loss = head_loss(trial, train, cfg.per_projection_loss);
        if (loss <= prev_loss) {
          w = std::move(trial);
          prev_loss = loss;
          break;
        }
        guarded_lr *= 0.5;
      }
    } else {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        batch.clear();
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        for (std::size_t i = start; i < end; ++i) batch.push_back(&train[order[i]]);
        const double loss = head_loss_and_gradient(w, batch, cfg.per_projection_loss, &grad);
        if (!std::isfinite(loss)) {
          throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting " +
                      std::to_string(start) + " (lr " + std::to_string(lr) + ")");
        }
        ++step;
        for (std::size_t i = 0; i < np; ++i) {
          const double g = gradient_at(grad, i);
          if (cfg.optimizer == Optimizer::adam) {
            m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g;
            const double mhat = m[i] / (1 - std::pow(cfg.beta1, static_cast<double>(step)));
            const double vhat = v[i] / (1 - std::pow(cfg.beta2, static_cast<double>(step)));
            params(w, i) -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
          } else {
            params(w, i) -= lr * g;
          }
        }
      }
      prev_loss = head_loss(w, train, cfg.per_projection_loss);
    }
    if (!std::isfinite(prev_loss)) {
      throw Error("training diverged: non-finite training loss after epoch " + std::to_string(epoch));
    }
    result.train_loss.push_back(prev_loss);
    double selection = prev_loss;
    if (!val.empty()) {
      selection = head_loss(w, val, cfg.per_projection_loss);
      result.validation_loss.push_back(selection);
    }
    if (selection < best_loss) {
      best_loss = selection;
      best = w;
      result.best_epoch = epoch;
    }
  }
  result.weights = standardizer.fold(best).cast<float>();
  result.weights.validate();
  return result;
}

inline HeadWeights train_head(std::span<const TrainItem> items, const TrainConfig& cfg,
                              std::span<const TrainItem> validation = {}) {
  return train_head_detailed(items, cfg, validation).weights;
}

// ---------------------------------------------------------------------------
// Weights file

// JSON whose number_float_t is float: floats are written as shortest round-trip decimals
// and parsed back with strtof, so every parameter survives a save/load exactly.
using Float32Json = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t, std::uint64_t, float>;

inline constexpr int kWeightsSchemaVersion = 1;

inline void save_weights(const HeadWeights& w, const std::filesystem::path& path) {
  w.validate();
  Float32Json j;
  j["schema_version"] = kWeightsSchemaVersion;
  j["extractor_id"] = w.extractor_id;
  j["hidden"] = w.hidden;
  j["dim"] = w.dim;
  Float32Json w1 = Float32Json::array();
  for (std::size_t h = 0; h < w.hidden; ++h) {
    w1.push_back(std::vector<float>(w.w1.begin() + static_cast<std::ptrdiff_t>(h * w.dim),
                                    w.w1.begin() + static_cast<std::ptrdiff_t>((h + 1) * w.dim)));
  }
  j["W1"] = std::move(w1);
  j["b1"] = w.b1;
  j["W2"] = Float32Json::array({w.w2});
  j["b2"] = w.b2;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write weights '" + path.string() + "'");
  out << j.dump() << '\n';
}

inline HeadWeights load_weights(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("weights not found: '" + path.string() + "'");
  std::ifstream in(path);
  Float32Json j;
  try {
    j = Float32Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("cannot parse weights '" + path.string() + "': " + e.what());
  }
  auto bad = [&](const std::string& why) { return Error("invalid weights '" + path.string() + "': " + why); };
  try {
    if (j.value("schema_version", 0) != kWeightsSchemaVersion) throw bad("unsupported schema_version");
    HeadWeights w(j.at("hidden").get<std::size_t>(), j.at("dim").get<std::size_t>(),
                  j.value("extractor_id", std::string()));
    const auto& w1 = j.at("W1");
    if (!w1.is_array() || w1.size() != w.hidden) throw bad("W1 must have 'hidden' rows");
    for (std::size_t h = 0; h < w.hidden; ++h) {
      auto row = w1[h].get<std::vector<float>>();
      if (row.size() != w.dim) throw bad("W1 row " + std::to_string(h) + " must have 'dim' entries");
      std::copy(row.begin(), row.end(), w.w1.begin() + static_cast<std::ptrdiff_t>(h * w.dim));
    }
    w.b1 = j.at("b1").get<std::vector<float>>();
    const auto& w2 = j.at("W2");
    if (!w2.is_array() || w2.size() != 1) throw bad("W2 must be a 1 x hidden matrix");
    w.w2 = w2[0].get<std::vector<float>>();
    w.b2 = j.at("b2").get<float>();
    if (w.b1.size() != w.hidden || w.w2.size() != w.hidden) throw bad("bias/W2 length does not match hidden");
    w.validate();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
}

// Loads and checks the head against the features it will be applied to.
inline HeadWeights load_weights(const std::filesystem::path& path, std::size_t expected_dim,
                                const std::string& extractor_id) {
  HeadWeights w = load_weights(path);
  if (w.dim != expected_dim || (!extractor_id.empty() && !w.extractor_id.empty() && w.extractor_id != extractor_id)) {
    throw Error("weights '" + path.string() + "' were trained for " + w.extractor_id + " (dim " +
                std::to_string(w.dim) + "), not " + extractor_id + " (dim " + std::to_string(expected_dim) + ")");
  }
  return w;
}

}  // namespace eep3dqa
