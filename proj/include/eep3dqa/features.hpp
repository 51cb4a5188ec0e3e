// SPDX-License-Identifier: Apache-2.0
#pragma once

// Per-canvas feature extraction: a handcrafted baseline and a bridge to an external
// backend process that exchanges manifest / reply JSON files.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eep3dqa/error.hpp"
#include "eep3dqa/image_io.hpp"
#include "eep3dqa/raster.hpp"
#include "eep3dqa/sampling.hpp"

namespace eep3dqa {

struct FeatureVector {
  std::vector<double> values;
  std::string extractor_id;

  std::size_t dim() const noexcept { return values.size(); }

  void validate() const {
    detail::require(!values.empty(), "feature vector is empty");
    for (double v : values) detail::require(std::isfinite(v), "feature vector has non-finite value");
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct ExtractorSpec {
  enum class Kind { baseline, bridge };
  Kind kind = Kind::baseline;
  // bridge: "backend_cmd" (command template, {manifest} / {reply} substituted),
  //         "backend_dir" (exchange directory)
  std::map<std::string, std::string> parameters;

  std::string param(const std::string& key, const std::string& fallback = {}) const {
    auto it = parameters.find(key);
    return it == parameters.end() ? fallback : it->second;
  }
};

inline ExtractorSpec::Kind parse_extractor_kind(const std::string& s) {
  if (s == "baseline") return ExtractorSpec::Kind::baseline;
  if (s == "bridge") return ExtractorSpec::Kind::bridge;
  throw ConfigError("unknown extractor '" + s + "' (expected baseline or bridge)");
}

// ---------------------------------------------------------------------------
// Baseline extractor
//
// Layout (extractor id "baseline-v1", 12 values):
//   [0..5]  per-cell {luma mean, luma std, mean gradient magnitude, R mean, G mean, B mean},
//           average-pooled over the grid cells; gradients use forward differences that
//           stay inside the cell
//   [6..11] the same six statistics over the whole canvas, gradients crossing cell seams
// Luma uses the Rec.601 weights.

inline constexpr const char* kBaselineExtractorId = "baseline-v1";
inline constexpr std::size_t kBaselineDim = 12;

inline Raster<double> luma(const RgbImage& img) {
  Raster<double> out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb& p = img.data()[i];
    out.data()[i] = 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
  }
  return out;
}

// |(L(x+1,y) - L(x,y), L(x,y+1) - L(x,y))| restricted to the window; differences that
// would leave the window are zero.
inline Raster<double> gradient_magnitude(const Raster<double>& l, std::size_t x0, std::size_t y0, std::size_t w,
                                         std::size_t h) {
  Raster<double> g(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double c = l(x0 + x, y0 + y);
      const double gx = x + 1 < w ? l(x0 + x + 1, y0 + y) - c : 0.0;
      const double gy = y + 1 < h ? l(x0 + x, y0 + y + 1) - c : 0.0;
      g(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return g;
}

namespace detail {

inline std::array<double, 6> window_stats(const RgbImage& img, const Raster<double>& l, std::size_t x0,
                                          std::size_t y0, std::size_t w, std::size_t h) {
  double sum = 0, r = 0, g = 0, b = 0;
  for (std::size_t y = y0; y < y0 + h; ++y) {
    for (std::size_t x = x0; x < x0 + w; ++x) {
      sum += l(x, y);
      r += img(x, y).r;
      g += img(x, y).g;
      b += img(x, y).b;
    }
  }
  const auto n = static_cast<double>(w * h);
  const double mean = sum / n;
  // Two passes: flat windows give exactly zero spread.
  double var = 0;
  for (std::size_t y = y0; y < y0 + h; ++y) {
    for (std::size_t x = x0; x < x0 + w; ++x) var += (l(x, y) - mean) * (l(x, y) - mean);
  }
  var /= n;
  const Raster<double> grad = gradient_magnitude(l, x0, y0, w, h);
  double grad_sum = 0;
  for (double v : grad.data()) grad_sum += v;
  return {mean, std::sqrt(var), grad_sum / n, r / n, g / n, b / n};
}

}  // namespace detail

inline FeatureVector baseline_features(const RgbImage& canvas, const GridSpec& grid) {
  grid.validate();
  if (canvas.width() != grid.canvas_width() || canvas.height() != grid.canvas_height()) {
    throw Error("baseline_features: canvas " + std::to_string(canvas.width()) + "x" +
                std::to_string(canvas.height()) + " does not match grid " + to_string(grid));
  }
  const Raster<double> l = luma(canvas);
  FeatureVector f;
  f.extractor_id = kBaselineExtractorId;
  f.values.assign(kBaselineDim, 0.0);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const auto s = detail::window_stats(canvas, l, c * grid.patch, r * grid.patch, grid.patch, grid.patch);
      for (std::size_t k = 0; k < 6; ++k) f.values[k] += s[k];
    }
  }
  const auto cells = static_cast<double>(grid.rows * grid.cols);
  for (std::size_t k = 0; k < 6; ++k) f.values[k] /= cells;
  const auto g = detail::window_stats(canvas, l, 0, 0, canvas.width(), canvas.height());
  std::copy(g.begin(), g.end(), f.values.begin() + 6);
  return f;
}

// ---------------------------------------------------------------------------
// Backend bridge

struct BackendEntry {
  std::string canvas_path;
  std::optional<std::vector<double>> features;
  std::optional<double> score;
};

struct BackendReply {
  std::string extractor_id;
  std::optional<std::size_t> dim;
  std::vector<BackendEntry> entries;
  std::optional<double> gflops;
  std::optional<double> params_m;

  bool has_features() const {
    return !entries.empty() &&
           std::all_of(entries.begin(), entries.end(), [](const BackendEntry& e) { return e.features.has_value(); });
  }
  bool has_scores() const {
    return !entries.empty() &&
           std::all_of(entries.begin(), entries.end(), [](const BackendEntry& e) { return e.score.has_value(); });
  }
};

// Writes canvas_<j>_<viewpoint>.png per canvas plus manifest.json into `dir`; returns the
// manifest path. Canvas paths in the manifest are relative to it.
inline std::filesystem::path write_manifest(const SampledProjectionSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t j = 0; j < set.size(); ++j) {
    const std::string name = "canvas_" + std::to_string(j) + "_" + viewpoint_file_stem(set.viewpoints[j]) + ".png";
    write_png(dir / name, set.canvases[j]);
    entries.push_back({{"viewpoint", to_string(set.viewpoints[j])}, {"canvas_path", name}});
  }
  const nlohmann::json manifest = {
      {"model_id", set.model_id},
      {"seed", set.seed},
      {"grid", {{"rows", set.grid.rows}, {"cols", set.grid.cols}, {"patch", set.grid.patch}}},
      {"entries", entries},
  };
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path.string() + "'");
  out << manifest.dump(2) << '\n';
  return path;
}

inline BackendReply parse_backend_reply(const std::string& text, std::size_t expected_entries,
                                        const std::string& where = "<reply>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed backend reply " + where + " (non-finite or invalid JSON): " + e.what());
  }
  auto bad = [&](const std::string& why) { return Error("invalid backend reply " + where + ": " + why); };
  auto number = [&](const nlohmann::json& v, const std::string& what) {
    if (!v.is_number()) throw bad(what + " is not a finite number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw bad(what + " is not a finite number");
    return d;
  };
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array()) throw bad("missing entries array");
  BackendReply reply;
  reply.extractor_id = j.value("extractor_id", std::string("backend"));
  if (j.contains("dim") && !j["dim"].is_null()) reply.dim = j["dim"].get<std::size_t>();
  if (j.contains("gflops") && !j["gflops"].is_null()) reply.gflops = number(j["gflops"], "gflops");
  if (j.contains("params_m") && !j["params_m"].is_null()) reply.params_m = number(j["params_m"], "params_m");
  if (j.contains("error")) throw bad("backend reported: " + j["error"].dump());
  if (j["entries"].size() != expected_entries) {
    throw bad("entry count mismatch: expected " + std::to_string(expected_entries) + ", got " +
              std::to_string(j["entries"].size()));
  }
  for (std::size_t i = 0; i < j["entries"].size(); ++i) {
    const auto& e = j["entries"][i];
    const std::string tag = "entry " + std::to_string(i);
    if (e.contains("error")) throw bad(tag + ": " + e["error"].dump());
    BackendEntry entry;
    entry.canvas_path = e.value("canvas_path", std::string());
    if (e.contains("features")) {
      if (!e["features"].is_array() || e["features"].empty()) throw bad(tag + ": features must be a non-empty array");
      std::vector<double> values;
      for (const auto& v : e["features"]) values.push_back(number(v, tag + " feature"));
      entry.features = std::move(values);
    }
    if (e.contains("score")) entry.score = number(e["score"], tag + " score");
    if (!entry.features && !entry.score) throw bad(tag + ": neither features nor score");
    reply.entries.push_back(std::move(entry));
  }
  if (reply.has_features()) {
    const std::size_t d = reply.entries.front().features->size();
    for (const auto& e : reply.entries) {
      if (e.features->size() != d) throw bad("feature dimension differs between entries");
    }
    if (reply.dim && *reply.dim != d) throw bad("reported dim does not match feature width");
    reply.dim = d;
  }
  return reply;
}

inline BackendReply read_backend_reply(const std::filesystem::path& path, std::size_t expected_entries) {
  std::ifstream in(path);
  if (!in) throw Error("backend reply not found: '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_backend_reply(ss.str(), expected_entries, "'" + path.string() + "'");
}

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

inline void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace detail

// One batched exchange: manifest out, backend command, reply in.
inline BackendReply bridge_exchange(const SampledProjectionSet& set, const ExtractorSpec& spec) {
  const std::string cmd_template = spec.param("backend_cmd");
  if (cmd_template.empty()) throw ConfigError("bridge extractor requires a backend command (backend_cmd)");
  const std::filesystem::path dir = spec.param("backend_dir", (std::filesystem::temp_directory_path() / "eep3dqa_bridge").string());
  const auto manifest = write_manifest(set, dir);
  const auto reply = dir / "reply.json";
  const auto log = dir / "backend.log";
  std::filesystem::remove(reply);
  std::string cmd = cmd_template;
  if (cmd.find("{manifest}") == std::string::npos && cmd.find("{reply}") == std::string::npos) {
    cmd += " {manifest} {reply}";
  }
  detail::replace_all(cmd, "{manifest}", detail::shell_quote(manifest.string()));
  detail::replace_all(cmd, "{reply}", detail::shell_quote(reply.string()));
  cmd += " > " + detail::shell_quote(log.string()) + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status != 0 || !std::filesystem::exists(reply)) {
    std::ifstream in(log);
    std::stringstream diag;
    diag << in.rdbuf();
    throw Error("backend unreachable or failed (status " + std::to_string(status) + "): " + diag.str());
  }
  return read_backend_reply(reply, set.size());
}

inline std::vector<FeatureVector> features_from_reply(const BackendReply& reply) {
  if (!reply.has_features()) throw Error("backend reply carries no features");
  std::vector<FeatureVector> out;
  for (const auto& e : reply.entries) out.push_back({*e.features, reply.extractor_id});
  return out;
}

// One vector per canvas, in canvas order.
inline std::vector<FeatureVector> extract_features(const SampledProjectionSet& set, const ExtractorSpec& spec) {
  if (spec.kind == ExtractorSpec::Kind::bridge) return features_from_reply(bridge_exchange(set, spec));
  std::vector<FeatureVector> out;
  out.reserve(set.size());
  for (const RgbImage& canvas : set.canvases) out.push_back(baseline_features(canvas, set.grid));
  return out;
}

}  // namespace eep3dqa
