// SPDX-License-Identifier: Apache-2.0
#pragma once

// Random projection sampling (pick N of the 6 cube faces, render only those) and grid
// mini-patch sampling (one random patch per uniform grid cell, spliced into a canvas).

#include <array>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "eep3dqa/error.hpp"
#include "eep3dqa/projection.hpp"
#include "eep3dqa/raster.hpp"
#include "eep3dqa/rng.hpp"

namespace eep3dqa {

struct GridSpec {
  std::size_t rows = 7;
  std::size_t cols = 7;
  std::size_t patch = 32;

  std::size_t canvas_width() const noexcept { return cols * patch; }
  std::size_t canvas_height() const noexcept { return rows * patch; }

  void validate() const {
    detail::require_config(rows >= 1 && cols >= 1 && patch >= 1, "grid rows, cols and patch must be >= 1");
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// "RxCxP", e.g. "7x7x32".
inline GridSpec parse_grid_spec(std::string_view s) {
  std::array<std::size_t, 3> v{};
  std::size_t idx = 0;
  const char* p = s.data();
  const char* end = s.data() + s.size();
  while (idx < 3) {
    auto [ptr, ec] = std::from_chars(p, end, v[idx]);
    if (ec != std::errc{}) break;
    ++idx;
    p = ptr;
    if (idx < 3) {
      if (p == end || (*p != 'x' && *p != 'X')) break;
      ++p;
    }
  }
  if (idx != 3 || p != end) throw ConfigError("bad grid spec '" + std::string(s) + "' (expected RxCxP)");
  GridSpec g{v[0], v[1], v[2]};
  g.validate();
  return g;
}

inline std::string to_string(const GridSpec& g) {
  return std::to_string(g.rows) + "x" + std::to_string(g.cols) + "x" + std::to_string(g.patch);
}

// n distinct viewpoints drawn without replacement (partial Fisher-Yates), so every
// n-subset is equally likely. Returned in draw order.
inline std::vector<ViewpointId> sample_viewpoints(int n, Rng& rng) {
  if (n < 1 || n > 6) throw ConfigError("projection count must be in 1..6, got " + std::to_string(n));
  std::array<ViewpointId, 6> pool = kAllViewpoints;
  for (int i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.uniform_index(6 - static_cast<std::uint64_t>(i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  return {pool.begin(), pool.begin() + n};
}

// Top-left source corner of the patch taken from one grid cell.
struct PatchOffset {
  std::size_t cell_row = 0;
  std::size_t cell_col = 0;
  std::size_t x = 0;
  std::size_t y = 0;

  friend bool operator==(const PatchOffset&, const PatchOffset&) = default;
};

// Integer cell boundary i of n uniform cells over `length` pixels.
inline std::size_t cell_edge(std::size_t i, std::size_t n, std::size_t length) { return i * length / n; }

inline void require_fits_grid(std::size_t width, std::size_t height, const GridSpec& grid) {
  grid.validate();
  if (width < grid.canvas_width() || height < grid.canvas_height()) {
    throw Error("image too small for grid: " + std::to_string(width) + "x" + std::to_string(height) +
                " < " + std::to_string(grid.canvas_width()) + "x" + std::to_string(grid.canvas_height()));
  }
}

// Draws one window per cell in row-major order (y then x within a cell). Each window lies
// entirely inside its cell and every such position is equally likely.
inline std::vector<PatchOffset> draw_patch_offsets(std::size_t width, std::size_t height, const GridSpec& grid,
                                                   Rng& rng) {
  require_fits_grid(width, height, grid);
  std::vector<PatchOffset> offsets;
  offsets.reserve(grid.rows * grid.cols);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    const std::size_t y0 = cell_edge(r, grid.rows, height);
    const std::size_t y1 = cell_edge(r + 1, grid.rows, height);
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const std::size_t x0 = cell_edge(c, grid.cols, width);
      const std::size_t x1 = cell_edge(c + 1, grid.cols, width);
      const std::size_t oy = y0 + rng.uniform_index(y1 - y0 - grid.patch + 1);
      const std::size_t ox = x0 + rng.uniform_index(x1 - x0 - grid.patch + 1);
      offsets.push_back({r, c, ox, oy});
    }
  }
  return offsets;
}

// Copies each recorded window into its cell slot of the output canvas.
template <typename T>
Raster<T> splice_patches(const Raster<T>& img, const GridSpec& grid, const std::vector<PatchOffset>& offsets) {
  require_fits_grid(img.width(), img.height(), grid);
  detail::require(offsets.size() == grid.rows * grid.cols, "splice_patches: offset count does not match grid");
  Raster<T> out(grid.canvas_width(), grid.canvas_height());
  for (const PatchOffset& o : offsets) {
    detail::require(o.x + grid.patch <= img.width() && o.y + grid.patch <= img.height(),
                    "splice_patches: window out of bounds");
    for (std::size_t dy = 0; dy < grid.patch; ++dy) {
      std::copy_n(img.row(o.y + dy) + o.x, grid.patch, out.row(o.cell_row * grid.patch + dy) + o.cell_col * grid.patch);
    }
  }
  return out;
}

template <typename T>
Raster<T> grid_mini_patch(const Raster<T>& img, const GridSpec& grid, Rng& rng,
                          std::vector<PatchOffset>* trace = nullptr) {
  auto offsets = draw_patch_offsets(img.width(), img.height(), grid, rng);
  Raster<T> out = splice_patches(img, grid, offsets);
  if (trace) *trace = std::move(offsets);
  return out;
}

// Nearest-neighbour stretch of any dimension shorter than the canvas up to exactly the
// canvas size; dimensions already large enough are untouched.
template <typename T>
Raster<T> fit_for_grid(const Raster<T>& img, const GridSpec& grid) {
  const std::size_t w = std::max(img.width(), grid.canvas_width());
  const std::size_t h = std::max(img.height(), grid.canvas_height());
  if (w == img.width() && h == img.height()) return img;
  return resize_nearest(img, w, h);
}

struct SamplingOptions {
  bool rps = true;                            // false: use fixed_viewpoints
  std::vector<ViewpointId> fixed_viewpoints;  // required when rps is off
  bool gms = true;                            // false: bilinear resize to the canvas
  bool parallel = false;
  RenderLog* log = nullptr;
};

struct SampledProjectionSet {
  std::string model_id;
  std::vector<RgbImage> canvases;
  std::vector<ViewpointId> viewpoints;
  std::vector<std::vector<PatchOffset>> offsets;  // empty entries when GMS is off
  std::uint64_t seed = 0;
  GridSpec grid;

  std::size_t size() const noexcept { return canvases.size(); }
  friend bool operator==(const SampledProjectionSet&, const SampledProjectionSet&) = default;
};

// Canvas from an already cropped projection: GMS (with upscaling when too small) or resize.
inline RgbImage canvas_from_projection(const ProjectionImage& cropped, const GridSpec& grid, bool gms, Rng& rng,
                                       std::vector<PatchOffset>* trace = nullptr) {
  if (!gms) return resize_bilinear(cropped.pixels, grid.canvas_width(), grid.canvas_height());
  return grid_mini_patch(fit_for_grid(cropped.pixels, grid), grid, rng, trace);
}

// Draw viewpoints, render and crop only those, then one canvas per projection. The rng is
// consumed for the viewpoint draw first, then for patch offsets projection by projection.
inline SampledProjectionSet sample_projection_set(const Model& model, int n, const GridSpec& grid,
                                                  const RenderConfig& cfg, Rng& rng,
                                                  const SamplingOptions& opts = {}) {
  grid.validate();
  SampledProjectionSet set;
  set.seed = rng.seed();
  set.grid = grid;
  if (opts.rps) {
    set.viewpoints = sample_viewpoints(n, rng);
  } else {
    detail::require_config(!opts.fixed_viewpoints.empty(), "RPS disabled but no fixed viewpoint list given");
    set.viewpoints = opts.fixed_viewpoints;
  }
  const auto projections = render_selected(model, set.viewpoints, cfg, {opts.log, opts.parallel});
  for (const ProjectionImage& p : projections) {
    std::vector<PatchOffset> trace;
    set.canvases.push_back(canvas_from_projection(p, grid, opts.gms, rng, &trace));
    set.offsets.push_back(std::move(trace));
  }
  return set;
}

}  // namespace eep3dqa
