// SPDX-License-Identifier: Apache-2.0
#pragma once

// Orthographic cube-face rendering of point clouds and textured meshes, plus
// background cropping.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <future>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "eep3dqa/error.hpp"
#include "eep3dqa/geometry.hpp"
#include "eep3dqa/image_io.hpp"
#include "eep3dqa/model_io.hpp"
#include "eep3dqa/raster.hpp"

namespace eep3dqa {

enum class ViewpointId { pos_x, neg_x, pos_y, neg_y, pos_z, neg_z };

inline constexpr std::array<ViewpointId, 6> kAllViewpoints = {
    ViewpointId::pos_x, ViewpointId::neg_x, ViewpointId::pos_y,
    ViewpointId::neg_y, ViewpointId::pos_z, ViewpointId::neg_z,
};

inline std::string_view to_string(ViewpointId vp) {
  constexpr std::array<std::string_view, 6> kNames = {"+X", "-X", "+Y", "-Y", "+Z", "-Z"};
  return kNames[static_cast<std::size_t>(vp)];
}

inline ViewpointId parse_viewpoint(std::string_view s) {
  for (ViewpointId vp : kAllViewpoints) {
    const std::string_view name = to_string(vp);
    if (s.size() == 2 && s[0] == name[0] && std::toupper(static_cast<unsigned char>(s[1])) == name[1]) return vp;
  }
  // Accept the unicode minus and bare axis letters ("X" == "+X"), in either case.
  if (s.size() == 1) return parse_viewpoint(std::string("+") + std::string(s));
  if (s.rfind("−", 0) == 0) return parse_viewpoint("-" + std::string(s.substr(3)));
  throw ConfigError("unknown viewpoint '" + std::string(s) + "' (expected one of +X,-X,+Y,-Y,+Z,-Z)");
}

// Comma-separated list, e.g. "+X,+Z".
inline std::vector<ViewpointId> parse_viewpoint_list(std::string_view s) {
  std::vector<ViewpointId> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string_view item = s.substr(start, comma == s.npos ? s.npos : comma - start);
    if (!item.empty()) out.push_back(parse_viewpoint(item));
    if (comma == s.npos) break;
    start = comma + 1;
  }
  return out;
}

enum class TextureFilter { nearest, bilinear };

struct RenderConfig {
  int viewport = 1024;       // pixels per side
  double padding = 1.1;      // multiplies the framed extent
  int splat_radius = 2;      // pixels, point clouds only
  Rgb background = kWhite;
  TextureFilter texture_filter = TextureFilter::nearest;

  void validate() const {
    detail::require_config(viewport >= 64, "render viewport must be >= 64");
    detail::require_config(std::isfinite(padding) && padding >= 1.0, "render padding must be >= 1");
    detail::require_config(splat_radius >= 0, "splat radius must be >= 0");
  }
};

inline nlohmann::json to_json(const RenderConfig& cfg) {
  return {{"viewport", cfg.viewport},
          {"padding", cfg.padding},
          {"splat_radius", cfg.splat_radius},
          {"background", {cfg.background.r, cfg.background.g, cfg.background.b}},
          {"texture_filter", cfg.texture_filter == TextureFilter::nearest ? "nearest" : "bilinear"}};
}

struct ScreenPoint {
  double x;      // pixels, left to right
  double y;      // pixels, top to bottom
  double depth;  // along the view direction; smaller is nearer
};

// Orthographic camera looking along `forward` at `center`.
struct Camera {
  Vec3 center;
  Vec3 right;
  Vec3 up;
  Vec3 forward;
  double extent = 1.0;  // model units covered by the viewport side
  int viewport = 0;

  ScreenPoint project(Vec3 p) const {
    const Vec3 d = p - center;
    const double scale = viewport / extent;
    return {(dot(d, right) / extent + 0.5) * viewport, (0.5 - dot(d, up) / extent) * viewport,
            dot(d, forward) * scale};
  }
};

inline Camera viewpoint_camera(ViewpointId vp, const AABB& box, const RenderConfig& cfg) {
  cfg.validate();
  if (box.is_point()) throw Error("cannot frame a degenerate (single-point) bounding box");
  Vec3 forward;
  Vec3 up{0, 1, 0};
  switch (vp) {
    case ViewpointId::pos_x: forward = {-1, 0, 0}; break;
    case ViewpointId::neg_x: forward = {1, 0, 0}; break;
    case ViewpointId::pos_y: forward = {0, -1, 0}; up = {0, 0, 1}; break;
    case ViewpointId::neg_y: forward = {0, 1, 0}; up = {0, 0, 1}; break;
    case ViewpointId::pos_z: forward = {0, 0, -1}; break;
    case ViewpointId::neg_z: forward = {0, 0, 1}; break;
  }
  const Vec3 right = cross(forward, up);
  const Vec3 ext = box.extent();
  double in_plane = std::max(std::abs(dot(ext, right)), std::abs(dot(ext, up)));
  // Seen end-on the box collapses; fall back to its largest extent so the view is still framed.
  if (in_plane <= 0.0) in_plane = std::max({ext.x, ext.y, ext.z});
  return {box.center(), right, up, forward, cfg.padding * in_plane, cfg.viewport};
}

struct CropInfo {
  std::size_t offset_x = 0;
  std::size_t offset_y = 0;
  std::size_t original_width = 0;
  std::size_t original_height = 0;
};

struct ProjectionImage {
  RgbImage pixels;
  Mask background_mask;  // 1 where nothing was drawn
  ViewpointId viewpoint = ViewpointId::pos_z;
  CropInfo crop;

  std::size_t width() const noexcept { return pixels.width(); }
  std::size_t height() const noexcept { return pixels.height(); }

  std::size_t foreground_count() const {
    return static_cast<std::size_t>(
        std::count(background_mask.data().begin(), background_mask.data().end(), std::uint8_t{0}));
  }
};

namespace detail {

struct RenderTarget {
  ProjectionImage image;
  std::vector<double> depth;

  RenderTarget(ViewpointId vp, const RenderConfig& cfg) {
    const auto n = static_cast<std::size_t>(cfg.viewport);
    image.pixels = RgbImage(n, n, cfg.background);
    image.background_mask = Mask(n, n, 1);
    image.viewpoint = vp;
    image.crop = {0, 0, n, n};
    depth.assign(n * n, std::numeric_limits<double>::infinity());
  }

  void plot(std::size_t x, std::size_t y, double z, Rgb c) {
    const std::size_t i = y * image.pixels.width() + x;
    if (z < depth[i]) {
      depth[i] = z;
      image.pixels.data()[i] = c;
      image.background_mask.data()[i] = 0;
    }
  }
};

inline double fract(double v) { return v - std::floor(v); }

inline Rgb sample_texture(const RgbImage& tex, Vec2 uv, TextureFilter filter) {
  const double u = fract(uv.u);
  const double v = 1.0 - fract(uv.v);  // row 0 is the top of the image
  const auto w = static_cast<double>(tex.width());
  const auto h = static_cast<double>(tex.height());
  if (filter == TextureFilter::nearest) {
    const auto x = std::min(tex.width() - 1, static_cast<std::size_t>(u * w));
    const auto y = std::min(tex.height() - 1, static_cast<std::size_t>(v * h));
    return tex(x, y);
  }
  const double fx = u * w - 0.5;
  const double fy = v * h - 0.5;
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double tx = fx - x0f;
  const double ty = fy - y0f;
  auto wrap = [](double i, std::size_t n) {
    const auto m = static_cast<long long>(n);
    return static_cast<std::size_t>(((static_cast<long long>(i) % m) + m) % m);
  };
  const std::size_t x0 = wrap(x0f, tex.width()), x1 = wrap(x0f + 1, tex.width());
  const std::size_t y0 = wrap(y0f, tex.height()), y1 = wrap(y0f + 1, tex.height());
  auto mix = [&](float Rgb::*ch) {
    const double top = tex(x0, y0).*ch * (1 - tx) + tex(x1, y0).*ch * tx;
    const double bot = tex(x0, y1).*ch * (1 - tx) + tex(x1, y1).*ch * tx;
    return static_cast<float>(top * (1 - ty) + bot * ty);
  };
  return {mix(&Rgb::r), mix(&Rgb::g), mix(&Rgb::b)};
}

}  // namespace detail

// Splats every point as a screen-space disc of constant depth; nearest point wins per pixel.
inline ProjectionImage render_point_cloud(const PointCloud& cloud, ViewpointId vp, const RenderConfig& cfg) {
  cloud.validate();
  const Camera cam = viewpoint_camera(vp, bounding_box(cloud), cfg);
  detail::RenderTarget target(vp, cfg);

  std::vector<std::pair<int, int>> disc;
  const int r = cfg.splat_radius;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= r * r) disc.emplace_back(dx, dy);
    }
  }
  const int n = cfg.viewport;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const ScreenPoint s = cam.project(cloud.positions[i]);
    const int cx = std::clamp(static_cast<int>(std::floor(s.x)), 0, n - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(s.y)), 0, n - 1);
    for (auto [dx, dy] : disc) {
      const int px = cx + dx;
      const int py = cy + dy;
      if (px < 0 || py < 0 || px >= n || py >= n) continue;
      target.plot(static_cast<std::size_t>(px), static_cast<std::size_t>(py), s.depth, cloud.colors[i]);
    }
  }
  return std::move(target.image);
}

// Unlit rasterization; samples the texture at the barycentric uv of each covered pixel centre.
inline ProjectionImage render_mesh(const TexturedMesh& mesh, ViewpointId vp, const RenderConfig& cfg) {
  mesh.validate();
  const Camera cam = viewpoint_camera(vp, bounding_box(mesh), cfg);
  detail::RenderTarget target(vp, cfg);

  std::vector<ScreenPoint> screen(mesh.vertices.size());
  for (std::size_t i = 0; i < screen.size(); ++i) screen[i] = cam.project(mesh.vertices[i]);

  const double n = cfg.viewport;
  for (const Triangle& tri : mesh.faces) {
    const ScreenPoint& a = screen[tri.v[0]];
    const ScreenPoint& b = screen[tri.v[1]];
    const ScreenPoint& c = screen[tri.v[2]];
    const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (area == 0.0) continue;  // edge-on
    const double x_lo = std::max(0.0, std::floor(std::min({a.x, b.x, c.x})));
    const double x_hi = std::min(n - 1, std::floor(std::max({a.x, b.x, c.x})));
    const double y_lo = std::max(0.0, std::floor(std::min({a.y, b.y, c.y})));
    const double y_hi = std::min(n - 1, std::floor(std::max({a.y, b.y, c.y})));
    const Vec2& ta = mesh.uvs[tri.vt[0]];
    const Vec2& tb = mesh.uvs[tri.vt[1]];
    const Vec2& tc = mesh.uvs[tri.vt[2]];
    for (double py = y_lo; py <= y_hi; ++py) {
      const double y = py + 0.5;
      for (double px = x_lo; px <= x_hi; ++px) {
        const double x = px + 0.5;
        const double w0 = ((b.x - x) * (c.y - y) - (b.y - y) * (c.x - x)) / area;
        const double w1 = ((c.x - x) * (a.y - y) - (c.y - y) * (a.x - x)) / area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double z = w0 * a.depth + w1 * b.depth + w2 * c.depth;
        const Vec2 uv{w0 * ta.u + w1 * tb.u + w2 * tc.u, w0 * ta.v + w1 * tb.v + w2 * tc.v};
        target.plot(static_cast<std::size_t>(px), static_cast<std::size_t>(py), z,
                    detail::sample_texture(mesh.texture, uv, cfg.texture_filter));
      }
    }
  }
  return std::move(target.image);
}

inline ProjectionImage render_view(const Model& model, ViewpointId vp, const RenderConfig& cfg) {
  return std::visit(
      [&](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PointCloud>) {
          return render_point_cloud(m, vp, cfg);
        } else {
          return render_mesh(m, vp, cfg);
        }
      },
      model);
}

// Tight bounding rectangle of the drawn pixels.
inline ProjectionImage crop_background(const ProjectionImage& img) {
  const Mask& mask = img.background_mask;
  std::size_t x0 = mask.width(), y0 = mask.height(), x1 = 0, y1 = 0;
  bool any = false;
  for (std::size_t y = 0; y < mask.height(); ++y) {
    const std::uint8_t* row = mask.row(y);
    for (std::size_t x = 0; x < mask.width(); ++x) {
      if (row[x] == 0) {
        any = true;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (!any) throw Error("empty projection (viewpoint " + std::string(to_string(img.viewpoint)) + ")");
  ProjectionImage out;
  out.viewpoint = img.viewpoint;
  out.pixels = sub_raster(img.pixels, x0, y0, x1 - x0 + 1, y1 - y0 + 1);
  out.background_mask = sub_raster(mask, x0, y0, x1 - x0 + 1, y1 - y0 + 1);
  out.crop = {img.crop.offset_x + x0, img.crop.offset_y + y0, img.crop.original_width, img.crop.original_height};
  return out;
}

// Records which viewpoints were rendered; safe to share between concurrent renders.
class RenderLog {
 public:
  void record(ViewpointId vp) {
    std::lock_guard lock(mu_);
    calls_.push_back(vp);
  }
  std::vector<ViewpointId> calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::size_t count() const {
    std::lock_guard lock(mu_);
    return calls_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<ViewpointId> calls_;
};

struct RenderOptions {
  RenderLog* log = nullptr;
  bool parallel = false;
};

inline void require_distinct_viewpoints(std::span<const ViewpointId> viewpoints) {
  detail::require_config(!viewpoints.empty(), "viewpoint list is empty");
  std::array<bool, 6> seen{};
  for (ViewpointId vp : viewpoints) {
    auto& flag = seen[static_cast<std::size_t>(vp)];
    detail::require_config(!flag, "duplicate viewpoint " + std::string(to_string(vp)));
    flag = true;
  }
}

// Renders and crops exactly the listed viewpoints.
inline std::vector<ProjectionImage> render_selected(const Model& model, std::span<const ViewpointId> viewpoints,
                                                    const RenderConfig& cfg, RenderOptions opts = {}) {
  require_distinct_viewpoints(viewpoints);
  cfg.validate();
  auto one = [&](ViewpointId vp) {
    if (opts.log) opts.log->record(vp);
    return crop_background(render_view(model, vp, cfg));
  };
  std::vector<ProjectionImage> out;
  out.reserve(viewpoints.size());
  if (opts.parallel && viewpoints.size() > 1) {
    std::vector<std::future<ProjectionImage>> jobs;
    for (ViewpointId vp : viewpoints) jobs.push_back(std::async(std::launch::async, one, vp));
    for (auto& j : jobs) out.push_back(j.get());
  } else {
    for (ViewpointId vp : viewpoints) out.push_back(one(vp));
  }
  return out;
}

inline std::string viewpoint_file_stem(ViewpointId vp) {
  std::string s(to_string(vp));
  return (s[0] == '+' ? "pos_" : "neg_") + std::string(1, static_cast<char>(std::tolower(s[1])));
}

// Writes <stem>.png and <stem>.json (viewpoint, crop offsets, original dims, render config).
inline std::filesystem::path export_projection(const ProjectionImage& img, const std::filesystem::path& dir,
                                               const std::string& stem, const RenderConfig& cfg) {
  std::filesystem::create_directories(dir);
  const auto png = dir / (stem + ".png");
  write_png(png, img.pixels);
  nlohmann::json side = {
      {"viewpoint", to_string(img.viewpoint)},
      {"image", png.filename().string()},
      {"width", img.width()},
      {"height", img.height()},
      {"crop_offset", {{"x", img.crop.offset_x}, {"y", img.crop.offset_y}}},
      {"original", {{"width", img.crop.original_width}, {"height", img.crop.original_height}}},
      {"render_config", to_json(cfg)},
  };
  std::ofstream(dir / (stem + ".json")) << side.dump(2) << '\n';
  return png;
}

}  // namespace eep3dqa
