// SPDX-License-Identifier: Apache-2.0
#pragma once

// Procedural colored point clouds with graded distortions, for tests, benchmarks and the
// desk-scale learnability check.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "eep3dqa/evaluation.hpp"
#include "eep3dqa/model_io.hpp"
#include "eep3dqa/rng.hpp"

namespace eep3dqa::synthetic {

inline constexpr int kShapeCount = 10;

inline const char* shape_name(int shape) {
  constexpr const char* kNames[kShapeCount] = {"sphere",     "cube",    "cylinder", "torus", "cone",
                                               "ellipsoid",  "octahedron", "capsule", "wave", "blob"};
  return kNames[((shape % kShapeCount) + kShapeCount) % kShapeCount];
}

namespace detail {

inline Vec3 unit_sphere_point(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

inline Vec3 surface_point(int shape, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  switch (shape % kShapeCount) {
    case 0: return 0.5 * unit_sphere_point(rng);
    case 1: {
      const int face = static_cast<int>(rng.uniform_index(6));
      const double a = rng.uniform(-0.5, 0.5), b = rng.uniform(-0.5, 0.5);
      const double s = face % 2 ? 0.5 : -0.5;
      if (face < 2) return {s, a, b};
      if (face < 4) return {a, s, b};
      return {a, b, s};
    }
    case 2: {
      const double t = rng.uniform01();
      const double phi = rng.uniform(0.0, 2 * pi);
      if (t < 0.7) return {0.35 * std::cos(phi), rng.uniform(-0.5, 0.5), 0.35 * std::sin(phi)};
      const double r = 0.35 * std::sqrt(rng.uniform01());
      return {r * std::cos(phi), t < 0.85 ? 0.5 : -0.5, r * std::sin(phi)};
    }
    case 3: {
      const double u = rng.uniform(0.0, 2 * pi), v = rng.uniform(0.0, 2 * pi);
      const double big = 0.35, small = 0.13;
      return {(big + small * std::cos(v)) * std::cos(u), small * std::sin(v), (big + small * std::cos(v)) * std::sin(u)};
    }
    case 4: {
      const double h = std::sqrt(rng.uniform01());
      const double phi = rng.uniform(0.0, 2 * pi);
      if (rng.uniform01() < 0.75) return {0.4 * h * std::cos(phi), 0.5 - h, 0.4 * h * std::sin(phi)};
      const double r = 0.4 * std::sqrt(rng.uniform01());
      return {r * std::cos(phi), -0.5, r * std::sin(phi)};
    }
    case 5: {
      const Vec3 p = unit_sphere_point(rng);
      return {0.5 * p.x, 0.3 * p.y, 0.4 * p.z};
    }
    case 6: {
      Vec3 p = unit_sphere_point(rng);
      const double l1 = std::abs(p.x) + std::abs(p.y) + std::abs(p.z);
      return (0.5 / l1) * p;
    }
    case 7: {
      const Vec3 p = unit_sphere_point(rng);
      const double y = p.y * 0.2 + (p.y >= 0 ? 0.25 : -0.25);
      return {0.2 * p.x, std::abs(p.y) < 0.01 ? rng.uniform(-0.25, 0.25) : y, 0.2 * p.z};
    }
    case 8: {
      const double x = rng.uniform(-0.5, 0.5), z = rng.uniform(-0.5, 0.5);
      return {x, 0.1 * std::sin(6 * x) * std::cos(5 * z), z};
    }
    default: {
      const Vec3 d = unit_sphere_point(rng);
      const double r = 0.4 + 0.08 * std::sin(4 * d.x) * std::sin(3 * d.y + 1) + 0.05 * std::cos(5 * d.z);
      return r * d;
    }
  }
}

inline Rgb surface_color(int shape, Vec3 p) {
  const double h = 0.6 * shape;
  const double stripes = 0.5 + 0.5 * std::sin(18.0 * (p.x + 0.7 * p.y) + h);
  const double grad = 0.5 + 0.5 * std::tanh(3.0 * p.z);
  const double r = 0.25 + 0.55 * (0.5 + 0.5 * std::sin(h)) * stripes + 0.2 * grad;
  const double g = 0.25 + 0.55 * (0.5 + 0.5 * std::sin(h + 2.1)) * (1.0 - stripes) + 0.15 * grad;
  const double b = 0.25 + 0.55 * (0.5 + 0.5 * std::sin(h + 4.2)) * stripes + 0.1 * (1.0 - grad);
  return {static_cast<float>(std::clamp(r, 0.0, 1.0)), static_cast<float>(std::clamp(g, 0.0, 1.0)),
          static_cast<float>(std::clamp(b, 0.0, 1.0))};
}

inline float quantize8(double c) { return static_cast<float>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)) / 255.0f; }

}  // namespace detail

// Uniform-ish surface samples of one of the reference shapes, colors quantized to 8 bits.
inline PointCloud reference_cloud(int shape, std::size_t points, std::uint64_t seed) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(shape)));
  PointCloud cloud;
  cloud.positions.reserve(points);
  cloud.colors.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    const Vec3 p = detail::surface_point(shape, rng);
    const Rgb c = detail::surface_color(shape, p);
    cloud.positions.push_back(p);
    cloud.colors.push_back({detail::quantize8(c.r), detail::quantize8(c.g), detail::quantize8(c.b)});
  }
  return cloud;
}

struct DistortionLevel {
  double keep_fraction = 1.0;  // random downsampling
  double geometry_sigma = 0.0;  // model units
  double color_sigma = 0.0;     // in [0,1] color units
};

// Level 0 is pristine; every parameter worsens monotonically with the level.
inline DistortionLevel distortion_for_level(int level) {
  return {1.0 - 0.12 * level, 0.004 * level, 0.035 * level};
}

inline PointCloud distort(const PointCloud& ref, const DistortionLevel& d, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud out;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (rng.uniform01() >= d.keep_fraction) continue;
    const Vec3 p = ref.positions[i];
    out.positions.push_back({p.x + d.geometry_sigma * rng.normal(), p.y + d.geometry_sigma * rng.normal(),
                             p.z + d.geometry_sigma * rng.normal()});
    const Rgb c = ref.colors[i];
    out.colors.push_back({detail::quantize8(c.r + d.color_sigma * rng.normal()),
                          detail::quantize8(c.g + d.color_sigma * rng.normal()),
                          detail::quantize8(c.b + d.color_sigma * rng.normal())});
  }
  if (out.positions.empty()) {
    out.positions.push_back(ref.positions.front());
    out.colors.push_back(ref.colors.front());
  }
  return out;
}

// n x n x n lattice of points with integer coordinates 0..n-1, one color.
inline PointCloud voxel_cube(std::size_t n, Rgb color) {
  PointCloud cloud;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t z = 0; z < n; ++z) {
        cloud.positions.push_back({static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)});
        cloud.colors.push_back(color);
      }
    }
  }
  return cloud;
}

struct DatasetSpec {
  int shapes = kShapeCount;
  int levels = 6;
  std::size_t points = 60000;
  std::uint64_t seed = 1;
};

// Writes <dir>/<shape>_L<level>.ply plus <dir>/dataset.csv. Labels are distortion ranks:
// levels-1 for the pristine cloud down to 0 for the most distorted one.
inline std::vector<DatasetItem> make_dataset(const std::filesystem::path& dir, const DatasetSpec& spec) {
  std::filesystem::create_directories(dir);
  std::vector<DatasetItem> items;
  for (int s = 0; s < spec.shapes; ++s) {
    const PointCloud ref = reference_cloud(s, spec.points, spec.seed);
    for (int level = 0; level < spec.levels; ++level) {
      const PointCloud cloud =
          distort(ref, distortion_for_level(level), mix_seed(spec.seed, 1000u * static_cast<unsigned>(s) + static_cast<unsigned>(level)));
      const std::string name = std::string(shape_name(s)) + "_" + std::to_string(s) + "_L" + std::to_string(level) + ".ply";
      save_point_cloud(dir / name, cloud, PlyEncoding::binary_little_endian, PlyPositionType::f32);
      items.push_back({dir / name, shape_name(s) + std::to_string(s), static_cast<double>(spec.levels - 1 - level)});
    }
  }
  save_dataset_csv(dir / "dataset.csv", items);
  return items;
}

}  // namespace eep3dqa::synthetic
