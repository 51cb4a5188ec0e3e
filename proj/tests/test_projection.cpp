// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <limits>
#include <set>

#include "json.hpp"

#include "eep3dqa/projection.hpp"
#include "eep3dqa/synthetic.hpp"
#include "test_util.hpp"

using namespace eep3dqa;

namespace {

PointCloud cloud_of(std::vector<Vec3> pts, std::vector<Rgb> colors) {
  PointCloud pc;
  pc.positions = std::move(pts);
  pc.colors = std::move(colors);
  return pc;
}

PointCloud random_cloud(std::size_t n, Rng& rng, bool quantize_depth) {
  PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    // Coarse depth lattice forces plenty of exact depth ties.
    const double z = quantize_depth ? static_cast<double>(rng.uniform_index(4)) : rng.uniform(-1, 1);
    pc.positions.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), z});
    pc.colors.push_back(rgb_from_u8(static_cast<std::uint8_t>(rng.uniform_index(256)), 0,
                                    static_cast<std::uint8_t>(i % 256)));
  }
  return pc;
}

// Per pixel, scan every point: nearest covering splat wins, earlier index on exact ties.
RgbImage brute_force_render(const PointCloud& pc, ViewpointId vp, const RenderConfig& cfg) {
  const Camera cam = viewpoint_camera(vp, bounding_box(pc), cfg);
  const int n = cfg.viewport;
  const int r = cfg.splat_radius;
  std::vector<std::pair<int, int>> centers;
  std::vector<double> depth;
  for (const Vec3& p : pc.positions) {
    const ScreenPoint s = cam.project(p);
    centers.emplace_back(std::clamp(static_cast<int>(std::floor(s.x)), 0, n - 1),
                         std::clamp(static_cast<int>(std::floor(s.y)), 0, n - 1));
    depth.push_back(s.depth);
  }
  RgbImage out(static_cast<std::size_t>(n), static_cast<std::size_t>(n), cfg.background);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t winner = pc.size();
      for (std::size_t i = 0; i < pc.size(); ++i) {
        const int dx = x - centers[i].first, dy = y - centers[i].second;
        if (dx * dx + dy * dy > r * r) continue;
        if (depth[i] < best) {
          best = depth[i];
          winner = i;
        }
      }
      if (winner < pc.size()) out(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = pc.colors[winner];
    }
  }
  return out;
}

std::size_t count_color(const RgbImage& img, Rgb c) {
  return static_cast<std::size_t>(std::count(img.data().begin(), img.data().end(), c));
}

TexturedMesh quad_mesh(RgbImage texture) {
  TexturedMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  m.uvs = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.faces = {{{0, 1, 2}, {0, 1, 2}}, {{0, 2, 3}, {0, 2, 3}}};
  m.texture = std::move(texture);
  return m;
}

}  // namespace

TEST(Viewpoints, ParseAndName) {
  EXPECT_EQ(parse_viewpoint("+X"), ViewpointId::pos_x);
  EXPECT_EQ(parse_viewpoint("-z"), ViewpointId::neg_z);
  EXPECT_EQ(parse_viewpoint_list("+X,+Z"), (std::vector<ViewpointId>{ViewpointId::pos_x, ViewpointId::pos_z}));
  EXPECT_THROW(parse_viewpoint("+W"), ConfigError);
  for (ViewpointId vp : kAllViewpoints) EXPECT_EQ(parse_viewpoint(to_string(vp)), vp);
  EXPECT_EQ(viewpoint_file_stem(ViewpointId::neg_y), "neg_y");
}

TEST(Camera, UnitCubeFramingPaddingOne) {
  RenderConfig cfg;
  cfg.viewport = 100;
  cfg.padding = 1.0;
  const Camera cam = viewpoint_camera(ViewpointId::pos_z, AABB{{0, 0, 0}, {1, 1, 1}}, cfg);
  const ScreenPoint lo = cam.project({0, 0, 0});
  const ScreenPoint hi = cam.project({1, 1, 0});
  EXPECT_DOUBLE_EQ(lo.x, 0.0);
  EXPECT_DOUBLE_EQ(lo.y, 100.0);  // model y up, image y down
  EXPECT_DOUBLE_EQ(hi.x, 100.0);
  EXPECT_DOUBLE_EQ(hi.y, 0.0);
  // +Z camera sits at +Z looking down -Z: larger z is nearer.
  EXPECT_LT(cam.project({0, 0, 1}).depth, cam.project({0, 0, 0}).depth);
}

TEST(Camera, PaddedSilhouetteSpan) {
  RenderConfig cfg;
  cfg.viewport = 1000;
  cfg.splat_radius = 0;
  const PointCloud corners = cloud_of({{0, 0, 0}, {1, 1, 1}, {0, 1, 0}, {1, 0, 1}}, {kBlack, kBlack, kBlack, kBlack});
  const ProjectionImage img = crop_background(render_point_cloud(corners, ViewpointId::pos_z, cfg));
  const double expected = 1000.0 / 1.1;
  EXPECT_NEAR(static_cast<double>(img.width()), expected, 1.0);
  EXPECT_NEAR(static_cast<double>(img.height()), expected, 1.0);
}

TEST(Camera, DegenerateBoxRejected) {
  EXPECT_THROW(viewpoint_camera(ViewpointId::pos_z, AABB{{2, 3, 4}, {2, 3, 4}}, RenderConfig{}), Error);
  const PointCloud one = cloud_of({{2, 3, 4}}, {kBlack});
  EXPECT_THROW(render_point_cloud(one, ViewpointId::pos_x, RenderConfig{}), Error);
}

TEST(RenderConfig, Validation) {
  RenderConfig c;
  c.viewport = 32;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.padding = 0.9;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.splat_radius = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(PointRender, CenterPointLandsInImageCenter) {
  RenderConfig cfg;
  const PointCloud pc = cloud_of({{0, 0, 0}, {1, 1, 1}, {0.5, 0.5, 0.5}}, {kBlack, kBlack, Rgb{1, 0, 0}});
  const ProjectionImage img = render_point_cloud(pc, ViewpointId::pos_z, cfg);
  double sx = 0, sy = 0, n = 0;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      if (img.pixels(x, y) == Rgb{1, 0, 0}) {
        sx += static_cast<double>(x) + 0.5;
        sy += static_cast<double>(y) + 0.5;
        n += 1;
      }
    }
  }
  ASSERT_GT(n, 0);
  EXPECT_NEAR(sx / n, cfg.viewport / 2.0, 1.0);
  EXPECT_NEAR(sy / n, cfg.viewport / 2.0, 1.0);
}

TEST(PointRender, NearerPointWins) {
  const Rgb red{1, 0, 0}, blue{0, 0, 1};
  RenderConfig cfg;
  cfg.viewport = 64;
  for (bool red_first : {true, false}) {
    const PointCloud pc = red_first ? cloud_of({{0, 0, 1}, {0, 0, 0}}, {red, blue})
                                    : cloud_of({{0, 0, 0}, {0, 0, 1}}, {blue, red});
    const ProjectionImage front = render_point_cloud(pc, ViewpointId::pos_z, cfg);
    EXPECT_GT(count_color(front.pixels, red), 0u);
    EXPECT_EQ(count_color(front.pixels, blue), 0u);
    const ProjectionImage back = render_point_cloud(pc, ViewpointId::neg_z, cfg);
    EXPECT_GT(count_color(back.pixels, blue), 0u);
    EXPECT_EQ(count_color(back.pixels, red), 0u);
  }
}

TEST(PointRender, MatchesBruteForceZBuffer) {
  Rng rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(1000);
    const PointCloud pc = random_cloud(n, rng, trial % 2 == 0);
    RenderConfig cfg;
    cfg.viewport = 64 + static_cast<int>(rng.uniform_index(32));
    cfg.splat_radius = static_cast<int>(rng.uniform_index(4));
    const ViewpointId vp = kAllViewpoints[static_cast<std::size_t>(trial) % 6];
    const ProjectionImage img = render_point_cloud(pc, vp, cfg);
    EXPECT_EQ(img.pixels, brute_force_render(pc, vp, cfg)) << "trial " << trial;
  }
}

TEST(PointRender, VoxelCubeSilhouettesEqual) {
  RenderConfig cfg;
  cfg.viewport = 64;
  const PointCloud cube = synthetic::voxel_cube(16, Rgb{0.2f, 0.4f, 0.6f});
  std::set<std::size_t> counts;
  for (ViewpointId vp : kAllViewpoints) counts.insert(render_point_cloud(cube, vp, cfg).foreground_count());
  EXPECT_EQ(counts.size(), 1u);
  EXPECT_GT(*counts.begin(), 0u);
}

TEST(PointRender, NoInventedColors) {
  const Rgb c = rgb_from_u8(10, 200, 77);
  Rng rng(3);
  PointCloud pc = random_cloud(500, rng, false);
  std::fill(pc.colors.begin(), pc.colors.end(), c);
  for (ViewpointId vp : kAllViewpoints) {
    const ProjectionImage img = render_point_cloud(pc, vp, RenderConfig{});
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      const bool bg = img.background_mask.data()[i] != 0;
      ASSERT_EQ(img.pixels.data()[i], bg ? kWhite : c);
    }
  }
}

TEST(MeshRender, UniformTextureCoversWithExactColor) {
  const Rgb red{1, 0, 0};
  TexturedMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.uvs = {{0, 0}, {1, 0}, {0, 1}};
  m.faces = {{{0, 1, 2}, {0, 1, 2}}};
  m.texture = RgbImage(1, 1, red);
  RenderConfig cfg;
  cfg.viewport = 128;
  const ProjectionImage img = render_mesh(m, ViewpointId::pos_z, cfg);
  EXPECT_GT(img.foreground_count(), 128u * 128u / 4);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    ASSERT_EQ(img.pixels.data()[i], img.background_mask.data()[i] ? kWhite : red);
  }
}

TEST(MeshRender, NearerTriangleWinsOverlap) {
  const Rgb red{1, 0, 0}, green{0, 1, 0};
  TexturedMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 0.5}, {1, 0, 0.5}, {0, 1, 0.5}};
  m.uvs = {{0.25, 0.5}, {0.75, 0.5}};
  m.faces = {{{3, 4, 5}, {1, 1, 1}}, {{0, 1, 2}, {0, 0, 0}}};  // green first, red behind it
  m.texture = RgbImage(2, 1);
  m.texture(0, 0) = red;
  m.texture(1, 0) = green;
  RenderConfig cfg;
  cfg.viewport = 96;
  const ProjectionImage front = render_mesh(m, ViewpointId::pos_z, cfg);
  EXPECT_GT(count_color(front.pixels, green), 0u);
  EXPECT_EQ(count_color(front.pixels, red), 0u);
  const ProjectionImage back = render_mesh(m, ViewpointId::neg_z, cfg);
  EXPECT_GT(count_color(back.pixels, red), 0u);
  EXPECT_EQ(count_color(back.pixels, green), 0u);
}

TEST(MeshRender, CheckerboardQuadrants) {
  const Rgb a{1, 0, 0}, b{0, 1, 0}, c{0, 0, 1}, d{1, 1, 0};
  RgbImage tex(2, 2);
  tex(0, 0) = a;  // top-left of the texture image
  tex(1, 0) = b;
  tex(0, 1) = c;
  tex(1, 1) = d;
  RenderConfig cfg;
  cfg.viewport = 100;
  cfg.padding = 1.0;
  const ProjectionImage img = crop_background(render_mesh(quad_mesh(tex), ViewpointId::pos_z, cfg));
  ASSERT_EQ(img.width(), 100u);
  ASSERT_EQ(img.height(), 100u);
  EXPECT_EQ(img.pixels(25, 25), a);
  EXPECT_EQ(img.pixels(75, 25), b);
  EXPECT_EQ(img.pixels(25, 75), c);
  EXPECT_EQ(img.pixels(75, 75), d);
}

TEST(MeshRender, UvWrapsAndNoInventedColors) {
  RgbImage tex(2, 2);
  tex(0, 0) = Rgb{1, 0, 0};
  tex(1, 0) = Rgb{0, 1, 0};
  tex(0, 1) = Rgb{0, 0, 1};
  tex(1, 1) = Rgb{0, 0, 0};
  TexturedMesh m = quad_mesh(tex);
  for (auto& uv : m.uvs) uv = {uv.u * 3 - 1, uv.v * 3 + 2};  // repeats outside [0,1]
  const ProjectionImage img = render_mesh(m, ViewpointId::pos_z, RenderConfig{});
  std::set<std::tuple<float, float, float>> allowed;
  for (const Rgb& t : tex.data()) allowed.insert({t.r, t.g, t.b});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (img.background_mask.data()[i]) continue;
    const Rgb p = img.pixels.data()[i];
    ASSERT_TRUE(allowed.count({p.r, p.g, p.b}));
  }
}

TEST(Crop, TightBoundingBox) {
  ProjectionImage img;
  img.pixels = RgbImage(100, 100, kWhite);
  img.background_mask = Mask(100, 100, 1);
  img.crop = {0, 0, 100, 100};
  for (std::size_t y = 10; y <= 20; ++y) {
    for (std::size_t x = 30; x <= 40; ++x) {
      img.pixels(x, y) = kBlack;
      img.background_mask(x, y) = 0;
    }
  }
  const ProjectionImage c = crop_background(img);
  EXPECT_EQ(c.width(), 11u);
  EXPECT_EQ(c.height(), 11u);
  EXPECT_EQ(c.crop.offset_x, 30u);
  EXPECT_EQ(c.crop.offset_y, 10u);
  EXPECT_EQ(c.crop.original_width, 100u);
}

TEST(Crop, FullFrameUnchangedAndEmptyRejected) {
  ProjectionImage img;
  Rng rng(8);
  img.pixels = testutil::random_image(20, 10, rng);
  img.background_mask = Mask(20, 10, 0);
  const ProjectionImage c = crop_background(img);
  EXPECT_EQ(c.pixels, img.pixels);

  img.pixels = RgbImage(20, 10, kWhite);
  img.background_mask = Mask(20, 10, 1);
  EXPECT_THROW(crop_background(img), Error);
}

TEST(Crop, Idempotent) {
  Rng rng(9);
  const PointCloud pc = random_cloud(300, rng, false);
  for (ViewpointId vp : kAllViewpoints) {
    const ProjectionImage once = crop_background(render_point_cloud(pc, vp, RenderConfig{}));
    const ProjectionImage twice = crop_background(once);
    EXPECT_EQ(once.pixels, twice.pixels);
    EXPECT_EQ(once.background_mask, twice.background_mask);
    EXPECT_EQ(once.crop.offset_x, twice.crop.offset_x);
    EXPECT_EQ(once.crop.offset_y, twice.crop.offset_y);
  }
}

TEST(RenderSelected, LazyAndValidated) {
  Rng rng(10);
  const Model model = random_cloud(200, rng, false);
  RenderConfig cfg;
  cfg.viewport = 128;
  {
    RenderLog log;
    const auto all = render_selected(model, kAllViewpoints, cfg, {&log, false});
    EXPECT_EQ(all.size(), 6u);
    EXPECT_EQ(log.count(), 6u);
  }
  {
    RenderLog log;
    const std::vector<ViewpointId> one{ViewpointId::pos_z};
    const auto out = render_selected(model, one, cfg, {&log, false});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].viewpoint, ViewpointId::pos_z);
    EXPECT_EQ(log.calls(), one);
  }
  const std::vector<ViewpointId> dup{ViewpointId::pos_x, ViewpointId::pos_x};
  EXPECT_THROW(render_selected(model, dup, cfg), ConfigError);
  EXPECT_THROW(render_selected(model, std::vector<ViewpointId>{}, cfg), ConfigError);
}

TEST(RenderSelected, ParallelMatchesSequential) {
  Rng rng(12);
  const Model model = random_cloud(400, rng, true);
  RenderConfig cfg;
  cfg.viewport = 96;
  const auto seq = render_selected(model, kAllViewpoints, cfg, {nullptr, false});
  const auto par = render_selected(model, kAllViewpoints, cfg, {nullptr, true});
  ASSERT_EQ(seq.size(), par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    EXPECT_EQ(seq[i].viewpoint, par[i].viewpoint);
    EXPECT_EQ(seq[i].pixels, par[i].pixels);
  }
}

TEST(Export, PngAndSidecar) {
  testutil::TempDir dir("export");
  Rng rng(13);
  const PointCloud pc = random_cloud(100, rng, false);
  RenderConfig cfg;
  cfg.viewport = 80;
  const ProjectionImage img = crop_background(render_point_cloud(pc, ViewpointId::neg_x, cfg));
  const auto png = export_projection(img, dir.path(), "neg_x", cfg);
  EXPECT_EQ(read_png(png), img.pixels);  // colors are 8-bit quantized already
  const auto side = nlohmann::json::parse(testutil::read_text(dir / "neg_x.json"));
  EXPECT_EQ(side["viewpoint"], "-X");
  EXPECT_EQ(side["width"], img.width());
  EXPECT_EQ(side["crop_offset"]["x"], img.crop.offset_x);
  EXPECT_EQ(side["original"]["width"], 80);
  EXPECT_EQ(side["render_config"]["viewport"], 80);
}
