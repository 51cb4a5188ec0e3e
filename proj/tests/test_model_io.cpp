// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "eep3dqa/image_io.hpp"
#include "eep3dqa/model_io.hpp"
#include "test_util.hpp"

using namespace eep3dqa;

namespace {

std::string ply_header(const std::string& format, std::size_t n, const std::string& extra_props = {}) {
  return "ply\nformat " + format + " 1.0\nelement vertex " + std::to_string(n) +
         "\nproperty float x\nproperty float y\nproperty float z\n" + extra_props +
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
}

PointCloud parse(const std::string& text) {
  std::istringstream in(text);
  return parse_point_cloud(in, "test.ply");
}

template <typename F>
std::string error_of(F&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "<no error>";
}

void write_mesh_files(const testutil::TempDir& dir, const std::string& obj_body) {
  RgbImage tex(2, 2);
  tex(0, 0) = kBlack;
  tex(1, 0) = kWhite;
  tex(0, 1) = kWhite;
  tex(1, 1) = kBlack;
  write_png(dir / "tex.png", tex);
  testutil::write_text(dir / "m.mtl", "newmtl skin\nKd 1 1 1\nmap_Kd tex.png\n");
  testutil::write_text(dir / "m.obj", "mtllib m.mtl\nusemtl skin\n" + obj_body);
}

}  // namespace

TEST(PlyParse, MinimalAsciiRedPoint) {
  const PointCloud pc = parse(ply_header("ascii", 1) + "0 0 0 255 0 0\n");
  ASSERT_EQ(pc.size(), 1u);
  EXPECT_EQ(pc.positions[0], (Vec3{0, 0, 0}));
  EXPECT_EQ(pc.colors[0], (Rgb{1.0f, 0.0f, 0.0f}));
}

TEST(PlyParse, AsciiAndBinaryEncodingsAgree) {
  Rng rng(11);
  PointCloud src;
  for (int i = 0; i < 1000; ++i) {
    src.positions.push_back({static_cast<float>(rng.uniform(-3, 3)), static_cast<float>(rng.uniform(-3, 3)),
                             static_cast<float>(rng.uniform(-3, 3))});
    src.colors.push_back(rgb_from_u8(static_cast<std::uint8_t>(rng.uniform_index(256)),
                                     static_cast<std::uint8_t>(rng.uniform_index(256)),
                                     static_cast<std::uint8_t>(rng.uniform_index(256))));
  }
  for (PlyPositionType pt : {PlyPositionType::f32, PlyPositionType::f64}) {
    std::ostringstream a, b;
    write_point_cloud(a, src, PlyEncoding::ascii, pt);
    write_point_cloud(b, src, PlyEncoding::binary_little_endian, pt);
    const PointCloud pa = parse(a.str());
    const PointCloud pb = parse(b.str());
    ASSERT_EQ(pa.size(), 1000u);
    ASSERT_EQ(pb.size(), 1000u);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_EQ(pa.positions[i], pb.positions[i]) << i;
      EXPECT_EQ(pa.colors[i], pb.colors[i]) << i;
      EXPECT_EQ(pa.positions[i], src.positions[i]) << i;
      EXPECT_EQ(pa.colors[i], src.colors[i]) << i;
    }
  }
}

TEST(PlyParse, TruncatedBodyReportsCounts) {
  std::string body;
  for (int i = 0; i < 7; ++i) body += "0 0 0 1 2 3\n";
  EXPECT_NE(error_of([&] { parse(ply_header("ascii", 10) + body); }).find("expected 10, found 7"), std::string::npos);

  PointCloud pc;
  for (int i = 0; i < 7; ++i) {
    pc.positions.push_back({1.0 * i, 0, 0});
    pc.colors.push_back(kWhite);
  }
  std::ostringstream bin;
  write_point_cloud(bin, pc, PlyEncoding::binary_little_endian, PlyPositionType::f32);
  std::string text = bin.str();
  const auto at = text.find("element vertex 7");
  text.replace(at, 16, "element vertex 10");
  EXPECT_NE(error_of([&] { parse(text); }).find("expected 10, found 7"), std::string::npos);
}

TEST(PlyParse, UncoloredCloudRejected) {
  const std::string text =
      "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
      "0 0 0\n";
  EXPECT_THROW(parse(text), ParseError);
  EXPECT_NE(error_of([&] { parse(text); }).find("uncolored point cloud unsupported"), std::string::npos);
}

TEST(PlyParse, HeaderErrorsNameTheLine) {
  const std::string text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty flaot x\nend_header\n";
  const std::string msg = error_of([&] { parse(text); });
  EXPECT_NE(msg.find("4"), std::string::npos) << msg;
  EXPECT_NE(msg.find("flaot"), std::string::npos) << msg;
  EXPECT_THROW(parse("plx\n"), ParseError);
  EXPECT_THROW(parse("ply\nformat ascii 1.0\nelement vertex 1\n"), ParseError);  // no end_header
}

TEST(PlyParse, BigEndianRejected) {
  EXPECT_THROW(parse(ply_header("binary_big_endian", 1)), ParseError);
}

TEST(PlyParse, UnknownPropertiesAndOtherElementsSkipped) {
  const std::string text =
      "ply\nformat ascii 1.0\ncomment scanned\nelement vertex 2\nproperty double x\nproperty double y\n"
      "property double z\nproperty float nx\nproperty float ny\nproperty float nz\nproperty uchar red\n"
      "property uchar green\nproperty uchar blue\nproperty uchar alpha\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
      "1 2 3 0 0 1 10 20 30 255\n4 5 6 0 1 0 40 50 60 128\n3 0 1 1\n";
  const PointCloud pc = parse(text);
  ASSERT_EQ(pc.size(), 2u);
  EXPECT_EQ(pc.positions[1], (Vec3{4, 5, 6}));
  EXPECT_EQ(pc.colors[1], rgb_from_u8(40, 50, 60));
}

TEST(PlyParse, IntegerCoordinatesAccepted) {
  const std::string text =
      "ply\nformat ascii 1.0\nelement vertex 1\nproperty int x\nproperty short y\nproperty uchar z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n-7 300 9 0 0 0\n";
  EXPECT_EQ(parse(text).positions[0], (Vec3{-7, 300, 9}));
}

TEST(PlyParse, LoadFromDiskAndDispatch) {
  testutil::TempDir dir("ply");
  PointCloud pc;
  pc.positions = {{0, 0, 0}, {1, 2, 3}};
  pc.colors = {kBlack, kWhite};
  save_point_cloud(dir / "a.ply", pc);
  const Model m = load_model(dir / "a.ply");
  ASSERT_TRUE(std::holds_alternative<PointCloud>(m));
  EXPECT_EQ(std::get<PointCloud>(m).positions, pc.positions);
  EXPECT_EQ(primitive_count(m), 2u);
  EXPECT_THROW(load_model(dir / "missing.ply"), Error);
  EXPECT_THROW(load_model(dir / "a.stl"), Error);
}

TEST(ObjLoad, MinimalTexturedTriangle) {
  testutil::TempDir dir("obj");
  write_mesh_files(dir, "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n");
  const TexturedMesh mesh = load_textured_mesh(dir / "m.obj");
  EXPECT_EQ(mesh.vertices.size(), 3u);
  ASSERT_EQ(mesh.faces.size(), 1u);
  EXPECT_EQ(mesh.faces[0].v, (std::array<std::uint32_t, 3>{0, 1, 2}));
  EXPECT_EQ(mesh.texture.width(), 2u);
  EXPECT_EQ(mesh.texture(1, 0), kWhite);
}

TEST(ObjLoad, QuadIsFanTriangulated) {
  testutil::TempDir dir("obj");
  write_mesh_files(dir, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\nf 1/1 2/2 3/3 4/4\n");
  const TexturedMesh mesh = load_textured_mesh(dir / "m.obj");
  ASSERT_EQ(mesh.faces.size(), 2u);
  EXPECT_EQ(mesh.faces[0].v, (std::array<std::uint32_t, 3>{0, 1, 2}));
  EXPECT_EQ(mesh.faces[1].v, (std::array<std::uint32_t, 3>{0, 2, 3}));
  EXPECT_EQ(mesh.faces[1].vt, (std::array<std::uint32_t, 3>{0, 2, 3}));
}

TEST(ObjLoad, VtVnFormsAndNegativeIndices) {
  testutil::TempDir dir("obj");
  write_mesh_files(dir, "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvn 0 0 1\nf -3/-3/1 -2/-2/1 -1/-1/1\n");
  const TexturedMesh mesh = load_textured_mesh(dir / "m.obj");
  EXPECT_EQ(mesh.faces[0].v, (std::array<std::uint32_t, 3>{0, 1, 2}));
  EXPECT_EQ(mesh.faces[0].vt, (std::array<std::uint32_t, 3>{0, 1, 2}));
}

TEST(ObjLoad, OutOfRangeIndexRejected) {
  testutil::TempDir dir("obj");
  write_mesh_files(dir, "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 9/3\n");
  const std::string msg = error_of([&] { load_textured_mesh(dir / "m.obj"); });
  EXPECT_NE(msg.find("out of range"), std::string::npos) << msg;
  EXPECT_NE(msg.find("9"), std::string::npos) << msg;
}

TEST(ObjLoad, MissingVtAndMissingTextureRejected) {
  testutil::TempDir dir("obj");
  write_mesh_files(dir, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  EXPECT_THROW(load_textured_mesh(dir / "m.obj"), ParseError);

  testutil::TempDir dir2("obj");
  testutil::write_text(dir2 / "m.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n");
  EXPECT_THROW(load_textured_mesh(dir2 / "m.obj"), Error);

  testutil::TempDir dir3("obj");
  testutil::write_text(dir3 / "m.mtl", "newmtl skin\nmap_Kd nowhere.png\n");
  testutil::write_text(dir3 / "m.obj",
                       "mtllib m.mtl\nusemtl skin\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n");
  EXPECT_NE(error_of([&] { load_textured_mesh(dir3 / "m.obj"); }).find("unresolvable texture"), std::string::npos);
}

TEST(BoundingBox, Examples) {
  std::vector<Vec3> corners;
  for (int i = 0; i < 8; ++i) corners.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
  EXPECT_EQ(bounding_box(corners), (AABB{{0, 0, 0}, {1, 1, 1}}));

  const AABB single = bounding_box(std::vector<Vec3>{{2, 3, 4}});
  EXPECT_EQ(single, (AABB{{2, 3, 4}, {2, 3, 4}}));
  EXPECT_TRUE(single.is_point());

  for (auto& c : corners) c = c + Vec3{5, 0, 0};
  EXPECT_EQ(bounding_box(corners), (AABB{{5, 0, 0}, {6, 1, 1}}));
  EXPECT_THROW(bounding_box(std::vector<Vec3>{}), Error);
}

TEST(ImageIo, PngRoundTripAndJpegDecode) {
  testutil::TempDir dir("img");
  Rng rng(5);
  const RgbImage img = testutil::random_image(17, 9, rng);
  write_png(dir / "a.png", img);
  EXPECT_EQ(read_png(dir / "a.png"), img);
  EXPECT_EQ(read_image(dir / "a.png"), img);
  testutil::write_text(dir / "bad.jpg", "\xFF\xD8\xFF garbage");
  EXPECT_THROW(read_image(dir / "bad.jpg"), Error);
}
