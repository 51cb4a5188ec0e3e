// SPDX-License-Identifier: Apache-2.0
#pragma once

// Point-cloud (PLY) and textured-mesh (OBJ + MTL) ingestion.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "eep3dqa/error.hpp"
#include "eep3dqa/geometry.hpp"
#include "eep3dqa/image_io.hpp"
#include "eep3dqa/raster.hpp"

namespace eep3dqa {

struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Rgb> colors;  // same length as positions

  std::size_t size() const noexcept { return positions.size(); }

  void validate() const {
    detail::require(!positions.empty(), "point cloud is empty");
    detail::require(colors.size() == positions.size(), "point cloud colors/positions length mismatch");
    for (const Vec3& p : positions) detail::require(is_finite(p), "point cloud has non-finite coordinate");
  }
};

struct Triangle {
  std::array<std::uint32_t, 3> v{};   // vertex indices
  std::array<std::uint32_t, 3> vt{};  // uv indices

  friend bool operator==(const Triangle&, const Triangle&) = default;
};

struct TexturedMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec2> uvs;  // stored as read; wrapping happens at sampling time
  std::vector<Triangle> faces;
  RgbImage texture;

  void validate() const {
    detail::require(!vertices.empty() && !faces.empty(), "mesh is empty");
    detail::require(!texture.empty(), "mesh has no texture");
    for (const Triangle& t : faces) {
      for (int k = 0; k < 3; ++k) {
        detail::require(t.v[k] < vertices.size(), "mesh face vertex index out of range");
        detail::require(t.vt[k] < uvs.size(), "mesh face uv index out of range");
      }
    }
  }
};

using Model = std::variant<PointCloud, TexturedMesh>;

// ---------------------------------------------------------------------------
// PLY

enum class PlyEncoding { ascii, binary_little_endian };

namespace detail {

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

inline std::optional<PlyType> ply_type_from_name(std::string_view name) {
  static const std::map<std::string_view, PlyType> kTypes = {
      {"char", PlyType::i8},     {"int8", PlyType::i8},     {"uchar", PlyType::u8},
      {"uint8", PlyType::u8},    {"short", PlyType::i16},   {"int16", PlyType::i16},
      {"ushort", PlyType::u16},  {"uint16", PlyType::u16},  {"int", PlyType::i32},
      {"int32", PlyType::i32},   {"uint", PlyType::u32},    {"uint32", PlyType::u32},
      {"float", PlyType::f32},   {"float32", PlyType::f32}, {"double", PlyType::f64},
      {"float64", PlyType::f64},
  };
  auto it = kTypes.find(name);
  if (it == kTypes.end()) return std::nullopt;
  return it->second;
}

inline std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;

  int index_of(std::string_view prop) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == prop && !properties[i].is_list) return static_cast<int>(i);
    }
    return -1;
  }
};

struct PlyHeader {
  std::string format;
  std::vector<PlyElement> elements;
  std::size_t lines = 0;  // header line count including end_header
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline PlyHeader parse_ply_header(std::istream& in, const std::string& where) {
  PlyHeader header;
  std::string line;
  auto bad = [&](const std::string& why) -> ParseError {
    return ParseError(where + ": PLY header line " + std::to_string(header.lines) + " ('" + line +
                      "'): " + why);
  };
  bool saw_end = false;
  while (std::getline(in, line)) {
    ++header.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = split_ws(line);
    if (header.lines == 1) {
      if (tok.size() != 1 || tok[0] != "ply") throw bad("missing 'ply' magic");
      continue;
    }
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) throw bad("malformed format line");
      header.format = std::string(tok[1]);
      if (header.format == "binary_big_endian") throw bad("unsupported PLY format binary_big_endian");
      if (header.format != "ascii" && header.format != "binary_little_endian") {
        throw bad("unknown PLY format '" + header.format + "'");
      }
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw bad("malformed element line");
      PlyElement el;
      el.name = std::string(tok[1]);
      auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), el.count);
      if (ec != std::errc{} || ptr != tok[2].data() + tok[2].size()) throw bad("bad element count");
      header.elements.push_back(std::move(el));
    } else if (tok[0] == "property") {
      if (header.elements.empty()) throw bad("property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = ply_type_from_name(tok[2]);
        auto it = ply_type_from_name(tok[3]);
        if (!ct || !it) throw bad("unknown list property type");
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
        prop.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        auto t = ply_type_from_name(tok[1]);
        if (!t) throw bad("unknown property type '" + std::string(tok[1]) + "'");
        prop.type = *t;
        prop.name = std::string(tok[2]);
      } else {
        throw bad("malformed property line");
      }
      header.elements.back().properties.push_back(std::move(prop));
    } else if (tok[0] == "end_header") {
      saw_end = true;
      break;
    } else {
      throw bad("unexpected keyword");
    }
  }
  if (!saw_end) {
    line.clear();
    throw bad("missing end_header");
  }
  if (header.format.empty()) {
    line.clear();
    throw bad("missing format line");
  }
  return header;
}

template <typename T>
T load_le(const std::uint8_t* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<std::uint8_t*>(&value);
    std::reverse(b, b + sizeof(T));
  }
  return value;
}

inline double read_binary_scalar(PlyType t, const std::uint8_t* p) {
  switch (t) {
    case PlyType::i8: return load_le<std::int8_t>(p);
    case PlyType::u8: return load_le<std::uint8_t>(p);
    case PlyType::i16: return load_le<std::int16_t>(p);
    case PlyType::u16: return load_le<std::uint16_t>(p);
    case PlyType::i32: return load_le<std::int32_t>(p);
    case PlyType::u32: return load_le<std::uint32_t>(p);
    case PlyType::f32: return load_le<float>(p);
    case PlyType::f64: return load_le<double>(p);
  }
  return 0.0;
}

// Parses with the declared type's precision so float32 text round-trips to the same value
// a binary float32 would carry.
inline std::optional<double> parse_ascii_scalar(PlyType t, std::string_view s) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (t == PlyType::f32) {
    float v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return v;
  }
  if (t == PlyType::f64) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return v;
  }
  long long v = 0;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return static_cast<double>(v);
}

inline float color_scale(PlyType t, double raw) {
  switch (t) {
    case PlyType::f32:
    case PlyType::f64: return static_cast<float>(std::clamp(raw, 0.0, 1.0));
    case PlyType::u16: return static_cast<float>(raw / 65535.0);
    default: return static_cast<float>(std::clamp(raw, 0.0, 255.0) / 255.0);
  }
}

struct VertexLayout {
  int x = -1, y = -1, z = -1, r = -1, g = -1, b = -1;
};

inline VertexLayout vertex_layout(const PlyElement& el, const std::string& where) {
  VertexLayout l{el.index_of("x"), el.index_of("y"), el.index_of("z"),
                 el.index_of("red"), el.index_of("green"), el.index_of("blue")};
  if (l.r < 0 && l.g < 0 && l.b < 0) {
    l = {l.x, l.y, l.z, el.index_of("diffuse_red"), el.index_of("diffuse_green"),
         el.index_of("diffuse_blue")};
  }
  if (l.x < 0 || l.y < 0 || l.z < 0) throw ParseError(where + ": vertex element lacks x/y/z properties");
  if (l.r < 0 || l.g < 0 || l.b < 0) throw ParseError(where + ": uncolored point cloud unsupported");
  return l;
}

inline std::string truncation_message(const std::string& where, std::size_t expected, std::size_t found) {
  return where + ": truncated PLY body: expected " + std::to_string(expected) + ", found " +
         std::to_string(found) + " vertices";
}

}  // namespace detail

inline PointCloud parse_point_cloud(std::istream& in, const std::string& where = "<stream>") {
  using namespace detail;
  const PlyHeader header = parse_ply_header(in, where);
  auto vertex_it = std::find_if(header.elements.begin(), header.elements.end(),
                                [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex_it == header.elements.end()) throw ParseError(where + ": PLY has no vertex element");
  const PlyElement& vertex = *vertex_it;
  const VertexLayout layout = vertex_layout(vertex, where);
  if (vertex.count == 0) throw ParseError(where + ": PLY declares zero vertices");

  PointCloud cloud;
  cloud.positions.reserve(vertex.count);
  cloud.colors.reserve(vertex.count);
  const auto& props = vertex.properties;
  std::vector<double> values(props.size());

  auto emit = [&] {
    cloud.positions.push_back({values[layout.x], values[layout.y], values[layout.z]});
    cloud.colors.push_back({color_scale(props[layout.r].type, values[layout.r]),
                            color_scale(props[layout.g].type, values[layout.g]),
                            color_scale(props[layout.b].type, values[layout.b])});
  };

  if (header.format == "ascii") {
    std::size_t line_no = header.lines;
    std::string line;
    // Elements preceding the vertex block occupy one line per instance.
    for (auto it = header.elements.begin(); it != vertex_it; ++it) {
      for (std::size_t i = 0; i < it->count; ++i) {
        if (!std::getline(in, line)) throw ParseError(where + ": truncated PLY body before vertex element");
        ++line_no;
      }
    }
    while (cloud.size() < vertex.count) {
      if (!std::getline(in, line)) throw ParseError(truncation_message(where, vertex.count, cloud.size()));
      ++line_no;
      const auto tok = split_ws(line);
      if (tok.empty()) {
        // Blank line: treat as end of data.
        throw ParseError(truncation_message(where, vertex.count, cloud.size()));
      }
      std::size_t t = 0;
      for (std::size_t p = 0; p < props.size(); ++p) {
        auto fail_line = [&](const std::string& why) {
          return ParseError(where + ": PLY body line " + std::to_string(line_no) + " ('" + line + "'): " + why);
        };
        if (t >= tok.size()) throw fail_line("expected more values");
        if (props[p].is_list) {
          auto n = parse_ascii_scalar(props[p].count_type, tok[t++]);
          if (!n || *n < 0) throw fail_line("bad list count");
          t += static_cast<std::size_t>(*n);
          values[p] = 0.0;
          continue;
        }
        auto v = parse_ascii_scalar(props[p].type, tok[t++]);
        if (!v) throw fail_line("unparseable value '" + std::string(tok[t - 1]) + "'");
        values[p] = *v;
      }
      emit();
    }
  } else {
    const std::vector<std::uint8_t> body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    auto skip_record = [&](const PlyElement& el) -> bool {
      for (const PlyProperty& p : el.properties) {
        if (p.is_list) {
          const std::size_t cs = ply_type_size(p.count_type);
          if (pos + cs > body.size()) return false;
          const auto n = static_cast<std::size_t>(read_binary_scalar(p.count_type, body.data() + pos));
          pos += cs + n * ply_type_size(p.type);
        } else {
          pos += ply_type_size(p.type);
        }
        if (pos > body.size()) return false;
      }
      return true;
    };
    for (auto it = header.elements.begin(); it != vertex_it; ++it) {
      for (std::size_t i = 0; i < it->count; ++i) {
        if (!skip_record(*it)) throw ParseError(where + ": truncated PLY body before vertex element");
      }
    }
    while (cloud.size() < vertex.count) {
      const std::size_t start = pos;
      if (!skip_record(vertex)) throw ParseError(truncation_message(where, vertex.count, cloud.size()));
      std::size_t q = start;
      for (std::size_t p = 0; p < props.size(); ++p) {
        if (props[p].is_list) {
          const auto n = static_cast<std::size_t>(read_binary_scalar(props[p].count_type, body.data() + q));
          q += ply_type_size(props[p].count_type) + n * ply_type_size(props[p].type);
          values[p] = 0.0;
        } else {
          values[p] = read_binary_scalar(props[p].type, body.data() + q);
          q += ply_type_size(props[p].type);
        }
      }
      emit();
    }
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!is_finite(cloud.positions[i])) {
      throw ParseError(where + ": non-finite coordinate at vertex " + std::to_string(i));
    }
  }
  return cloud;
}

inline PointCloud load_point_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open point cloud '" + path.string() + "'");
  return parse_point_cloud(in, path.string());
}

enum class PlyPositionType { f32, f64 };

// Writes x/y/z plus uchar red/green/blue. Float64 positions round-trip exactly through both
// encodings; float32 positions are rounded once on write.
inline void write_point_cloud(std::ostream& out, const PointCloud& cloud,
                              PlyEncoding encoding = PlyEncoding::ascii,
                              PlyPositionType position_type = PlyPositionType::f64) {
  cloud.validate();
  const char* type_name = position_type == PlyPositionType::f64 ? "double" : "float";
  out << "ply\n"
      << "format " << (encoding == PlyEncoding::ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property " << type_name << " x\nproperty " << type_name << " y\nproperty " << type_name << " z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  std::array<char, 64> buf{};
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const Rgb& c = cloud.colors[i];
    const std::array<double, 3> xyz{p.x, p.y, p.z};
    const std::array<std::uint8_t, 3> rgb{channel_to_u8(c.r), channel_to_u8(c.g), channel_to_u8(c.b)};
    if (encoding == PlyEncoding::ascii) {
      for (double v : xyz) {
        auto res = position_type == PlyPositionType::f64
                       ? std::to_chars(buf.data(), buf.data() + buf.size(), v)
                       : std::to_chars(buf.data(), buf.data() + buf.size(), static_cast<float>(v));
        out.write(buf.data(), res.ptr - buf.data());
        out.put(' ');
      }
      out << int{rgb[0]} << ' ' << int{rgb[1]} << ' ' << int{rgb[2]} << '\n';
    } else {
      for (double v : xyz) {
        if (position_type == PlyPositionType::f64) {
          auto bits = std::bit_cast<std::uint64_t>(v);
          for (int k = 0; k < 8; ++k) out.put(static_cast<char>((bits >> (8 * k)) & 0xFF));
        } else {
          auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
          for (int k = 0; k < 4; ++k) out.put(static_cast<char>((bits >> (8 * k)) & 0xFF));
        }
      }
      out.write(reinterpret_cast<const char*>(rgb.data()), 3);
    }
  }
}

inline void save_point_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                             PlyEncoding encoding = PlyEncoding::ascii,
                             PlyPositionType position_type = PlyPositionType::f64) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write point cloud '" + path.string() + "'");
  write_point_cloud(out, cloud, encoding, position_type);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// OBJ + MTL

namespace detail {

inline std::string strip(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_obj_number(std::string_view tok, const std::string& where, std::size_t line_no) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError(where + ":" + std::to_string(line_no) + ": bad number '" + std::string(tok) + "'");
  }
  return v;
}

// Resolves a 1-based (or negative, relative) OBJ index against `count` declared entries.
inline std::uint32_t resolve_obj_index(std::string_view tok, std::size_t count, const char* what,
                                       const std::string& where, std::size_t line_no) {
  long long idx = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), idx);
  auto err = [&](const std::string& why) {
    return ParseError(where + ":" + std::to_string(line_no) + ": " + why);
  };
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || idx == 0) {
    throw err(std::string("bad ") + what + " index '" + std::string(tok) + "'");
  }
  const long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(count) + idx;
  if (resolved < 0 || resolved >= static_cast<long long>(count)) {
    throw err(std::string(what) + " index " + std::to_string(idx) + " out of range (" +
              std::to_string(count) + " declared)");
  }
  return static_cast<std::uint32_t>(resolved);
}

// material name -> diffuse texture path (absolute or relative to the MTL directory)
inline std::map<std::string, std::filesystem::path> parse_mtl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open material library '" + path.string() + "'");
  std::map<std::string, std::filesystem::path> textures;
  std::string current;
  std::string line;
  while (std::getline(in, line)) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok[0] == "newmtl" && tok.size() >= 2) {
      current = strip(std::string_view(line).substr(line.find("newmtl") + 6));
    } else if (tok[0] == "map_Kd" && tok.size() >= 2 && !current.empty()) {
      // Options such as "-s 1 1 1" may precede the file name, which is always last.
      std::filesystem::path tex(std::string(tok.back()));
      if (tex.is_relative()) tex = path.parent_path() / tex;
      textures[current] = tex;
    }
  }
  return textures;
}

}  // namespace detail

inline TexturedMesh load_textured_mesh(const std::filesystem::path& path) {
  using namespace detail;
  std::ifstream in(path);
  if (!in) throw Error("cannot open mesh '" + path.string() + "'");
  const std::string where = path.string();
  TexturedMesh mesh;
  std::map<std::string, std::filesystem::path> materials;
  std::vector<std::string> used_materials;
  std::string current_material;
  bool current_recorded = false;

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> corners;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw ParseError(where + ":" + std::to_string(line_no) + ": v needs 3 coordinates");
      mesh.vertices.push_back({parse_obj_number(tok[1], where, line_no), parse_obj_number(tok[2], where, line_no),
                               parse_obj_number(tok[3], where, line_no)});
    } else if (tok[0] == "vt") {
      if (tok.size() < 3) throw ParseError(where + ":" + std::to_string(line_no) + ": vt needs 2 coordinates");
      mesh.uvs.push_back({parse_obj_number(tok[1], where, line_no), parse_obj_number(tok[2], where, line_no)});
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw ParseError(where + ":" + std::to_string(line_no) + ": face needs >= 3 corners");
      corners.clear();
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const std::string_view c = tok[i];
        const auto s1 = c.find('/');
        if (s1 == std::string_view::npos) {
          throw ParseError(where + ":" + std::to_string(line_no) + ": textured face missing vt ('" +
                           std::string(c) + "')");
        }
        const auto s2 = c.find('/', s1 + 1);
        const std::string_view vt = c.substr(s1 + 1, s2 == std::string_view::npos ? c.npos : s2 - s1 - 1);
        if (vt.empty()) {
          throw ParseError(where + ":" + std::to_string(line_no) + ": textured face missing vt ('" +
                           std::string(c) + "')");
        }
        corners.emplace_back(resolve_obj_index(c.substr(0, s1), mesh.vertices.size(), "vertex", where, line_no),
                             resolve_obj_index(vt, mesh.uvs.size(), "uv", where, line_no));
      }
      // Fan triangulation from the first corner.
      for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
        mesh.faces.push_back({{corners[0].first, corners[k].first, corners[k + 1].first},
                              {corners[0].second, corners[k].second, corners[k + 1].second}});
      }
      if (!current_recorded) {
        used_materials.push_back(current_material);
        current_recorded = true;
      }
    } else if (tok[0] == "mtllib") {
      for (std::size_t i = 1; i < tok.size(); ++i) {
        std::filesystem::path lib(std::string(tok[i]));
        if (lib.is_relative()) lib = path.parent_path() / lib;
        materials.merge(parse_mtl(lib));
      }
    } else if (tok[0] == "usemtl") {
      current_material = tok.size() >= 2 ? strip(std::string_view(line).substr(line.find("usemtl") + 6)) : "";
      current_recorded = false;
    }
    // vn, o, g, s and other records carry nothing the renderer uses.
  }
  if (mesh.faces.empty()) throw ParseError(where + ": mesh has no faces");

  std::set<std::filesystem::path> textures;
  for (const std::string& name : used_materials) {
    if (name.empty()) {
      if (materials.size() == 1) textures.insert(materials.begin()->second);
      continue;
    }
    auto it = materials.find(name);
    if (it == materials.end()) throw Error(where + ": material '" + name + "' has no diffuse texture");
    textures.insert(it->second);
  }
  if (textures.empty()) throw Error(where + ": unresolvable texture (no map_Kd for the faces' material)");
  if (textures.size() > 1) throw Error(where + ": faces reference multiple textures; one texture per mesh supported");
  const std::filesystem::path tex = *textures.begin();
  if (!std::filesystem::exists(tex)) throw Error(where + ": unresolvable texture path '" + tex.string() + "'");
  mesh.texture = read_image(tex);
  mesh.validate();
  return mesh;
}

// Dispatches on extension: .ply -> point cloud, .obj -> textured mesh.
inline Model load_model(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ply") return load_point_cloud(path);
  if (ext == ".obj") return load_textured_mesh(path);
  throw Error("unsupported model format '" + ext + "' for '" + path.string() + "' (expected .ply or .obj)");
}

// ---------------------------------------------------------------------------

inline AABB bounding_box(const std::vector<Vec3>& points) {
  detail::require(!points.empty(), "bounding_box: empty model");
  AABB box{points.front(), points.front()};
  for (const Vec3& p : points) box.expand(p);
  return box;
}

inline AABB bounding_box(const PointCloud& cloud) { return bounding_box(cloud.positions); }
inline AABB bounding_box(const TexturedMesh& mesh) { return bounding_box(mesh.vertices); }
inline AABB bounding_box(const Model& model) {
  return std::visit([](const auto& m) { return bounding_box(m); }, model);
}

inline std::size_t primitive_count(const Model& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PointCloud>) {
          return m.size();
        } else {
          return m.faces.size();
        }
      },
      model);
}

}  // namespace eep3dqa
