// SPDX-License-Identifier: Apache-2.0
// Stand-in for the neural backend: reads a manifest, writes a reply.
//   fake_backend [--mode features|scores|bad-count|nan|fail] [--dim N] [--gflops-per-canvas G] MANIFEST REPLY

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eep3dqa/image_io.hpp"

int main(int argc, char** argv) {
  std::string mode = "features";
  std::size_t dim = 768;
  double gflops_per_canvas = 0.0;
  std::vector<std::string> pos;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--mode" && i + 1 < argc) {
      mode = argv[++i];
    } else if (a == "--dim" && i + 1 < argc) {
      dim = std::stoul(argv[++i]);
    } else if (a == "--gflops-per-canvas" && i + 1 < argc) {
      gflops_per_canvas = std::stod(argv[++i]);
    } else {
      pos.push_back(a);
    }
  }
  if (pos.size() != 2) {
    std::cerr << "usage: fake_backend [options] MANIFEST REPLY\n";
    return 2;
  }
  if (mode == "fail") {
    std::cerr << "fake backend: simulated failure\n";
    return 3;
  }
  const std::filesystem::path manifest_path = pos[0];
  std::ifstream in(manifest_path);
  const auto manifest = nlohmann::json::parse(in);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : manifest["entries"]) {
    const auto canvas_path = manifest_path.parent_path() / e["canvas_path"].get<std::string>();
    const auto img = eep3dqa::read_png(canvas_path);
    nlohmann::json out = {{"canvas_path", e["canvas_path"]}};
    if (mode == "scores") {
      double luma = 0.0;
      for (const auto& px : img.data()) luma += 0.299 * px.r + 0.587 * px.g + 0.114 * px.b;
      out["score"] = luma / static_cast<double>(img.size());
    } else {
      // Interleaved channel means: value k averages every dim-th sample of the flat RGB data.
      std::vector<double> sum(dim, 0.0);
      std::vector<double> count(dim, 0.0);
      std::size_t idx = 0;
      for (const auto& px : img.data()) {
        for (float c : {px.r, px.g, px.b}) {
          sum[idx % dim] += c;
          count[idx % dim] += 1.0;
          ++idx;
        }
      }
      std::vector<double> f(dim);
      for (std::size_t k = 0; k < dim; ++k) f[k] = count[k] > 0 ? sum[k] / count[k] : 0.0;
      out["features"] = f;
    }
    entries.push_back(out);
  }
  if (mode == "bad-count" && !entries.empty()) entries.erase(entries.size() - 1);
  nlohmann::json reply = {{"extractor_id", "fake-backend"}, {"entries", entries}, {"params_m", 28.0}};
  if (mode != "scores") reply["dim"] = dim;
  if (gflops_per_canvas > 0) reply["gflops"] = gflops_per_canvas * static_cast<double>(manifest["entries"].size());
  std::string text = reply.dump();
  if (mode == "nan") {
    // nlohmann refuses to emit NaN; splice one in the way a careless backend would.
    const auto pos_entries = text.find("\"entries\":[");
    const auto first_num = text.find_first_of("0123456789", text.find("\"features\":[", pos_entries));
    text.replace(first_num, text.find_first_of(",]", first_num) - first_num, "NaN");
  }
  std::ofstream(pos[1]) << text << '\n';
  return 0;
}
