#include "segadv/data/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "segadv/data/netpbm.hpp"
#include "segadv/error.hpp"

namespace fs = std::filesystem;

namespace segadv {

Manifest Manifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("manifest: cannot open '" + path + "'");
  Manifest m;
  m.base_dir = fs::path(path).parent_path().string();
  std::string line;
  std::size_t lineno = 0;
  bool header = false, have_classes = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto fail = [&](const std::string& what) {
      throw ParseError("manifest '" + path + "' line " + std::to_string(lineno) + ": " + what);
    };
    if (!header) {
      int version = 0;
      if (key != "segadv-manifest" || !(ls >> version)) fail("missing 'segadv-manifest' header");
      if (version != 1) fail("unsupported version " + std::to_string(version));
      header = true;
    } else if (key == "num_classes") {
      if (!(ls >> m.num_classes) || m.num_classes < 2) fail("bad num_classes");
      have_classes = true;
    } else if (key == "norm_mean") {
      for (auto& v : m.stats.mean)
        if (!(ls >> v)) fail("norm_mean needs 3 values");
    } else if (key == "norm_std") {
      for (auto& v : m.stats.stddev)
        if (!(ls >> v) || !(v > 0.0f)) fail("norm_std needs 3 positive values");
    } else if (key == "item") {
      ManifestEntry e;
      if (!(ls >> e.id >> e.image_path >> e.label_path)) fail("item needs id, image and label paths");
      m.items.push_back(std::move(e));
    } else {
      fail("unknown record '" + key + "'");
    }
  }
  if (!header) throw ParseError("manifest '" + path + "': empty file");
  if (!have_classes) throw ParseError("manifest '" + path + "': missing num_classes");
  return m;
}

void Manifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("manifest: cannot write '" + path + "'");
  out << "segadv-manifest 1\n";
  out << "num_classes " << num_classes << '\n';
  out << std::setprecision(9);
  out << "norm_mean " << stats.mean[0] << ' ' << stats.mean[1] << ' ' << stats.mean[2] << '\n';
  out << "norm_std " << stats.stddev[0] << ' ' << stats.stddev[1] << ' ' << stats.stddev[2] << '\n';
  for (const auto& e : items) out << "item " << e.id << ' ' << e.image_path << ' ' << e.label_path << '\n';
  if (!out) throw Error("manifest: write failed for '" + path + "'");
}

std::vector<LabeledImage> Manifest::load_images() const {
  std::vector<LabeledImage> out;
  out.reserve(items.size());
  for (const auto& e : items) {
    const auto resolve = [&](const std::string& p) { return (fs::path(base_dir) / p).string(); };
    LabeledImage li{e.id, read_ppm(resolve(e.image_path)), read_pgm(resolve(e.label_path))};
    if (li.labels.height != li.image.dim(1) || li.labels.width != li.image.dim(2)) {
      throw ShapeError("manifest item '" + e.id + "': image and label sizes differ");
    }
    for (auto v : li.labels.data)
      if (v >= num_classes) throw DomainError("manifest item '" + e.id + "': label " + std::to_string(v) + " >= num_classes");
    out.push_back(std::move(li));
  }
  return out;
}

std::string write_split(const std::string& dir, const std::string& name, const std::vector<LabeledImage>& images,
                        int num_classes, const ChannelStats& stats) {
  const fs::path root(dir);
  fs::create_directories(root / name);
  Manifest m;
  m.num_classes = num_classes;
  m.stats = stats;
  for (const auto& img : images) {
    const std::string image_rel = name + "/" + img.id + ".ppm";
    const std::string label_rel = name + "/" + img.id + ".pgm";
    write_ppm((root / image_rel).string(), img.image);
    write_pgm((root / label_rel).string(), img.labels);
    m.items.push_back({img.id, image_rel, label_rel});
  }
  const std::string path = (root / (name + ".manifest")).string();
  m.save(path);
  return path;
}

}  // namespace segadv
