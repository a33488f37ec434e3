// Copyright 2026 The gdino Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gdino/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "gdino/rng.hpp"

namespace gdino::synth {

using nlohmann::json;

const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> names = {"circle", "square", "triangle"};
  return names;
}

const std::vector<std::string>& color_names() {
  static const std::vector<std::string> names = {"red",    "green",  "blue", "yellow",
                                                 "purple", "orange", "cyan", "white"};
  return names;
}

Rgb color_rgb(const std::string& color) {
  // Byte-exact values so rendered images survive a PPM round trip.
  auto rgb = [](int r, int g, int b) { return Rgb{r / 255.0f, g / 255.0f, b / 255.0f}; };
  if (color == "red") return rgb(220, 20, 20);
  if (color == "green") return rgb(20, 180, 20);
  if (color == "blue") return rgb(20, 40, 220);
  if (color == "yellow") return rgb(240, 220, 20);
  if (color == "purple") return rgb(140, 30, 160);
  if (color == "orange") return rgb(250, 130, 0);
  if (color == "cyan") return rgb(0, 210, 220);
  if (color == "white") return rgb(255, 255, 255);
  throw Error("unknown color '" + color + "'");
}

std::vector<Category> all_categories() {
  std::vector<Category> out;
  for (const auto& c : color_names())
    for (const auto& s : shape_names()) out.push_back({c, s});
  return out;
}

std::vector<Category> default_held_out() {
  return {{"red", "triangle"},  {"green", "circle"},  {"blue", "square"},
          {"yellow", "circle"}, {"purple", "square"}, {"cyan", "triangle"}};
}

Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg) {
  if (cfg.allowed.empty()) throw Error("generate_scene: no allowed (color, shape) pairs");
  if (cfg.min_objects < 0 || cfg.max_objects < cfg.min_objects || cfg.max_objects > 6) {
    throw Error("generate_scene: object count range must lie within [0, 6]");
  }
  Rng rng(seed);
  Scene scene;
  scene.width = scene.height = cfg.image_size;
  scene.seed = seed;
  const int size = cfg.image_size;
  const int lo = static_cast<int>(std::ceil(cfg.min_side * size));
  const int hi = static_cast<int>(std::floor(cfg.max_side * size));
  if (lo < 1 || hi < lo) throw Error("generate_scene: image too small for the object size range");
  const auto count = static_cast<int>(rng.uniform_int(cfg.min_objects, cfg.max_objects));
  for (int k = 0; k < count; ++k) {
    const Category& cat = cfg.allowed[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.allowed.size()) - 1))];
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      const auto side = static_cast<double>(rng.uniform_int(lo, hi));
      const auto x = static_cast<double>(rng.uniform_int(0, size - static_cast<std::int64_t>(side)));
      const auto y = static_cast<double>(rng.uniform_int(0, size - static_cast<std::int64_t>(side)));
      const Box box{x, y, x + side, y + side};
      placed = std::all_of(scene.objects.begin(), scene.objects.end(),
                           [&](const SceneObject& o) { return iou(o.box, box) <= cfg.max_pair_iou; });
      if (placed) scene.objects.push_back({cat.shape, cat.color, box, cat.phrase()});
    }
    if (!placed) {
      throw Error("generate_scene: could not place object " + std::to_string(k) + " within " +
                  std::to_string(cfg.max_attempts) + " attempts (seed " + std::to_string(seed) + ")");
    }
  }
  return scene;
}

Tensor<float> render(const Scene& scene) {
  Tensor<float> img = Tensor<float>::full(Shape{scene.height, scene.width, 3}, kBackground);
  for (const auto& o : scene.objects) {
    const Rgb color = color_rgb(o.color);
    const double cx = 0.5 * (o.box.x1 + o.box.x2), cy = 0.5 * (o.box.y1 + o.box.y2);
    const double rx = 0.5 * o.box.width(), ry = 0.5 * o.box.height();
    const int x0 = std::max(0, static_cast<int>(std::floor(o.box.x1)));
    const int x1 = std::min(scene.width, static_cast<int>(std::ceil(o.box.x2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(o.box.y1)));
    const int y1 = std::min(scene.height, static_cast<int>(std::ceil(o.box.y2)));
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        bool inside = px >= o.box.x1 && px < o.box.x2 && py >= o.box.y1 && py < o.box.y2;
        if (inside && o.shape == "circle") {
          const double dx = (px - cx) / rx, dy = (py - cy) / ry;
          inside = dx * dx + dy * dy <= 1.0;
        } else if (inside && o.shape == "triangle") {
          const double t = (py - o.box.y1) / o.box.height();
          inside = std::abs(px - cx) <= t * rx;
        } else if (o.shape != "square" && o.shape != "circle" && o.shape != "triangle") {
          throw Error("render: unknown shape '" + o.shape + "'");
        }
        if (inside) std::copy(color.begin(), color.end(), img.data.data() + (static_cast<std::size_t>(y) * scene.width + x) * 3);
      }
  }
  return img;
}

std::uint64_t scene_seed(std::uint64_t base, int split, int index) {
  return base * 10'000'000ull + static_cast<std::uint64_t>(split) * 1'000'000ull + static_cast<std::uint64_t>(index);
}

json scenes_to_json(const std::vector<Scene>& scenes, const std::vector<Category>& categories) {
  json images = json::array();
  for (const auto& s : scenes) {
    json objects = json::array();
    for (const auto& o : s.objects) {
      objects.push_back(json{{"shape", o.shape},
                             {"color", o.color},
                             {"bbox_xyxy", {o.box.x1, o.box.y1, o.box.x2, o.box.y2}},
                             {"phrase", o.phrase}});
    }
    images.push_back(
        json{{"file", s.file}, {"width", s.width}, {"height", s.height}, {"seed", s.seed}, {"objects", objects}});
  }
  json cats = json::array();
  for (const auto& c : categories) cats.push_back(c.phrase());
  return json{{"images", images}, {"categories", cats}};
}

namespace {

Category parse_category(const std::string& phrase) {
  const auto space = phrase.find(' ');
  if (space == std::string::npos) throw Error("category '" + phrase + "' is not 'color shape'");
  return {phrase.substr(0, space), phrase.substr(space + 1)};
}

}  // namespace

std::pair<std::vector<Scene>, std::vector<Category>> scenes_from_json(const json& j) {
  try {
    std::vector<Scene> scenes;
    for (const auto& im : j.at("images")) {
      Scene s;
      s.file = im.at("file").get<std::string>();
      s.width = im.at("width").get<int>();
      s.height = im.at("height").get<int>();
      s.seed = im.at("seed").get<std::uint64_t>();
      for (const auto& o : im.at("objects")) {
        const auto b = o.at("bbox_xyxy").get<std::vector<double>>();
        if (b.size() != 4) throw Error("bbox_xyxy must have 4 numbers");
        SceneObject obj{o.at("shape").get<std::string>(), o.at("color").get<std::string>(), Box{b[0], b[1], b[2], b[3]},
                        o.at("phrase").get<std::string>()};
        if (!(obj.box.x1 < obj.box.x2 && obj.box.y1 < obj.box.y2)) throw Error("degenerate bbox in " + s.file);
        s.objects.push_back(std::move(obj));
      }
      scenes.push_back(std::move(s));
    }
    std::vector<Category> categories;
    if (j.contains("categories")) {
      for (const auto& c : j["categories"]) categories.push_back(parse_category(c.get<std::string>()));
    } else {
      // Fall back to the categories present, in canonical order.
      std::set<std::pair<std::size_t, std::size_t>> seen;
      const auto& colors = color_names();
      const auto& shapes = shape_names();
      for (const auto& s : scenes)
        for (const auto& o : s.objects) {
          const auto ci = std::find(colors.begin(), colors.end(), o.color) - colors.begin();
          const auto si = std::find(shapes.begin(), shapes.end(), o.shape) - shapes.begin();
          seen.insert({static_cast<std::size_t>(ci), static_cast<std::size_t>(si)});
        }
      for (const auto& [ci, si] : seen) categories.push_back({colors.at(ci), shapes.at(si)});
    }
    return {std::move(scenes), std::move(categories)};
  } catch (const json::exception& e) {
    throw Error(std::string("scenes.json schema violation: ") + e.what());
  }
}

SplitData load_split(const std::filesystem::path& dir) {
  const auto path = dir / "scenes.json";
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  auto [scenes, categories] = scenes_from_json(j);
  return SplitData{dir, std::move(scenes), std::move(categories)};
}

BuildReport build_splits(const BuildConfig& cfg) {
  BuildReport report;
  const auto all = all_categories();
  for (const auto& h : cfg.held_out) {
    if (std::find(all.begin(), all.end(), h) == all.end()) throw Error("held-out pair '" + h.phrase() + "' is unknown");
  }
  std::set<Category> held(cfg.held_out.begin(), cfg.held_out.end());
  if (held.size() != cfg.held_out.size()) throw Error("held-out pairs contain duplicates");
  for (const auto& c : all)
    if (!held.count(c)) report.train_pairs.push_back(c);
  for (const auto& c : all)
    if (held.count(c)) report.held_out.push_back(c);
  for (const auto& c : report.train_pairs) {
    if (held.count(c)) throw Error("pair '" + c.phrase() + "' is in both train and test-open");
  }
  if (report.train_pairs.empty()) throw Error("every pair is held out; nothing to train on");
  if (report.held_out.empty()) report.warnings.push_back("no held-out pairs: test_open is empty");

  struct SplitSpec {
    const char* name;
    int id;
    int count;
    const std::vector<Category>* pairs;
  };
  const SplitSpec specs[] = {{"train", 0, cfg.train_scenes, &report.train_pairs},
                             {"val", 1, cfg.val_scenes, &report.train_pairs},
                             {"test_open", 2, report.held_out.empty() ? 0 : cfg.test_scenes, &report.held_out}};
  json manifest{{"seed", cfg.seed}, {"image_size", cfg.image_size}, {"splits", json::object()}};
  for (const auto& spec : specs) {
    const auto dir = cfg.out_dir / spec.name;
    std::filesystem::create_directories(dir / "images");
    SceneConfig sc;
    sc.image_size = cfg.image_size;
    sc.min_objects = cfg.min_objects;
    sc.max_objects = cfg.max_objects;
    sc.allowed = *spec.pairs;
    std::vector<Scene> scenes;
    for (int i = 0; i < spec.count; ++i) {
      Scene s = generate_scene(scene_seed(cfg.seed, spec.id, i), sc);
      char name[32];
      std::snprintf(name, sizeof(name), "images/%06d.ppm", i);
      s.file = name;
      write_ppm(dir / s.file, render(s));
      scenes.push_back(std::move(s));
    }
    const auto& cats = spec.count > 0 ? *spec.pairs : std::vector<Category>{};
    std::ofstream out(dir / "scenes.json");
    if (!out) throw Error("cannot write " + (dir / "scenes.json").string());
    out << scenes_to_json(scenes, cats).dump(1) << '\n';
    json pairs = json::array();
    for (const auto& c : cats) pairs.push_back(c.phrase());
    json files = json::array();
    for (const auto& s : scenes) files.push_back(json{{"file", std::string(spec.name) + "/" + s.file}, {"seed", s.seed}});
    manifest["splits"][spec.name] = json{{"scenes", spec.count}, {"categories", pairs}, {"files", files}};
  }
  std::ofstream out(cfg.out_dir / "manifest.json");
  if (!out) throw Error("cannot write manifest in " + cfg.out_dir.string());
  out << manifest.dump(2) << '\n';
  return report;
}

}  // namespace gdino::synth
