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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gdino/boxes.hpp"
#include "gdino/image_io.hpp"

namespace gdino::synth {

const std::vector<std::string>& shape_names();  // circle, square, triangle
const std::vector<std::string>& color_names();  // 8 colors
Rgb color_rgb(const std::string& color);
inline constexpr float kBackground = 0.5f;

struct Category {
  std::string color;
  std::string shape;

  std::string phrase() const { return color + " " + shape; }
  bool operator==(const Category&) const = default;
  auto operator<=>(const Category&) const = default;
};

// Every (color, shape) pair in color-major order.
std::vector<Category> all_categories();

struct SceneObject {
  std::string shape;
  std::string color;
  Box box;  // pixel corners
  std::string phrase;

  bool operator==(const SceneObject&) const = default;
};

struct Scene {
  int width = 0;
  int height = 0;
  std::uint64_t seed = 0;
  std::string file;  // relative to the split directory
  std::vector<SceneObject> objects;

  bool operator==(const Scene&) const = default;
};

struct SceneConfig {
  int image_size = 64;
  int min_objects = 1;
  int max_objects = 3;
  double min_side = 0.15;  // fraction of the image side
  double max_side = 0.4;
  double max_pair_iou = 0.3;
  int max_attempts = 100;
  std::vector<Category> allowed;
};

// Deterministic in `seed`. Square boxes with integer pixel corners; objects
// are drawn uniformly from `allowed` and placed by rejection sampling.
Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg);

// Flat gray background; squares fill their box, circles are inscribed,
// triangles point up. A pixel is inside when its center is.
Tensor<float> render(const Scene& scene);

// The default six held-out pairs: distinct colors, each shape twice.
std::vector<Category> default_held_out();

struct BuildConfig {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int image_size = 64;
  int min_objects = 1;
  int max_objects = 3;
  int train_scenes = 2000;
  int val_scenes = 200;
  int test_scenes = 200;
  std::vector<Category> held_out = default_held_out();
};

struct BuildReport {
  std::vector<Category> train_pairs;
  std::vector<Category> held_out;
  std::vector<std::string> warnings;
};

// Writes train/, val/ and test_open/ (each a scenes.json plus images/*.ppm)
// and a top-level manifest.json listing every scene file with its seed.
// Scene i of split s uses seed seed * 10^7 + s * 10^6 + i.
BuildReport build_splits(const BuildConfig& cfg);

std::uint64_t scene_seed(std::uint64_t base, int split, int index);

// scenes.json round trip. The file also carries the split's category list.
nlohmann::json scenes_to_json(const std::vector<Scene>& scenes, const std::vector<Category>& categories);
std::pair<std::vector<Scene>, std::vector<Category>> scenes_from_json(const nlohmann::json& j);

struct SplitData {
  std::filesystem::path dir;
  std::vector<Scene> scenes;
  std::vector<Category> categories;
};

SplitData load_split(const std::filesystem::path& dir);

}  // namespace gdino::synth
