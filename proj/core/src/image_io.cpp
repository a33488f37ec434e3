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

#include "gdino/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace gdino {
namespace {

// Next whitespace-separated header field, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  while (true) {
    const int c = in.get();
    if (c == EOF) throw Error("truncated PPM header in " + path.string());
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in, path);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error("bad PPM header field '" + tok + "' in " + path.string());
  }
}

}  // namespace

Tensor<float> read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image " + path.string());
  if (header_token(in, path) != "P6") throw Error(path.string() + " is not a binary PPM (P6)");
  const int width = header_int(in, path);
  const int height = header_int(in, path);
  const int maxval = header_int(in, path);
  if (maxval > 255) throw Error(path.string() + ": 16-bit PPM is not supported");
  // header_token consumed exactly one whitespace byte after maxval.
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw Error("truncated pixel data in " + path.string());
  Tensor<float> img(Shape{height, width, 3});
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = static_cast<float>(bytes[i]) / static_cast<float>(maxval);
  return img;
}

void write_ppm(const std::filesystem::path& path, const Tensor<float>& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("write_ppm: expected [H, W, 3], got " + shape_str(image.shape));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image " + path.string());
  out << "P6\n" << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
  std::vector<unsigned char> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const float v = std::clamp(image.data[i], 0.0f, 1.0f);
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

void draw_box(Tensor<float>& image, const Box& pixels, const Rgb& color, int thickness) {
  const auto h = static_cast<int>(image.dim(0)), w = static_cast<int>(image.dim(1));
  const int x1 = static_cast<int>(std::floor(pixels.x1)), y1 = static_cast<int>(std::floor(pixels.y1));
  const int x2 = static_cast<int>(std::ceil(pixels.x2)) - 1, y2 = static_cast<int>(std::ceil(pixels.y2)) - 1;
  auto put = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    float* p = image.data.data() + (static_cast<std::size_t>(y) * w + x) * 3;
    std::copy(color.begin(), color.end(), p);
  };
  for (int t = 0; t < thickness; ++t) {
    for (int x = x1; x <= x2; ++x) {
      put(x, y1 + t);
      put(x, y2 - t);
    }
    for (int y = y1; y <= y2; ++y) {
      put(x1 + t, y);
      put(x2 - t, y);
    }
  }
}

}  // namespace gdino
