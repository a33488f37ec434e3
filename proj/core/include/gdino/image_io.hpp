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

#include <array>
#include <filesystem>

#include "gdino/boxes.hpp"
#include "gdino/tensor.hpp"

namespace gdino {

using Rgb = std::array<float, 3>;

// Binary PPM (P6, maxval <= 255) to [H, W, 3] in [0, 1] and back. Writing
// rounds to the nearest byte after clamping to [0, 1].
Tensor<float> read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor<float>& image);

// Draws the outline of a pixel-coordinate box, clipped to the image.
void draw_box(Tensor<float>& image, const Box& pixels, const Rgb& color, int thickness = 1);

}  // namespace gdino
