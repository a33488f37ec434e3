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

#include "gdino/backbone.hpp"

#include <cmath>
#include <numbers>

namespace gdino {
namespace {

constexpr int kStemStride = 4;

std::int64_t conv_out(std::int64_t n, int kernel, int stride, int pad) { return (n + 2 * pad - kernel) / stride + 1; }

template <typename T>
Tensor<T> uniform_init(Rng& rng, Shape shape, double bound) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Tensor<T> normal_init(Rng& rng, Shape shape, double stddev) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.normal() * stddev);
  return t;
}

// DETR-style sinusoid of a normalized coordinate into `width` columns.
template <typename T>
void sine_encode(double coord, int width, T* out) {
  const double scaled = coord * 2.0 * std::numbers::pi;
  for (int i = 0; i < width; ++i) {
    const double dim_t = std::pow(10000.0, 2.0 * (i / 2) / static_cast<double>(width));
    const double v = scaled / dim_t;
    out[i] = static_cast<T>(i % 2 == 0 ? std::sin(v) : std::cos(v));
  }
}

}  // namespace

std::vector<LevelShape> pyramid_shapes(int height, int width) {
  if (height <= 0 || width <= 0 || height % 32 != 0 || width % 32 != 0) {
    throw ShapeError("image size " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by 32");
  }
  std::vector<LevelShape> levels;
  std::int64_t h = conv_out(height, kStemStride, kStemStride, 0);
  std::int64_t w = conv_out(width, kStemStride, kStemStride, 0);
  std::int64_t start = 0;
  for (int l = 0; l < 4; ++l) {
    h = conv_out(h, 3, 2, 1);
    w = conv_out(w, 3, 2, 1);
    levels.push_back(LevelShape{h, w, start});
    start += h * w;
  }
  return levels;
}

template <typename T>
Tensor<T> token_centers(std::span<const LevelShape> levels) {
  std::int64_t n = 0;
  for (const auto& lv : levels) n += lv.height * lv.width;
  Tensor<T> out(Shape{n, 2});
  for (const auto& lv : levels)
    for (std::int64_t r = 0; r < lv.height; ++r)
      for (std::int64_t c = 0; c < lv.width; ++c) {
        const std::int64_t i = lv.start + r * lv.width + c;
        out.at(i, 0) = static_cast<T>((static_cast<double>(c) + 0.5) / static_cast<double>(lv.width));
        out.at(i, 1) = static_cast<T>((static_cast<double>(r) + 0.5) / static_cast<double>(lv.height));
      }
  return out;
}

template <typename T>
Tensor<T> sine_position_embedding(std::span<const LevelShape> levels, int d) {
  const Tensor<T> centers = token_centers<T>(levels);
  const std::int64_t n = centers.dim(0);
  Tensor<T> out(Shape{n, d});
  const int half = d / 2;
  for (std::int64_t i = 0; i < n; ++i) {
    sine_encode<T>(centers.at(i, 1), half, out.data.data() + i * d);
    sine_encode<T>(centers.at(i, 0), half, out.data.data() + i * d + half);
  }
  return out;
}

template <typename T>
Tensor<T> box_sine_embedding(const Tensor<T>& boxes, int d) {
  const std::int64_t n = boxes.dim(0);
  const int half = d / 2;
  Tensor<T> out(Shape{n, 2 * static_cast<std::int64_t>(d)});
  for (std::int64_t i = 0; i < n; ++i)
    for (int k = 0; k < 4; ++k) sine_encode<T>(boxes.at(i, k), half, out.data.data() + i * 2 * d + k * half);
  return out;
}

template <typename T>
ImageBackbone<T>::ImageBackbone(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng) : store_(&store) {
  const auto group = ParamGroup::kImageBackbone;
  const std::int64_t stem_patch = static_cast<std::int64_t>(kStemStride) * kStemStride * 3;
  stem_w_ = store.add("image_backbone.stem.weight",
                      uniform_init<T>(rng, Shape{stem_patch, cfg.stem_width},
                                      std::sqrt(6.0 / static_cast<double>(stem_patch + cfg.stem_width))),
                      group);
  stem_b_ = store.add("image_backbone.stem.bias", Tensor<T>(Shape{cfg.stem_width}), group);
  stem_norm_ = nn::LayerNorm<T>(store, "image_backbone.stem.norm", cfg.stem_width, group);
  std::int64_t in = cfg.stem_width;
  for (int s = 0; s < 4; ++s) {
    const std::int64_t out = cfg.backbone_widths[static_cast<std::size_t>(s)];
    const std::int64_t patch = 9 * in;
    const std::string name = "image_backbone.stage" + std::to_string(s);
    stage_w_.push_back(store.add(name + ".weight",
                                 uniform_init<T>(rng, Shape{patch, out}, std::sqrt(6.0 / static_cast<double>(patch + out))),
                                 group));
    stage_b_.push_back(store.add(name + ".bias", Tensor<T>(Shape{out}), group));
    stage_norm_.emplace_back(store, name + ".norm", out, group);
    level_proj_.emplace_back(store, "image_backbone.level" + std::to_string(s) + ".proj", out, cfg.d_model, rng, group);
    level_norm_.emplace_back(store, "image_backbone.level" + std::to_string(s) + ".norm", cfg.d_model, group);
    in = out;
  }
}

template <typename T>
FeaturePyramid<T> ImageBackbone<T>::forward(Graph<T>& g, const Tensor<T>& image) const {
  if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("image must be [H, W, 3], got " + shape_str(image.shape));
  const int h = static_cast<int>(image.dim(0)), w = static_cast<int>(image.dim(1));
  FeaturePyramid<T> pyr;
  pyr.levels = pyramid_shapes(h, w);
  pyr.image_height = h;
  pyr.image_width = w;

  Var<T> x = g.constant(image);
  x = conv2d(x, g.param(*store_, stem_w_), g.param(*store_, stem_b_), kStemStride, kStemStride, 0);
  x = relu(stem_norm_(g, x));
  std::vector<Var<T>> flat_levels;
  for (int s = 0; s < 4; ++s) {
    x = conv2d(x, g.param(*store_, stage_w_[s]), g.param(*store_, stage_b_[s]), 3, 2, 1);
    x = relu(stage_norm_[s](g, x));
    const auto& lv = pyr.levels[static_cast<std::size_t>(s)];
    if (x.dim(0) != lv.height || x.dim(1) != lv.width) throw ShapeError("backbone level shape mismatch");
    Var<T> tokens = reshape(x, Shape{lv.height * lv.width, x.dim(2)});
    flat_levels.push_back(level_norm_[s](g, level_proj_[s](g, tokens)));
    pyr.strides.push_back(static_cast<int>(h / lv.height));
    for (std::int64_t r = 0; r < lv.height; ++r)
      for (std::int64_t c = 0; c < lv.width; ++c)
        pyr.location.push_back(TokenLocation{s, static_cast<int>(r), static_cast<int>(c)});
  }
  pyr.flat = concat_rows<T>(flat_levels);
  return pyr;
}

template <typename T>
TextBackbone<T>::TextBackbone(ParamStore<T>& store, const ModelConfig& cfg, int vocab_size, Rng& rng)
    : store_(&store), heads_(cfg.text_heads), vocab_size_(vocab_size), max_len_(cfg.max_text_len) {
  const auto group = ParamGroup::kTextBackbone;
  token_embed_ = store.add("text_backbone.token_embed", normal_init<T>(rng, Shape{vocab_size, cfg.d_model}, 0.5), group);
  pos_embed_ = store.add("text_backbone.pos_embed", normal_init<T>(rng, Shape{cfg.max_text_len, cfg.d_model}, 0.5), group);
  for (int b = 0; b < cfg.text_layers; ++b) {
    const std::string name = "text_backbone.block" + std::to_string(b);
    blocks_.push_back(Block{nn::LayerNorm<T>(store, name + ".norm1", cfg.d_model, group),
                            nn::Attention<T>(store, name + ".attn", cfg.d_model, cfg.text_heads, rng, group),
                            nn::LayerNorm<T>(store, name + ".norm2", cfg.d_model, group),
                            nn::FeedForward<T>(store, name + ".ffn", cfg.d_model, cfg.text_ffn_dim, rng, group)});
  }
  final_norm_ = nn::LayerNorm<T>(store, "text_backbone.final_norm", cfg.d_model, group);
}

template <typename T>
TextFeatures<T> TextBackbone<T>::forward(Graph<T>& g, const text::TokenizedPrompt& tp,
                                         const text::SubSentenceMask& mask) const {
  const int n = tp.size();
  if (mask.n != n) throw ShapeError("text mask is " + std::to_string(mask.n) + " wide for " + std::to_string(n) + " tokens");
  if (n == 0) throw ShapeError("empty prompt");
  if (n > max_len_) throw ShapeError("prompt longer than the model's text length");
  std::vector<std::int64_t> ids(tp.tokens.begin(), tp.tokens.end());
  std::vector<std::int64_t> pos(tp.position.begin(), tp.position.end());
  for (auto id : ids)
    if (id < 0 || id >= vocab_size_) throw ShapeError("token id outside the vocabulary");
  Var<T> x = add(gather_rows(g.param(*store_, token_embed_), ids), gather_rows(g.param(*store_, pos_embed_), pos));
  AttnMask am{tp.valid, mask.allow};
  for (const auto& b : blocks_) {
    Var<T> h = b.norm1(g, x);
    x = add(x, b.attn(g, h, h, h, am));
    x = add(x, b.ffn(g, b.norm2(g, x)));
  }
  x = final_norm_(g, x);
  const std::int64_t d = x.dim(1);
  Tensor<T> keep(Shape{n, d});
  for (int i = 0; i < n; ++i)
    if (tp.valid[i]) std::fill_n(keep.data.begin() + i * d, d, T(1));
  return TextFeatures<T>{mul(x, g.constant(std::move(keep))), tp.valid};
}

template Tensor<float> token_centers<float>(std::span<const LevelShape>);
template Tensor<double> token_centers<double>(std::span<const LevelShape>);
template Tensor<float> sine_position_embedding<float>(std::span<const LevelShape>, int);
template Tensor<double> sine_position_embedding<double>(std::span<const LevelShape>, int);
template Tensor<float> box_sine_embedding<float>(const Tensor<float>&, int);
template Tensor<double> box_sine_embedding<double>(const Tensor<double>&, int);
template class ImageBackbone<float>;
template class ImageBackbone<double>;
template class TextBackbone<float>;
template class TextBackbone<double>;

}  // namespace gdino
