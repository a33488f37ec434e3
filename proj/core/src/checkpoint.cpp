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

#include "gdino/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gdino {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json to_json(const Ablations& a) {
  return json{{"no_encoder_fusion", a.no_encoder_fusion},
              {"static_query_selection", a.static_query_selection},
              {"no_text_cross_attention", a.no_text_cross_attention},
              {"word_level_prompt", a.word_level_prompt}};
}

Ablations ablations_from_json(const json& j) {
  Ablations a;
  a.no_encoder_fusion = j.value("no_encoder_fusion", false);
  a.static_query_selection = j.value("static_query_selection", false);
  a.no_text_cross_attention = j.value("no_text_cross_attention", false);
  a.word_level_prompt = j.value("word_level_prompt", false);
  return a;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& store, const ModelConfig& model,
                     const Ablations& ablations, const text::Vocabulary& vocab, const json& meta) {
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& p : store.all()) {
    manifest.push_back(json{{"name", p.name}, {"shape", p.value.shape}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.value.size()) * sizeof(float);
  }
  json header{{"config_hash", model_config_hash(model)},
              {"model", to_json(model)},
              {"ablations", to_json(ablations)},
              {"vocab", vocab.tokens()},
              {"meta", meta},
              {"params", manifest}};
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + tmp.string());
    out.write(kCheckpointMagic, 8);
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : store.all()) {
      out.write(reinterpret_cast<const char*>(p.value.data.data()),
                static_cast<std::streamsize>(p.value.data.size() * sizeof(float)));
    }
    if (!out) throw Error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw Error(path.string() + " is not a checkpoint (bad magic)");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ull << 32)) throw Error(path.string() + ": bad header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(in.gcount()) != len) throw Error(path.string() + ": truncated header");

  Checkpoint ck;
  json header;
  try {
    header = json::parse(text);
    ck.model = model_config_from_json(header.at("model"));
    ck.ablations = ablations_from_json(header.at("ablations"));
    ck.config_hash = header.at("config_hash").get<std::uint64_t>();
    ck.vocab = header.at("vocab").get<std::vector<std::string>>();
    ck.meta = header.value("meta", json::object());
  } catch (const json::exception& e) {
    throw Error(path.string() + ": bad checkpoint header: " + e.what());
  }
  if (ck.config_hash != model_config_hash(ck.model)) throw Error(path.string() + ": config hash does not match header");

  const auto blob_start = static_cast<std::uint64_t>(in.tellg());
  for (const auto& entry : header.at("params")) {
    const auto name = entry.at("name").get<std::string>();
    Tensor<float> t(entry.at("shape").get<Shape>());
    const auto offset = entry.at("offset").get<std::uint64_t>();
    in.seekg(static_cast<std::streamoff>(blob_start + offset));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != t.data.size() * sizeof(float)) {
      throw Error(path.string() + ": truncated parameter " + name);
    }
    if (!ck.params.emplace(name, std::move(t)).second) throw Error(path.string() + ": duplicate parameter " + name);
  }
  return ck;
}

void restore_params(ParamStore<float>& store, const Checkpoint& ckpt, const ModelConfig& expected, bool force) {
  if (!force && ckpt.config_hash != model_config_hash(expected)) {
    throw Error("checkpoint was saved for a different model config");
  }
  if (static_cast<std::size_t>(store.size()) != ckpt.params.size()) {
    throw Error("checkpoint has " + std::to_string(ckpt.params.size()) + " parameters, model has " +
                std::to_string(store.size()));
  }
  for (auto& p : store.all()) {
    const auto it = ckpt.params.find(p.name);
    if (it == ckpt.params.end()) throw Error("checkpoint lacks parameter " + p.name);
    if (it->second.shape != p.value.shape) {
      throw ShapeError("parameter " + p.name + ": checkpoint " + shape_str(it->second.shape) + " vs model " +
                       shape_str(p.value.shape));
    }
    p.value.data = it->second.data;
  }
}

}  // namespace gdino
