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

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "gdino/config.hpp"
#include "gdino/params.hpp"
#include "gdino/text.hpp"

namespace gdino {

// File layout: the 8-byte magic "GDINOCK1", a little-endian uint64 header
// length, the JSON header, then every parameter as little-endian float32 in
// manifest order. The header holds the model config and its hash, the
// ablation switches, the vocabulary, free-form metadata and the manifest
// (name, shape, byte offset into the blob).
inline constexpr char kCheckpointMagic[9] = "GDINOCK1";

struct Checkpoint {
  ModelConfig model;
  Ablations ablations;
  std::uint64_t config_hash = 0;
  std::vector<std::string> vocab;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor<float>> params;
};

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& store, const ModelConfig& model,
                     const Ablations& ablations, const text::Vocabulary& vocab,
                     const nlohmann::json& meta = nlohmann::json::object());

// Throws on a bad magic, truncated data, or a header hash that does not match
// the stored model config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint tensors into `store`. Names and shapes must match one to
// one; a config hash different from `expected` is an error unless `force`.
void restore_params(ParamStore<float>& store, const Checkpoint& ckpt, const ModelConfig& expected, bool force = false);

nlohmann::json to_json(const Ablations& a);
Ablations ablations_from_json(const nlohmann::json& j);

}  // namespace gdino
