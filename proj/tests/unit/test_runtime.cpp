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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "gdino/runtime.hpp"
#include "test_models.hpp"

namespace gdino::runtime {
namespace {

namespace fs = std::filesystem;

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// One small generated dataset shared by every test in this file.
class RuntimeTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "gdino_runtime_test";
    fs::remove_all(root_);
    synth::BuildConfig b;
    b.out_dir = root_ / "data";
    b.seed = 11;
    b.train_scenes = 12;
    b.val_scenes = 4;
    b.test_scenes = 6;
    synth::build_splits(b);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static RunConfig run_config(const std::string& out, int steps) {
    RunConfig c;
    c.model = gdino::testing::tiny_model();
    c.data.train_dir = (root_ / "data/train").string();
    c.data.val_dir = (root_ / "data/val").string();
    c.data.output_dir = (root_ / out).string();
    c.optimizer.steps = steps;
    c.optimizer.batch_size = 2;
    c.optimizer.eval_every = 0;
    c.optimizer.log_every = 1;
    c.seed = 4;
    return c;
  }

  static fs::path root_;
};

fs::path RuntimeTest::root_;

TEST(BuildPrompt, FollowsTheGivenOrder) {
  const auto vocab = text::Vocabulary::builtin();
  const std::vector<synth::Category> cats{{"red", "circle"}, {"blue", "square"}, {"green", "triangle"}};
  const int order[] = {2, 0};
  const Prompt p = build_prompt(cats, order, vocab);
  EXPECT_EQ(text::detokenize(p.tokens, vocab), "green triangle . red circle .");
  EXPECT_EQ(p.phrase_category, (std::vector<int>{2, 0}));
  EXPECT_EQ(p.spans, (std::vector<std::vector<int>>{{0, 1}, {3, 4}}));
  EXPECT_EQ(p.phrase_of(0), 1);
  EXPECT_EQ(p.phrase_of(1), -1);
  const std::vector<synth::Category> unknown{{"red", "zigzag"}};
  const int first[] = {0};
  EXPECT_THROW(build_prompt(unknown, first, vocab), Error);
}

TEST(GroundTruth, NormalizedCentersForPromptedObjects) {
  const auto vocab = text::Vocabulary::builtin();
  const std::vector<synth::Category> cats{{"red", "circle"}, {"blue", "square"}};
  synth::Scene s;
  s.width = s.height = 64;
  s.objects.push_back({"circle", "red", Box{0, 0, 32, 16}, "red circle"});
  s.objects.push_back({"square", "blue", Box{16, 16, 48, 48}, "blue square"});
  const int object_category[] = {0, 1};
  const int only_square[] = {1};
  const auto gt = ground_truth(s, object_category, build_prompt(cats, only_square, vocab));
  ASSERT_EQ(gt.size(), 1);
  EXPECT_EQ(gt.boxes[0], (std::array<double, 4>{0.5, 0.5, 0.5, 0.5}));
  EXPECT_EQ(gt.spans[0], (std::vector<int>{0, 1}));
  const int both[] = {0, 1};
  const auto all = ground_truth(s, object_category, build_prompt(cats, both, vocab));
  ASSERT_EQ(all.size(), 2);
  EXPECT_EQ(all.boxes[0], (std::array<double, 4>{0.25, 0.125, 0.5, 0.25}));
  EXPECT_EQ(all.spans[1], (std::vector<int>{3, 4}));
}

TEST_F(RuntimeTest, LoadDatasetMapsObjectsToCategories) {
  const auto data = load_dataset(root_ / "data/train");
  ASSERT_EQ(data.images.size(), 12u);
  EXPECT_EQ(data.images[0].shape, (Shape{64, 64, 3}));
  for (std::size_t i = 0; i < data.images.size(); ++i)
    for (std::size_t o = 0; o < data.split.scenes[i].objects.size(); ++o)
      EXPECT_EQ(data.split.categories[static_cast<std::size_t>(data.object_category[i][o])].phrase(),
                data.split.scenes[i].objects[o].phrase);
  EXPECT_EQ(load_dataset(root_ / "data/train", 3).images.size(), 3u);
  EXPECT_THROW(load_dataset(root_ / "nowhere"), Error);
}

TEST_F(RuntimeTest, ZeroStepTrainingSavesTheInitialModel) {
  const RunConfig cfg = run_config("zero", 0);
  const auto summary = train(cfg);
  EXPECT_EQ(summary.steps, 0);
  const auto loaded = load_model(summary.last_checkpoint);
  const auto vocab = text::Vocabulary::builtin();
  const GroundingModel<float> fresh(cfg.model, cfg.ablations, vocab.size(), cfg.seed);
  ASSERT_EQ(loaded.model->params().size(), fresh.params().size());
  for (int i = 0; i < fresh.params().size(); ++i)
    EXPECT_EQ(loaded.model->params()[i].value.data, fresh.params()[i].value.data) << fresh.params()[i].name;
  EXPECT_EQ(loaded.meta.at("step"), 0);
  EXPECT_TRUE(fs::exists(summary.best_checkpoint));
  EXPECT_EQ(load_run_config(fs::path(cfg.data.output_dir) / "config.json"), cfg);
}

TEST_F(RuntimeTest, MetricsLinesHaveAStableSchema) {
  const RunConfig cfg = run_config("schema", 2);
  std::vector<nlohmann::json> seen;
  train(cfg, [&](const nlohmann::json& j) { seen.push_back(j); });
  std::ifstream in(fs::path(cfg.data.output_dir) / "metrics.jsonl");
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(nlohmann::json::parse(line));
  EXPECT_EQ(lines, seen);
  ASSERT_EQ(lines.size(), 3u);  // two training steps, then the final validation
  for (int s = 0; s < 2; ++s) {
    EXPECT_EQ(lines[static_cast<std::size_t>(s)]["step"], s);
    for (const char* key : {"loss", "cls", "l1", "giou", "lr", "grad_norm"})
      EXPECT_TRUE(lines[static_cast<std::size_t>(s)][key].is_number()) << key;
  }
  const auto& val = lines[2]["val"];
  for (const char* key : {"ap50", "ap", "rec_top1", "rec_queries", "images", "per_category"})
    EXPECT_TRUE(val.contains(key)) << key;
  EXPECT_EQ(val["images"], 4);
}

TEST_F(RuntimeTest, TrainingIsDeterministic) {
  const auto a = train(run_config("det_a", 2));
  const auto b = train(run_config("det_b", 2));
  EXPECT_EQ(read_bytes(a.last_checkpoint), read_bytes(b.last_checkpoint));
  EXPECT_EQ(read_bytes(root_ / "det_a/metrics.jsonl"), read_bytes(root_ / "det_b/metrics.jsonl"));
  EXPECT_EQ(a.final_loss, b.final_loss);
}

TEST_F(RuntimeTest, InferThresholdAndRec) {
  const auto vocab = text::Vocabulary::builtin();
  const GroundingModel<float> model(gdino::testing::tiny_model(), Ablations{}, vocab.size(), 3);
  const auto data = load_dataset(root_ / "data/val");
  const std::string prompt = "red circle . blue square .";
  EXPECT_TRUE(infer(model, vocab, data.images[0], prompt, 1.01, false).empty());
  const auto all = infer(model, vocab, data.images[0], prompt, 0.0, false);
  EXPECT_EQ(all.size(), 2u * 10u);
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_GE(all[i - 1].score, all[i].score);
  const auto rec = infer(model, vocab, data.images[0], prompt, 1.01, true);
  ASSERT_EQ(rec.size(), 1u);
  EXPECT_EQ(rec[0].score, all[0].score);
  EXPECT_EQ(detections_to_json(rec)["detections"].size(), 1u);
  EXPECT_THROW(infer(model, vocab, data.images[0], " . ", 0.5, false), Error);
}

TEST_F(RuntimeTest, UntrainedModelScoresNearChance) {
  const auto vocab = text::Vocabulary::builtin();
  const GroundingModel<float> model(gdino::testing::tiny_model(), Ablations{}, vocab.size(), 3);
  const auto data = load_dataset(root_ / "data/test_open");
  const auto r = evaluate(model, vocab, data, EvalOptions{});
  EXPECT_EQ(r.images, 6);
  EXPECT_GT(r.rec_queries, 0);
  EXPECT_LT(r.ap50, 0.05);
  EXPECT_LE(r.ap, r.ap50);
}

TEST_F(RuntimeTest, EvaluationIgnoresPromptOrder) {
  const auto vocab = text::Vocabulary::builtin();
  const GroundingModel<float> model(gdino::testing::tiny_model(), Ablations{}, vocab.size(), 8);
  const auto data = load_dataset(root_ / "data/val");
  EvalOptions base;
  base.rec = false;
  const auto r0 = evaluate(model, vocab, data, base);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EvalOptions shuffled = base;
    shuffled.shuffle_seed = seed;
    const auto r = evaluate(model, vocab, data, shuffled);
    EXPECT_EQ(r.ap50, r0.ap50) << seed;
    EXPECT_EQ(r.per_category, r0.per_category) << seed;
  }
}

TEST(AblationArms, FullModelFirstThenOneSwitchEach) {
  const auto arms = ablation_arms();
  ASSERT_EQ(arms.size(), 5u);
  EXPECT_EQ(arms[0].flags, Ablations{});
  for (std::size_t i = 1; i < arms.size(); ++i) {
    const auto& f = arms[i].flags;
    EXPECT_EQ(int(f.no_encoder_fusion) + int(f.static_query_selection) + int(f.no_text_cross_attention) +
                  int(f.word_level_prompt),
              1)
        << arms[i].name;
  }
  std::vector<AblationRow> rows{{"full", {0.5, 0.7}, {0.2, 0.4}, 0.6, 0.3}};
  const auto table = format_ablation_table(rows);
  EXPECT_NE(table.find("full"), std::string::npos);
}

}  // namespace
}  // namespace gdino::runtime
