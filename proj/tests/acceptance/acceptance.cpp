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

// Acceptance harness: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Thresholds are fixed below; only the
// working directory and the subset of criteria to run are configurable.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gdino/boxes.hpp"
#include "gdino/hungarian.hpp"
#include "gdino/query_selection.hpp"
#include "gdino/runtime.hpp"
#include "gradient_suite.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace gdino;

namespace {

// ---- pinned thresholds --------------------------------------------------

constexpr double kGradRelTolerance = 1e-5;
constexpr int kGradPoints = 20;
constexpr double kGradSeconds = 120;

constexpr int kHungarianTrials = 500;
constexpr int kHungarianMaxSide = 7;
constexpr double kHungarianSeconds = 30;

constexpr int kSelectionTrials = 200;
constexpr std::int64_t kSelectionMaxImage = 2000;
constexpr std::int64_t kSelectionMaxText = 64;

constexpr double kGiouHandTolerance = 1e-9;
constexpr int kGiouPairs = 10000;

constexpr int kOverfitScenes = 16;
constexpr int kOverfitSteps = 1500;  // <= 2000
constexpr double kOverfitAp50 = 0.9;
constexpr double kOverfitRec = 0.8;
constexpr double kOverfitSeconds = 30 * 60;

constexpr int kOpenTrainScenes = 2000;
constexpr int kOpenEvalScenes = 200;
constexpr int kOpenSteps = 6000;
constexpr double kOpenAp50 = 0.5;
constexpr double kChanceAp50 = 0.05;
constexpr double kOpenSeconds = 2 * 60 * 60;

constexpr int kAblationSteps = 2000;
const std::vector<std::uint64_t> kAblationSeeds = {0, 1, 2};

constexpr int kDeterminismSteps = 20;

const std::vector<std::uint64_t> kShuffleSeeds = {1, 2, 3, 4, 5};

// ---- helpers ------------------------------------------------------------

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void log(const std::string& line) { std::cerr << "[acceptance] " << line << std::endl; }

Box random_box(Rng& rng) {
  const double x = rng.uniform(0, 1), y = rng.uniform(0, 1);
  return Box{x, y, x + rng.uniform(0.01, 1), y + rng.uniform(0.01, 1)};
}

// Shared, lazily built artifacts.
class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  const fs::path& root() const { return root_; }

  // 16 training scenes; val points at the same scenes.
  fs::path overfit_data() {
    const auto dir = root_ / "overfit_data";
    if (!overfit_data_built_) {
      synth::BuildConfig b;
      b.out_dir = dir;
      b.seed = 100;
      b.train_scenes = kOverfitScenes;
      b.val_scenes = 0;
      b.test_scenes = 0;
      synth::build_splits(b);
      overfit_data_built_ = true;
    }
    return dir;
  }

  fs::path open_data() {
    const auto dir = root_ / "open_data";
    if (!open_data_built_) {
      synth::BuildConfig b;
      b.out_dir = dir;
      b.seed = 200;
      b.train_scenes = kOpenTrainScenes;
      b.val_scenes = kOpenEvalScenes;
      b.test_scenes = kOpenEvalScenes;
      synth::build_splits(b);
      open_data_built_ = true;
    }
    return dir;
  }

  RunConfig overfit_config(const std::string& out, int steps) {
    RunConfig c;
    const auto data = overfit_data();
    c.data.train_dir = (data / "train").string();
    c.data.val_dir = (data / "train").string();
    c.data.output_dir = (root_ / out).string();
    c.optimizer.steps = steps;
    c.optimizer.eval_every = 250;
    c.optimizer.log_every = 50;
    c.seed = 0;
    return c;
  }

  RunConfig open_config(const std::string& out, int steps) {
    RunConfig c;
    const auto data = open_data();
    c.data.train_dir = (data / "train").string();
    c.data.val_dir = (data / "val").string();
    c.data.test_open_dir = (data / "test_open").string();
    c.data.output_dir = (root_ / out).string();
    c.optimizer.steps = steps;
    c.optimizer.eval_every = 1000;
    c.optimizer.log_every = 100;
    c.seed = 0;
    c.ablation_seeds = kAblationSeeds;
    return c;
  }

  struct Trained {
    fs::path checkpoint;
    double seconds = 0;
  };

  const Trained& overfit_run() {
    if (!overfit_) {
      Stopwatch sw;
      const auto summary = runtime::train(overfit_config("overfit_run", kOverfitSteps), progress("overfit"));
      overfit_ = Trained{summary.last_checkpoint, sw.seconds()};
    }
    return *overfit_;
  }

  const Trained& open_run() {
    if (!open_) {
      open_data();
      Stopwatch sw;
      const auto summary = runtime::train(open_config("open_run", kOpenSteps), progress("open-set"));
      open_ = Trained{summary.best_checkpoint, sw.seconds()};
    }
    return *open_;
  }

 private:
  static std::function<void(const nlohmann::json&)> progress(const std::string& tag) {
    return [tag](const nlohmann::json& j) {
      if (j.contains("val")) {
        log(tag + " step " + j["step"].dump() + ": val ap50 " + fmt(j["val"]["ap50"].get<double>()));
      } else if (j["step"].get<int>() % 500 == 0) {
        log(tag + " step " + j["step"].dump() + ": loss " + fmt(j["loss"].get<double>()));
      }
    };
  }

  fs::path root_;
  bool overfit_data_built_ = false, open_data_built_ = false;
  std::optional<Trained> overfit_, open_;
};

// ---- criteria -----------------------------------------------------------

Outcome gradient_suite(Workspace&) {
  Stopwatch sw;
  const auto reports = testing::run_gradient_suite(kGradPoints, 2024);
  double worst = 0;
  std::string worst_name;
  for (const auto& r : reports) {
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
  }
  const double t = sw.seconds();
  return {worst < kGradRelTolerance && t < kGradSeconds,
          std::to_string(reports.size()) + " operand cases x " + std::to_string(kGradPoints) +
              " points, worst rel error " + fmt(worst, 3) + " (" + worst_name + "), " + fmt(t, 3) + " s"};
}

Outcome hungarian_oracle(Workspace&) {
  Stopwatch sw;
  Rng rng(7);
  int exact = 0;
  for (int trial = 0; trial < kHungarianTrials; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, kHungarianMaxSide));
    const int m = static_cast<int>(rng.uniform_int(1, n));
    std::vector<double> cost(static_cast<std::size_t>(n * m));
    for (auto& c : cost) c = trial % 3 == 0 ? static_cast<double>(rng.uniform_int(0, 4)) : rng.uniform(-10, 10);
    const auto a = hungarian(cost, n, m);
    exact += a.total(cost, m) == testing::brute_force_assignment_cost(cost, n, m) ? 1 : 0;
  }
  const double t = sw.seconds();
  return {exact == kHungarianTrials && t < kHungarianSeconds,
          std::to_string(exact) + "/" + std::to_string(kHungarianTrials) + " exact, " + fmt(t, 3) + " s"};
}

Outcome selection_oracle(Workspace&) {
  Rng rng(13);
  int exact = 0;
  for (int trial = 0; trial < kSelectionTrials; ++trial) {
    const auto n = rng.uniform_int(1, kSelectionMaxImage), m = rng.uniform_int(1, kSelectionMaxText);
    const auto d = rng.uniform_int(1, 32);
    const bool coarse = trial % 4 == 0;
    Tensor<float> image(Shape{n, d}), text(Shape{m, d});
    for (auto* t : {&image, &text})
      for (auto& v : t->data) v = coarse ? static_cast<float>(rng.uniform_int(-2, 2)) : static_cast<float>(rng.normal());
    Mask valid(static_cast<std::size_t>(m));
    for (auto& v : valid) v = rng.uniform() < 0.8;
    valid[static_cast<std::size_t>(rng.uniform_int(0, m - 1))] = 1;
    const auto k = rng.uniform_int(1, std::min<std::int64_t>(n, 900));
    exact += language_guided_select(image, text, valid, k).indices == testing::brute_force_select(image, text, valid, k)
                 ? 1
                 : 0;
  }
  int invariant = 0;
  for (int trial = 0; trial < kSelectionTrials; ++trial) {
    const auto n = rng.uniform_int(1, 500), m = rng.uniform_int(1, 16);
    // Dyadic logits and shifts keep every sum exact.
    std::vector<double> logits(static_cast<std::size_t>(n * m));
    for (auto& v : logits) v = static_cast<double>(rng.uniform_int(-256, 256)) / 64.0;
    const Mask valid(static_cast<std::size_t>(m), 1);
    const auto k = rng.uniform_int(1, n);
    const auto base = select_from_logits(logits, n, m, valid, k);
    const double c = static_cast<double>(rng.uniform_int(-80, 80)) / 8.0;
    for (auto& v : logits) v += c;
    invariant += select_from_logits(logits, n, m, valid, k).indices == base.indices ? 1 : 0;
  }
  return {exact == kSelectionTrials && invariant == kSelectionTrials,
          std::to_string(exact) + "/" + std::to_string(kSelectionTrials) + " oracle matches, " +
              std::to_string(invariant) + "/" + std::to_string(kSelectionTrials) + " shift-invariant"};
}

Outcome giou_checks(Workspace&) {
  const Box unit{0, 0, 1, 1};
  const double identity = giou(unit, unit);
  const double corner = giou(unit, Box{1, 1, 2, 2});
  const double nested = giou(Box{0, 0, 2, 1}, Box{0, 0, 2, 2});
  const bool hand = std::abs(identity - 1.0) <= kGiouHandTolerance && std::abs(corner + 0.5) <= kGiouHandTolerance &&
                    std::abs(nested - 0.5) <= kGiouHandTolerance;
  Rng rng(17);
  int ok = 0;
  for (int i = 0; i < kGiouPairs; ++i) {
    const Box a = random_box(rng), b = random_box(rng);
    ok += giou(a, b) <= iou(a, b) ? 1 : 0;
  }
  return {hand && ok == kGiouPairs, "identity " + fmt(identity, 12) + ", corner " + fmt(corner, 12) + ", nested " +
                                        fmt(nested, 12) + "; giou <= iou on " + std::to_string(ok) + "/" +
                                        std::to_string(kGiouPairs) + " pairs"};
}

Outcome phrase_isolation(Workspace&) {
  const auto vocab = text::Vocabulary::builtin();
  const ModelConfig cfg;
  ParamStore<float> store;
  Rng rng(5);
  const TextBackbone<float> backbone(store, cfg, vocab.size(), rng);
  auto cat = [&](const std::string& prompt, bool word_level) {
    auto tp = text::pad_to(text::tokenize(prompt, vocab), 24, vocab);
    int at = -1;
    for (int i = 0; i < tp.size(); ++i)
      if (tp.tokens[static_cast<std::size_t>(i)] == vocab.id("cat")) at = i;
    if (word_level) tp = as_word_level(tp);
    const auto mask = word_level ? text::build_wordlevel_mask(tp) : text::build_subsentence_mask(tp);
    Graph<float> g;
    g.set_grad_enabled(false);
    const auto f = backbone.forward(g, tp, mask).features.tensor();
    const auto d = f.dim(1);
    return std::vector<float>(f.data.begin() + at * d, f.data.begin() + (at + 1) * d);
  };
  auto same = [](const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
  };
  const std::vector<std::string> prompts = {"cat . dog .", "cat . bird .", "dog . cat .",
                                            "big red circle . cat . bird .", "cat ."};
  const auto ref = cat(prompts[0], false);
  int identical = 0;
  for (const auto& p : prompts) identical += same(ref, cat(p, false)) ? 1 : 0;
  const bool leaks = !same(cat(prompts[0], true), cat(prompts[1], true));
  return {identical == static_cast<int>(prompts.size()) && leaks,
          std::to_string(identical) + "/" + std::to_string(prompts.size()) +
              " prompts give bitwise-identical 'cat' features; word-level mask " + (leaks ? "differs" : "identical")};
}

Outcome overfit(Workspace& ws) {
  const auto& run = ws.overfit_run();
  const auto lm = runtime::load_model(run.checkpoint);
  const auto data = runtime::load_dataset(ws.overfit_data() / "train");
  const auto r = runtime::evaluate(*lm.model, lm.vocab, data, runtime::EvalOptions{});
  return {r.ap50 >= kOverfitAp50 && r.rec_top1 >= kOverfitRec && run.seconds <= kOverfitSeconds,
          "train ap50 " + fmt(r.ap50) + " (>= " + fmt(kOverfitAp50) + "), rec top-1 " + fmt(r.rec_top1) + " over " +
              std::to_string(r.rec_queries) + " queries (>= " + fmt(kOverfitRec) + "), " +
              std::to_string(kOverfitSteps) + " steps in " + fmt(run.seconds / 60, 3) + " min"};
}

Outcome open_set(Workspace& ws) {
  const auto data = runtime::load_dataset(ws.open_data() / "test_open");
  const auto vocab = text::Vocabulary::builtin();
  const GroundingModel<float> untrained(ModelConfig{}, Ablations{}, vocab.size(), 0);
  const double chance = runtime::evaluate(untrained, vocab, data, runtime::EvalOptions{}).ap50;
  const auto& run = ws.open_run();
  const auto lm = runtime::load_model(run.checkpoint);
  const auto r = runtime::evaluate(*lm.model, lm.vocab, data, runtime::EvalOptions{});
  return {r.ap50 >= kOpenAp50 && chance < kChanceAp50 && run.seconds <= kOpenSeconds,
          "test_open ap50 " + fmt(r.ap50) + " (>= " + fmt(kOpenAp50) + "), untrained " + fmt(chance) + " (< " +
              fmt(kChanceAp50) + "), rec top-1 " + fmt(r.rec_top1) + ", trained in " + fmt(run.seconds / 60, 3) +
              " min"};
}

Outcome ablations(Workspace& ws) {
  const RunConfig base = ws.open_config("ablation", kAblationSteps);
  const auto rows = runtime::ablate(base, [](const std::string& s) { log("ablation: " + s); });
  std::cerr << runtime::format_ablation_table(rows);
  const double full = rows.front().mean_open;
  bool pass = true;
  std::string detail = "mean open ap50: full " + fmt(full);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    pass = pass && rows[i].mean_open <= full;
    detail += ", " + rows[i].arm + " " + fmt(rows[i].mean_open);
  }
  return {pass, detail + " (" + std::to_string(kAblationSeeds.size()) + " seeds, " + std::to_string(kAblationSteps) +
                    " steps each)"};
}

Outcome determinism(Workspace& ws) {
  std::vector<std::string> metrics, last, best, eval;
  for (const char* name : {"determinism_a", "determinism_b"}) {
    RunConfig c = ws.overfit_config(name, kDeterminismSteps);
    c.optimizer.eval_every = 10;
    c.optimizer.log_every = 1;
    c.seed = 42;
    const auto s = runtime::train(c);
    metrics.push_back(read_bytes(fs::path(c.data.output_dir) / "metrics.jsonl"));
    last.push_back(read_bytes(s.last_checkpoint));
    best.push_back(read_bytes(s.best_checkpoint));
    const auto lm = runtime::load_model(s.last_checkpoint);
    const auto data = runtime::load_dataset(c.data.train_dir);
    eval.push_back(runtime::evaluate(*lm.model, lm.vocab, data, runtime::EvalOptions{}).to_json().dump());
  }
  const bool m = metrics[0] == metrics[1], l = last[0] == last[1], b = best[0] == best[1], e = eval[0] == eval[1];
  auto word = [](bool v) { return v ? "identical" : "DIFFER"; };
  return {m && l && b && e, std::string("metrics.jsonl ") + word(m) + ", last.ckpt " + word(l) + ", best.ckpt " +
                                word(b) + ", eval JSON " + word(e) + " (" + std::to_string(metrics[0].size()) +
                                " log bytes)"};
}

Outcome shuffle_invariance(Workspace& ws) {
  // The open-set checkpoint ranks imperfectly, so exact equality is informative.
  const auto lm = runtime::load_model(ws.open_run().checkpoint);
  runtime::EvalOptions base;
  base.rec = false;
  int equal = 0, total = 0;
  std::string detail;
  for (const char* split : {"val", "test_open"}) {
    const auto data = runtime::load_dataset(ws.open_data() / split);
    const double ref = runtime::evaluate(*lm.model, lm.vocab, data, base).ap50;
    std::string values;
    for (auto seed : kShuffleSeeds) {
      runtime::EvalOptions o = base;
      o.shuffle_seed = seed;
      const double v = runtime::evaluate(*lm.model, lm.vocab, data, o).ap50;
      equal += v == ref ? 1 : 0;
      ++total;
      values += (values.empty() ? "" : ", ") + fmt(v, 17);
    }
    detail += std::string(detail.empty() ? "" : "; ") + split + " ap50 " + fmt(ref, 17) + " vs shuffled " + values;
  }
  return {equal == total, std::to_string(equal) + "/" + std::to_string(total) + " identical; " + detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the grounding detector"};
  std::string work_dir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "Scratch directory (cleared at start)");
  app.add_option("--only", only, "Run only these criteria (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome(Workspace&)>>> criteria = {
      {"gradient suite", gradient_suite},
      {"hungarian oracle", hungarian_oracle},
      {"query selection oracle", selection_oracle},
      {"giou", giou_checks},
      {"sub-sentence isolation", phrase_isolation},
      {"overfit", overfit},
      {"open-set generalization", open_set},
      {"directional ablations", ablations},
      {"determinism", determinism},
      {"prompt-shuffle invariance", shuffle_invariance},
  };
  const std::set<int> selected(only.begin(), only.end());

  fs::remove_all(work_dir);
  Workspace ws(work_dir);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    log("running criterion " + std::to_string(id) + ": " + criteria[i].first);
    Outcome o;
    try {
      o = criteria[i].second(ws);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " [" << criteria[i].first << "] "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
