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

#include "gdino/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "gdino/image_io.hpp"
#include "gdino/optim.hpp"

namespace gdino::runtime {

using nlohmann::json;

namespace {

int category_index(const std::vector<synth::Category>& cats, const synth::SceneObject& o) {
  for (std::size_t i = 0; i < cats.size(); ++i)
    if (cats[i].color == o.color && cats[i].shape == o.shape) return static_cast<int>(i);
  return -1;
}

Box normalized(const Box& pixels, int width, int height) {
  return Box{pixels.x1 / width, pixels.y1 / height, pixels.x2 / width, pixels.y2 / height};
}

Box corners_of(std::span<const float> boxes, std::int64_t q) {
  const auto i = static_cast<std::size_t>(q * 4);
  return from_cxcywh(boxes[i], boxes[i + 1], boxes[i + 2], boxes[i + 3]);
}

std::vector<double> row_as_double(std::span<const float> values, std::int64_t row, std::int64_t width) {
  const auto begin = values.begin() + row * width;
  return std::vector<double>(begin, begin + width);
}

// Scores of one query for every phrase of the prompt.
std::vector<double> query_scores(const LayerPrediction<float>& pred, std::int64_t q,
                                 const std::vector<std::vector<int>>& spans, PhrasePooling pooling) {
  const std::int64_t nt = pred.logits.dim(1);
  return phrase_scores(row_as_double(pred.logits.value(), q, nt), spans, pooling);
}

void write_json_line(std::ofstream& out, const json& j) {
  out << j.dump() << '\n';
  out.flush();
}

}  // namespace

int Prompt::phrase_of(int category) const {
  for (std::size_t k = 0; k < phrase_category.size(); ++k)
    if (phrase_category[k] == category) return static_cast<int>(k);
  return -1;
}

Dataset load_dataset(const std::filesystem::path& dir, int max_scenes) {
  Dataset ds;
  ds.split = synth::load_split(dir);
  if (max_scenes > 0 && static_cast<int>(ds.split.scenes.size()) > max_scenes) ds.split.scenes.resize(max_scenes);
  for (const auto& s : ds.split.scenes) {
    Tensor<float> img = read_ppm(dir / s.file);
    if (img.dim(0) != s.height || img.dim(1) != s.width) {
      throw Error(s.file + ": image size differs from scenes.json");
    }
    ds.images.push_back(std::move(img));
    std::vector<int> cats;
    for (const auto& o : s.objects) {
      const int c = category_index(ds.split.categories, o);
      if (c < 0) throw Error(s.file + ": object '" + o.phrase + "' is not in the split's category list");
      cats.push_back(c);
    }
    ds.object_category.push_back(std::move(cats));
  }
  return ds;
}

Prompt build_prompt(const std::vector<synth::Category>& categories, std::span<const int> order,
                    const text::Vocabulary& vocab) {
  std::vector<std::string> names;
  Prompt p;
  for (int c : order) {
    const auto& cat = categories.at(static_cast<std::size_t>(c));
    for (const auto& word : {cat.color, cat.shape}) {
      if (!vocab.contains(word)) throw Error("category word '" + word + "' is not in the vocabulary");
    }
    names.push_back(cat.phrase());
    p.phrase_category.push_back(c);
  }
  p.tokens = text::tokenize(text::assemble_prompt(names), vocab);
  p.spans = p.tokens.phrase_spans();
  if (p.spans.size() != names.size()) throw Error("prompt phrase count does not match its categories");
  return p;
}

GroundTruthSet ground_truth(const synth::Scene& scene, std::span<const int> object_category, const Prompt& prompt) {
  GroundTruthSet gt;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const int k = prompt.phrase_of(object_category[i]);
    if (k < 0) continue;  // category not in this prompt
    const Box b = normalized(scene.objects[i].box, scene.width, scene.height);
    gt.boxes.push_back(to_cxcywh(b));
    gt.spans.push_back(prompt.spans[static_cast<std::size_t>(k)]);
  }
  return gt;
}

text::Vocabulary load_vocabulary(const DataConfig& data) {
  return data.vocab_path.empty() ? text::Vocabulary::builtin() : text::Vocabulary::load(data.vocab_path);
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  LoadedModel lm;
  lm.vocab = text::Vocabulary(ck.vocab);
  lm.model = std::make_unique<GroundingModel<float>>(ck.model, ck.ablations, lm.vocab.size(), 0);
  restore_params(lm.model->params(), ck, ck.model);
  lm.meta = ck.meta;
  return lm;
}

json EvalResult::to_json() const {
  json cats = json::object();
  for (const auto& [name, v] : per_category) cats[name] = v;
  return json{{"ap50", ap50},   {"ap", ap}, {"rec_top1", rec_top1}, {"rec_queries", rec_queries},
              {"images", images}, {"per_category", cats}};
}

EvalResult evaluate(const GroundingModel<float>& model, const text::Vocabulary& vocab, const Dataset& data,
                    const EvalOptions& options) {
  const auto& cats = data.split.categories;
  EvalResult result;
  result.images = static_cast<int>(data.images.size());
  if (cats.empty() || data.images.empty()) return result;

  std::vector<int> order(cats.size());
  std::iota(order.begin(), order.end(), 0);
  if (options.shuffle_seed) {
    Rng rng(*options.shuffle_seed);
    rng.shuffle(order);
  }
  const Prompt prompt = build_prompt(cats, order, vocab);

  std::vector<Detection> detections;
  std::vector<GroundTruthBox> truths;
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const auto& scene = data.split.scenes[i];
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
      truths.push_back(GroundTruthBox{static_cast<int>(i), data.object_category[i][o],
                                      normalized(scene.objects[o].box, scene.width, scene.height)});
    }
    Graph<float> g;
    g.set_grad_enabled(false);
    const auto preds = model.forward(g, data.images[i], prompt.tokens);
    const auto& last = preds.final();
    const auto boxes = last.boxes.value();
    std::vector<Detection> dets;
    for (std::int64_t q = 0; q < last.boxes.dim(0); ++q) {
      const auto scores = query_scores(last, q, prompt.spans, options.pooling);
      for (std::size_t k = 0; k < scores.size(); ++k)
        dets.push_back(Detection{static_cast<int>(i), prompt.phrase_category[k], scores[k], corners_of(boxes, q)});
    }
    // Order independent of the prompt's phrase order: score, then category.
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
      return a.score > b.score || (a.score == b.score && a.category < b.category);
    });
    if (options.max_detections > 0 && static_cast<int>(dets.size()) > options.max_detections) {
      dets.resize(static_cast<std::size_t>(options.max_detections));
    }
    detections.insert(detections.end(), dets.begin(), dets.end());
  }
  const auto per_cat = average_precision(detections, truths, options.iou_threshold);
  result.ap50 = mean_ap(per_cat);
  for (const auto& [c, v] : per_cat) result.per_category[cats[static_cast<std::size_t>(c)].phrase()] = v;
  result.ap = mean_ap_coco(detections, truths);

  if (options.rec) {
    int hits = 0;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
      const auto& scene = data.split.scenes[i];
      const auto& oc = data.object_category[i];
      for (std::size_t o = 0; o < scene.objects.size(); ++o) {
        if (std::count(oc.begin(), oc.end(), oc[o]) != 1) continue;  // ambiguous referent
        const int only[] = {oc[o]};
        const Prompt single = build_prompt(cats, only, vocab);
        Graph<float> g;
        g.set_grad_enabled(false);
        const auto preds = model.forward(g, data.images[i], single.tokens);
        const auto& last = preds.final();
        std::vector<double> scores;
        std::vector<Box> boxes;
        for (std::int64_t q = 0; q < last.boxes.dim(0); ++q) {
          scores.push_back(query_scores(last, q, single.spans, options.pooling)[0]);
          boxes.push_back(corners_of(last.boxes.value(), q));
        }
        const Box target = normalized(scene.objects[o].box, scene.width, scene.height);
        hits += rec_top1(scores, boxes, target, 0.5) ? 1 : 0;
        ++result.rec_queries;
      }
    }
    result.rec_top1 = result.rec_queries > 0 ? static_cast<double>(hits) / result.rec_queries : 0.0;
  }
  return result;
}

TrainSummary train(const RunConfig& cfg, const std::function<void(const json&)>& progress) {
  const std::filesystem::path out_dir = cfg.data.output_dir;
  std::filesystem::create_directories(out_dir);
  save_run_config(cfg, out_dir / "config.json");
  std::ofstream log(out_dir / "metrics.jsonl");
  if (!log) throw Error("cannot write " + (out_dir / "metrics.jsonl").string());
  auto emit = [&](const json& j) {
    write_json_line(log, j);
    if (progress) progress(j);
  };

  const text::Vocabulary vocab = load_vocabulary(cfg.data);
  if (cfg.data.train_dir.empty()) throw Error("data.train_dir is not set");
  const Dataset train_set = load_dataset(cfg.data.train_dir, cfg.data.max_train_scenes);
  if (train_set.images.empty()) throw Error("training split " + cfg.data.train_dir + " has no scenes");
  std::optional<Dataset> val_set;
  if (!cfg.data.val_dir.empty()) val_set = load_dataset(cfg.data.val_dir, cfg.data.max_eval_scenes);

  GroundingModel<float> model(cfg.model, cfg.ablations, vocab.size(), cfg.seed);
  AdamW opt(cfg.optimizer, model.params());
  Rng rng(cfg.seed ^ 0x5DEECE66Dull);
  const auto& cats = train_set.split.categories;
  const int num_cats = static_cast<int>(cats.size());
  const int prompt_limit = cfg.data.max_prompt_categories > 0 ? cfg.data.max_prompt_categories : num_cats;

  std::vector<int> order(train_set.images.size());
  std::size_t cursor = order.size();
  auto next_scene = [&]() {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      cursor = 0;
    }
    return order[cursor++];
  };
  auto training_prompt = [&](int scene) {
    const auto& present = train_set.object_category[static_cast<std::size_t>(scene)];
    std::set<int> chosen(present.begin(), present.end());
    std::vector<int> absent;
    for (int c = 0; c < num_cats; ++c)
      if (!chosen.count(c)) absent.push_back(c);
    rng.shuffle(absent);
    const int room = std::max(0, prompt_limit - static_cast<int>(chosen.size()));
    const auto extra = static_cast<int>(rng.uniform_int(0, std::min<std::int64_t>(room, absent.size())));
    chosen.insert(absent.begin(), absent.begin() + extra);
    std::vector<int> ids(chosen.begin(), chosen.end());
    rng.shuffle(ids);
    return build_prompt(cats, ids, vocab);
  };

  const EvalOptions val_options{parse_pooling(cfg.eval.phrase_pooling), cfg.eval.iou_threshold, std::nullopt, 100,
                                false};
  TrainSummary summary;
  summary.last_checkpoint = out_dir / "last.ckpt";
  summary.best_checkpoint = out_dir / "best.ckpt";
  auto run_val = [&](int step) {
    if (!val_set) return;
    const EvalResult r = evaluate(model, vocab, *val_set, val_options);
    emit(json{{"step", step}, {"val", r.to_json()}});
    if (!summary.best_val_ap50 || r.ap50 > *summary.best_val_ap50) {
      summary.best_val_ap50 = r.ap50;
      save_checkpoint(summary.best_checkpoint, model.params(), cfg.model, cfg.ablations, vocab,
                      json{{"step", step}, {"val_ap50", r.ap50}});
    }
  };

  const int batch = std::max(1, cfg.optimizer.batch_size);
  for (int step = 0; step < cfg.optimizer.steps; ++step) {
    std::map<int, Tensor<float>> grads;
    double loss_sum = 0, cls = 0, l1 = 0, gi = 0;
    try {
      for (int b = 0; b < batch; ++b) {
        const int s = next_scene();
        const Prompt prompt = training_prompt(s);
        const GroundTruthSet gt = ground_truth(train_set.split.scenes[static_cast<std::size_t>(s)],
                                               train_set.object_category[static_cast<std::size_t>(s)], prompt);
        Graph<float> g;
        const auto preds = model.forward(g, train_set.images[static_cast<std::size_t>(s)], prompt.tokens);
        const auto loss = total_loss<float>(preds.layers, gt, phrase_columns(preds.prompt), cfg.loss);
        loss_sum += loss.total;
        cls += loss.cls;
        l1 += loss.l1;
        gi += loss.giou;
        for (auto& [id, grad] : g.backward(loss.total_var)) {
          auto it = grads.find(id);
          if (it == grads.end()) {
            grads.emplace(id, std::move(grad));
          } else {
            for (std::size_t k = 0; k < grad.data.size(); ++k) it->second.data[k] += grad.data[k];
          }
        }
      }
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("non-finite value at step " + std::to_string(step) + " (seed " + std::to_string(cfg.seed) +
                           "): " + e.what());
    }
    const auto inv = static_cast<float>(1.0 / batch);
    for (auto& [id, grad] : grads)
      for (float& v : grad.data) v *= inv;
    const double lr = opt.learning_rate(step);
    const double norm = clip_grad_norm(grads, cfg.optimizer.clip_max_norm);
    opt.step(model.params(), grads);
    summary.final_loss = loss_sum / batch;
    summary.steps = step + 1;
    if (cfg.optimizer.log_every > 0 && (step % cfg.optimizer.log_every == 0 || step + 1 == cfg.optimizer.steps)) {
      emit(json{{"step", step},
                {"loss", loss_sum / batch},
                {"cls", cls / batch},
                {"l1", l1 / batch},
                {"giou", gi / batch},
                {"lr", lr},
                {"grad_norm", norm}});
    }
    if (cfg.optimizer.eval_every > 0 && (step + 1) % cfg.optimizer.eval_every == 0 && step + 1 < cfg.optimizer.steps) {
      run_val(step + 1);
    }
  }
  run_val(summary.steps);
  save_checkpoint(summary.last_checkpoint, model.params(), cfg.model, cfg.ablations, vocab,
                  json{{"step", summary.steps}});
  if (!val_set) std::filesystem::copy_file(summary.last_checkpoint, summary.best_checkpoint,
                                           std::filesystem::copy_options::overwrite_existing);
  return summary;
}

std::vector<InferDetection> infer(const GroundingModel<float>& model, const text::Vocabulary& vocab,
                                  const Tensor<float>& image, const std::string& prompt, double threshold, bool rec,
                                  PhrasePooling pooling) {
  const text::TokenizedPrompt tp = text::tokenize(prompt, vocab);
  const auto spans = tp.phrase_spans();
  if (spans.empty()) throw Error("prompt has no phrases");
  const auto names = text::phrase_texts(tp, vocab);
  Graph<float> g;
  g.set_grad_enabled(false);
  const auto preds = model.forward(g, image, tp);
  const auto& last = preds.final();
  const auto boxes = last.boxes.value();
  const double w = static_cast<double>(image.dim(1)), h = static_cast<double>(image.dim(0));
  auto to_pixels = [&](std::int64_t q) {
    const Box b = corners_of(boxes, q);
    return Box{b.x1 * w, b.y1 * h, b.x2 * w, b.y2 * h};
  };
  std::vector<InferDetection> out;
  if (rec) {
    std::vector<double> best_per_query;
    std::vector<int> best_phrase;
    for (std::int64_t q = 0; q < last.boxes.dim(0); ++q) {
      const auto s = query_scores(last, q, spans, pooling);
      const int k = argmax_lowest(s);
      best_per_query.push_back(s[static_cast<std::size_t>(k)]);
      best_phrase.push_back(k);
    }
    const int q = argmax_lowest(best_per_query);
    out.push_back(InferDetection{names[static_cast<std::size_t>(best_phrase[q])], best_per_query[q], to_pixels(q)});
    return out;
  }
  for (std::int64_t q = 0; q < last.boxes.dim(0); ++q) {
    const auto s = query_scores(last, q, spans, pooling);
    for (std::size_t k = 0; k < s.size(); ++k)
      if (s[k] >= threshold) out.push_back(InferDetection{names[k], s[k], to_pixels(q)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const InferDetection& a, const InferDetection& b) { return a.score > b.score; });
  return out;
}

json detections_to_json(const std::vector<InferDetection>& dets) {
  json arr = json::array();
  for (const auto& d : dets) {
    arr.push_back(json{{"phrase", d.phrase}, {"score", d.score}, {"bbox_xyxy", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}}});
  }
  return json{{"detections", arr}};
}

std::vector<AblationArm> ablation_arms() {
  std::vector<AblationArm> arms(5);
  arms[0].name = "full";
  arms[1].name = "no_encoder_fusion";
  arms[1].flags.no_encoder_fusion = true;
  arms[2].name = "static_query_selection";
  arms[2].flags.static_query_selection = true;
  arms[3].name = "no_text_cross_attention";
  arms[3].flags.no_text_cross_attention = true;
  arms[4].name = "word_level_prompt";
  arms[4].flags.word_level_prompt = true;
  return arms;
}

std::vector<AblationRow> ablate(const RunConfig& base, const std::function<void(const std::string&)>& progress) {
  if (base.data.test_open_dir.empty()) throw Error("ablation needs data.test_open_dir");
  const std::filesystem::path root = base.data.output_dir;
  std::filesystem::create_directories(root);
  const Dataset open_set = load_dataset(base.data.test_open_dir, base.data.max_eval_scenes);
  std::optional<Dataset> val_set;
  if (!base.data.val_dir.empty()) val_set = load_dataset(base.data.val_dir, base.data.max_eval_scenes);
  const EvalOptions options{parse_pooling(base.eval.phrase_pooling), base.eval.iou_threshold, std::nullopt, 100,
                            false};

  std::vector<AblationRow> rows;
  for (const auto& arm : ablation_arms()) {
    AblationRow row;
    row.arm = arm.name;
    for (std::uint64_t seed : base.ablation_seeds) {
      RunConfig cfg = base;
      cfg.ablations = arm.flags;
      cfg.seed = seed;
      cfg.data.output_dir = (root / arm.name / ("seed" + std::to_string(seed))).string();
      if (progress) progress("training " + arm.name + " seed " + std::to_string(seed));
      const TrainSummary s = train(cfg);
      const LoadedModel lm = load_model(s.best_checkpoint);
      row.val_ap50.push_back(val_set ? evaluate(*lm.model, lm.vocab, *val_set, options).ap50 : 0.0);
      row.open_ap50.push_back(evaluate(*lm.model, lm.vocab, open_set, options).ap50);
      if (progress) {
        progress(arm.name + " seed " + std::to_string(seed) + ": val ap50 " + std::to_string(row.val_ap50.back()) +
                 ", open ap50 " + std::to_string(row.open_ap50.back()));
      }
    }
    auto mean = [](const std::vector<double>& v) {
      return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    row.mean_val = mean(row.val_ap50);
    row.mean_open = mean(row.open_ap50);
    rows.push_back(std::move(row));
  }

  json j = json::array();
  for (const auto& r : rows) {
    j.push_back(json{{"arm", r.arm},
                     {"val_ap50", r.val_ap50},
                     {"open_ap50", r.open_ap50},
                     {"mean_val_ap50", r.mean_val},
                     {"mean_open_ap50", r.mean_open}});
  }
  std::ofstream(root / "ablation.json") << json{{"seeds", base.ablation_seeds}, {"arms", j}}.dump(2) << '\n';
  std::ofstream(root / "ablation.txt") << format_ablation_table(rows);
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-26s %12s %12s\n", "arm", "val AP50", "open AP50");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-26s %12.4f %12.4f\n", r.arm.c_str(), r.mean_val, r.mean_open);
    os << line;
  }
  return os.str();
}

}  // namespace gdino::runtime
