/*
 * Copyright 2026 The avel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "commands.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include "avel/dataset.h"
#include "avel/metrics.h"
#include "avel/temporal_model.h"
#include "avel/trainer.h"
#include "avel/zeroshot.h"
#include "json.hpp"

namespace avel::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// A dataset directory in the layout written by `synth` (or the extractor).
struct Data {
  fs::path dir;
  ClassVocabulary vocab;
  Matrix text;
  Manifest manifest;
};

Data load_data(const fs::path& dir, int segments) {
  auto paths = DatasetPaths::in(dir);
  auto vocab = load_vocabulary(paths.vocab);
  auto text = read_container(paths.text);
  if (text.modality != Modality::kText) throw FormatError(paths.text.string() + " is not a text container");
  if (text.segments() != vocab.size(Scope::kFull)) {
    throw ShapeError(paths.text.string() + " has " + std::to_string(text.segments()) +
                     " rows; the vocabulary has " + std::to_string(vocab.size(Scope::kFull)));
  }
  auto manifest = load_manifest(paths.manifest, vocab, segments);
  return {dir, std::move(vocab), std::move(text.data), std::move(manifest)};
}

std::vector<ManifestEntry> select(const Manifest& m, const std::string& split) {
  if (split == "all") return m.entries;
  return m.in_split(parse_split(split));
}

// Loads every video of `entries`; all failures are reported together.
std::vector<VideoSample> load_videos(const Data& data, const std::vector<ManifestEntry>& entries) {
  std::vector<VideoSample> videos;
  std::string problems;
  int failed = 0;
  for (const auto& e : entries) {
    try {
      videos.push_back(load_video(e, data.dir, static_cast<int>(data.text.cols())));
    } catch (const std::exception& err) {
      ++failed;
      problems += std::string("  ") + err.what() + "\n";
    }
  }
  if (failed > 0) {
    std::fprintf(stderr, "%s", problems.c_str());
    throw Error(std::to_string(failed) + " of " + std::to_string(entries.size()) +
                " videos failed validation");
  }
  return videos;
}

std::string predictions_to_jsonl(const std::vector<PredictionSequence>& preds) {
  std::string out;
  for (const auto& p : preds) {
    nlohmann::ordered_json j;
    j["video_id"] = p.video_id;
    j["classes"] = p.classes;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<PredictionSequence> read_predictions(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<PredictionSequence> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      out.push_back({j.at("video_id").get<std::string>(), j.at("classes").get<std::vector<int>>()});
    } catch (const json::exception& e) {
      throw Error(path.string() + " line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

Evaluation evaluate_entries(const std::vector<PredictionSequence>& preds,
                            const std::vector<ManifestEntry>& entries, const ClassVocabulary& vocab,
                            const EventMatchOptions& options = {}) {
  std::vector<LabelSequence> labels;
  for (const auto& e : entries) labels.push_back(e.label());
  return evaluate(preds, labels, vocab, scope_assignment(entries, vocab), options);
}

void emit_report(const Evaluation& e, const std::string& path) {
  if (path.empty()) {
    std::fputs(evaluation_to_json(e).c_str(), stdout);
  } else {
    write_text(path, evaluation_to_json(e));
  }
  std::fprintf(stderr, "total avg %.4f (seen %s, unseen %s)\n", e.total.avg,
               e.seen.empty ? "empty" : std::to_string(e.seen.avg).c_str(),
               e.unseen.empty ? "empty" : std::to_string(e.unseen.avg).c_str());
}

// ---------------------------------------------------------------------------

struct SynthOptions {
  SynthSpec spec;
  std::string out;
  bool force = false;
};

void run_synth(const SynthOptions& o) {
  fs::path out(o.out);
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!o.force) throw Error(out.string() + " exists and is not empty; pass --force to overwrite");
    auto paths = DatasetPaths::in(out);
    for (const auto& p : {paths.vocab, paths.text, paths.manifest, out / "audio", out / "visual"}) {
      fs::remove_all(p);
    }
  }
  fs::create_directories(out);
  auto ds = synth_generate(o.spec);
  write_dataset(ds, out);
  std::fprintf(stderr, "wrote %zu videos (%d seen, %d unseen classes) to %s\n", ds.videos.size(),
               ds.vocab.seen_count(), ds.vocab.unseen_count(), out.string().c_str());
}

struct EvalSelection {
  std::string data;
  std::string split = "test";
  int segments = kDefaultSegments;
  int jobs = 1;
};

struct ZeroShotOptions {
  EvalSelection sel;
  std::string predictions, report, dump_scores;
};

void run_zeroshot(const ZeroShotOptions& o) {
  auto data = load_data(o.sel.data, o.sel.segments);
  auto entries = select(data.manifest, o.sel.split);
  auto videos = load_videos(data, entries);
  auto outcome = batch_localize(videos, data.text, data.vocab, o.sel.jobs);
  if (!outcome.errors.empty()) {
    for (const auto& e : outcome.errors) std::fprintf(stderr, "  video '%s': %s\n", e.video_id.c_str(), e.message.c_str());
    throw Error(std::to_string(outcome.errors.size()) + " videos failed");
  }
  write_text(o.predictions, predictions_to_jsonl(outcome.predictions));
  if (!o.dump_scores.empty()) {
    std::string dump;
    for (const auto& v : videos) {
      auto r = localize_with_scores(v.audio, v.visual, data.text, data.vocab);
      nlohmann::ordered_json j;
      j["video_id"] = v.video_id;
      auto rows = [](const Matrix& m) {
        std::vector<std::vector<double>> out(m.rows());
        for (Eigen::Index t = 0; t < m.rows(); ++t) out[t].assign(m.row(t).data(), m.row(t).data() + m.cols());
        return out;
      };
      j["audio_text"] = rows(r.audio_text.scores);
      j["visual_text"] = rows(r.visual_text.scores);
      dump += j.dump() + "\n";
    }
    write_text(o.dump_scores, dump);
  }
  emit_report(evaluate_entries(outcome.predictions, entries, data.vocab), o.report);
}

struct TrainOptions {
  std::string data, checkpoint, trace;
  int segments = kDefaultSegments;
  TrainConfig train;
  TemporalEncoderConfig encoder;
  std::string fusion = "sqrt", variant = "temporal", scope = "intra", init = "residual_zero";
  bool unshared = false;
  bool no_validate = false;
  std::uint64_t seed = 0;
};

void run_train(TrainOptions o) {
  auto data = load_data(o.data, o.segments);
  o.encoder.width = static_cast<int>(data.text.cols());
  o.encoder.variant = parse_variant(o.variant);
  o.encoder.attention_scope = parse_attention_scope(o.scope);
  o.encoder.share_modalities = !o.unshared;
  o.encoder.validate();
  o.train.fusion = parse_fusion_mode(o.fusion);

  // One generator per command; init and training draw their seeds from it.
  std::mt19937_64 rng(o.seed);
  const std::uint64_t init_seed = rng();
  o.train.seed = rng();
  o.train.validate();

  auto train_entries = data.manifest.in_split(Split::kTrain);
  if (train_entries.empty()) throw Error("the training split is empty");
  auto train_videos = load_videos(data, train_entries);
  std::vector<LabeledSample> train_set;
  for (std::size_t i = 0; i < train_entries.size(); ++i) {
    train_set.push_back({train_videos[i], train_entries[i].label()});
  }

  Validator validator;
  std::vector<ManifestEntry> val_entries;
  std::vector<VideoSample> val_videos;
  if (!o.no_validate) {
    val_entries = data.manifest.in_split(Split::kVal);
    val_videos = load_videos(data, val_entries);
  }
  if (!val_entries.empty()) {
    validator = [&](const FineTunedModel& m) {
      std::vector<PredictionSequence> preds;
      for (const auto& v : val_videos) {
        auto r = infer(m, v.audio, v.visual, data.text, data.vocab, o.train.fusion);
        r.prediction.video_id = v.video_id;
        preds.push_back(std::move(r.prediction));
      }
      return evaluate_entries(preds, val_entries, data.vocab).total.avg;
    };
  }

  InitScheme scheme = o.init == "glorot" ? InitScheme::kGlorot : InitScheme::kResidualZero;
  auto model = make_model(o.encoder, init_seed, scheme, o.train.temperature);
  std::fprintf(stderr, "training %lld parameters on %zu videos\n",
               static_cast<long long>(param_count(o.encoder)), train_set.size());
  auto result = fit(model, train_set, seen_only_text(data.text, data.vocab), data.vocab, o.train,
                    validator);
  for (const auto& r : result.trace) {
    std::fprintf(stderr, "epoch %d loss %.6f%s\n", r.epoch, r.loss,
                 r.val_avg ? (" val_avg " + std::to_string(*r.val_avg)).c_str() : "");
  }
  save_checkpoint(o.checkpoint, result.model.config, result.model.params, {result.model.temperature});
  if (!o.trace.empty()) write_text(o.trace, trace_to_jsonl(result.trace));
  std::fprintf(stderr, "best epoch %d, checkpoint %s\n", result.best_epoch, o.checkpoint.c_str());
}

struct InferOptions {
  EvalSelection sel;
  std::string checkpoint, predictions, report, fusion = "sqrt";
};

void run_infer(const InferOptions& o) {
  auto data = load_data(o.sel.data, o.sel.segments);
  auto ckpt = load_checkpoint(o.checkpoint);
  if (ckpt.config.width != data.text.cols()) {
    throw ShapeError("checkpoint width " + std::to_string(ckpt.config.width) +
                     " does not match embedding dim " + std::to_string(data.text.cols()));
  }
  FineTunedModel model{ckpt.config, ckpt.params, ckpt.extras.temperature};
  const FusionMode mode = parse_fusion_mode(o.fusion);
  auto entries = select(data.manifest, o.sel.split);
  auto videos = load_videos(data, entries);
  std::vector<PredictionSequence> preds;
  for (const auto& v : videos) {
    auto r = infer(model, v.audio, v.visual, data.text, data.vocab, mode);
    r.prediction.video_id = v.video_id;
    preds.push_back(std::move(r.prediction));
  }
  write_text(o.predictions, predictions_to_jsonl(preds));
  if (!o.report.empty()) emit_report(evaluate_entries(preds, entries, data.vocab), o.report);
}

struct EvalOptions {
  EvalSelection sel;
  std::string predictions, report, per_class_csv;
  bool inclusive_iou = false;
};

void run_eval(const EvalOptions& o) {
  auto data = load_data(o.sel.data, o.sel.segments);
  auto entries = select(data.manifest, o.sel.split);
  auto preds = read_predictions(o.predictions);
  EventMatchOptions options;
  if (o.inclusive_iou) options.comparator = IouComparator::kGreaterEqual;
  auto e = evaluate_entries(preds, entries, data.vocab, options);
  emit_report(e, o.report);
  if (!o.per_class_csv.empty()) write_text(o.per_class_csv, per_class_csv(e));
}

void add_selection(CLI::App* cmd, EvalSelection& sel) {
  cmd->add_option("--data", sel.data, "Dataset directory")->required();
  cmd->add_option("--split", sel.split, "Split to use")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  cmd->add_option("--segments", sel.segments, "Segments per video")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--jobs", sel.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

}  // namespace

void add_commands(CLI::App& app) {
  auto synth = std::make_shared<SynthOptions>();
  auto* s = app.add_subcommand("synth", "Generate a synthetic embedding dataset");
  s->add_option("--out", synth->out, "Output directory")->required();
  s->add_option("--classes", synth->spec.n_classes, "Number of classes")->capture_default_str();
  s->add_option("--seen", synth->spec.n_seen, "Number of seen classes")->capture_default_str();
  s->add_option("--videos-per-class", synth->spec.videos_per_class)->capture_default_str();
  s->add_option("--segments", synth->spec.segments)->capture_default_str();
  s->add_option("--dim", synth->spec.dim, "Embedding dimension")->capture_default_str();
  s->add_option("--sigma", synth->spec.noise_sigma, "Per-coordinate noise std")->capture_default_str();
  s->add_option("--background-rate", synth->spec.background_rate)->capture_default_str();
  s->add_option("--special", synth->spec.special, "Background class name")->capture_default_str();
  s->add_option("--seed", synth->spec.seed)->capture_default_str();
  s->add_flag("--force", synth->force, "Overwrite an existing dataset");
  s->callback([synth] { run_synth(*synth); });

  auto zs = std::make_shared<ZeroShotOptions>();
  auto* z = app.add_subcommand("zeroshot", "Training-free localization and evaluation");
  add_selection(z, zs->sel);
  z->add_option("--predictions", zs->predictions, "Predictions output (JSON lines)")->required();
  z->add_option("--report", zs->report, "Report output (JSON); stdout if omitted");
  z->add_option("--dump-scores", zs->dump_scores, "Write raw similarity rows (JSON lines)");
  z->add_option("--seed", [](const CLI::results_t&) { return true; }, "Accepted for uniformity; unused");
  z->callback([zs] { run_zeroshot(*zs); });

  auto tr = std::make_shared<TrainOptions>();
  auto* t = app.add_subcommand("train", "Fine-tune the temporal encoder on seen classes");
  t->add_option("--data", tr->data, "Dataset directory")->required();
  t->add_option("--checkpoint", tr->checkpoint, "Checkpoint output")->required();
  t->add_option("--trace", tr->trace, "Per-epoch trace output (JSON lines)");
  t->add_option("--segments", tr->segments)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--batch-size", tr->train.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--epochs", tr->train.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--lr", tr->train.learning_rate)->check(CLI::NonNegativeNumber)->capture_default_str();
  t->add_option("--fusion", tr->fusion)->check(CLI::IsMember({"sqrt", "prob_avg", "fea_avg"}))->capture_default_str();
  t->add_option("--ratio", tr->train.data_ratio, "Per-class training data ratio")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  t->add_option("--variant", tr->variant)->check(CLI::IsMember({"temporal", "linear"}))->capture_default_str();
  t->add_option("--scope", tr->scope)->check(CLI::IsMember({"intra", "cross", "both"}))->capture_default_str();
  t->add_option("--layers", tr->encoder.blocks)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--heads", tr->encoder.heads)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--ffn-dim", tr->encoder.ffn_dim)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_flag("--unshared", tr->unshared, "Separate audio and visual weights");
  t->add_option("--init", tr->init)->check(CLI::IsMember({"residual_zero", "glorot"}))->capture_default_str();
  t->add_option("--temperature", tr->train.temperature)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_flag("--learn-temperature", tr->train.learn_temperature);
  t->add_flag("--no-validate", tr->no_validate, "Skip validation; keep the last epoch");
  t->add_option("--seed", tr->seed)->capture_default_str();
  t->add_option("--jobs", tr->train.jobs)->check(CLI::PositiveNumber)->capture_default_str();
  t->callback([tr] { run_train(*tr); });

  auto in = std::make_shared<InferOptions>();
  auto* i = app.add_subcommand("infer", "Open-vocabulary inference with a fine-tuned checkpoint");
  add_selection(i, in->sel);
  i->add_option("--checkpoint", in->checkpoint)->required();
  i->add_option("--predictions", in->predictions, "Predictions output (JSON lines)")->required();
  i->add_option("--report", in->report, "Also evaluate and write a report");
  i->add_option("--fusion", in->fusion, "Must match training")
      ->check(CLI::IsMember({"sqrt", "prob_avg", "fea_avg"}))
      ->capture_default_str();
  i->callback([in] { run_infer(*in); });

  auto ev = std::make_shared<EvalOptions>();
  auto* e = app.add_subcommand("eval", "Score predictions against the manifest labels");
  add_selection(e, ev->sel);
  e->add_option("--predictions", ev->predictions)->required();
  e->add_option("--report", ev->report, "Report output (JSON); stdout if omitted");
  e->add_option("--per-class-csv", ev->per_class_csv);
  e->add_flag("--inclusive-iou", ev->inclusive_iou, "Count IoU == 0.5 as a match");
  e->callback([ev] { run_eval(*ev); });
}

}  // namespace avel::cli
