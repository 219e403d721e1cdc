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

#include <cmath>
#include <cstdio>
#include <random>

#include "avel/dataset.h"

namespace avel {
namespace {

// Rows are orthonormal; built by modified Gram-Schmidt on Gaussian draws.
Matrix orthonormal_prototypes(int count, int dim, std::mt19937_64& rng) {
  if (count > dim) {
    throw Error("cannot orthogonalize " + std::to_string(count) + " prototypes in " +
                std::to_string(dim) + " dimensions");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix protos(count, dim);
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0;; ++attempt) {
      RowVector v(dim);
      for (int k = 0; k < dim; ++k) v(k) = normal(rng);
      for (int j = 0; j < i; ++j) v -= v.dot(protos.row(j)) * protos.row(j);
      double norm = v.norm();
      if (norm > 1e-6) {
        protos.row(i) = v / norm;
        break;
      }
      if (attempt > 16) throw Error("prototype orthogonalization failed");
    }
  }
  return protos;
}

RowVector noisy_unit(const RowVector& proto, double sigma, std::normal_distribution<double>& normal,
                     std::mt19937_64& rng) {
  RowVector v = proto;
  if (sigma > 0.0) {
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += sigma * normal(rng);
  }
  v /= v.norm();
  // Stored at container precision so in-memory and on-disk data agree.
  return v.cast<float>().cast<double>();
}

std::string class_name(int c) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "class_%02d", c);
  return buffer;
}

}  // namespace

SynthDataset synth_generate(const SynthSpec& spec) {
  if (spec.n_classes < 2) throw Error("synthetic data needs at least two classes");
  if (spec.n_seen < 1 || spec.n_seen > spec.n_classes) {
    throw Error("seen class count must lie in [1, n_classes]");
  }
  if (spec.videos_per_class < 1 || spec.segments < 1 || spec.dim < 1) {
    throw Error("videos per class, segments and dim must be positive");
  }
  if (!(spec.noise_sigma >= 0.0)) throw Error("noise sigma must be non-negative");
  if (!(spec.background_rate >= 0.0 && spec.background_rate <= 1.0)) {
    throw Error("background rate must lie in [0, 1]");
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<std::string> seen, unseen;
  for (int c = 0; c < spec.n_classes; ++c) {
    (c < spec.n_seen ? seen : unseen).push_back(class_name(c));
  }
  ClassVocabulary vocab(seen, unseen, spec.special);
  // Row c is class c's prototype (full-vocabulary order); the last row is
  // the special class.
  Matrix text = orthonormal_prototypes(spec.n_classes + 1, spec.dim, rng).cast<float>().cast<double>();

  std::vector<ClassCount> counts;
  std::set<std::string> seen_set(seen.begin(), seen.end());
  for (int c = 0; c < spec.n_classes; ++c) counts.push_back({class_name(c), spec.videos_per_class});
  SplitPlan plan = generate_splits(counts, seen_set, spec.split, rng());

  std::normal_distribution<double> normal(0.0, 1.0);
  std::binomial_distribution<int> background_count(spec.segments, spec.background_rate);
  std::uniform_int_distribution<int> any_class(0, spec.n_classes - 1);
  std::uniform_int_distribution<int> other_class(0, spec.n_classes - 2);

  SynthDataset out{vocab, {}, {}, text};
  for (const auto& a : plan.assignments) {
    const int c = vocab.class_index(a.class_name, Scope::kFull);
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%04d", a.class_name.c_str(), a.video_index);

    ManifestEntry entry;
    entry.video_id = id;
    entry.event_class = a.class_name;
    entry.split = a.split;
    entry.audio_path = std::string("audio/") + id + ".ovae";
    entry.visual_path = std::string("visual/") + id + ".ovae";
    const int n_background = background_count(rng);
    const int length = spec.segments - n_background;
    const int offset = std::uniform_int_distribution<int>(0, n_background)(rng);
    entry.segment_flags.assign(spec.segments, 0);
    for (int t = offset; t < offset + length; ++t) entry.segment_flags[t] = 1;

    VideoSample video;
    video.video_id = id;
    video.audio = {Modality::kAudio, Matrix(spec.segments, spec.dim)};
    video.visual = {Modality::kVisual, Matrix(spec.segments, spec.dim)};
    for (int t = 0; t < spec.segments; ++t) {
      int audio_class = c;
      int visual_class = c;
      if (!entry.segment_flags[t]) {
        audio_class = any_class(rng);
        visual_class = other_class(rng);
        if (visual_class >= audio_class) ++visual_class;
      }
      video.audio.data.row(t) = noisy_unit(text.row(audio_class), spec.noise_sigma, normal, rng);
      video.visual.data.row(t) = noisy_unit(text.row(visual_class), spec.noise_sigma, normal, rng);
    }
    out.manifest.entries.push_back(std::move(entry));
    out.videos.push_back(std::move(video));
  }
  return out;
}

DatasetPaths DatasetPaths::in(const std::filesystem::path& dir) {
  return {dir / "vocab.json", dir / "text.ovae", dir / "manifest.jsonl"};
}

void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "audio");
  std::filesystem::create_directories(dir / "visual");
  const auto paths = DatasetPaths::in(dir);
  save_vocabulary(dataset.vocab, paths.vocab);
  write_container({Modality::kText, dataset.text}, paths.text);
  for (std::size_t i = 0; i < dataset.videos.size(); ++i) {
    const auto& entry = dataset.manifest.entries[i];
    write_container(dataset.videos[i].audio, dir / entry.audio_path);
    write_container(dataset.videos[i].visual, dir / entry.visual_path);
  }
  save_manifest(dataset.manifest, paths.manifest);
}

}  // namespace avel
