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

#ifndef AVEL_DATASET_H_
#define AVEL_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "avel/core.h"
#include "avel/metrics.h"
#include "avel/zeroshot.h"

namespace avel {

// ---------------------------------------------------------------------------
// Embedding container
//
//   "OVAE" | u32 version | u8 modality | u32 T | u32 d | T*d f32 row-major
//
// All integers and floats little-endian. Values round-trip through f32.

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 4 + 4 + 1 + 4 + 4;

std::string serialize_container(const SegmentEmbeddings& embeddings);
SegmentEmbeddings deserialize_container(std::string_view bytes);

void write_container(const SegmentEmbeddings& embeddings, const std::filesystem::path& path);
SegmentEmbeddings read_container(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manifest (JSON lines, one video per line)

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split split);
Split parse_split(std::string_view text);

struct ManifestEntry {
  std::string video_id;
  std::string event_class;
  std::vector<std::uint8_t> segment_flags;
  Split split = Split::kTrain;
  std::string audio_path;   // relative to the manifest directory unless absolute
  std::string visual_path;
  // Only needed for background-only videos; otherwise derived from the class.
  std::optional<ReportScope> scope;

  LabelSequence label() const { return {video_id, event_class, segment_flags}; }
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> in_split(Split split) const;
  bool operator==(const Manifest&) const = default;
};

class ManifestError : public Error {
 public:
  ManifestError(int line, const std::string& message)
      : Error("manifest line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Parses and validates. Errors carry 1-based line numbers.
Manifest parse_manifest(std::string_view text, const ClassVocabulary& vocab, int segments);
std::string manifest_to_jsonl(const Manifest& manifest);

Manifest load_manifest(const std::filesystem::path& path, const ClassVocabulary& vocab,
                       int segments = kDefaultSegments);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Throws ManifestError (line = entry index + 1) on duplicate ids, wrong flag
// counts, unknown classes or unseen classes in the training split.
void validate_manifest(const Manifest& manifest, const ClassVocabulary& vocab, int segments);

// seen/unseen scope of each video.
ScopeAssignment scope_assignment(const std::vector<ManifestEntry>& entries,
                                 const ClassVocabulary& vocab);

// Reads both containers of an entry and checks them against the manifest.
VideoSample load_video(const ManifestEntry& entry, const std::filesystem::path& base_dir,
                       int expected_dim);

// ---------------------------------------------------------------------------
// Split generation

struct SplitConfig {
  double seen_fraction = 0.3;  // seen share of val and of test (3:7)
  double tolerance = 0.05;
  double val_share = 0.5;      // share of unseen videos sent to val
  // Used only when there are no unseen classes.
  double fallback_val_fraction = 0.15;
  double fallback_test_fraction = 0.15;
};

struct ClassCount {
  std::string name;
  int videos = 0;
};

struct VideoAssignment {
  std::string class_name;
  int video_index = 0;  // 0-based within the class
  Split split = Split::kTrain;
};

struct SplitPlan {
  std::vector<VideoAssignment> assignments;  // class order, then video index
  int train = 0;
  int seen_val = 0, seen_test = 0;
  int unseen_val = 0, unseen_test = 0;
  bool ratio_applicable = true;
  double val_seen_fraction = 0.0;
  double test_seen_fraction = 0.0;
};

class SplitInfeasibleError : public Error {
 public:
  SplitInfeasibleError(const std::string& message, double nearest_val, double nearest_test)
      : Error(message), nearest_val_(nearest_val), nearest_test_(nearest_test) {}
  double nearest_val_fraction() const { return nearest_val_; }
  double nearest_test_fraction() const { return nearest_test_; }

 private:
  double nearest_val_;
  double nearest_test_;
};

// Sends every unseen-class video to val/test and picks seen counts so each
// of val and test has a seen fraction within tolerance of the target. The
// count search is exhaustive, so a plan is returned whenever one exists.
SplitPlan generate_splits(const std::vector<ClassCount>& class_video_counts,
                          const std::set<std::string>& seen_classes, const SplitConfig& config,
                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic embeddings

struct SynthSpec {
  int n_classes = 12;
  int n_seen = 8;
  int videos_per_class = 20;
  int segments = kDefaultSegments;
  int dim = 64;
  double noise_sigma = 0.1;      // per-coordinate std before renormalization
  double background_rate = 0.3;  // per-segment chance of background
  std::uint64_t seed = 0;
  std::string special = std::string(kDefaultSpecialClass);
  SplitConfig split;
};

struct SynthDataset {
  ClassVocabulary vocab;
  Manifest manifest;
  std::vector<VideoSample> videos;  // parallel to manifest.entries
  Matrix text;                      // one row per full-vocabulary index
};

// One orthonormal prototype per class plus one for the special class; the
// text embedding of a class is its prototype. Event segments carry the
// class prototype in both modalities; background segments carry two
// different random class prototypes, one per modality. Every segment gets
// Gaussian noise and is renormalized to unit length. Events form one
// contiguous run whose length is T minus a Binomial(T, background_rate)
// draw.
SynthDataset synth_generate(const SynthSpec& spec);

// Writes vocab.json, text.ovae, manifest.jsonl, audio/ and visual/ under
// `dir` (which must exist).
void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir);

// Files of a dataset directory in the layout written by write_dataset.
struct DatasetPaths {
  std::filesystem::path vocab;
  std::filesystem::path text;
  std::filesystem::path manifest;

  static DatasetPaths in(const std::filesystem::path& dir);
};

}  // namespace avel

#endif  // AVEL_DATASET_H_
