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

#ifndef AVEL_CORE_H_
#define AVEL_CORE_H_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace avel {

// Dense row-major matrix used for embeddings, scores and parameters.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline constexpr int kDefaultSegments = 10;
inline constexpr int kDefaultEmbeddingDim = 1024;
inline constexpr std::string_view kDefaultSpecialClass = "other";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

// Raised when a label refers to a class outside the requested scope, e.g. an
// unseen class reaching the training path.
class ScopeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

enum class Scope { kSeenOnly, kFull };

enum class Modality : std::uint8_t { kAudio = 0, kVisual = 1, kText = 2 };

std::string_view modality_name(Modality m);

// Ordered seen/unseen class names plus the background bucket.
//
// Index order is [seen..., unseen..., special] for Scope::kFull and
// [seen..., special] for Scope::kSeenOnly, so the seen-only view is the
// full view with the unseen block removed.
class ClassVocabulary {
 public:
  ClassVocabulary(std::vector<std::string> seen, std::vector<std::string> unseen,
                  std::string special = std::string(kDefaultSpecialClass));

  const std::vector<std::string>& seen() const { return seen_; }
  const std::vector<std::string>& unseen() const { return unseen_; }
  const std::string& special() const { return special_; }

  int seen_count() const { return static_cast<int>(seen_.size()); }
  int unseen_count() const { return static_cast<int>(unseen_.size()); }

  // Number of columns of a probability matrix in `scope` (classes + special).
  int size(Scope scope) const;
  int special_index(Scope scope) const;

  int class_index(std::string_view name, Scope scope) const;
  const std::string& name_at(int index, Scope scope) const;

  bool contains(std::string_view name) const;
  bool is_seen(std::string_view name) const;
  bool is_unseen(std::string_view name) const;
  bool is_special(std::string_view name) const { return name == special_; }

  // Maps a full-vocabulary index to its seen-only index, or -1 for unseen.
  int full_to_seen_index(int full_index) const;

  bool operator==(const ClassVocabulary& other) const;

 private:
  std::vector<std::string> seen_;
  std::vector<std::string> unseen_;
  std::string special_;
  std::unordered_map<std::string, int> full_index_;
};

ClassVocabulary load_vocabulary(const std::filesystem::path& path);
void save_vocabulary(const ClassVocabulary& vocab, const std::filesystem::path& path);
ClassVocabulary parse_vocabulary(std::string_view json_text);
std::string vocabulary_to_json(const ClassVocabulary& vocab);

// T x d embedding matrix of one modality of one video.
struct SegmentEmbeddings {
  Modality modality = Modality::kAudio;
  Matrix data;

  int segments() const { return static_cast<int>(data.rows()); }
  int dim() const { return static_cast<int>(data.cols()); }

  // Throws ShapeError on empty shape or non-finite entries.
  void validate() const;
};

struct LabelSequence {
  std::string video_id;
  std::string event_class;
  std::vector<std::uint8_t> segment_flags;

  int segments() const { return static_cast<int>(segment_flags.size()); }
};

// Checks flag values and the all-zero rule for the special class.
void validate_label(const LabelSequence& label, const ClassVocabulary& vocab);

struct PredictionSequence {
  std::string video_id;
  std::vector<int> classes;  // full-vocabulary indices

  bool operator==(const PredictionSequence&) const = default;
};

int class_index(const ClassVocabulary& vocab, std::string_view name, Scope scope);

// Per-segment class index of `label` in `scope`.
std::vector<int> segment_classes(const LabelSequence& label, const ClassVocabulary& vocab,
                                 Scope scope);

// T x vocab.size(scope) one-hot matrix; event segments hot at the event
// class column, background segments at the special column.
Matrix expand_one_hot(const LabelSequence& label, const ClassVocabulary& vocab, Scope scope);

// Row-wise argmax with ties broken towards the lowest column.
std::vector<int> row_argmax(const Matrix& m);

}  // namespace avel

#endif  // AVEL_CORE_H_
