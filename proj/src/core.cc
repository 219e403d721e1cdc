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

#include "avel/core.h"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace avel {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kAudio:
      return "audio";
    case Modality::kVisual:
      return "visual";
    case Modality::kText:
      return "text";
  }
  return "unknown";
}

ClassVocabulary::ClassVocabulary(std::vector<std::string> seen, std::vector<std::string> unseen,
                                 std::string special)
    : seen_(std::move(seen)), unseen_(std::move(unseen)), special_(std::move(special)) {
  if (seen_.empty()) throw VocabularyError("vocabulary needs at least one seen class");
  if (special_.empty()) throw VocabularyError("special class name is empty");
  int index = 0;
  for (const auto* list : {&seen_, &unseen_}) {
    for (const auto& name : *list) {
      if (name.empty()) throw VocabularyError("empty class name");
      if (name == special_) {
        throw VocabularyError("special class '" + special_ + "' listed as a regular class");
      }
      if (!full_index_.emplace(name, index++).second) {
        throw VocabularyError("duplicate class name '" + name + "'");
      }
    }
  }
}

int ClassVocabulary::size(Scope scope) const {
  return scope == Scope::kFull ? seen_count() + unseen_count() + 1 : seen_count() + 1;
}

int ClassVocabulary::special_index(Scope scope) const { return size(scope) - 1; }

int ClassVocabulary::class_index(std::string_view name, Scope scope) const {
  if (name == special_) return special_index(scope);
  auto it = full_index_.find(std::string(name));
  if (it == full_index_.end()) {
    throw VocabularyError("unknown class '" + std::string(name) + "'");
  }
  if (scope == Scope::kSeenOnly && it->second >= seen_count()) {
    throw ScopeError("class '" + std::string(name) + "' is unseen and has no seen-only index");
  }
  return it->second;
}

const std::string& ClassVocabulary::name_at(int index, Scope scope) const {
  if (index < 0 || index >= size(scope)) {
    throw VocabularyError("class index " + std::to_string(index) + " out of range");
  }
  if (index == special_index(scope)) return special_;
  if (index < seen_count()) return seen_[index];
  return unseen_[index - seen_count()];
}

bool ClassVocabulary::contains(std::string_view name) const {
  return name == special_ || full_index_.count(std::string(name)) > 0;
}

bool ClassVocabulary::is_seen(std::string_view name) const {
  auto it = full_index_.find(std::string(name));
  return it != full_index_.end() && it->second < seen_count();
}

bool ClassVocabulary::is_unseen(std::string_view name) const {
  auto it = full_index_.find(std::string(name));
  return it != full_index_.end() && it->second >= seen_count();
}

int ClassVocabulary::full_to_seen_index(int full_index) const {
  if (full_index < 0 || full_index >= size(Scope::kFull)) {
    throw VocabularyError("class index " + std::to_string(full_index) + " out of range");
  }
  if (full_index == special_index(Scope::kFull)) return special_index(Scope::kSeenOnly);
  return full_index < seen_count() ? full_index : -1;
}

bool ClassVocabulary::operator==(const ClassVocabulary& other) const {
  return seen_ == other.seen_ && unseen_ == other.unseen_ && special_ == other.special_;
}

ClassVocabulary parse_vocabulary(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw VocabularyError(std::string("malformed vocabulary JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("seen") || !doc["seen"].is_array()) {
    throw VocabularyError("vocabulary JSON needs a 'seen' array");
  }
  try {
    auto seen = doc["seen"].get<std::vector<std::string>>();
    std::vector<std::string> unseen;
    if (doc.contains("unseen")) unseen = doc["unseen"].get<std::vector<std::string>>();
    std::string special(kDefaultSpecialClass);
    if (doc.contains("special")) special = doc["special"].get<std::string>();
    return ClassVocabulary(std::move(seen), std::move(unseen), std::move(special));
  } catch (const nlohmann::json::type_error& e) {
    throw VocabularyError(std::string("vocabulary JSON has wrong types: ") + e.what());
  }
}

std::string vocabulary_to_json(const ClassVocabulary& vocab) {
  nlohmann::ordered_json doc;
  doc["seen"] = vocab.seen();
  doc["unseen"] = vocab.unseen();
  doc["special"] = vocab.special();
  return doc.dump(2) + "\n";
}

ClassVocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw VocabularyError("cannot open vocabulary file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_vocabulary(buffer.str());
}

void save_vocabulary(const ClassVocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write vocabulary file " + path.string());
  out << vocabulary_to_json(vocab);
}

void SegmentEmbeddings::validate() const {
  if (data.rows() < 1 || data.cols() < 1) {
    throw ShapeError("segment embeddings must have T >= 1 and d >= 1");
  }
  if (!data.allFinite()) {
    throw ShapeError(std::string(modality_name(modality)) + " embeddings contain non-finite values");
  }
}

void validate_label(const LabelSequence& label, const ClassVocabulary& vocab) {
  if (label.segment_flags.empty()) {
    throw LabelError("video '" + label.video_id + "' has no segments");
  }
  if (!vocab.contains(label.event_class)) {
    throw VocabularyError("video '" + label.video_id + "' has unknown class '" +
                          label.event_class + "'");
  }
  bool special = vocab.is_special(label.event_class);
  for (auto flag : label.segment_flags) {
    if (flag > 1) throw LabelError("video '" + label.video_id + "' has a flag outside {0,1}");
    if (special && flag == 1) {
      throw LabelError("video '" + label.video_id + "' is labeled '" + label.event_class +
                       "' but has event segments");
    }
  }
}

int class_index(const ClassVocabulary& vocab, std::string_view name, Scope scope) {
  return vocab.class_index(name, scope);
}

std::vector<int> segment_classes(const LabelSequence& label, const ClassVocabulary& vocab,
                                 Scope scope) {
  validate_label(label, vocab);
  int background = vocab.special_index(scope);
  int event = background;
  try {
    event = vocab.class_index(label.event_class, scope);
  } catch (const ScopeError&) {
    throw ScopeError("video '" + label.video_id + "' has unseen class '" + label.event_class +
                     "'; training data must be seen-only");
  }
  std::vector<int> classes(label.segment_flags.size());
  for (std::size_t t = 0; t < classes.size(); ++t) {
    classes[t] = label.segment_flags[t] ? event : background;
  }
  return classes;
}

Matrix expand_one_hot(const LabelSequence& label, const ClassVocabulary& vocab, Scope scope) {
  auto classes = segment_classes(label, vocab, scope);
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(classes.size()), vocab.size(scope));
  for (std::size_t t = 0; t < classes.size(); ++t) y(t, classes[t]) = 1.0;
  return y;
}

std::vector<int> row_argmax(const Matrix& m) {
  std::vector<int> out(m.rows(), 0);
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    int best = 0;
    for (Eigen::Index k = 1; k < m.cols(); ++k) {
      if (m(t, k) > m(t, best)) best = static_cast<int>(k);
    }
    out[t] = best;
  }
  return out;
}

}  // namespace avel
