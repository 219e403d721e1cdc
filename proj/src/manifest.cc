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

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "avel/dataset.h"
#include "binary_io.h"
#include "json.hpp"

namespace avel {

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw Error("unknown split '" + std::string(text) + "'");
}

std::vector<ManifestEntry> Manifest::in_split(Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

namespace {

ManifestEntry parse_entry(const nlohmann::json& j) {
  ManifestEntry e;
  e.video_id = j.at("video_id").get<std::string>();
  e.event_class = j.at("event_class").get<std::string>();
  for (int flag : j.at("segment_flags").get<std::vector<int>>()) {
    if (flag != 0 && flag != 1) throw Error("segment flags must be 0 or 1");
    e.segment_flags.push_back(static_cast<std::uint8_t>(flag));
  }
  e.split = parse_split(j.at("split").get<std::string>());
  e.audio_path = j.at("audio_path").get<std::string>();
  e.visual_path = j.at("visual_path").get<std::string>();
  if (j.contains("scope")) {
    auto scope = j["scope"].get<std::string>();
    if (scope == "seen") {
      e.scope = ReportScope::kSeen;
    } else if (scope == "unseen") {
      e.scope = ReportScope::kUnseen;
    } else {
      throw Error("scope must be 'seen' or 'unseen'");
    }
  }
  return e;
}

void validate_entry(const ManifestEntry& e, const ClassVocabulary& vocab, int segments) {
  if (e.video_id.empty()) throw Error("empty video_id");
  if (static_cast<int>(e.segment_flags.size()) != segments) {
    throw Error("video '" + e.video_id + "' has " + std::to_string(e.segment_flags.size()) +
                " segment flags, expected " + std::to_string(segments));
  }
  if (!vocab.contains(e.event_class)) {
    throw Error("video '" + e.video_id + "' has unknown class '" + e.event_class + "'");
  }
  if (e.split == Split::kTrain && vocab.is_unseen(e.event_class)) {
    throw Error("training video '" + e.video_id + "' has unseen class '" + e.event_class +
                "'; the training split must be seen-only");
  }
  validate_label(e.label(), vocab);
  if (e.scope) {
    bool seen = *e.scope == ReportScope::kSeen;
    if ((seen && vocab.is_unseen(e.event_class)) || (!seen && vocab.is_seen(e.event_class))) {
      throw Error("video '" + e.video_id + "' has a scope that contradicts its class");
    }
  }
}

}  // namespace

void validate_manifest(const Manifest& manifest, const ClassVocabulary& vocab, int segments) {
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const int line = static_cast<int>(i) + 1;
    try {
      validate_entry(e, vocab, segments);
    } catch (const Error& err) {
      throw ManifestError(line, err.what());
    }
    if (!ids.insert(e.video_id).second) {
      throw ManifestError(line, "duplicate video_id '" + e.video_id + "'");
    }
  }
}

Manifest parse_manifest(std::string_view text, const ClassVocabulary& vocab, int segments) {
  Manifest manifest;
  std::unordered_set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestEntry entry;
    try {
      entry = parse_entry(nlohmann::json::parse(line));
      validate_entry(entry, vocab, segments);
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(number, e.what());
    } catch (const Error& e) {
      throw ManifestError(number, e.what());
    }
    if (!ids.insert(entry.video_id).second) {
      throw ManifestError(number, "duplicate video_id '" + entry.video_id + "'");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

std::string manifest_to_jsonl(const Manifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json j;
    j["video_id"] = e.video_id;
    j["event_class"] = e.event_class;
    std::vector<int> flags(e.segment_flags.begin(), e.segment_flags.end());
    j["segment_flags"] = flags;
    j["split"] = to_string(e.split);
    j["audio_path"] = e.audio_path;
    j["visual_path"] = e.visual_path;
    if (e.scope) j["scope"] = to_string(*e.scope);
    out += j.dump() + "\n";
  }
  return out;
}

Manifest load_manifest(const std::filesystem::path& path, const ClassVocabulary& vocab,
                       int segments) {
  return parse_manifest(binary::read_file(path.string()), vocab, segments);
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  binary::write_file_atomic(path.string(), manifest_to_jsonl(manifest));
}

ScopeAssignment scope_assignment(const std::vector<ManifestEntry>& entries,
                                 const ClassVocabulary& vocab) {
  ScopeAssignment scopes;
  for (const auto& e : entries) {
    if (e.scope) {
      scopes[e.video_id] = *e.scope;
    } else if (vocab.is_seen(e.event_class)) {
      scopes[e.video_id] = ReportScope::kSeen;
    } else if (vocab.is_unseen(e.event_class)) {
      scopes[e.video_id] = ReportScope::kUnseen;
    } else {
      throw Error("background-only video '" + e.video_id +
                  "' needs an explicit \"scope\" in the manifest");
    }
  }
  return scopes;
}

VideoSample load_video(const ManifestEntry& entry, const std::filesystem::path& base_dir,
                       int expected_dim) {
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  VideoSample sample;
  sample.video_id = entry.video_id;
  try {
    sample.audio = read_container(resolve(entry.audio_path));
    sample.visual = read_container(resolve(entry.visual_path));
  } catch (const std::exception& e) {
    throw Error("video '" + entry.video_id + "': " + e.what());
  }
  const int segments = static_cast<int>(entry.segment_flags.size());
  for (const auto* emb : {&sample.audio, &sample.visual}) {
    if (emb->segments() != segments || emb->dim() != expected_dim) {
      throw ShapeError("video '" + entry.video_id + "': " + std::string(modality_name(emb->modality)) +
                       " container is " + std::to_string(emb->segments()) + "x" +
                       std::to_string(emb->dim()) + ", expected " + std::to_string(segments) + "x" +
                       std::to_string(expected_dim));
    }
  }
  if (sample.audio.modality != Modality::kAudio || sample.visual.modality != Modality::kVisual) {
    throw FormatError("video '" + entry.video_id + "': container modality does not match its role");
  }
  return sample;
}

}  // namespace avel
