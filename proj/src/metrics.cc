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

#include "avel/metrics.h"

#include <algorithm>
#include <cstdio>
#include <set>
#include <tuple>
#include <unordered_map>

#include "json.hpp"

namespace avel {

double f1_score(const MatchCounts& c) {
  const long denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

std::vector<EventSpan> extract_events(std::span<const int> classes, int background) {
  std::vector<EventSpan> spans;
  const int n = static_cast<int>(classes.size());
  int start = 0;
  while (start < n) {
    int end = start + 1;
    while (end < n && classes[end] == classes[start]) ++end;
    if (classes[start] != background) spans.push_back({classes[start], start, end});
    start = end;
  }
  return spans;
}

double span_iou(const EventSpan& a, const EventSpan& b) {
  const int inter = std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const int uni = a.length() + b.length() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MatchCounts event_counts(std::span<const int> predicted, std::span<const int> truth,
                         int background, const EventMatchOptions& options) {
  const auto pred_spans = extract_events(predicted, background);
  const auto true_spans = extract_events(truth, background);

  struct Candidate {
    double iou;
    std::size_t pred;
    std::size_t gt;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < pred_spans.size(); ++p) {
    for (std::size_t g = 0; g < true_spans.size(); ++g) {
      if (pred_spans[p].class_index != true_spans[g].class_index) continue;
      const double iou = span_iou(pred_spans[p], true_spans[g]);
      const bool passes = options.comparator == IouComparator::kGreater
                              ? iou > options.iou_threshold
                              : iou >= options.iou_threshold;
      if (passes) candidates.push_back({iou, p, g});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.iou > b.iou; });

  std::vector<bool> pred_used(pred_spans.size(), false), gt_used(true_spans.size(), false);
  MatchCounts counts;
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = gt_used[c.gt] = true;
    ++counts.tp;
  }
  counts.fp = static_cast<long>(pred_spans.size()) - counts.tp;
  counts.fn = static_cast<long>(true_spans.size()) - counts.tp;
  return counts;
}

MatchCounts segment_counts(std::span<const int> predicted, std::span<const int> truth,
                           int background) {
  MatchCounts counts;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const int p = predicted[t];
    const int g = truth[t];
    if (p == g) {
      if (g != background) ++counts.tp;
      continue;
    }
    if (p != background) ++counts.fp;
    if (g != background) ++counts.fn;
  }
  return counts;
}

double accuracy(std::span<const ScoredVideo> videos) {
  long correct = 0;
  long total = 0;
  for (const auto& v : videos) {
    for (std::size_t t = 0; t < v.truth.size(); ++t) correct += v.predicted[t] == v.truth[t];
    total += static_cast<long>(v.truth.size());
  }
  return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
}

double segment_f1(std::span<const ScoredVideo> videos, int background) {
  MatchCounts counts;
  for (const auto& v : videos) counts += segment_counts(v.predicted, v.truth, background);
  return f1_score(counts);
}

double event_f1(std::span<const ScoredVideo> videos, int background,
                const EventMatchOptions& options) {
  MatchCounts counts;
  for (const auto& v : videos) counts += event_counts(v.predicted, v.truth, background, options);
  return f1_score(counts);
}

std::vector<ScoredVideo> align(std::span<const PredictionSequence> predictions,
                               std::span<const LabelSequence> labels,
                               const ClassVocabulary& vocab) {
  std::unordered_map<std::string, const PredictionSequence*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.video_id, &p).second) {
      throw MismatchedVideoSetError("duplicate prediction for video '" + p.video_id + "'");
    }
  }
  if (predictions.size() != labels.size()) {
    throw MismatchedVideoSetError(std::to_string(predictions.size()) + " predictions for " +
                                  std::to_string(labels.size()) + " labeled videos");
  }
  const int classes = vocab.size(Scope::kFull);
  std::vector<ScoredVideo> out;
  out.reserve(labels.size());
  std::set<std::string> seen_ids;
  for (const auto& label : labels) {
    if (!seen_ids.insert(label.video_id).second) {
      throw MismatchedVideoSetError("duplicate label for video '" + label.video_id + "'");
    }
    auto it = by_id.find(label.video_id);
    if (it == by_id.end()) {
      throw MismatchedVideoSetError("no prediction for video '" + label.video_id + "'");
    }
    ScoredVideo v;
    v.video_id = label.video_id;
    v.truth = segment_classes(label, vocab, Scope::kFull);
    v.predicted = it->second->classes;
    if (v.predicted.size() != v.truth.size()) {
      throw MismatchedVideoSetError("video '" + label.video_id + "' has " +
                                    std::to_string(v.predicted.size()) + " predicted segments, " +
                                    std::to_string(v.truth.size()) + " labeled");
    }
    for (int c : v.predicted) {
      if (c < 0 || c >= classes) {
        throw VocabularyError("video '" + label.video_id + "' has prediction index " +
                              std::to_string(c) + " outside the vocabulary");
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string to_string(ReportScope scope) {
  switch (scope) {
    case ReportScope::kSeen:
      return "seen";
    case ReportScope::kUnseen:
      return "unseen";
    case ReportScope::kTotal:
      return "total";
  }
  return "total";
}

MetricReport make_report(std::span<const ScoredVideo> videos, int background, ReportScope scope,
                         const EventMatchOptions& options) {
  MetricReport report;
  report.scope = scope;
  report.video_count = static_cast<int>(videos.size());
  report.empty = videos.empty();
  if (report.empty) return report;
  report.accuracy = accuracy(videos);
  report.segment_f1 = segment_f1(videos, background);
  report.event_f1 = event_f1(videos, background, options);
  report.avg = (report.accuracy + report.segment_f1 + report.event_f1) / 3.0;
  return report;
}

Evaluation evaluate(std::span<const PredictionSequence> predictions,
                    std::span<const LabelSequence> labels, const ClassVocabulary& vocab,
                    const ScopeAssignment& scopes, const EventMatchOptions& options) {
  auto videos = align(predictions, labels, vocab);
  const int background = vocab.special_index(Scope::kFull);

  std::vector<ScoredVideo> seen, unseen;
  std::map<int, std::vector<ScoredVideo>> by_class;
  // align() keeps label order, so videos[i] belongs to labels[i].
  for (std::size_t i = 0; i < videos.size(); ++i) {
    auto it = scopes.find(videos[i].video_id);
    if (it == scopes.end() || it->second == ReportScope::kTotal) {
      throw Error("video '" + videos[i].video_id + "' has no seen/unseen assignment");
    }
    (it->second == ReportScope::kSeen ? seen : unseen).push_back(videos[i]);
    by_class[vocab.class_index(labels[i].event_class, Scope::kFull)].push_back(videos[i]);
  }

  Evaluation result;
  result.seen = make_report(seen, background, ReportScope::kSeen, options);
  result.unseen = make_report(unseen, background, ReportScope::kUnseen, options);
  result.total = make_report(videos, background, ReportScope::kTotal, options);
  for (const auto& [index, members] : by_class) {
    ClassMetrics row;
    row.class_name = vocab.name_at(index, Scope::kFull);
    row.scope = vocab.is_seen(row.class_name)     ? ReportScope::kSeen
                : vocab.is_unseen(row.class_name) ? ReportScope::kUnseen
                                                  : ReportScope::kTotal;
    row.accuracy = accuracy(members);
    row.segment_f1 = segment_f1(members, background);
    row.event_f1 = event_f1(members, background, options);
    row.video_count = static_cast<int>(members.size());
    result.per_class.push_back(std::move(row));
  }
  return result;
}

namespace {

nlohmann::ordered_json report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["scope"] = to_string(r.scope);
  j["video_count"] = r.video_count;
  j["empty"] = r.empty;
  if (!r.empty) {
    j["accuracy"] = r.accuracy;
    j["segment_f1"] = r.segment_f1;
    j["event_f1"] = r.event_f1;
    j["avg"] = r.avg;
  }
  return j;
}

}  // namespace

std::string evaluation_to_json(const Evaluation& evaluation) {
  nlohmann::ordered_json doc;
  doc["seen"] = report_json(evaluation.seen);
  doc["unseen"] = report_json(evaluation.unseen);
  doc["total"] = report_json(evaluation.total);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& c : evaluation.per_class) {
    nlohmann::ordered_json row;
    row["class"] = c.class_name;
    row["scope"] = to_string(c.scope);
    row["accuracy"] = c.accuracy;
    row["segment_f1"] = c.segment_f1;
    row["event_f1"] = c.event_f1;
    row["video_count"] = c.video_count;
    rows.push_back(std::move(row));
  }
  doc["per_class"] = std::move(rows);
  return doc.dump(2) + "\n";
}

std::string per_class_csv(const Evaluation& evaluation) {
  std::string out = "class,scope,acc,seg_f1,eve_f1,video_count\n";
  char buffer[160];
  for (const auto& c : evaluation.per_class) {
    std::snprintf(buffer, sizeof(buffer), ",%s,%.6f,%.6f,%.6f,%d\n", to_string(c.scope).c_str(),
                  c.accuracy, c.segment_f1, c.event_f1, c.video_count);
    std::string name = c.class_name;
    if (name.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : name) {
        if (ch == '"') quoted += '"';
        quoted += ch;
      }
      name = quoted + "\"";
    }
    out += name + buffer;
  }
  return out;
}

}  // namespace avel
