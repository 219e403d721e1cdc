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

#ifndef AVEL_METRICS_H_
#define AVEL_METRICS_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avel/core.h"

namespace avel {

class MismatchedVideoSetError : public Error {
 public:
  using Error::Error;
};

// A maximal run [start, end) of one non-background class.
struct EventSpan {
  int class_index = 0;
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool operator==(const EventSpan&) const = default;
};

// Per-segment predicted and ground-truth classes of one video, both in
// full-vocabulary indices.
struct ScoredVideo {
  std::string video_id;
  std::vector<int> predicted;
  std::vector<int> truth;
};

struct MatchCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const MatchCounts&) const = default;
};

// 2TP / (2TP + FP + FN); 1.0 when all three counts are zero.
double f1_score(const MatchCounts& c);

enum class IouComparator { kGreater, kGreaterEqual };

struct EventMatchOptions {
  double iou_threshold = 0.5;
  IouComparator comparator = IouComparator::kGreater;
};

std::vector<EventSpan> extract_events(std::span<const int> classes, int background);

double span_iou(const EventSpan& a, const EventSpan& b);

// Greedy one-to-one matching per class in descending IoU order; a pair
// counts as a true positive only if its IoU passes the threshold.
MatchCounts event_counts(std::span<const int> predicted, std::span<const int> truth,
                         int background, const EventMatchOptions& options = {});

// Segment counts with background excluded from TP/FP/FN.
MatchCounts segment_counts(std::span<const int> predicted, std::span<const int> truth,
                           int background);

double accuracy(std::span<const ScoredVideo> videos);
double segment_f1(std::span<const ScoredVideo> videos, int background);
double event_f1(std::span<const ScoredVideo> videos, int background,
                const EventMatchOptions& options = {});

// Pairs predictions with labels by video id. Throws MismatchedVideoSetError
// unless both sides cover exactly the same videos with equal lengths.
std::vector<ScoredVideo> align(std::span<const PredictionSequence> predictions,
                               std::span<const LabelSequence> labels, const ClassVocabulary& vocab);

enum class ReportScope { kSeen, kUnseen, kTotal };
std::string to_string(ReportScope scope);

struct ClassMetrics {
  std::string class_name;
  ReportScope scope = ReportScope::kSeen;
  double accuracy = 0.0;
  double segment_f1 = 0.0;
  double event_f1 = 0.0;
  int video_count = 0;
};

struct MetricReport {
  ReportScope scope = ReportScope::kTotal;
  int video_count = 0;
  bool empty = true;  // no videos in scope; metric fields are meaningless
  double accuracy = 0.0;
  double segment_f1 = 0.0;
  double event_f1 = 0.0;
  double avg = 0.0;
};

MetricReport make_report(std::span<const ScoredVideo> videos, int background, ReportScope scope,
                         const EventMatchOptions& options = {});

struct Evaluation {
  MetricReport seen;
  MetricReport unseen;
  MetricReport total;
  std::vector<ClassMetrics> per_class;  // ordered by full-vocabulary index
};

// Scope of each video id; see dataset's Manifest::scope_of.
using ScopeAssignment = std::map<std::string, ReportScope>;

Evaluation evaluate(std::span<const PredictionSequence> predictions,
                    std::span<const LabelSequence> labels, const ClassVocabulary& vocab,
                    const ScopeAssignment& scopes, const EventMatchOptions& options = {});

std::string evaluation_to_json(const Evaluation& evaluation);
std::string per_class_csv(const Evaluation& evaluation);

}  // namespace avel

#endif  // AVEL_METRICS_H_
