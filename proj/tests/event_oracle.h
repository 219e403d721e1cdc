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

#ifndef AVEL_TESTS_EVENT_ORACLE_H_
#define AVEL_TESTS_EVENT_ORACLE_H_

#include <algorithm>
#include <vector>

#include "avel/metrics.h"

namespace avel::testing {

struct NaiveSpan {
  int cls, start, end;  // [start, end)
};

// Every interval that is constant, non-background and cannot be extended.
inline std::vector<NaiveSpan> naive_spans(const std::vector<int>& seq, int background) {
  const int T = static_cast<int>(seq.size());
  std::vector<NaiveSpan> out;
  for (int s = 0; s < T; ++s) {
    for (int e = s + 1; e <= T; ++e) {
      const int c = seq[s];
      if (c == background) continue;
      bool constant = true;
      for (int t = s; t < e; ++t) constant = constant && seq[t] == c;
      if (!constant) continue;
      bool left_max = s == 0 || seq[s - 1] != c;
      bool right_max = e == T || seq[e] != c;
      if (left_max && right_max) out.push_back({c, s, e});
    }
  }
  return out;
}

// IoU > 1/2 (or >= 1/2) in exact integer arithmetic.
inline bool naive_match(const NaiveSpan& p, const NaiveSpan& g, bool inclusive) {
  if (p.cls != g.cls) return false;
  int inter = std::max(0, std::min(p.end, g.end) - std::max(p.start, g.start));
  int uni = (p.end - p.start) + (g.end - g.start) - inter;
  return inclusive ? 2 * inter >= uni : 2 * inter > uni;
}

// Largest one-to-one matching by trying every assignment of predictions.
inline int max_matching(const std::vector<NaiveSpan>& pred, const std::vector<NaiveSpan>& gt,
                        std::size_t i, std::vector<bool>& used, bool inclusive) {
  if (i == pred.size()) return 0;
  int best = max_matching(pred, gt, i + 1, used, inclusive);
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (used[j] || !naive_match(pred[i], gt[j], inclusive)) continue;
    used[j] = true;
    best = std::max(best, 1 + max_matching(pred, gt, i + 1, used, inclusive));
    used[j] = false;
  }
  return best;
}

inline MatchCounts naive_event_counts(const std::vector<int>& pred, const std::vector<int>& gt,
                                      int background, bool inclusive = false) {
  auto ps = naive_spans(pred, background);
  auto gs = naive_spans(gt, background);
  std::vector<bool> used(gs.size(), false);
  long tp = max_matching(ps, gs, 0, used, inclusive);
  return {tp, static_cast<long>(ps.size()) - tp, static_cast<long>(gs.size()) - tp};
}

// All sequences of length T over `classes` symbols.
inline std::vector<std::vector<int>> all_sequences(int T, int classes) {
  std::vector<std::vector<int>> out;
  std::vector<int> seq(T, 0);
  while (true) {
    out.push_back(seq);
    int t = 0;
    while (t < T && ++seq[t] == classes) seq[t++] = 0;
    if (t == T) break;
  }
  return out;
}

}  // namespace avel::testing

#endif  // AVEL_TESTS_EVENT_ORACLE_H_
