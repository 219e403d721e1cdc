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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>

#include "avel/dataset.h"

namespace avel {
namespace {

struct SeenRange {
  int lo = 1;
  int hi = 0;
  bool empty() const { return lo > hi; }
};

struct CountPlan {
  int unseen_val = 0;
  int seen_val = 0;
  int seen_test = 0;
  double deviation = 0.0;
};

double seen_fraction(int seen, int unseen) {
  return seen + unseen == 0 ? 0.0 : static_cast<double>(seen) / (seen + unseen);
}

bool within(int seen, int unseen, double target, double tolerance) {
  if (seen + unseen == 0) return false;  // every eval split must be non-empty
  return std::abs(seen_fraction(seen, unseen) - target) <= tolerance + 1e-12;
}

// Seen counts s in [0, max_seen] whose fraction s / (s + unseen) is within
// tolerance. The fraction is non-decreasing in s, so the set is an interval.
SeenRange seen_range(int unseen, int max_seen, double target, double tolerance) {
  SeenRange range;
  if (unseen == 0) {
    if (within(1, 0, target, tolerance) && max_seen >= 1) range = {1, max_seen};
    return range;
  }
  const double lo_frac = std::max(0.0, target - tolerance);
  const double hi_frac = target + tolerance;
  int lo = static_cast<int>(std::ceil(unseen * lo_frac / (1.0 - lo_frac)));
  lo = std::clamp(lo, 0, max_seen + 1);
  while (lo > 0 && within(lo - 1, unseen, target, tolerance)) --lo;
  while (lo <= max_seen && !within(lo, unseen, target, tolerance)) ++lo;
  int hi = hi_frac >= 1.0 ? max_seen
                          : static_cast<int>(std::floor(unseen * hi_frac / (1.0 - hi_frac)));
  hi = std::clamp(hi, -1, max_seen);
  while (hi < max_seen && within(hi + 1, unseen, target, tolerance)) ++hi;
  while (hi >= lo && !within(hi, unseen, target, tolerance)) --hi;
  range = {lo, hi};
  return range;
}

// Seen count in `range` whose fraction is closest to the target.
int closest_seen(int unseen, SeenRange range, double target, int cap) {
  const int hi = std::min(range.hi, cap);
  const double ideal = unseen * target / (1.0 - target);
  int best = range.lo;
  double best_dev = 2.0;
  for (int s : {static_cast<int>(std::floor(ideal)), static_cast<int>(std::ceil(ideal)), range.lo, hi}) {
    s = std::clamp(s, range.lo, hi);
    double dev = std::abs(seen_fraction(s, unseen) - target);
    if (dev < best_dev - 1e-15 || (std::abs(dev - best_dev) <= 1e-15 && s < best)) {
      best = s;
      best_dev = dev;
    }
  }
  return best;
}

std::optional<CountPlan> solve_counts(int unseen_total, int seen_total, const SplitConfig& c,
                                      double tolerance) {
  const double r = c.seen_fraction;
  std::vector<int> unseen_val(unseen_total + 1);
  std::iota(unseen_val.begin(), unseen_val.end(), 0);
  const double desired = unseen_total * c.val_share;
  std::stable_sort(unseen_val.begin(), unseen_val.end(), [&](int a, int b) {
    return std::abs(a - desired) < std::abs(b - desired);
  });

  for (int uv : unseen_val) {
    const int ut = unseen_total - uv;
    SeenRange rv = seen_range(uv, seen_total, r, tolerance);
    SeenRange rt = seen_range(ut, seen_total, r, tolerance);
    if (rv.empty() || rt.empty() || rv.lo + rt.lo > seen_total) continue;

    std::optional<CountPlan> best;
    auto consider = [&](int sv, int st) {
      double dev = std::max(std::abs(seen_fraction(sv, uv) - r), std::abs(seen_fraction(st, ut) - r));
      if (!best || dev < best->deviation - 1e-15) best = CountPlan{uv, sv, st, dev};
    };
    int sv = closest_seen(uv, rv, r, seen_total);
    int st = closest_seen(ut, rt, r, seen_total);
    if (sv + st <= seen_total) {
      consider(sv, st);
    } else {
      for (int s = rv.lo; s <= std::min(rv.hi, seen_total - rt.lo); ++s) {
        SeenRange capped{rt.lo, std::min(rt.hi, seen_total - s)};
        consider(s, closest_seen(ut, capped, r, seen_total - s));
      }
    }
    if (best) return best;
  }
  return std::nullopt;
}

// Largest-remainder split of `total` across classes proportional to their
// capacities; never exceeds a capacity.
std::vector<int> apportion(int total, const std::vector<int>& capacity) {
  const long sum = std::accumulate(capacity.begin(), capacity.end(), 0L);
  std::vector<int> out(capacity.size(), 0);
  if (sum == 0 || total == 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < capacity.size(); ++i) {
    double quota = static_cast<double>(total) * capacity[i] / static_cast<double>(sum);
    out[i] = std::min(capacity[i], static_cast<int>(std::floor(quota)));
    assigned += out[i];
    remainders.push_back({quota - out[i], i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % remainders.size()) {
    std::size_t i = remainders[k].second;
    if (out[i] < capacity[i]) {
      ++out[i];
      ++assigned;
    }
  }
  return out;
}

}  // namespace

SplitPlan generate_splits(const std::vector<ClassCount>& class_video_counts,
                          const std::set<std::string>& seen_classes, const SplitConfig& config,
                          std::uint64_t seed) {
  if (!(config.seen_fraction > 0.0 && config.seen_fraction < 1.0)) {
    throw Error("seen fraction must lie in (0, 1)");
  }
  std::vector<int> seen_idx, unseen_idx;
  std::set<std::string> names;
  int seen_total = 0, unseen_total = 0;
  for (std::size_t i = 0; i < class_video_counts.size(); ++i) {
    const auto& c = class_video_counts[i];
    if (c.videos < 0) throw Error("class '" + c.name + "' has a negative video count");
    if (!names.insert(c.name).second) throw Error("class '" + c.name + "' listed twice");
    if (seen_classes.count(c.name)) {
      seen_idx.push_back(static_cast<int>(i));
      seen_total += c.videos;
    } else {
      unseen_idx.push_back(static_cast<int>(i));
      unseen_total += c.videos;
    }
  }
  for (const auto& s : seen_classes) {
    if (!names.count(s)) throw Error("seen class '" + s + "' has no video count");
  }

  SplitPlan plan;
  if (unseen_total == 0) {
    plan.ratio_applicable = false;
    plan.seen_val = static_cast<int>(std::lround(seen_total * config.fallback_val_fraction));
    plan.seen_test = std::min(seen_total - plan.seen_val,
                              static_cast<int>(std::lround(seen_total * config.fallback_test_fraction)));
  } else {
    auto counts = solve_counts(unseen_total, seen_total, config, config.tolerance);
    if (!counts) {
      auto nearest = solve_counts(unseen_total, seen_total, config, 1.0);
      double nv = nearest ? seen_fraction(nearest->seen_val, nearest->unseen_val) : 0.0;
      double nt = nearest ? seen_fraction(nearest->seen_test, unseen_total - nearest->unseen_val) : 0.0;
      throw SplitInfeasibleError(
          "no split reaches seen fraction " + std::to_string(config.seen_fraction) + " +/- " +
              std::to_string(config.tolerance) + " with " + std::to_string(seen_total) +
              " seen and " + std::to_string(unseen_total) + " unseen videos; nearest achievable " +
              "val/test seen fractions are " + std::to_string(nv) + " / " + std::to_string(nt),
          nv, nt);
    }
    plan.unseen_val = counts->unseen_val;
    plan.unseen_test = unseen_total - counts->unseen_val;
    plan.seen_val = counts->seen_val;
    plan.seen_test = counts->seen_test;
  }
  plan.train = seen_total - plan.seen_val - plan.seen_test;
  plan.val_seen_fraction = seen_fraction(plan.seen_val, plan.unseen_val);
  plan.test_seen_fraction = seen_fraction(plan.seen_test, plan.unseen_test);

  // Per-class quotas.
  std::vector<int> val_quota(class_video_counts.size(), 0), test_quota(class_video_counts.size(), 0);
  auto capacities = [&](const std::vector<int>& idx, const std::vector<int>& used) {
    std::vector<int> cap;
    for (int i : idx) cap.push_back(class_video_counts[i].videos - used[i]);
    return cap;
  };
  auto spread = [&](const std::vector<int>& idx, int total, std::vector<int>& quota,
                    const std::vector<int>& used) {
    auto share = apportion(total, capacities(idx, used));
    for (std::size_t k = 0; k < idx.size(); ++k) quota[idx[k]] = share[k];
  };
  const std::vector<int> none(class_video_counts.size(), 0);
  spread(seen_idx, plan.seen_val, val_quota, none);
  spread(seen_idx, plan.seen_test, test_quota, val_quota);
  spread(unseen_idx, plan.unseen_val, val_quota, none);
  for (int i : unseen_idx) test_quota[i] = class_video_counts[i].videos - val_quota[i];

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < class_video_counts.size(); ++i) {
    const auto& c = class_video_counts[i];
    std::vector<int> order(c.videos);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Split> split(c.videos, Split::kTrain);
    for (int k = 0; k < c.videos; ++k) {
      if (k < val_quota[i]) {
        split[order[k]] = Split::kVal;
      } else if (k < val_quota[i] + test_quota[i]) {
        split[order[k]] = Split::kTest;
      }
    }
    for (int v = 0; v < c.videos; ++v) plan.assignments.push_back({c.name, v, split[v]});
  }
  return plan;
}

}  // namespace avel
