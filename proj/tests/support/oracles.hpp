// Brute-force reference implementations used to check the library.
#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "seqcoref/model.hpp"

namespace seqcoref::support {

// Best total penalty for a stretch of `a` gapped source and `b` gapped
// target tokens between two aligned pairs. Runs of one side can only be
// separated by runs of the other, so the run counts differ by at most one.
inline double gap_region_score(int a, int b, double slope) {
  if (a == 0 && b == 0) return 0.0;
  auto run_cost = [slope](int tokens, int runs) { return runs == 0 ? 0.0 : -runs - slope * (tokens - runs); };
  if (a == 0) return run_cost(b, 1);
  if (b == 0) return run_cost(a, 1);
  double best = -std::numeric_limits<double>::infinity();
  for (int rx = 1; rx <= a; ++rx) {
    for (int ry = std::max(1, rx - 1); ry <= std::min(b, rx + 1); ++ry) {
      best = std::max(best, run_cost(a, rx) + run_cost(b, ry));
    }
  }
  return best;
}

// All strictly increasing sets of (source, target) pairs, 1-based.
inline void for_each_matching(int n, int k, const std::function<void(const std::vector<std::pair<int, int>>&)>& fn) {
  std::vector<std::pair<int, int>> cur;
  std::function<void(int, int)> rec = [&](int i0, int j0) {
    fn(cur);
    for (int i = i0; i <= n; ++i) {
      for (int j = j0; j <= k; ++j) {
        cur.emplace_back(i, j);
        rec(i + 1, j + 1);
        cur.pop_back();
      }
    }
  };
  rec(1, 1);
}

inline double matching_gap_score(const std::vector<std::pair<int, int>>& m, int n, int k, double slope) {
  double total = 0.0;
  int pi = 0, pj = 0;
  for (auto [i, j] : m) {
    total += gap_region_score(i - pi - 1, j - pj - 1, slope);
    pi = i;
    pj = j;
  }
  return total + gap_region_score(n - pi, k - pj, slope);
}

// Exhaustive optimum over every monotone matching.
inline double brute_force_alignment_score(const std::vector<std::string>& source, const std::vector<std::string>& target,
                                          double slope = 0.0, double match = 1.0, double mismatch = -1.0) {
  const int n = static_cast<int>(source.size()), k = static_cast<int>(target.size());
  double best = -std::numeric_limits<double>::infinity();
  for_each_matching(n, k, [&](const std::vector<std::pair<int, int>>& m) {
    double s = matching_gap_score(m, n, k, slope);
    for (auto [i, j] : m) s += source[i - 1] == target[j - 1] ? match : mismatch;
    best = std::max(best, s);
  });
  return best;
}

// The same exhaustive search with matchings precomputed as bit masks over
// an n x k equality matrix (n * k <= 64), for sweeping every instance of a
// size. Matchings are sorted by their best possible score for early exit.
class MatchingTable {
 public:
  MatchingTable(int n, int k, double slope) : n_(n), k_(k) {
    for_each_matching(n, k, [&](const std::vector<std::pair<int, int>>& m) {
      Entry e;
      for (auto [i, j] : m) e.mask |= bit(i, j);
      e.base = matching_gap_score(m, n, k, slope) - static_cast<double>(m.size());
      e.bound = e.base + 2.0 * static_cast<double>(m.size());
      entries_.push_back(e);
    });
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.bound > b.bound; });
  }

  std::uint64_t bit(int i, int j) const { return std::uint64_t{1} << ((i - 1) * k_ + (j - 1)); }

  double best(std::uint64_t equal) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& e : entries_) {
      if (e.bound <= best) break;
      best = std::max(best, e.base + 2.0 * std::popcount(e.mask & equal));
    }
    return best;
  }

 private:
  struct Entry {
    std::uint64_t mask = 0;
    double base = 0.0;
    double bound = 0.0;
  };
  int n_, k_;
  std::vector<Entry> entries_;
};

// Maximum total weight over all one-to-one assignments, by enumerating
// permutations of the larger side.
inline double brute_force_assignment(const std::vector<std::vector<double>>& w) {
  const int rows = static_cast<int>(w.size());
  const int cols = rows ? static_cast<int>(w[0].size()) : 0;
  const int n = std::max(rows, cols);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (int i = 0; i < rows; ++i) {
      if (perm[i] < cols) s += w[i][perm[i]];
    }
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Segment merging by explicit graph search: nodes are (segment, label),
// edges join nodes of different segments holding an identical span.
inline std::vector<std::set<std::pair<int, int>>> merge_oracle(
    const std::vector<std::pair<int, CorefAnnotation>>& parts /* (offset, local annotation) */) {
  std::map<std::pair<int, int>, std::set<std::pair<int, int>>> node_spans;
  for (int k = 0; k < static_cast<int>(parts.size()); ++k) {
    for (const auto& s : parts[k].second.spans()) {
      node_spans[{k, s.cluster}].insert({s.start + parts[k].first, s.end + parts[k].first});
    }
  }
  std::vector<std::pair<int, int>> nodes;
  for (const auto& [n, _] : node_spans) nodes.push_back(n);
  std::set<std::pair<int, int>> visited;
  std::vector<std::set<std::pair<int, int>>> out;
  for (const auto& start : nodes) {
    if (visited.count(start)) continue;
    std::set<std::pair<int, int>> comp;
    std::deque<std::pair<int, int>> queue{start};
    visited.insert(start);
    while (!queue.empty()) {
      auto cur = queue.front();
      queue.pop_front();
      const auto& spans = node_spans[cur];
      comp.insert(spans.begin(), spans.end());
      for (const auto& other : nodes) {
        if (visited.count(other) || other.first == cur.first) continue;
        const auto& os = node_spans[other];
        bool share = std::any_of(spans.begin(), spans.end(), [&](const auto& m) { return os.count(m) > 0; });
        if (share) {
          visited.insert(other);
          queue.push_back(other);
        }
      }
    }
    out.push_back(std::move(comp));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::set<std::pair<int, int>>> as_sets(const CorefAnnotation& ann) {
  std::vector<std::set<std::pair<int, int>>> out;
  for (const auto& c : ann.clusters()) out.emplace_back(c.begin(), c.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Every valid annotation of an n-token document whose labels are a dense
// subset of 1..max_label (non-crossing, no duplicate triples). Calls fn on
// each; labelings that differ only by a permutation are all produced.
inline void for_each_annotation(int n, int max_label, const std::function<void(const CorefAnnotation&)>& fn) {
  std::vector<std::pair<int, int>> all;
  for (int len = 1; len <= n; ++len) {
    for (int s = 1; s + len - 1 <= n; ++s) all.emplace_back(s, s + len - 1);
  }
  std::vector<Span> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t idx) {
    if (idx == all.size()) {
      std::set<int> labels;
      for (const auto& s : cur) labels.insert(s.cluster);
      if (!labels.empty() && *labels.rbegin() != static_cast<int>(labels.size())) return;
      fn(CorefAnnotation(cur));
      return;
    }
    rec(idx + 1);
    const auto [s, e] = all[idx];
    for (const auto& o : cur) {
      if (spans_cross(o, Span{s, e, 1})) return;
    }
    // Each subset of labels for this span.
    for (int mask = 1; mask < (1 << max_label); ++mask) {
      std::size_t added = 0;
      for (int l = 1; l <= max_label; ++l) {
        if (mask & (1 << (l - 1))) {
          cur.push_back({s, e, l});
          ++added;
        }
      }
      rec(idx + 1);
      cur.resize(cur.size() - added);
    }
  };
  rec(0);
}

}  // namespace seqcoref::support
