// Maximum-weight one-to-one assignment between two sets (Hungarian method,
// Jonker-Volgenant potentials, O(n^3)). Rectangular inputs are padded with
// zero-weight dummies; every weight is assumed non-negative, so leaving a
// row unmatched never beats matching it to a dummy.

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace seqcoref {

struct Matching {
  std::vector<std::pair<int, int>> pairs;  // (row, col), 0-based, only real rows/cols
  double total = 0.0;
};

inline Matching max_weight_matching(const std::vector<std::vector<double>>& weight) {
  Matching out;
  const int rows = static_cast<int>(weight.size());
  const int cols = rows ? static_cast<int>(weight[0].size()) : 0;
  const int n = std::max(rows, cols);
  if (n == 0) return out;

  // Minimise cost = max - weight on the padded square matrix, 1-based.
  double top = 0.0;
  for (const auto& r : weight) {
    for (double w : r) top = std::max(top, w);
  }
  auto cost = [&](int i, int j) {
    const double w = (i <= rows && j <= cols) ? weight[i - 1][j - 1] : 0.0;
    return top - w;
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  for (int j = 1; j <= n; ++j) {
    const int i = p[j];
    if (i >= 1 && i <= rows && j <= cols) {
      out.pairs.emplace_back(i - 1, j - 1);
      out.total += weight[i - 1][j - 1];
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

// Matching between two lists under a similarity function.
template <class A, class B>
Matching optimal_cluster_matching(const std::vector<A>& gold, const std::vector<B>& pred,
                                  const std::function<double(const A&, const B&)>& similarity) {
  std::vector<std::vector<double>> w(gold.size(), std::vector<double>(pred.size(), 0.0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < pred.size(); ++j) w[i][j] = similarity(gold[i], pred[j]);
  }
  return max_weight_matching(w);
}

}  // namespace seqcoref
