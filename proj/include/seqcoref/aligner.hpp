// Recovers document spans from partial linearizations by globally aligning
// the mention words to the document with affine gap penalties (Gotoh's
// three-matrix dynamic program, O(source * target) time).
//
// Scores: +1 for an aligned equal pair, -1 for an aligned unequal pair, and
// g(n) = -1 - slope * (n - 1) for each maximal gap of length n on either
// side, leading and trailing gaps included.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "seqcoref/diagnostics.hpp"
#include "seqcoref/linearizer.hpp"
#include "seqcoref/model.hpp"

namespace seqcoref {

struct AlignmentScores {
  double match = 1.0;
  double mismatch = -1.0;
  double gap_open = -1.0;
  double gap_slope = 0.0;  // p >= 0

  double gap(int length) const { return length <= 0 ? 0.0 : gap_open - gap_slope * (length - 1); }
};

struct AlignedPair {
  int source = 0;  // 1-based
  int target = 0;  // 1-based
  bool equal = false;

  friend bool operator==(const AlignedPair&, const AlignedPair&) = default;
};

struct Alignment {
  std::vector<AlignedPair> pairs;  // strictly increasing in both coordinates
  double score = 0.0;

  // target index -> source index, 0 when the target token is gapped.
  std::vector<int> target_to_source(int target_length) const {
    std::vector<int> out(static_cast<std::size_t>(target_length) + 1, 0);
    for (const auto& p : pairs) out[static_cast<std::size_t>(p.target)] = p.source;
    return out;
  }
};

using TokenNormalizer = std::function<std::string(std::string_view)>;

struct AlignOptions {
  AlignmentScores scores;
  // Applied to both sides before comparing; exact equality when empty.
  TokenNormalizer normalize;
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kTieEps = 1e-9;

inline bool ge(double a, double b) { return a >= b - kTieEps; }

}  // namespace detail

// Optimal global alignment. Ties prefer, scanning back from the end, an
// aligned pair over a source gap over a target gap, which places repeated
// words at their rightmost occurrence.
inline Alignment gotoh_align(std::span<const std::string> source, std::span<const std::string> target,
                             const AlignOptions& options = {}) {
  using detail::ge;
  using detail::kNegInf;
  const auto& sc = options.scores;
  const int n = static_cast<int>(source.size());
  const int k = static_cast<int>(target.size());
  const std::size_t w = static_cast<std::size_t>(k) + 1;

  std::vector<std::string> src_norm, tgt_norm;
  if (options.normalize) {
    for (const auto& s : source) src_norm.push_back(options.normalize(s));
    for (const auto& t : target) tgt_norm.push_back(options.normalize(t));
    source = src_norm;
    target = tgt_norm;
  }

  // m: ends with an aligned pair; x: ends with a gapped source token;
  // y: ends with a gapped target token.
  std::vector<double> m((n + 1) * w, kNegInf), x((n + 1) * w, kNegInf), y((n + 1) * w, kNegInf);
  auto at = [w](int i, int j) { return static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j); };
  const double open = sc.gap_open, ext = -sc.gap_slope;
  m[at(0, 0)] = 0.0;
  for (int i = 1; i <= n; ++i) x[at(i, 0)] = sc.gap(i);
  for (int j = 1; j <= k; ++j) y[at(0, j)] = sc.gap(j);
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= k; ++j) {
      const double s = source[i - 1] == target[j - 1] ? sc.match : sc.mismatch;
      m[at(i, j)] = s + std::max({m[at(i - 1, j - 1)], x[at(i - 1, j - 1)], y[at(i - 1, j - 1)]});
      x[at(i, j)] = std::max({m[at(i - 1, j)] + open, x[at(i - 1, j)] + ext, y[at(i - 1, j)] + open});
      y[at(i, j)] = std::max({m[at(i, j - 1)] + open, y[at(i, j - 1)] + ext, x[at(i, j - 1)] + open});
    }
  }

  Alignment result;
  enum State { M, X, Y };
  auto best_of = [&](double a, double b, double c) -> State {
    if (ge(a, b) && ge(a, c)) return M;
    if (ge(b, c)) return X;
    return Y;
  };
  int i = n, j = k;
  State st = best_of(m[at(i, j)], x[at(i, j)], y[at(i, j)]);
  result.score = std::max({m[at(i, j)], x[at(i, j)], y[at(i, j)]});
  while (i > 0 || j > 0) {
    if (st == M) {
      result.pairs.push_back({i, j, source[i - 1] == target[j - 1]});
      st = best_of(m[at(i - 1, j - 1)], x[at(i - 1, j - 1)], y[at(i - 1, j - 1)]);
      --i;
      --j;
    } else if (st == X) {
      const double cur = x[at(i, j)];
      if (j == 0) {
        st = X;
      } else if (ge(m[at(i - 1, j)] + open, cur)) {
        st = M;
      } else if (ge(x[at(i - 1, j)] + ext, cur)) {
        st = X;
      } else {
        st = Y;
      }
      --i;
      if (i == 0 && j > 0) st = Y;
    } else {
      const double cur = y[at(i, j)];
      if (i == 0) {
        st = Y;
      } else if (ge(m[at(i, j - 1)] + open, cur)) {
        st = M;
      } else if (ge(x[at(i, j - 1)] + open, cur)) {
        st = X;
      } else {
        st = Y;
      }
      --j;
      if (j == 0 && i > 0) st = X;
    }
  }
  std::reverse(result.pairs.begin(), result.pairs.end());
  return result;
}

struct ProjectionResult {
  CorefAnnotation annotation;
  int dropped = 0;
};

// Maps target-local spans through the alignment. A span survives when both
// endpoints are aligned (equal or not); the result is densely relabeled.
inline ProjectionResult project_mentions(const Alignment& alignment, const CorefAnnotation& local, int target_length) {
  ProjectionResult out;
  const auto map = alignment.target_to_source(target_length);
  std::vector<Span> spans;
  std::set<std::tuple<int, int, int>> seen;
  for (const auto& s : local.spans()) {
    if (s.start < 1 || s.end > target_length || s.start > s.end) {
      ++out.dropped;
      continue;
    }
    const int a = map[static_cast<std::size_t>(s.start)];
    const int b = map[static_cast<std::size_t>(s.end)];
    if (a == 0 || b == 0 || a > b) {
      ++out.dropped;
      continue;
    }
    if (seen.insert({a, b, s.cluster}).second) spans.push_back({a, b, s.cluster});
  }
  out.annotation = relabel(CorefAnnotation(std::move(spans)));
  return out;
}

// Aligns sentence i of the target with sentence i of the document and
// concatenates the results; surplus sentences are gapped entirely. Falls
// back to one global alignment (flagged in diagnostics) when the target's
// sentence markers are malformed.
inline Alignment sentence_constrained_align(const Document& doc, const PartialParse& parsed,
                                            const AlignOptions& options = {}, Diagnostics* diagnostics = nullptr) {
  if (!parsed.markers_well_formed) {
    if (diagnostics) diagnostics->add(Defect::SentenceMarkerError, 0);
    return gotoh_align(doc.tokens, parsed.target, options);
  }
  const int nsrc = static_cast<int>(doc.sentences.size());
  const int ntgt = parsed.sentences;
  std::vector<std::vector<int>> target_by_sentence(static_cast<std::size_t>(std::max(ntgt, 0)));
  for (std::size_t t = 0; t < parsed.target.size(); ++t) {
    const int s = parsed.target_sentence[t];
    if (s < 0 || s >= ntgt) {
      if (diagnostics) diagnostics->add(Defect::SentenceMarkerError, t);
      return gotoh_align(doc.tokens, parsed.target, options);
    }
    target_by_sentence[static_cast<std::size_t>(s)].push_back(static_cast<int>(t) + 1);
  }

  Alignment out;
  for (int s = 0; s < std::max(nsrc, ntgt); ++s) {
    const bool has_src = s < nsrc;
    const bool has_tgt = s < ntgt;
    const int tgt_len = has_tgt ? static_cast<int>(target_by_sentence[s].size()) : 0;
    if (!has_src) {
      out.score += options.scores.gap(tgt_len);
      continue;
    }
    const TokenRange r = doc.sentences[static_cast<std::size_t>(s)];
    if (!has_tgt) {
      out.score += options.scores.gap(r.size());
      continue;
    }
    std::span<const std::string> src(doc.tokens.data() + (r.first - 1), static_cast<std::size_t>(r.size()));
    std::vector<std::string> tgt;
    for (int t : target_by_sentence[s]) tgt.push_back(parsed.target[static_cast<std::size_t>(t - 1)]);
    Alignment a = gotoh_align(src, tgt, options);
    out.score += a.score;
    for (const auto& p : a.pairs) {
      out.pairs.push_back({p.source + r.first - 1, target_by_sentence[s][static_cast<std::size_t>(p.target - 1)], p.equal});
    }
  }
  return out;
}

struct AlignResult {
  CorefAnnotation annotation;
  Alignment alignment;
  int dropped = 0;
  Diagnostics diagnostics;
};

// Parses a partial linearization and projects its mentions onto doc. The
// sentence-constrained alignment is used when the scheme has markers.
inline AlignResult align_partial(const Document& doc, std::span<const std::string> seq, const Scheme& scheme,
                                 const AlignOptions& options = {}, const SymbolTable& symbols = {},
                                 DelinearizeOptions parse_options = {}) {
  auto parsed = parse_partial(seq, scheme, symbols, parse_options);
  AlignResult out;
  out.diagnostics = parsed.diagnostics;
  out.alignment = scheme.sentence_markers ? sentence_constrained_align(doc, parsed, options, &out.diagnostics)
                                          : gotoh_align(doc.tokens, parsed.target, options);
  auto projected = project_mentions(out.alignment, parsed.local, static_cast<int>(parsed.target.size()));
  out.annotation = std::move(projected.annotation);
  out.dropped = projected.dropped;
  return out;
}

// Debug dump, one "source<TAB>target<TAB>=|!" line per aligned pair.
inline void write_alignment(std::ostream& os, const Alignment& a) {
  for (const auto& p : a.pairs) os << p.source << '\t' << p.target << '\t' << (p.equal ? '=' : '!') << '\n';
}

}  // namespace seqcoref
