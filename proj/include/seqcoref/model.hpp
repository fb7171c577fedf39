// Document, span and annotation types shared by every stage of the pipeline.
//
// Token indices are 1-based and inclusive everywhere inside the library.
// External formats (CoNLL word indices, 0-based record offsets) convert at
// the boundary in corpus.hpp.

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace seqcoref {

// Inclusive 1-based token range [first, last].
struct TokenRange {
  int first = 1;
  int last = 0;

  int size() const { return last >= first ? last - first + 1 : 0; }
  bool contains(int i) const { return i >= first && i <= last; }
  bool contains(TokenRange r) const { return r.first >= first && r.last <= last; }

  friend bool operator==(const TokenRange&, const TokenRange&) = default;
};

struct Document {
  std::string doc_key;
  std::vector<std::string> tokens;
  std::vector<TokenRange> sentences;
  std::optional<std::vector<std::string>> speakers;

  int size() const { return static_cast<int>(tokens.size()); }

  // 1-based access.
  const std::string& token(int i) const { return tokens.at(static_cast<std::size_t>(i - 1)); }

  // Index (0-based) of the sentence containing token i, or -1.
  int sentence_of(int i) const {
    auto it = std::upper_bound(sentences.begin(), sentences.end(), i,
                               [](int v, const TokenRange& r) { return v < r.first; });
    if (it == sentences.begin()) return -1;
    --it;
    return it->contains(i) ? static_cast<int>(it - sentences.begin()) : -1;
  }

  // Builds a document from per-sentence token lists.
  static Document from_sentences(std::string key, const std::vector<std::vector<std::string>>& sents) {
    Document doc;
    doc.doc_key = std::move(key);
    for (const auto& s : sents) {
      if (s.empty()) continue;
      TokenRange r{doc.size() + 1, doc.size() + static_cast<int>(s.size())};
      doc.tokens.insert(doc.tokens.end(), s.begin(), s.end());
      doc.sentences.push_back(r);
    }
    return doc;
  }

  // Single-sentence document, handy in tests and examples.
  static Document from_tokens(std::string key, std::vector<std::string> toks) {
    Document doc;
    doc.doc_key = std::move(key);
    doc.tokens = std::move(toks);
    if (!doc.tokens.empty()) doc.sentences.push_back({1, doc.size()});
    return doc;
  }

  friend bool operator==(const Document&, const Document&) = default;
};

struct Span {
  int start = 1;
  int end = 1;
  int cluster = 1;

  int length() const { return end - start + 1; }
  TokenRange range() const { return {start, end}; }

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

// Canonical iteration order: non-decreasing length, then start, then label.
inline bool canonical_less(const Span& a, const Span& b) {
  return std::make_tuple(a.length(), a.start, a.cluster) < std::make_tuple(b.length(), b.start, b.cluster);
}

// Order in which mentions are closed by a linearization: by end, inner
// (later start) first, identical boundaries by ascending label.
inline bool close_order_less(const Span& a, const Span& b) {
  return std::make_tuple(a.end, -a.start, a.cluster) < std::make_tuple(b.end, -b.start, b.cluster);
}

// Order in which mentions are opened: by start, outer (later end) first,
// identical boundaries by ascending label.
inline bool open_order_less(const Span& a, const Span& b) {
  return std::make_tuple(a.start, -a.end, a.cluster) < std::make_tuple(b.start, -b.end, b.cluster);
}

// True when a and b overlap without one containing the other.
inline bool spans_cross(const Span& a, const Span& b) {
  return (a.start < b.start && b.start <= a.end && a.end < b.end) ||
         (b.start < a.start && a.start <= b.end && b.end < a.end);
}

class CorefAnnotation {
 public:
  CorefAnnotation() = default;

  // Takes spans as given; labels are not renumbered. num_clusters is the
  // largest label present.
  explicit CorefAnnotation(std::vector<Span> spans) : spans_(std::move(spans)) {
    std::sort(spans_.begin(), spans_.end(), canonical_less);
    for (const auto& s : spans_) num_clusters_ = std::max(num_clusters_, s.cluster);
  }

  // Builds from clusters of (start, end) pairs; cluster k gets label k+1.
  static CorefAnnotation from_clusters(const std::vector<std::vector<std::pair<int, int>>>& clusters) {
    std::vector<Span> spans;
    int label = 0;
    for (const auto& c : clusters) {
      if (c.empty()) continue;
      ++label;
      for (auto [s, e] : c) spans.push_back({s, e, label});
    }
    return CorefAnnotation(std::move(spans));
  }

  const std::vector<Span>& spans() const { return spans_; }
  int num_clusters() const { return num_clusters_; }
  bool empty() const { return spans_.empty(); }
  std::size_t size() const { return spans_.size(); }

  // Spans grouped by label, each cluster sorted by (start, end).
  std::vector<std::vector<std::pair<int, int>>> clusters() const {
    std::map<int, std::vector<std::pair<int, int>>> by_label;
    for (const auto& s : spans_) by_label[s.cluster].emplace_back(s.start, s.end);
    std::vector<std::vector<std::pair<int, int>>> out;
    for (auto& [label, c] : by_label) {
      std::sort(c.begin(), c.end());
      out.push_back(std::move(c));
    }
    return out;
  }

  friend bool operator==(const CorefAnnotation&, const CorefAnnotation&) = default;

 private:
  std::vector<Span> spans_;
  int num_clusters_ = 0;
};

enum class LabelOrder { ByClose, ByOpen };

// Renumbers labels densely 1..C by first appearance in the given order.
inline CorefAnnotation relabel(const CorefAnnotation& ann, LabelOrder order = LabelOrder::ByClose) {
  std::vector<Span> spans = ann.spans();
  std::sort(spans.begin(), spans.end(), order == LabelOrder::ByClose ? close_order_less : open_order_less);
  std::map<int, int> mapping;
  for (auto& s : spans) {
    auto [it, inserted] = mapping.emplace(s.cluster, static_cast<int>(mapping.size()) + 1);
    s.cluster = it->second;
  }
  return CorefAnnotation(std::move(spans));
}

// Clustering as a sorted set of sorted mention lists; label-free.
inline std::vector<std::vector<std::pair<int, int>>> partition_of(const CorefAnnotation& ann) {
  auto cs = ann.clusters();
  std::sort(cs.begin(), cs.end());
  return cs;
}

// Equality up to a permutation of cluster labels.
inline bool same_clustering(const CorefAnnotation& a, const CorefAnnotation& b) {
  return partition_of(a) == partition_of(b);
}

inline std::string to_string(const Span& s) {
  std::ostringstream os;
  os << "(" << s.start << "," << s.end << "," << s.cluster << ")";
  return os.str();
}

inline std::ostream& operator<<(std::ostream& os, const Span& s) { return os << to_string(s); }

inline std::ostream& operator<<(std::ostream& os, const CorefAnnotation& ann) {
  os << "{";
  for (std::size_t i = 0; i < ann.spans().size(); ++i) os << (i ? " " : "") << ann.spans()[i];
  return os << "}";
}

inline std::string to_string(const CorefAnnotation& ann) {
  std::string out = "{";
  for (std::size_t i = 0; i < ann.spans().size(); ++i) {
    if (i) out += ",";
    out += to_string(ann.spans()[i]);
  }
  return out + "}";
}

struct RestrictResult {
  CorefAnnotation annotation;
  int dropped = 0;
};

// Keeps spans inside `range`, shifted to range-local positions and densely
// relabeled. Every other span is dropped and counted.
inline RestrictResult restrict_annotation(const CorefAnnotation& ann, TokenRange range) {
  RestrictResult result;
  std::vector<Span> kept;
  const int offset = range.first - 1;
  for (const auto& s : ann.spans()) {
    if (range.contains(s.range())) {
      kept.push_back({s.start - offset, s.end - offset, s.cluster});
    } else {
      ++result.dropped;
    }
  }
  result.annotation = relabel(CorefAnnotation(std::move(kept)));
  return result;
}

enum class ViolationKind {
  EmptyDocument,
  BadSentenceBounds,
  SpanOutOfRange,
  InvertedSpan,
  BadClusterLabel,
  MissingClusterLabel,
  DuplicateSpan,
  CrossingSpans,
  SharedBoundary,  // warning only
};

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::EmptyDocument: return "empty-document";
    case ViolationKind::BadSentenceBounds: return "bad-sentence-bounds";
    case ViolationKind::SpanOutOfRange: return "span-out-of-range";
    case ViolationKind::InvertedSpan: return "inverted-span";
    case ViolationKind::BadClusterLabel: return "bad-cluster-label";
    case ViolationKind::MissingClusterLabel: return "missing-cluster-label";
    case ViolationKind::DuplicateSpan: return "duplicate-span";
    case ViolationKind::CrossingSpans: return "crossing-spans";
    case ViolationKind::SharedBoundary: return "shared-boundary";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string detail;
  bool warning = false;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const {
    return std::none_of(violations.begin(), violations.end(), [](const Violation& v) { return !v.warning; });
  }
  bool has(ViolationKind k) const {
    return std::any_of(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; });
  }
};

// Checks every annotation invariant against the document and reports all
// violations. Identical boundaries in different clusters are a warning.
// Crossing (non-nested, overlapping) spans are rejected because no bracket
// linearization can represent them.
inline ValidationReport validate(const CorefAnnotation& ann, const Document& doc) {
  ValidationReport report;
  auto add = [&](ViolationKind k, std::string detail, bool warning = false) {
    report.violations.push_back({k, std::move(detail), warning});
  };
  const int n = doc.size();
  if (n == 0) add(ViolationKind::EmptyDocument, "document has no tokens");

  int expect = 1;
  for (const auto& r : doc.sentences) {
    if (r.first != expect || r.last < r.first) {
      add(ViolationKind::BadSentenceBounds, "sentence [" + std::to_string(r.first) + "," + std::to_string(r.last) + "]");
      break;
    }
    expect = r.last + 1;
  }
  if (n > 0 && expect != n + 1 && report.ok()) add(ViolationKind::BadSentenceBounds, "sentences do not cover the document");

  std::set<int> labels;
  std::set<std::tuple<int, int, int>> seen;
  std::map<std::pair<int, int>, int> boundary_count;
  const auto& spans = ann.spans();
  for (const auto& s : spans) {
    if (s.start > s.end) add(ViolationKind::InvertedSpan, to_string(s));
    else if (s.start < 1 || s.end > n) add(ViolationKind::SpanOutOfRange, to_string(s));
    if (s.cluster < 1 || s.cluster > ann.num_clusters()) add(ViolationKind::BadClusterLabel, to_string(s));
    labels.insert(s.cluster);
    if (!seen.insert({s.start, s.end, s.cluster}).second) add(ViolationKind::DuplicateSpan, to_string(s));
    if (++boundary_count[{s.start, s.end}] == 2) add(ViolationKind::SharedBoundary, to_string(s), true);
  }
  for (int l = 1; l <= ann.num_clusters(); ++l) {
    if (!labels.count(l)) add(ViolationKind::MissingClusterLabel, "label " + std::to_string(l));
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      if (spans_cross(spans[i], spans[j])) {
        add(ViolationKind::CrossingSpans, to_string(spans[i]) + " x " + to_string(spans[j]));
      }
    }
  }
  return report;
}

}  // namespace seqcoref
