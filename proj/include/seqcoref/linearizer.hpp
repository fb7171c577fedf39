// Codecs between coreference annotations and target sequences.
//
// linearize() produces the decoder input z (starting with <s>, without the
// terminal </s>) and the action sequence y (ending with </s>), so that
// |y| == |z| and, under token action, y[t] == z[t + 1].
//
// delinearize() is the inverse. It accepts either z or y (copy and <new>
// actions are resolved against the document) and tolerates unconstrained
// model output by repairing defects, which are recorded in the returned
// diagnostics.

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "seqcoref/diagnostics.hpp"
#include "seqcoref/model.hpp"
#include "seqcoref/scheme.hpp"
#include "seqcoref/symbols.hpp"

namespace seqcoref {

struct LinearizedPair {
  std::string doc_key;
  Scheme scheme;
  std::vector<std::string> z;
  std::vector<std::string> y;

  // z followed by the terminal </s>.
  std::vector<std::string> z_terminated(const SymbolTable& symbols = {}) const {
    auto out = z;
    out.push_back(symbols.seq_end);
    return out;
  }
};

class LinearizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

namespace detail {

enum class ZKind { Special, Copy, Integer, ClusterEnd, Word };

inline std::vector<std::string> surface(const Document& doc, int start, int end) {
  return {doc.tokens.begin() + (start - 1), doc.tokens.begin() + end};
}

}  // namespace detail

// Labels of the annotation as they will appear in the linearization of the
// given scheme.
inline CorefAnnotation canonical_labels(const CorefAnnotation& ann, const Scheme& scheme) {
  return relabel(ann, scheme.integer_before() ? LabelOrder::ByOpen : LabelOrder::ByClose);
}

// Throws LinearizeError when (doc, ann) cannot be encoded under scheme.
inline void check_representable(const Document& doc, const CorefAnnotation& ann, const Scheme& scheme,
                                const SymbolTable& symbols = {}) {
  check_scheme(scheme);
  require_no_collisions(symbols, doc);
  auto report = validate(ann, doc);
  if (!report.ok()) {
    std::string msg = "invalid annotation for " + doc.doc_key + ":";
    for (const auto& v : report.violations) {
      if (!v.warning) msg += std::string(" ") + to_string(v.kind) + " " + v.detail;
    }
    throw LinearizeError(msg);
  }
  if (scheme.integer_free() && ann.num_clusters() > symbols.max_clusters) {
    throw LinearizeError("annotation has " + std::to_string(ann.num_clusters()) +
                         " clusters, more than the </m_l> family size " + std::to_string(symbols.max_clusters));
  }
  if (scheme.is_partial() && scheme.sentence_markers) {
    for (const auto& s : ann.spans()) {
      if (doc.sentence_of(s.start) != doc.sentence_of(s.end)) {
        throw LinearizeError("mention " + to_string(s) + " crosses a sentence boundary");
      }
    }
  }
}

inline LinearizedPair linearize(const Document& doc, const CorefAnnotation& annotation, const Scheme& scheme,
                                const SymbolTable& symbols = {}) {
  check_representable(doc, annotation, scheme, symbols);
  const CorefAnnotation ann = canonical_labels(annotation, scheme);
  const int n = doc.size();

  std::vector<std::vector<Span>> opens(n + 2), closes(n + 2);
  for (const auto& s : ann.spans()) {
    opens[s.start].push_back(s);
    closes[s.end].push_back(s);
  }
  // Outer first on open, inner first on close. Identical boundaries: the
  // lower label is the inner mention, except under integer-before where
  // labels are read at open time and the lower label is the outer mention.
  const bool before = scheme.integer_before();
  for (auto& v : opens) {
    std::sort(v.begin(), v.end(), [before](const Span& a, const Span& b) {
      if (a.end != b.end) return a.end > b.end;
      return before ? a.cluster < b.cluster : a.cluster > b.cluster;
    });
  }
  for (auto& v : closes) {
    std::sort(v.begin(), v.end(), [before](const Span& a, const Span& b) {
      if (a.start != b.start) return a.start > b.start;
      return before ? a.cluster > b.cluster : a.cluster < b.cluster;
    });
  }

  // First mention (in close order) of each cluster, for antecedent strings.
  std::map<int, Span> first_mention;
  {
    auto ordered = ann.spans();
    std::sort(ordered.begin(), ordered.end(), close_order_less);
    for (const auto& s : ordered) first_mention.emplace(s.cluster, s);
  }

  std::vector<std::string> z{symbols.seq_start};
  std::vector<detail::ZKind> kind{detail::ZKind::Special};
  std::vector<int> label_of(1, 0);
  auto push = [&](const std::string& tok, detail::ZKind k, int label = 0) {
    z.push_back(tok);
    kind.push_back(k);
    label_of.push_back(label);
  };
  const bool markers = scheme.is_partial() && scheme.sentence_markers;
  std::vector<char> sentence_first(n + 2, 0), sentence_last(n + 2, 0);
  for (const auto& r : doc.sentences) {
    sentence_first[r.first] = 1;
    sentence_last[r.last] = 1;
  }

  int depth = 0;
  for (int i = 1; i <= n; ++i) {
    if (markers && sentence_first[i]) push(symbols.sentence_start, detail::ZKind::Special);
    for (const auto& s : opens[i]) {
      push(symbols.mention_start, detail::ZKind::Special);
      if (before) {
        for (const auto& d : symbols.spell_integer(s.cluster)) push(d, detail::ZKind::Integer);
        push(symbols.separator, detail::ZKind::Special);
      }
      ++depth;
    }
    if (scheme.is_full() || depth > 0) push(doc.token(i), detail::ZKind::Copy);
    for (const auto& s : closes[i]) {
      switch (scheme.representation) {
        case Representation::FullToken:
        case Representation::FullCopy:
        case Representation::PartialToken:
          push(symbols.separator, detail::ZKind::Special);
          for (const auto& d : symbols.spell_integer(s.cluster)) push(d, detail::ZKind::Integer);
          push(symbols.mention_end, detail::ZKind::Special);
          break;
        case Representation::FullIntegerFree:
          push(symbols.cluster_end(s.cluster), detail::ZKind::ClusterEnd, s.cluster);
          break;
        case Representation::FullIntegerBefore:
          push(symbols.mention_end, detail::ZKind::Special);
          break;
        case Representation::FullAntecedentString: {
          push(symbols.separator, detail::ZKind::Special);
          const Span& a = first_mention.at(s.cluster);
          for (const auto& w : detail::surface(doc, a.start, a.end)) push(w, detail::ZKind::Word);
          push(symbols.mention_end, detail::ZKind::Special);
          break;
        }
      }
      --depth;
    }
    if (markers && sentence_last[i]) push(symbols.sentence_end, detail::ZKind::Special);
  }

  LinearizedPair pair{doc.doc_key, scheme, z, {}};
  pair.y.reserve(z.size());
  std::set<int> seen_labels;
  for (std::size_t t = 1; t < z.size(); ++t) {
    if (scheme.uses_copy() && kind[t] == detail::ZKind::Copy) {
      pair.y.push_back(symbols.copy);
    } else if (scheme.integer_free() && kind[t] == detail::ZKind::ClusterEnd &&
               seen_labels.insert(label_of[t]).second) {
      pair.y.push_back(symbols.new_cluster);
    } else {
      pair.y.push_back(z[t]);
    }
  }
  pair.y.push_back(symbols.seq_end);
  return pair;
}

// Linearization using antecedent surface strings as cluster identity.
inline LinearizedPair to_antecedent_string(const Document& doc, const CorefAnnotation& ann,
                                           const SymbolTable& symbols = {}) {
  return linearize(doc, ann, Scheme{Representation::FullAntecedentString, false}, symbols);
}

struct DelinearizeOptions {
  // Parse fails once more than this many defects had to be repaired.
  int max_repairs = 64;
};

struct DelinearizeResult {
  CorefAnnotation annotation;
  Diagnostics diagnostics;
};

// Output of parsing a partial linearization: the words with specials
// removed, the sentence each word was emitted in, and mention spans in
// target-local (1-based) coordinates.
struct PartialParse {
  std::vector<std::string> target;
  std::vector<int> target_sentence;  // 0-based, -1 outside any sentence
  CorefAnnotation local;
  Diagnostics diagnostics;
  int sentences = 0;
  bool markers_well_formed = true;
};

namespace detail {

class SequenceParser {
 public:
  SequenceParser(const Document* doc, const Scheme& scheme, const SymbolTable& symbols, DelinearizeOptions options)
      : doc_(doc), scheme_(scheme), sym_(symbols), options_(options) {}

  void run(std::span<const std::string> seq) {
    bool ended = false;
    for (pos_ = 0; pos_ < seq.size(); ++pos_) {
      const std::string& tok = seq[pos_];
      if (tok == sym_.seq_end) {
        ended = true;
        break;
      }
      step(tok);
      if (diag_.repairs() > options_.max_repairs) throw ParseError("repair budget exceeded", pos_);
    }
    if (!ended) diag_.add(Defect::MissingEnd, seq.size());
    for (std::size_t i = 0; i < stack_.size(); ++i) diag_.add(Defect::UnclosedMention, pos_);
    stack_.clear();
    identity_ = false;
    if (in_sentence_) {
      diag_.add(Defect::SentenceMarkerError, pos_);
      markers_ok_ = false;
    }
    if (doc_ && partial() == false && cursor_ <= doc_->size()) diag_.add(Defect::TrailingSource, pos_);
    if (diag_.repairs() > options_.max_repairs) throw ParseError("repair budget exceeded", pos_);
  }

  CorefAnnotation annotation() const { return canonical_labels(CorefAnnotation(spans_), scheme_); }
  Diagnostics& diagnostics() { return diag_; }
  std::vector<std::string>& target() { return target_; }
  std::vector<int>& target_sentence() { return target_sentence_; }
  int sentences() const { return sentence_count_; }
  bool markers_ok() const { return markers_ok_; }

 private:
  struct Open {
    int start = 1;
    bool awaiting_label = false;  // integer-before: between <m> and |
    std::string digits;
    int label = 0;
    bool invalid = false;
  };

  bool partial() const { return scheme_.is_partial(); }
  // Next word position: source cursor for full schemes, target length + 1
  // for partial.
  int next_position() const { return partial() ? static_cast<int>(target_.size()) + 1 : cursor_; }

  void step(const std::string& tok) {
    if (tok == sym_.seq_start) {
      if (pos_ != 0) diag_.add(Defect::UnmatchedToken, pos_);
      return;
    }
    if (tok == sym_.sentence_start || tok == sym_.sentence_end) return sentence_marker(tok);
    if (tok == sym_.mention_start) return open();
    if (tok == sym_.separator) return separator();
    if (tok == sym_.mention_end) return mention_end();
    if (tok == sym_.new_cluster) return cluster_end(clusters_ + 1, true);
    if (auto l = sym_.cluster_end_label(tok)) return cluster_end(*l, false);
    if (tok == sym_.copy) {
      if (partial() || !doc_ || cursor_ > doc_->size()) {
        diag_.add(Defect::UnmatchedToken, pos_);
        return;
      }
      return word(doc_->token(cursor_));
    }
    if (identity_ && scheme_.integer_after() && sym_.is_integer_token(tok)) {
      identity_digits_ += tok;
      return;
    }
    if (!stack_.empty() && stack_.back().awaiting_label && sym_.is_integer_token(tok)) {
      stack_.back().digits += tok;
      return;
    }
    word(tok);
  }

  void open() {
    interrupt_identity();
    stack_.push_back(Open{next_position(), scheme_.integer_before(), {}, 0, false});
  }

  // Interruption of "| l </m>" or "<m> l |" by an unrelated token.
  void interrupt_identity() {
    if (identity_) {
      diag_.add(Defect::AbandonedIdentity, pos_);
      identity_ = false;
      stack_.pop_back();
    }
    if (!stack_.empty() && stack_.back().awaiting_label) {
      diag_.add(Defect::MissingIdentity, pos_);
      stack_.back().awaiting_label = false;
      stack_.back().invalid = true;
    }
  }

  void separator() {
    if (scheme_.integer_before()) {
      if (stack_.empty() || !stack_.back().awaiting_label) {
        diag_.add(Defect::StraySeparator, pos_);
        return;
      }
      Open& top = stack_.back();
      top.awaiting_label = false;
      auto value = SymbolTable::parse_integer(top.digits);
      if (!value) {
        diag_.add(Defect::MissingIdentity, pos_);
        top.invalid = true;
      } else {
        top.label = admit_label(*value);
      }
      return;
    }
    if (scheme_.integer_free() || identity_ || stack_.empty()) {
      diag_.add(Defect::StraySeparator, pos_);
      return;
    }
    identity_ = true;
    identity_end_ = next_position() - 1;
    identity_digits_.clear();
    identity_words_.clear();
  }

  void mention_end() {
    if (stack_.empty()) {
      diag_.add(Defect::StrayClose, pos_);
      return;
    }
    Open top = stack_.back();
    stack_.pop_back();
    if (scheme_.integer_before()) {
      if (top.awaiting_label || top.invalid) {
        if (top.awaiting_label) diag_.add(Defect::MissingIdentity, pos_);
        return;
      }
      emit(top.start, next_position() - 1, top.label);
      return;
    }
    if (!identity_) {
      diag_.add(Defect::MissingIdentity, pos_);
      return;
    }
    identity_ = false;
    if (scheme_.antecedent_string()) {
      if (identity_words_.empty()) {
        diag_.add(Defect::MissingIdentity, pos_);
        return;
      }
      emit_antecedent(top.start, identity_end_);
      return;
    }
    auto value = SymbolTable::parse_integer(identity_digits_);
    if (!value) {
      diag_.add(Defect::MissingIdentity, pos_);
      return;
    }
    if (top.start > identity_end_) {
      diag_.add(Defect::EmptyMention, pos_);
      return;
    }
    emit(top.start, identity_end_, admit_label(*value));
  }

  void cluster_end(int label, bool is_new) {
    if (!scheme_.integer_free()) {
      diag_.add(Defect::StrayClose, pos_);
      return;
    }
    if (stack_.empty()) {
      diag_.add(Defect::StrayClose, pos_);
      return;
    }
    Open top = stack_.back();
    stack_.pop_back();
    const int end = next_position() - 1;
    if (top.start > end) {
      diag_.add(Defect::EmptyMention, pos_);
      return;
    }
    emit(top.start, end, is_new ? admit_label(clusters_ + 1) : admit_label(label));
  }

  void word(const std::string& tok) {
    if (identity_) {
      if (scheme_.antecedent_string()) {
        identity_words_.push_back(tok);
        return;
      }
      if (partial()) {
        diag_.add(Defect::StrayIdentityToken, pos_);
        return;
      }
    }
    interrupt_identity();
    if (partial()) {
      target_.push_back(tok);
      target_sentence_.push_back(in_sentence_ ? sentence_count_ - 1 : -1);
      if (scheme_.sentence_markers && !in_sentence_) markers_ok_ = false;
      return;
    }
    if (!doc_) return;
    if (cursor_ <= doc_->size() && doc_->token(cursor_) == tok) {
      ++cursor_;
      return;
    }
    for (int k = cursor_ + 1; k <= doc_->size(); ++k) {
      if (doc_->token(k) == tok) {
        diag_.add(Defect::SkippedSource, pos_);
        // Mentions still empty start at the resynchronised word.
        for (auto& f : stack_) {
          if (f.start == cursor_) f.start = k;
        }
        cursor_ = k + 1;
        return;
      }
    }
    diag_.add(Defect::UnmatchedToken, pos_);
  }

  void sentence_marker(const std::string& tok) {
    if (!partial()) {
      diag_.add(Defect::UnmatchedToken, pos_);
      return;
    }
    if (tok == sym_.sentence_start) {
      if (in_sentence_) {
        diag_.add(Defect::SentenceMarkerError, pos_);
        markers_ok_ = false;
        drop_open_mentions();
      }
      in_sentence_ = true;
      ++sentence_count_;
      return;
    }
    if (!in_sentence_) {
      diag_.add(Defect::SentenceMarkerError, pos_);
      markers_ok_ = false;
      return;
    }
    drop_open_mentions();
    in_sentence_ = false;
  }

  void drop_open_mentions() {
    if (stack_.empty()) return;
    diag_.add(Defect::SentenceCloseWithOpen, pos_);
    stack_.clear();
    identity_ = false;
  }

  // Maps a predicted label to 1..C+1; anything else opens a new cluster.
  int admit_label(int value) {
    if (value < 1 || value > clusters_ + 1) {
      diag_.add(Defect::ClampedLabel, pos_);
      value = clusters_ + 1;
    }
    if (value == clusters_ + 1) ++clusters_;
    return value;
  }

  void emit(int start, int end, int label) {
    if (start > end) {
      diag_.add(Defect::EmptyMention, pos_);
      return;
    }
    Span s{start, end, label};
    if (!emitted_.insert({start, end, label}).second) {
      diag_.add(Defect::DuplicateSpan, pos_);
      return;
    }
    spans_.push_back(s);
  }

  // Links to the earliest closed mention with exactly this surface form.
  void emit_antecedent(int start, int end) {
    if (start > end) {
      diag_.add(Defect::EmptyMention, pos_);
      return;
    }
    const auto own = surface(*doc_, start, end);
    int label = 0;
    std::set<int> matching_clusters;
    for (const auto& s : spans_) {
      if (surface(*doc_, s.start, s.end) == identity_words_) {
        if (label == 0) label = s.cluster;
        matching_clusters.insert(s.cluster);
      }
    }
    if (matching_clusters.size() > 1) diag_.add(Defect::AmbiguousAntecedent, pos_);
    if (label == 0) {
      if (identity_words_ != own) diag_.add(Defect::UnresolvedAntecedent, pos_);
      label = ++clusters_;
    }
    emit(start, end, label);
  }

  const Document* doc_;
  Scheme scheme_;
  const SymbolTable& sym_;
  DelinearizeOptions options_;

  std::size_t pos_ = 0;
  int cursor_ = 1;
  int clusters_ = 0;
  std::vector<Open> stack_;
  bool identity_ = false;
  int identity_end_ = 0;
  std::string identity_digits_;
  std::vector<std::string> identity_words_;
  std::vector<Span> spans_;
  std::set<std::tuple<int, int, int>> emitted_;
  Diagnostics diag_;

  std::vector<std::string> target_;
  std::vector<int> target_sentence_;
  bool in_sentence_ = false;
  int sentence_count_ = 0;
  bool markers_ok_ = true;
};

}  // namespace detail

inline PartialParse parse_partial(std::span<const std::string> seq, const Scheme& scheme,
                                  const SymbolTable& symbols = {}, DelinearizeOptions options = {}) {
  if (!scheme.is_partial()) throw std::invalid_argument("parse_partial requires a partial scheme");
  detail::SequenceParser parser(nullptr, scheme, symbols, options);
  parser.run(seq);
  PartialParse out;
  out.target = std::move(parser.target());
  out.target_sentence = std::move(parser.target_sentence());
  out.local = parser.annotation();
  out.diagnostics = std::move(parser.diagnostics());
  out.sentences = parser.sentences();
  out.markers_well_formed = parser.markers_ok();
  return out;
}

// Full schemes: spans in document coordinates. Partial scheme: spans in
// target-local coordinates (see aligner.hpp for projection).
inline DelinearizeResult delinearize(std::span<const std::string> seq, const Document& doc, const Scheme& scheme,
                                     const SymbolTable& symbols = {}, DelinearizeOptions options = {}) {
  if (scheme.is_partial()) {
    auto parsed = parse_partial(seq, scheme, symbols, options);
    return {std::move(parsed.local), std::move(parsed.diagnostics)};
  }
  detail::SequenceParser parser(&doc, scheme, symbols, options);
  parser.run(seq);
  return {parser.annotation(), std::move(parser.diagnostics())};
}

inline DelinearizeResult from_antecedent_string(std::span<const std::string> seq, const Document& doc,
                                                const SymbolTable& symbols = {}, DelinearizeOptions options = {}) {
  return delinearize(seq, doc, Scheme{Representation::FullAntecedentString, false}, symbols, options);
}

// Splits a whitespace-separated token string.
inline std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string join_tokens(std::span<const std::string> toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

}  // namespace seqcoref
