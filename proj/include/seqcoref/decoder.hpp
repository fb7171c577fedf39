// Constrained decoding for every target representation.
//
// The state of a partially generated decoder input z is a pure function of
// the document and the prefix. For each state the FSM yields a
// MaskDirective: the tokens that may be generated next, plus score
// transfers (<c> onto the next source token, <new> onto </m_{l+1}>) that a
// decoding loop must apply to raw model scores before masking. The beam
// search driver below consumes an arbitrary scoring callback, so a neural
// model, an oracle or a noise process plug in the same way.
//
// Beyond the masking rules, the FSM tightens three things so that every
// accepted sequence is the canonical linearization of a valid annotation:
// a mention must cover a token before it is closed, integer labels are
// restricted to 1..l+1, and identical-boundary mentions must close in
// ascending label order. FsmOptions::loose_integers restores the literal
// "all integer tokens" rule.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqcoref/aligner.hpp"
#include "seqcoref/diagnostics.hpp"
#include "seqcoref/linearizer.hpp"
#include "seqcoref/model.hpp"
#include "seqcoref/scheme.hpp"
#include "seqcoref/symbols.hpp"

namespace seqcoref {

enum class StateTag {
  Outside,
  InsideMention,
  InsideClusterIdentity,
  AwaitingLabel,      // integer-before: between <m> and |
  InsideMentionSeen,  // integer-free, open mentions
  OutsideMention,     // integer-free, no open mention
  CompleteSentence,   // partial with markers, between sentences
  Finished,
};

inline const char* to_string(StateTag t) {
  switch (t) {
    case StateTag::Outside: return "Outside";
    case StateTag::InsideMention: return "InsideMention";
    case StateTag::InsideClusterIdentity: return "InsideClusterIdentity";
    case StateTag::AwaitingLabel: return "AwaitingLabel";
    case StateTag::InsideMentionSeen: return "InsideMentionSeen";
    case StateTag::OutsideMention: return "OutsideMention";
    case StateTag::CompleteSentence: return "CompleteSentence";
    case StateTag::Finished: return "Finished";
  }
  return "unknown";
}

struct OpenFrame {
  int start = 1;
  bool awaiting_label = false;
  std::string digits;
  int label = 0;

  friend bool operator==(const OpenFrame&, const OpenFrame&) = default;
};

struct GenerationState {
  Scheme scheme;
  int steps = 0;   // tokens generated after <s>
  int cursor = 1;  // next source index (full) or next target-local index (partial)
  std::vector<OpenFrame> open;
  int clusters = 0;  // l: clusters seen so far
  bool identity = false;
  int identity_end = 0;
  std::string digits;
  std::vector<std::string> identity_words;
  std::optional<Span> last_closed;  // valid while only closing tokens followed it
  std::vector<Span> closed;         // antecedent scheme only
  int sentence_opens = 0;
  int sentence_closes = 0;
  int mention_starts = 0;
  int mention_ends = 0;
  int separators = 0;
  int stray_identity_words = 0;
  bool finished = false;

  friend bool operator==(const GenerationState&, const GenerationState&) = default;

  bool between_sentences() const {
    return scheme.is_partial() && scheme.sentence_markers && sentence_opens == sentence_closes;
  }
  // 0-based index of the sentence being generated (partial with markers).
  int sentence_index() const { return sentence_opens - 1; }

  StateTag tag() const {
    if (finished) return StateTag::Finished;
    if (between_sentences()) return StateTag::CompleteSentence;
    if (scheme.integer_free()) return open.empty() ? StateTag::OutsideMention : StateTag::InsideMentionSeen;
    if (identity) return StateTag::InsideClusterIdentity;
    if (!open.empty() && open.back().awaiting_label) return StateTag::AwaitingLabel;
    return open.empty() ? StateTag::Outside : StateTag::InsideMention;
  }
};

struct MaskDirective {
  std::vector<std::string> allowed;
  std::vector<std::pair<std::string, std::string>> transfers;  // (from, to): score[to] = score[from]

  bool allows(const std::string& tok) const { return std::find(allowed.begin(), allowed.end(), tok) != allowed.end(); }
  bool forced() const { return allowed.size() == 1; }
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct FsmOptions {
  bool loose_integers = false;
};

// Token <-> id mapping for one document and scheme.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary build(const Document& doc, const SymbolTable& symbols) {
    Vocabulary v;
    for (const auto& r : symbols.reserved()) v.add(r);
    if (symbols.integers == IntegerSpelling::Digits) {
      for (int d = 0; d <= 9; ++d) v.add(std::to_string(d));
    } else {
      for (int l = 1; l <= symbols.max_clusters; ++l) v.add(std::to_string(l));
    }
    for (int l = 1; l <= symbols.max_clusters; ++l) v.add(symbols.cluster_end(l));
    for (const auto& t : doc.tokens) v.add(t);
    return v;
  }

  int add(const std::string& tok) {
    auto [it, inserted] = ids_.emplace(tok, static_cast<int>(tokens_.size()));
    if (inserted) tokens_.push_back(tok);
    return it->second;
  }
  int id(const std::string& tok) const {
    auto it = ids_.find(tok);
    return it == ids_.end() ? -1 : it->second;
  }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Applies transfers then masks: disallowed entries are set to floor. This is
// the per-step operation an external generation loop needs.
inline void apply_directive(const MaskDirective& directive, const Vocabulary& vocab, std::span<double> scores,
                            double floor = std::numeric_limits<double>::lowest()) {
  std::vector<std::pair<int, double>> moved;
  for (const auto& [from, to] : directive.transfers) {
    const int f = vocab.id(from), t = vocab.id(to);
    if (f >= 0 && t >= 0) moved.emplace_back(t, scores[static_cast<std::size_t>(f)]);
  }
  for (auto [t, s] : moved) scores[static_cast<std::size_t>(t)] = s;
  std::vector<char> keep(scores.size(), 0);
  for (const auto& a : directive.allowed) {
    const int id = vocab.id(a);
    if (id >= 0) keep[static_cast<std::size_t>(id)] = 1;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!keep[i]) scores[i] = floor;
  }
}

class Fsm {
 public:
  Fsm(const Document& doc, Scheme scheme, SymbolTable symbols = {}, FsmOptions options = {})
      : doc_(&doc), scheme_(scheme), sym_(std::move(symbols)), options_(options) {
    check_scheme(scheme_);
    if (scheme_.is_partial()) {
      const bool markers = scheme_.sentence_markers;
      const std::size_t groups = markers ? doc.sentences.size() : 1;
      sentence_words_.resize(groups);
      for (std::size_t g = 0; g < groups; ++g) {
        TokenRange r = markers ? doc.sentences[g] : TokenRange{1, doc.size()};
        std::set<std::string> seen;
        for (int i = r.first; i <= r.last; ++i) {
          if (seen.insert(doc.token(i)).second) sentence_words_[g].push_back(doc.token(i));
        }
      }
    }
  }

  const Document& document() const { return *doc_; }
  const Scheme& scheme() const { return scheme_; }
  const SymbolTable& symbols() const { return sym_; }

  GenerationState initial() const {
    GenerationState s;
    s.scheme = scheme_;
    return s;
  }

  // Allowed set for the state. With a step limit, tokens after which the
  // sequence could no longer be finished within the limit are removed
  // (unless that would leave nothing).
  MaskDirective mask(const GenerationState& state, std::optional<int> step_limit = std::nullopt) const {
    MaskDirective d = raw_mask(state);
    if (!step_limit) return d;
    MaskDirective filtered;
    for (const auto& tok : d.allowed) {
      GenerationState next = apply(state, tok);
      if (next.steps + min_completion(next) <= *step_limit) filtered.allowed.push_back(tok);
    }
    if (filtered.allowed.empty()) return d;
    for (const auto& tr : d.transfers) {
      if (filtered.allows(tr.second)) filtered.transfers.push_back(tr);
    }
    return filtered;
  }

  // Maps an action token to the decoder-input token it stands for.
  std::string resolve_action(const GenerationState& state, const std::string& tok) const {
    if (tok == sym_.copy && scheme_.is_full() && state.cursor <= doc_->size()) return doc_->token(state.cursor);
    if (tok == sym_.new_cluster && scheme_.integer_free()) return sym_.cluster_end(state.clusters + 1);
    return tok;
  }

  GenerationState advance(const GenerationState& state, const std::string& emitted) const {
    const std::string tok = resolve_action(state, emitted);
    if (!raw_mask(state).allows(tok)) {
      throw ContractViolation("token '" + emitted + "' is not allowed in state " + to_string(state.tag()) +
                              " at step " + std::to_string(state.steps));
    }
    return apply(state, tok);
  }

  // State after the given prefix (with or without the leading <s>).
  GenerationState replay(std::span<const std::string> prefix) const {
    GenerationState s = initial();
    std::size_t i = (!prefix.empty() && prefix[0] == sym_.seq_start) ? 1 : 0;
    for (; i < prefix.size(); ++i) s = advance(s, prefix[i]);
    return s;
  }

  // Lower bound on the number of tokens still needed to finish legally.
  int min_completion(const GenerationState& s) const {
    if (s.finished) return 0;
    int need = 1;  // </s>
    const int frames = static_cast<int>(s.open.size());
    if (scheme_.is_full()) need += doc_->size() - s.cursor + 1;
    switch (scheme_.representation) {
      case Representation::FullIntegerFree:
        need += frames;
        break;
      case Representation::FullIntegerBefore:
        for (const auto& f : s.open) need += f.awaiting_label ? (f.digits.empty() ? 3 : 2) : 1;
        break;
      case Representation::FullAntecedentString: {
        if (frames == 0) break;
        // Every open mention still needs "| antecedent </m>"; no antecedent
        // can be shorter than the shortest closed span or the top mention.
        int shortest = std::max(1, s.cursor - s.open.back().start);
        for (const auto& c : s.closed) shortest = std::min(shortest, c.end - c.start + 1);
        if (s.identity) {
          need += 1 + min_antecedent_remaining(s) + (2 + shortest) * (frames - 1);
        } else {
          need += (2 + shortest) * frames;
        }
        break;
      }
      default: {
        if (s.identity) {
          need += complete_digits(s) ? 1 : 2;
          need += 3 * (frames - 1);
        } else {
          need += 3 * frames;
        }
        break;
      }
    }
    if (scheme_.is_partial()) {
      if (!s.open.empty() && !s.identity && s.cursor == s.open.back().start) need += 1;
      if (scheme_.sentence_markers) {
        const int total = static_cast<int>(doc_->sentences.size());
        if (!s.between_sentences()) need += 1;
        need += 2 * (total - s.sentence_opens);
      }
    }
    return need;
  }

 private:
  bool top_nonempty(const GenerationState& s) const { return !s.open.empty() && s.cursor > s.open.back().start; }

  // Labels a mention being closed may take: 1..l+1, strictly above the
  // label of an identical span closed just before.
  std::vector<int> closing_labels(const GenerationState& s, int start, int end) const {
    const int hi = std::min(s.clusters + 1, sym_.max_clusters);
    int lo = 1;
    if (s.last_closed && s.last_closed->start == start && s.last_closed->end == end) lo = s.last_closed->cluster + 1;
    std::vector<int> out;
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    if (out.empty()) out.push_back(std::max(hi, 1));
    return out;
  }

  std::vector<int> identity_labels(const GenerationState& s) const {
    if (scheme_.integer_before()) {
      std::vector<int> out(static_cast<std::size_t>(std::min(s.clusters + 1, sym_.max_clusters)));
      std::iota(out.begin(), out.end(), 1);
      return out;
    }
    return closing_labels(s, s.open.back().start, s.identity_end);
  }

  const std::string& current_digits(const GenerationState& s) const {
    return scheme_.integer_before() ? s.open.back().digits : s.digits;
  }

  bool complete_digits(const GenerationState& s) const {
    auto v = SymbolTable::parse_integer(current_digits(s));
    if (!v) return false;
    if (options_.loose_integers) return true;
    auto labels = identity_labels(s);
    return std::find(labels.begin(), labels.end(), *v) != labels.end();
  }

  // Integer tokens that extend the current digits toward an allowed label.
  void integer_continuations(const GenerationState& s, std::vector<std::string>& out) const {
    const std::string& digits = current_digits(s);
    if (options_.loose_integers) {
      if (sym_.integers == IntegerSpelling::Digits) {
        for (int d = 0; d <= 9; ++d) out.push_back(std::to_string(d));
      } else {
        for (int l = 1; l <= sym_.max_clusters; ++l) out.push_back(std::to_string(l));
      }
      return;
    }
    std::set<std::string> next;
    for (int v : identity_labels(s)) {
      const std::string full = std::to_string(v);
      if (sym_.integers == IntegerSpelling::Whole) {
        if (digits.empty()) next.insert(full);
      } else if (full.size() > digits.size() && full.compare(0, digits.size(), digits) == 0) {
        next.insert(full.substr(digits.size(), 1));
      }
    }
    out.insert(out.end(), next.begin(), next.end());
  }

  std::vector<std::vector<std::string>> antecedent_candidates(const GenerationState& s) const {
    std::vector<std::vector<std::string>> out;
    for (const auto& c : s.closed) out.push_back(detail::surface(*doc_, c.start, c.end));
    out.push_back(detail::surface(*doc_, s.open.back().start, s.identity_end));
    return out;
  }

  int min_antecedent_remaining(const GenerationState& s) const {
    int best = std::numeric_limits<int>::max();
    const auto& w = s.identity_words;
    for (const auto& c : antecedent_candidates(s)) {
      if (c.size() >= w.size() && std::equal(w.begin(), w.end(), c.begin())) {
        best = std::min(best, static_cast<int>(c.size() - w.size()));
      }
    }
    return best == std::numeric_limits<int>::max() ? 0 : best;
  }

  MaskDirective raw_mask(const GenerationState& s) const {
    MaskDirective d = unfiltered_mask(s);
    if (!scheme_.integer_before()) return d;
    MaskDirective out;
    for (const auto& tok : d.allowed) {
      if (before_feasible(apply(s, tok))) out.allowed.push_back(tok);
    }
    for (const auto& tr : d.transfers) {
      if (out.allows(tr.second)) out.transfers.push_back(tr);
    }
    return out;
  }

  // Integer-before fixes labels at open time, so mentions on one span must
  // close in ascending label order (lower label outside). The top mention
  // is blocked while an identical span with a label no higher than its own was
  // closed just before it.
  bool before_blocked(const GenerationState& s) const {
    const OpenFrame& top = s.open.back();
    return s.last_closed && s.last_closed->start == top.start && s.last_closed->end == s.cursor - 1 &&
           top.label >= s.last_closed->cluster;
  }

  int frame_label(const OpenFrame& f) const {
    if (!f.awaiting_label) return f.label;
    if (sym_.integers == IntegerSpelling::Whole) return SymbolTable::parse_integer(f.digits).value_or(0);
    return 0;
  }

  // Open mentions sharing a start whose labels do not ascend need distinct
  // ends; checks that enough source positions remain for them.
  bool before_feasible(const GenerationState& s) const {
    if (s.finished || s.open.empty()) return true;
    int descents = 0;
    for (std::size_t i = 1; i < s.open.size(); ++i) {
      const int inner = frame_label(s.open[i]);
      if (inner > 0 && s.open[i - 1].start == s.open[i].start && frame_label(s.open[i - 1]) >= inner) ++descents;
    }
    const OpenFrame& top = s.open.back();
    if (!top.awaiting_label && before_blocked(s)) ++descents;
    const int first_end = std::max(top.start, s.cursor - 1);
    return descents + 1 <= doc_->size() - first_end + 1;
  }

  MaskDirective unfiltered_mask(const GenerationState& s) const {
    MaskDirective d;
    if (s.finished) return d;
    auto& a = d.allowed;
    const int n = doc_->size();

    if (scheme_.is_partial()) {
      const bool markers = scheme_.sentence_markers;
      if (s.between_sentences()) {
        a.push_back(s.sentence_opens < static_cast<int>(doc_->sentences.size()) ? sym_.sentence_start : sym_.seq_end);
        return d;
      }
      const auto& words = sentence_words_[markers ? static_cast<std::size_t>(s.sentence_index()) : 0];
      std::set<std::string> uniq;
      auto add = [&](const std::string& t) {
        if (uniq.insert(t).second) a.push_back(t);
      };
      if (s.identity) {
        std::vector<std::string> ints;
        integer_continuations(s, ints);
        for (const auto& t : ints) add(t);
        if (complete_digits(s) || (options_.loose_integers)) add(sym_.mention_end);
      } else {
        add(sym_.mention_start);
        if (top_nonempty(s)) add(sym_.separator);
      }
      for (const auto& w : words) add(w);
      if (markers) {
        add(sym_.sentence_end);
      } else if (s.open.empty() && !s.identity) {
        add(sym_.seq_end);
      }
      return d;
    }

    const bool has_next = s.cursor <= n;
    const std::string next_tok = has_next ? doc_->token(s.cursor) : std::string();
    auto add_copy = [&]() {
      if (!has_next) return;
      a.push_back(next_tok);
      if (scheme_.uses_copy()) d.transfers.emplace_back(sym_.copy, next_tok);
    };

    if (s.identity) {
      if (scheme_.antecedent_string()) {
        std::set<std::string> next;
        bool complete = false;
        const auto& w = s.identity_words;
        for (const auto& c : antecedent_candidates(s)) {
          if (c.size() < w.size() || !std::equal(w.begin(), w.end(), c.begin())) continue;
          if (c.size() == w.size()) complete = true;
          else next.insert(c[w.size()]);
        }
        a.assign(next.begin(), next.end());
        if (complete) a.push_back(sym_.mention_end);
        return d;
      }
      integer_continuations(s, a);
      if (complete_digits(s) || (options_.loose_integers && !s.digits.empty())) a.push_back(sym_.mention_end);
      return d;
    }

    if (!s.open.empty() && s.open.back().awaiting_label) {
      integer_continuations(s, a);
      if (complete_digits(s)) a.push_back(sym_.separator);
      return d;
    }

    add_copy();
    if (has_next) a.push_back(sym_.mention_start);
    if (s.open.empty()) {
      if (!has_next) a.push_back(sym_.seq_end);
      return d;
    }
    if (!top_nonempty(s)) return d;
    switch (scheme_.representation) {
      case Representation::FullIntegerFree: {
        auto labels = closing_labels(s, s.open.back().start, s.cursor - 1);
        for (int v : labels) a.push_back(sym_.cluster_end(v));
        const int fresh = s.clusters + 1;
        if (std::find(labels.begin(), labels.end(), fresh) != labels.end()) {
          d.transfers.emplace_back(sym_.new_cluster, sym_.cluster_end(fresh));
        }
        break;
      }
      case Representation::FullIntegerBefore:
        if (!before_blocked(s)) a.push_back(sym_.mention_end);
        break;
      default:
        a.push_back(sym_.separator);
        break;
    }
    return d;
  }

  void close_top(GenerationState& s, int end, int label) const {
    const OpenFrame top = s.open.back();
    s.open.pop_back();
    s.identity = false;
    if (label > s.clusters) s.clusters = std::min(label, s.clusters + 1);
    Span closed{top.start, end, label};
    s.last_closed = closed;
    if (scheme_.antecedent_string()) s.closed.push_back(closed);
    ++s.mention_ends;
  }

  // Transition without the legality check.
  GenerationState apply(const GenerationState& state, const std::string& tok) const {
    GenerationState s = state;
    ++s.steps;
    if (tok == sym_.seq_end) {
      s.finished = true;
      return s;
    }
    if (tok == sym_.sentence_start) {
      ++s.sentence_opens;
      s.last_closed.reset();
      return s;
    }
    if (tok == sym_.sentence_end) {
      ++s.sentence_closes;
      s.open.clear();
      s.identity = false;
      s.last_closed.reset();
      return s;
    }
    if (s.identity && scheme_.integer_after() && sym_.is_integer_token(tok)) {
      s.digits += tok;
      return s;
    }
    if (!s.open.empty() && s.open.back().awaiting_label && sym_.is_integer_token(tok)) {
      s.open.back().digits += tok;
      return s;
    }
    if (tok == sym_.mention_start) {
      s.open.push_back(OpenFrame{s.cursor, scheme_.integer_before(), {}, 0});
      ++s.mention_starts;
      s.last_closed.reset();
      return s;
    }
    if (tok == sym_.separator) {
      ++s.separators;
      if (scheme_.integer_before()) {
        OpenFrame& top = s.open.back();
        top.awaiting_label = false;
        int v = SymbolTable::parse_integer(top.digits).value_or(s.clusters + 1);
        if (v < 1 || v > s.clusters + 1) v = s.clusters + 1;
        top.label = v;
        if (v > s.clusters) s.clusters = v;
        return s;
      }
      s.identity = true;
      s.identity_end = s.cursor - 1;
      s.digits.clear();
      s.identity_words.clear();
      return s;
    }
    if (tok == sym_.mention_end) {
      if (scheme_.integer_before()) {
        const int label = s.open.back().label;
        close_top(s, s.cursor - 1, label);
      } else if (scheme_.antecedent_string()) {
        close_top(s, s.identity_end, 0);
      } else {
        int v = SymbolTable::parse_integer(s.digits).value_or(s.clusters + 1);
        if (v < 1 || v > s.clusters + 1) v = s.clusters + 1;
        close_top(s, s.identity_end, v);
      }
      return s;
    }
    if (auto l = sym_.cluster_end_label(tok)) {
      close_top(s, s.cursor - 1, *l);
      return s;
    }
    if (s.identity) {
      if (scheme_.antecedent_string()) {
        s.identity_words.push_back(tok);
      } else {
        ++s.stray_identity_words;
      }
      return s;
    }
    ++s.cursor;
    s.last_closed.reset();
    return s;
  }

  const Document* doc_;
  Scheme scheme_;
  SymbolTable sym_;
  FsmOptions options_;
  std::vector<std::vector<std::string>> sentence_words_;
};

// ---------------------------------------------------------------------------
// Scoring callback and beam search.

struct ScoringContext {
  const Document& doc;
  const Vocabulary& vocab;
  std::span<const std::string> prefix;  // decoder input so far, starting with <s>
  const GenerationState& state;
};

// Returns one finite log-score per vocabulary id.
using Scorer = std::function<std::vector<double>(const ScoringContext&)>;

class ScorerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TraceEntry {
  StateTag tag;
  int allowed = 0;
  std::string chosen;
};

struct DecodeOptions {
  int beam = 4;
  std::optional<int> step_limit;  // default 4 * |x| + 64
  double length_penalty = 0.0;    // ranking score = score / length^penalty
  FsmOptions fsm;
  SymbolTable symbols;
  DelinearizeOptions parse;
  AlignOptions align;  // partial schemes
  std::ostream* trace = nullptr;
};

struct DecodeResult {
  CorefAnnotation annotation;
  std::vector<std::string> z;  // starts with <s>, ends with </s>
  double score = 0.0;
  bool truncated = false;
  Diagnostics diagnostics;
  std::vector<TraceEntry> trace;
};

inline int default_step_limit(const Document& doc) { return 4 * doc.size() + 64; }

namespace detail {

inline std::vector<double> checked_scores(const Scorer& scorer, const ScoringContext& ctx) {
  auto scores = scorer(ctx);
  if (static_cast<int>(scores.size()) != ctx.vocab.size()) {
    throw ScorerError("scorer returned " + std::to_string(scores.size()) + " scores for a vocabulary of " +
                      std::to_string(ctx.vocab.size()));
  }
  for (double v : scores) {
    if (!std::isfinite(v)) throw ScorerError("scorer returned a non-finite score");
  }
  return scores;
}

inline void write_trace(std::ostream& os, const Document& doc, const std::vector<TraceEntry>& trace) {
  for (std::size_t i = 0; i < trace.size(); ++i) {
    os << doc.doc_key << '\t' << i << '\t' << to_string(trace[i].tag) << '\t' << trace[i].allowed << '\t'
       << trace[i].chosen << '\n';
  }
}

}  // namespace detail

// Interprets a finished decoder input as an annotation over doc.
inline std::pair<CorefAnnotation, Diagnostics> interpret(const Document& doc, std::span<const std::string> z,
                                                         const Scheme& scheme, const SymbolTable& symbols,
                                                         const DelinearizeOptions& parse, const AlignOptions& align) {
  if (scheme.is_partial()) {
    auto r = align_partial(doc, z, scheme, align, symbols, parse);
    return {std::move(r.annotation), std::move(r.diagnostics)};
  }
  auto r = delinearize(z, doc, scheme, symbols, parse);
  return {relabel(r.annotation), std::move(r.diagnostics)};
}

inline DecodeResult decode(const Document& doc, const Scorer& scorer, const Scheme& scheme,
                           const DecodeOptions& options = {}) {
  const Fsm fsm(doc, scheme, options.symbols, options.fsm);
  const Vocabulary vocab = Vocabulary::build(doc, options.symbols);
  const int limit = options.step_limit.value_or(default_step_limit(doc));
  const int width = std::max(1, options.beam);

  struct Hyp {
    std::vector<std::string> z;
    double score = 0.0;
    GenerationState state;
    std::vector<TraceEntry> trace;
  };
  auto rank = [&](double score, std::size_t length) {
    if (options.length_penalty == 0.0) return score;
    return score / std::pow(static_cast<double>(length), options.length_penalty);
  };

  std::vector<Hyp> beam{Hyp{{options.symbols.seq_start}, 0.0, fsm.initial(), {}}};
  int step = 0;
  for (; step < limit; ++step) {
    struct Candidate {
      std::size_t hyp;
      int token;  // -1 carries a finished hypothesis
      double score;
      double rank;
    };
    std::vector<Candidate> cands;
    std::vector<MaskDirective> directives(beam.size());
    for (std::size_t h = 0; h < beam.size(); ++h) {
      const Hyp& hyp = beam[h];
      if (hyp.state.finished) {
        cands.push_back({h, -1, hyp.score, rank(hyp.score, hyp.z.size())});
        continue;
      }
      auto scores = detail::checked_scores(scorer, ScoringContext{doc, vocab, hyp.z, hyp.state});
      directives[h] = fsm.mask(hyp.state, limit);
      for (const auto& [from, to] : directives[h].transfers) {
        scores[static_cast<std::size_t>(vocab.id(to))] = scores[static_cast<std::size_t>(vocab.id(from))];
      }
      for (const auto& tok : directives[h].allowed) {
        const int id = vocab.id(tok);
        const double s = hyp.score + scores[static_cast<std::size_t>(id)];
        cands.push_back({h, id, s, rank(s, hyp.z.size() + 1)});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.rank != b.rank) return a.rank > b.rank;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.token < b.token;
    });
    std::vector<Hyp> next;
    std::set<std::vector<std::string>> prefixes;
    for (const auto& c : cands) {
      if (static_cast<int>(next.size()) >= width) break;
      const Hyp& parent = beam[c.hyp];
      if (c.token < 0) {
        if (prefixes.insert(parent.z).second) next.push_back(parent);
        continue;
      }
      Hyp child = parent;
      const std::string& tok = vocab.token(c.token);
      child.z.push_back(tok);
      if (!prefixes.insert(child.z).second) continue;
      child.score = c.score;
      child.trace.push_back({parent.state.tag(), static_cast<int>(directives[c.hyp].allowed.size()), tok});
      child.state = fsm.advance(parent.state, tok);
      next.push_back(std::move(child));
    }
    beam = std::move(next);
    if (beam.front().state.finished) break;
  }

  DecodeResult result;
  auto best = std::find_if(beam.begin(), beam.end(), [](const Hyp& h) { return h.state.finished; });
  Hyp winner = best != beam.end() && beam.front().state.finished ? *best : beam.front();
  if (!winner.state.finished) {
    // Step limit reached: finish with the shortest legal completion.
    result.truncated = true;
    const int cap = limit + 4 * (doc.size() + 16) + 1024;
    while (!winner.state.finished) {
      if (static_cast<int>(winner.z.size()) > cap) throw std::runtime_error("forced closure did not terminate");
      auto d = fsm.mask(winner.state);
      const std::string* pick = nullptr;
      int best_need = std::numeric_limits<int>::max();
      for (const auto& tok : d.allowed) {
        const int need = fsm.min_completion(fsm.advance(winner.state, tok));
        if (need < best_need) {
          best_need = need;
          pick = &tok;
        }
      }
      winner.trace.push_back({winner.state.tag(), static_cast<int>(d.allowed.size()), *pick});
      winner.z.push_back(*pick);
      winner.state = fsm.advance(winner.state, *pick);
    }
  }

  auto [ann, diag] = interpret(doc, winner.z, scheme, options.symbols, options.parse, options.align);
  result.annotation = std::move(ann);
  result.diagnostics = std::move(diag);
  if (result.truncated) result.diagnostics.add(Defect::Truncated, winner.z.size());
  result.z = std::move(winner.z);
  result.score = winner.score;
  result.trace = std::move(winner.trace);
  if (options.trace) detail::write_trace(*options.trace, doc, result.trace);
  return result;
}

struct UnconstrainedResult {
  std::vector<std::string> output;  // raw generated tokens, ending with </s> unless truncated
  std::vector<std::string> z;       // decoder input: <s> then output with actions resolved
  std::optional<CorefAnnotation> annotation;
  Diagnostics diagnostics;
  std::string error;  // parse failure, empty on success
};

// Beam search over the whole vocabulary without masks; copy and <new>
// actions are resolved leniently and the result goes through the
// delinearizer's repair path.
inline UnconstrainedResult unconstrained_decode(const Document& doc, const Scorer& scorer, const Scheme& scheme,
                                                const DecodeOptions& options = {}) {
  const SymbolTable& sym = options.symbols;
  const Vocabulary vocab = Vocabulary::build(doc, sym);
  const int limit = options.step_limit.value_or(default_step_limit(doc));
  const int width = std::max(1, options.beam);

  struct Tracker {
    int cursor = 1;
    int clusters = 0;
    bool identity = false;
  };
  struct Hyp {
    std::vector<std::string> out;
    std::vector<std::string> z;
    double score = 0.0;
    Tracker tracker;
    bool finished = false;
  };
  auto resolve = [&](Tracker& t, const std::string& tok) -> std::string {
    if (tok == sym.separator) t.identity = true;
    if (tok == sym.mention_end || tok == sym.mention_start) t.identity = false;
    if (tok == sym.new_cluster && scheme.integer_free()) return sym.cluster_end(++t.clusters);
    if (auto l = sym.cluster_end_label(tok)) {
      t.clusters = std::max(t.clusters, *l);
      return tok;
    }
    if (sym.is_reserved(tok) && tok != sym.copy) return tok;
    if (t.identity && (sym.is_integer_token(tok) || scheme.antecedent_string())) return tok;
    if (scheme.is_partial()) return tok;
    if (tok == sym.copy) return t.cursor <= doc.size() ? doc.token(t.cursor++) : tok;
    for (int k = t.cursor; k <= doc.size(); ++k) {
      if (doc.token(k) == tok) {
        t.cursor = k + 1;
        break;
      }
    }
    return tok;
  };

  std::vector<Hyp> beam{Hyp{{}, {sym.seq_start}, 0.0, {}, false}};
  GenerationState blank;
  blank.scheme = scheme;
  for (int step = 0; step < limit; ++step) {
    struct Candidate {
      std::size_t hyp;
      int token;
      double score;
    };
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < beam.size(); ++h) {
      if (beam[h].finished) {
        cands.push_back({h, -1, beam[h].score});
        continue;
      }
      blank.steps = step;
      auto scores = detail::checked_scores(scorer, ScoringContext{doc, vocab, beam[h].z, blank});
      for (int id = 0; id < vocab.size(); ++id) cands.push_back({h, id, beam[h].score + scores[static_cast<std::size_t>(id)]});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.token < b.token;
    });
    std::vector<Hyp> next;
    for (const auto& c : cands) {
      if (static_cast<int>(next.size()) >= width) break;
      Hyp child = beam[c.hyp];
      if (c.token >= 0) {
        const std::string& tok = vocab.token(c.token);
        child.out.push_back(tok);
        child.z.push_back(resolve(child.tracker, tok));
        child.score = c.score;
        child.finished = tok == sym.seq_end;
      }
      next.push_back(std::move(child));
    }
    beam = std::move(next);
    if (beam.front().finished) break;
  }

  UnconstrainedResult result;
  result.output = beam.front().out;
  result.z = beam.front().z;
  try {
    auto [ann, diag] = interpret(doc, result.z, scheme, sym, options.parse, options.align);
    result.annotation = std::move(ann);
    result.diagnostics = std::move(diag);
  } catch (const ParseError& e) {
    result.error = e.what();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Ready-made scorers.

// Per-step score tables: step t uses steps[t] (token -> score); everything
// else scores default_score.
class ScriptedScorer {
 public:
  ScriptedScorer(std::vector<std::unordered_map<std::string, double>> steps, double default_score = -10.0)
      : steps_(std::move(steps)), default_(default_score) {}

  // Scores token seq[t] at step t (leading <s> skipped).
  static ScriptedScorer following(std::span<const std::string> seq, const SymbolTable& symbols = {},
                                  double default_score = -10.0) {
    std::vector<std::unordered_map<std::string, double>> steps;
    std::size_t i = (!seq.empty() && seq[0] == symbols.seq_start) ? 1 : 0;
    for (; i < seq.size(); ++i) steps.push_back({{seq[i], 0.0}});
    return ScriptedScorer(std::move(steps), default_score);
  }

  std::vector<double> operator()(const ScoringContext& ctx) const {
    std::vector<double> out(static_cast<std::size_t>(ctx.vocab.size()), default_);
    const std::size_t t = ctx.prefix.size() - 1;
    if (t < steps_.size()) {
      for (const auto& [tok, score] : steps_[t]) {
        const int id = ctx.vocab.id(tok);
        if (id >= 0) out[static_cast<std::size_t>(id)] = score;
      }
    }
    return out;
  }

 private:
  std::vector<std::unordered_map<std::string, double>> steps_;
  double default_;
};

// Scores the gold action highest whenever the prefix agrees with the gold
// decoder input, and uniformly low otherwise.
class GoldOracleScorer {
 public:
  explicit GoldOracleScorer(LinearizedPair gold, const SymbolTable& symbols = {}) : gold_(std::move(gold)) {
    gold_z_ = gold_.z_terminated(symbols);
  }

  std::vector<double> operator()(const ScoringContext& ctx) const {
    std::vector<double> out(static_cast<std::size_t>(ctx.vocab.size()), -100.0);
    const std::size_t t = ctx.prefix.size() - 1;
    if (t < gold_.y.size() && ctx.prefix.size() <= gold_z_.size() &&
        std::equal(ctx.prefix.begin(), ctx.prefix.end(), gold_z_.begin())) {
      const int id = ctx.vocab.id(gold_.y[t]);
      if (id >= 0) out[static_cast<std::size_t>(id)] = 0.0;
    }
    return out;
  }

 private:
  LinearizedPair gold_;
  std::vector<std::string> gold_z_;
};

// Independent uniform scores in [-5, 0) from a seeded engine.
class RandomScorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : rng_(std::make_shared<std::mt19937_64>(seed)) {}

  std::vector<double> operator()(const ScoringContext& ctx) const {
    std::uniform_real_distribution<double> dist(-5.0, 0.0);
    std::vector<double> out(static_cast<std::size_t>(ctx.vocab.size()));
    for (auto& v : out) v = dist(*rng_);
    return out;
  }

 private:
  std::shared_ptr<std::mt19937_64> rng_;
};

// Prefers every special symbol (including the action tokens the masks
// remove) and any disallowed word over legal continuations.
class AdversarialScorer {
 public:
  explicit AdversarialScorer(std::uint64_t seed, SymbolTable symbols = {})
      : rng_(std::make_shared<std::mt19937_64>(seed)), sym_(std::move(symbols)) {}

  std::vector<double> operator()(const ScoringContext& ctx) const {
    std::uniform_real_distribution<double> noise(0.0, 0.1);
    std::vector<double> out(static_cast<std::size_t>(ctx.vocab.size()));
    for (int id = 0; id < ctx.vocab.size(); ++id) {
      const auto& tok = ctx.vocab.token(id);
      const bool special = sym_.is_reserved(tok) || sym_.is_integer_token(tok);
      out[static_cast<std::size_t>(id)] = (special ? 0.0 : -1.0) + noise(*rng_);
    }
    return out;
  }

 private:
  std::shared_ptr<std::mt19937_64> rng_;
  SymbolTable sym_;
};

}  // namespace seqcoref
