#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace seqcoref {

// Defects repaired (or merely observed) while turning a sequence back into
// an annotation.
enum class Defect {
  UnclosedMention,        // mention still open at end of sequence
  MissingIdentity,        // "| </m>" with no integer, or </m> without "|"
  ClampedLabel,           // label outside 1..C+1 mapped to a new cluster
  StrayClose,             // close token with no open mention
  StraySeparator,         // "|" with no open mention or inside an identity
  EmptyMention,           // mention closed before covering any token
  AbandonedIdentity,      // identity stage interrupted by another token
  SkippedSource,          // source tokens skipped to resynchronise
  UnmatchedToken,         // token not found in the remaining source
  DuplicateSpan,          // identical (start, end, cluster) emitted twice
  MissingEnd,             // no </s> in the sequence
  TrailingSource,         // source tokens never emitted
  StrayIdentityToken,     // non-integer word between "|" and "</m>"
  SentenceCloseWithOpen,  // </sentence> while mentions were open
  SentenceMarkerError,    // unbalanced or nested sentence markers
  AmbiguousAntecedent,    // antecedent string matches several clusters
  UnresolvedAntecedent,   // antecedent string matches no earlier mention
  Truncated,              // decode step limit reached
};

inline const char* to_string(Defect d) {
  switch (d) {
    case Defect::UnclosedMention: return "unclosed-mention";
    case Defect::MissingIdentity: return "missing-identity";
    case Defect::ClampedLabel: return "clamped-label";
    case Defect::StrayClose: return "stray-close";
    case Defect::StraySeparator: return "stray-separator";
    case Defect::EmptyMention: return "empty-mention";
    case Defect::AbandonedIdentity: return "abandoned-identity";
    case Defect::SkippedSource: return "skipped-source";
    case Defect::UnmatchedToken: return "unmatched-token";
    case Defect::DuplicateSpan: return "duplicate-span";
    case Defect::MissingEnd: return "missing-end";
    case Defect::TrailingSource: return "trailing-source";
    case Defect::StrayIdentityToken: return "stray-identity-token";
    case Defect::SentenceCloseWithOpen: return "sentence-close-with-open";
    case Defect::SentenceMarkerError: return "sentence-marker-error";
    case Defect::AmbiguousAntecedent: return "ambiguous-antecedent";
    case Defect::UnresolvedAntecedent: return "unresolved-antecedent";
    case Defect::Truncated: return "truncated";
  }
  return "unknown";
}

// Informational defects do not count against the repair budget.
inline bool is_repair(Defect d) {
  switch (d) {
    case Defect::AmbiguousAntecedent:
    case Defect::StrayIdentityToken:
    case Defect::TrailingSource:
    case Defect::Truncated:
      return false;
    default:
      return true;
  }
}

struct Diagnostic {
  Defect defect;
  std::size_t position;  // index into the parsed sequence
};

struct Diagnostics {
  std::vector<Diagnostic> entries;

  void add(Defect d, std::size_t pos) { entries.push_back({d, pos}); }

  int count(Defect d) const {
    return static_cast<int>(std::count_if(entries.begin(), entries.end(), [d](const Diagnostic& e) { return e.defect == d; }));
  }
  int repairs() const {
    return static_cast<int>(std::count_if(entries.begin(), entries.end(), [](const Diagnostic& e) { return is_repair(e.defect); }));
  }
  bool empty() const { return entries.empty(); }

  std::map<std::string, int> summary() const {
    std::map<std::string, int> out;
    for (const auto& e : entries) ++out[to_string(e.defect)];
    return out;
  }

  void merge(const Diagnostics& other) { entries.insert(entries.end(), other.entries.begin(), other.entries.end()); }
};

}  // namespace seqcoref
