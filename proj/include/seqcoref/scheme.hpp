#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace seqcoref {

enum class Representation {
  FullToken,           // full linearization, token action, "| l </m>"
  FullCopy,            // full linearization, copy action
  FullIntegerFree,     // full linearization, copy action, </m_l> with <new>
  FullIntegerBefore,   // full linearization, copy action, "<m> l | ... </m>"
  FullAntecedentString,  // full linearization, token action, "| antecedent words </m>"
  PartialToken,        // mentions only, token action
};

struct Scheme {
  Representation representation = Representation::FullCopy;
  bool sentence_markers = false;

  bool is_full() const { return representation != Representation::PartialToken; }
  bool is_partial() const { return representation == Representation::PartialToken; }

  bool uses_copy() const {
    return representation == Representation::FullCopy || representation == Representation::FullIntegerFree ||
           representation == Representation::FullIntegerBefore;
  }
  bool integer_free() const { return representation == Representation::FullIntegerFree; }
  bool integer_before() const { return representation == Representation::FullIntegerBefore; }
  bool antecedent_string() const { return representation == Representation::FullAntecedentString; }
  // "| l </m>" closing with an integer label after the mention words.
  bool integer_after() const {
    return representation == Representation::FullToken || representation == Representation::FullCopy ||
           representation == Representation::PartialToken;
  }

  friend bool operator==(const Scheme&, const Scheme&) = default;
};

class InvalidScheme : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Sentence markers are only defined for partial linearization; every full
// representation is paired with its own action type by construction.
inline void check_scheme(const Scheme& s) {
  if (s.sentence_markers && s.is_full()) {
    throw InvalidScheme("sentence markers are only supported with partial linearization");
  }
}

inline constexpr std::array<std::pair<Representation, std::string_view>, 6> kRepresentationNames{{
    {Representation::FullToken, "full-token"},
    {Representation::FullCopy, "full-copy"},
    {Representation::FullIntegerFree, "full-integer-free"},
    {Representation::FullIntegerBefore, "full-integer-before"},
    {Representation::FullAntecedentString, "full-antecedent"},
    {Representation::PartialToken, "partial-token"},
}};

inline std::string to_string(Representation r) {
  for (auto [rep, name] : kRepresentationNames) {
    if (rep == r) return std::string(name);
  }
  return "unknown";
}

inline std::string to_string(const Scheme& s) {
  return to_string(s.representation) + (s.sentence_markers ? "+markers" : "");
}

// Parses a representation name, also accepting "partial-copy" and similar
// combinations so that they can be rejected with a precise message.
inline Scheme parse_scheme(std::string_view name, bool sentence_markers = false) {
  if (name == "partial-copy" || name == "partial-integer-free") {
    throw InvalidScheme("partial linearization is not compatible with copy actions");
  }
  for (auto [rep, n] : kRepresentationNames) {
    if (n == name) {
      Scheme s{rep, sentence_markers};
      check_scheme(s);
      return s;
    }
  }
  throw InvalidScheme("unknown scheme: " + std::string(name));
}

inline constexpr std::array<Representation, 5> kFullRepresentations{
    Representation::FullToken, Representation::FullCopy, Representation::FullIntegerFree,
    Representation::FullIntegerBefore, Representation::FullAntecedentString};

}  // namespace seqcoref
