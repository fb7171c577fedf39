// Special symbols of the target vocabulary and the spelling of cluster
// integers.

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "seqcoref/model.hpp"

namespace seqcoref {

// How a cluster integer is written: one token per number ("12") or one
// token per decimal digit ("1", "2").
enum class IntegerSpelling { Whole, Digits };

struct SymbolTable {
  std::string mention_start = "<m>";
  std::string mention_end = "</m>";
  std::string separator = "|";
  std::string copy = "<c>";
  std::string new_cluster = "<new>";
  std::string seq_start = "<s>";
  std::string seq_end = "</s>";
  std::string sentence_start = "<sentence>";
  std::string sentence_end = "</sentence>";
  std::string cluster_end_prefix = "</m_";
  std::string cluster_end_suffix = ">";
  IntegerSpelling integers = IntegerSpelling::Whole;
  // Size of the </m_l> family and the largest integer label decodable.
  int max_clusters = 128;

  std::string cluster_end(int label) const {
    return cluster_end_prefix + std::to_string(label) + cluster_end_suffix;
  }

  // Label l if tok spells </m_l>, otherwise nullopt.
  std::optional<int> cluster_end_label(std::string_view tok) const {
    if (tok.size() <= cluster_end_prefix.size() + cluster_end_suffix.size()) return std::nullopt;
    if (tok.substr(0, cluster_end_prefix.size()) != cluster_end_prefix) return std::nullopt;
    if (tok.substr(tok.size() - cluster_end_suffix.size()) != cluster_end_suffix) return std::nullopt;
    auto digits = tok.substr(cluster_end_prefix.size(), tok.size() - cluster_end_prefix.size() - cluster_end_suffix.size());
    int value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || value < 1) return std::nullopt;
    if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
    return value;
  }

  // Member of the integer lexicon U.
  bool is_integer_token(std::string_view tok) const {
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) {
      return false;
    }
    if (integers == IntegerSpelling::Digits) return tok.size() == 1;
    return tok.size() == 1 || tok[0] != '0';
  }

  std::vector<std::string> spell_integer(int value) const {
    std::string s = std::to_string(value);
    if (integers == IntegerSpelling::Whole) return {s};
    std::vector<std::string> out;
    for (char c : s) out.emplace_back(1, c);
    return out;
  }

  // Parses a concatenation of integer tokens; nullopt when empty, not
  // canonical (leading zero) or too large.
  static std::optional<int> parse_integer(std::string_view digits) {
    if (digits.empty() || digits.size() > 9) return std::nullopt;
    if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
    int value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
    return value;
  }

  // Symbols that may never appear as document tokens. Integer tokens are
  // excluded: decimal words are legal document tokens and are told apart
  // from cluster integers by position.
  std::vector<std::string> reserved() const {
    return {mention_start, mention_end, separator, copy, new_cluster, seq_start, seq_end, sentence_start, sentence_end};
  }

  bool is_reserved(std::string_view tok) const {
    for (const auto& r : reserved()) {
      if (tok == r) return true;
    }
    return cluster_end_label(tok).has_value();
  }

  // Throws if two specials coincide.
  void check_distinct() const {
    auto all = reserved();
    std::set<std::string> uniq(all.begin(), all.end());
    if (uniq.size() != all.size()) throw std::invalid_argument("special symbols are not pairwise distinct");
    for (const auto& r : all) {
      if (cluster_end_label(r)) throw std::invalid_argument("special symbol collides with cluster end family: " + r);
      if (is_integer_token(r)) throw std::invalid_argument("special symbol collides with integer lexicon: " + r);
    }
  }

  // Document tokens that collide with a special symbol.
  std::vector<std::string> collisions(const Document& doc) const {
    std::set<std::string> bad;
    for (const auto& t : doc.tokens) {
      if (is_reserved(t)) bad.insert(t);
    }
    return {bad.begin(), bad.end()};
  }
};

class SymbolCollision : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_no_collisions(const SymbolTable& symbols, const Document& doc) {
  auto bad = symbols.collisions(doc);
  if (bad.empty()) return;
  std::string msg = "document " + doc.doc_key + " contains reserved symbols:";
  for (const auto& b : bad) msg += " " + b;
  throw SymbolCollision(msg);
}

}  // namespace seqcoref
