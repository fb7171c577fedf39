// Coreference scores: MUC, B-cubed, CEAF (entity-based, phi4), their CoNLL
// average, unlabeled mention detection, and scoring restricted to the
// mentions both sides agree on.
//
// Mentions are identified by (start, end). Scores are accumulated as
// numerator/denominator pairs over the whole corpus before any ratio is
// taken. A zero denominator yields 0 and is recorded in ScoreReport::flags.

#pragma once

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqcoref/matching.hpp"
#include "seqcoref/model.hpp"

namespace seqcoref {

using Mention = std::pair<int, int>;
using Cluster = std::vector<Mention>;

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Numerators and denominators of one metric.
struct MetricCounts {
  double p_num = 0.0;
  double p_den = 0.0;
  double r_num = 0.0;
  double r_den = 0.0;

  MetricCounts& operator+=(const MetricCounts& o) {
    p_num += o.p_num;
    p_den += o.p_den;
    r_num += o.r_num;
    r_den += o.r_den;
    return *this;
  }
};

struct CorpusCounts {
  MetricCounts muc, b3, ceafe, mentions;
  int documents = 0;

  CorpusCounts& operator+=(const CorpusCounts& o) {
    muc += o.muc;
    b3 += o.b3;
    ceafe += o.ceafe;
    mentions += o.mentions;
    documents += o.documents;
    return *this;
  }
};

struct ScoreReport {
  Prf muc, b3, ceafe;
  double conll_avg = 0.0;
  Prf mentions;
  int documents = 0;
  int gold_mentions = 0;
  int pred_mentions = 0;
  std::vector<std::string> flags;
};

enum class SingletonProfile {
  Drop,  // OntoNotes convention
  Keep,  // PreCo, LitBank
};

struct ScoreOptions {
  SingletonProfile singletons = SingletonProfile::Keep;
};

// "ontonotes" drops singletons; "preco", "litbank" and "keep" keep them.
inline SingletonProfile parse_profile(const std::string& name) {
  if (name == "ontonotes" || name == "drop") return SingletonProfile::Drop;
  if (name == "preco" || name == "litbank" || name == "keep") return SingletonProfile::Keep;
  throw std::invalid_argument("unknown profile: " + name);
}

class MissingDocuments : public std::runtime_error {
 public:
  explicit MissingDocuments(std::vector<std::string> keys)
      : std::runtime_error(message(keys)), keys_(std::move(keys)) {}
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  static std::string message(const std::vector<std::string>& keys) {
    std::string m = "documents missing on one side:";
    for (const auto& k : keys) m += " " + k;
    return m;
  }
  std::vector<std::string> keys_;
};

// Clusters of an annotation with each mention kept once (first cluster in
// label order wins) and, optionally, singleton clusters removed.
inline std::vector<Cluster> scoring_clusters(const CorefAnnotation& ann, SingletonProfile profile = SingletonProfile::Keep) {
  std::set<Mention> seen;
  std::vector<Cluster> out;
  for (auto& c : ann.clusters()) {
    Cluster kept;
    for (const auto& m : c) {
      if (seen.insert(m).second) kept.push_back(m);
    }
    if (kept.empty()) continue;
    if (profile == SingletonProfile::Drop && kept.size() == 1) continue;
    out.push_back(std::move(kept));
  }
  return out;
}

namespace detail {

inline std::map<Mention, int> cluster_index(const std::vector<Cluster>& clusters) {
  std::map<Mention, int> idx;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (const auto& m : clusters[c]) idx.emplace(m, static_cast<int>(c));
  }
  return idx;
}

inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

// Vilain et al.: for each key cluster, |K| minus the number of response
// partitions it is split into (unmatched mentions count as singletons).
inline std::pair<double, double> muc_side(const std::vector<Cluster>& key, const std::vector<Cluster>& response) {
  const auto idx = cluster_index(response);
  double num = 0.0, den = 0.0;
  for (const auto& k : key) {
    std::set<int> parts;
    int unmatched = 0;
    for (const auto& m : k) {
      auto it = idx.find(m);
      if (it == idx.end()) ++unmatched;
      else parts.insert(it->second);
    }
    num += static_cast<double>(k.size()) - static_cast<double>(parts.size() + unmatched);
    den += static_cast<double>(k.size()) - 1.0;
  }
  return {num, den};
}

inline std::pair<double, double> b3_side(const std::vector<Cluster>& key, const std::vector<Cluster>& response) {
  const auto idx = cluster_index(response);
  double num = 0.0, den = 0.0;
  for (const auto& k : key) {
    std::map<int, int> overlap;
    for (const auto& m : k) {
      auto it = idx.find(m);
      if (it != idx.end()) ++overlap[it->second];
    }
    for (auto [r, common] : overlap) num += static_cast<double>(common) * common / static_cast<double>(k.size());
    den += static_cast<double>(k.size());
  }
  return {num, den};
}

inline int overlap_size(const Cluster& a, const Cluster& b) {
  std::set<Mention> sa(a.begin(), a.end());
  int n = 0;
  for (const auto& m : b) n += sa.count(m) ? 1 : 0;
  return n;
}

}  // namespace detail

inline double phi4(const Cluster& k, const Cluster& r) {
  const double common = detail::overlap_size(k, r);
  return 2.0 * common / static_cast<double>(k.size() + r.size());
}

inline MetricCounts muc_counts(const std::vector<Cluster>& gold, const std::vector<Cluster>& pred) {
  auto [rn, rd] = detail::muc_side(gold, pred);
  auto [pn, pd] = detail::muc_side(pred, gold);
  return {pn, pd, rn, rd};
}

inline MetricCounts b3_counts(const std::vector<Cluster>& gold, const std::vector<Cluster>& pred) {
  auto [rn, rd] = detail::b3_side(gold, pred);
  auto [pn, pd] = detail::b3_side(pred, gold);
  return {pn, pd, rn, rd};
}

inline MetricCounts ceafe_counts(const std::vector<Cluster>& gold, const std::vector<Cluster>& pred) {
  const auto m = optimal_cluster_matching<Cluster, Cluster>(gold, pred, phi4);
  return {m.total, static_cast<double>(pred.size()), m.total, static_cast<double>(gold.size())};
}

inline MetricCounts mention_counts(const CorefAnnotation& gold, const CorefAnnotation& pred) {
  std::set<Mention> g, p;
  for (const auto& s : gold.spans()) g.emplace(s.start, s.end);
  for (const auto& s : pred.spans()) p.emplace(s.start, s.end);
  double common = 0.0;
  for (const auto& m : p) common += g.count(m) ? 1.0 : 0.0;
  return {common, static_cast<double>(p.size()), common, static_cast<double>(g.size())};
}

inline CorpusCounts document_counts(const CorefAnnotation& gold, const CorefAnnotation& pred, const ScoreOptions& options = {}) {
  const auto g = scoring_clusters(gold, options.singletons);
  const auto p = scoring_clusters(pred, options.singletons);
  CorpusCounts c;
  c.muc = muc_counts(g, p);
  c.b3 = b3_counts(g, p);
  c.ceafe = ceafe_counts(g, p);
  c.mentions = mention_counts(gold, pred);
  c.documents = 1;
  return c;
}

namespace detail {

inline Prf finish(const MetricCounts& c, const std::string& name, std::vector<std::string>& flags) {
  if (c.p_den == 0.0) flags.push_back(name + ":precision-zero-denominator");
  if (c.r_den == 0.0) flags.push_back(name + ":recall-zero-denominator");
  Prf out{ratio(c.p_num, c.p_den), ratio(c.r_num, c.r_den), 0.0};
  const double s = out.precision + out.recall;
  out.f1 = s == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / s;
  return out;
}

}  // namespace detail

inline ScoreReport report_from(const CorpusCounts& c) {
  ScoreReport r;
  r.muc = detail::finish(c.muc, "muc", r.flags);
  r.b3 = detail::finish(c.b3, "b3", r.flags);
  r.ceafe = detail::finish(c.ceafe, "ceafe", r.flags);
  r.mentions = detail::finish(c.mentions, "mentions", r.flags);
  r.conll_avg = (r.muc.f1 + r.b3.f1 + r.ceafe.f1) / 3.0;
  r.documents = c.documents;
  r.gold_mentions = static_cast<int>(c.mentions.r_den);
  r.pred_mentions = static_cast<int>(c.mentions.p_den);
  return r;
}

inline ScoreReport score_document(const CorefAnnotation& gold, const CorefAnnotation& pred, const ScoreOptions& options = {}) {
  return report_from(document_counts(gold, pred, options));
}

// Corpus score. Both maps must have the same keys.
inline ScoreReport score(const std::map<std::string, CorefAnnotation>& gold,
                         const std::map<std::string, CorefAnnotation>& pred, const ScoreOptions& options = {}) {
  std::vector<std::string> missing;
  for (const auto& [k, _] : gold) {
    if (!pred.count(k)) missing.push_back(k);
  }
  for (const auto& [k, _] : pred) {
    if (!gold.count(k)) missing.push_back(k);
  }
  if (!missing.empty()) throw MissingDocuments(std::move(missing));
  CorpusCounts total;
  for (const auto& [k, g] : gold) total += document_counts(g, pred.at(k), options);
  return report_from(total);
}

inline Prf mention_detection_f1(const CorefAnnotation& gold, const CorefAnnotation& pred) {
  std::vector<std::string> flags;
  return detail::finish(mention_counts(gold, pred), "mentions", flags);
}

// Keeps only mentions present on both sides, then scores.
inline std::pair<CorefAnnotation, CorefAnnotation> restrict_to_common(const CorefAnnotation& gold, const CorefAnnotation& pred) {
  std::set<Mention> g, common;
  for (const auto& s : gold.spans()) g.emplace(s.start, s.end);
  for (const auto& s : pred.spans()) {
    if (g.count({s.start, s.end})) common.emplace(s.start, s.end);
  }
  auto filter = [&](const CorefAnnotation& a) {
    std::vector<Span> kept;
    for (const auto& s : a.spans()) {
      if (common.count({s.start, s.end})) kept.push_back(s);
    }
    return relabel(CorefAnnotation(std::move(kept)));
  };
  return {filter(gold), filter(pred)};
}

inline ScoreReport restricted_clustering_score(const std::map<std::string, CorefAnnotation>& gold,
                                               const std::map<std::string, CorefAnnotation>& pred,
                                               const ScoreOptions& options = {}) {
  std::map<std::string, CorefAnnotation> g, p;
  bool any = false;
  for (const auto& [k, ga] : gold) {
    auto it = pred.find(k);
    if (it == pred.end()) continue;
    auto [rg, rp] = restrict_to_common(ga, it->second);
    any = any || !rg.empty();
    g.emplace(k, std::move(rg));
    p.emplace(k, std::move(rp));
  }
  if (g.size() != gold.size() || g.size() != pred.size()) score(gold, pred, options);  // throws with the key list
  auto report = score(g, p, options);
  if (!any) report.flags.push_back("restricted:empty-intersection");
  return report;
}

inline ScoreReport restricted_clustering_score(const CorefAnnotation& gold, const CorefAnnotation& pred,
                                               const ScoreOptions& options = {}) {
  return restricted_clustering_score(std::map<std::string, CorefAnnotation>{{"doc", gold}},
                                     std::map<std::string, CorefAnnotation>{{"doc", pred}}, options);
}

// Columns MUC, B3, CEAF_phi4, then the average; values in percent.
inline void write_table(std::ostream& os, const ScoreReport& r) {
  auto old_flags = os.flags();
  auto old_precision = os.precision();
  os << std::fixed << std::setprecision(2);
  auto row = [&](const char* name, auto get) {
    os << std::left << std::setw(10) << name << std::right << std::setw(8) << 100 * get(r.muc) << std::setw(8)
       << 100 * get(r.b3) << std::setw(8) << 100 * get(r.ceafe);
  };
  os << std::left << std::setw(10) << "" << std::right << std::setw(8) << "MUC" << std::setw(8) << "B3" << std::setw(8)
     << "CEAFe" << std::setw(8) << "Avg" << '\n';
  row("P", [](const Prf& p) { return p.precision; });
  os << '\n';
  row("R", [](const Prf& p) { return p.recall; });
  os << '\n';
  row("F1", [](const Prf& p) { return p.f1; });
  os << std::setw(8) << 100 * r.conll_avg << '\n';
  os << "mentions  P " << 100 * r.mentions.precision << "  R " << 100 * r.mentions.recall << "  F1 "
     << 100 * r.mentions.f1 << '\n';
  os << "documents " << r.documents << "  gold mentions " << r.gold_mentions << "  predicted mentions "
     << r.pred_mentions << '\n';
  for (const auto& f : r.flags) os << "flag " << f << '\n';
  os.flags(old_flags);
  os.precision(old_precision);
}

inline nlohmann::json to_json(const Prf& p) { return {{"p", p.precision}, {"r", p.recall}, {"f1", p.f1}}; }

inline nlohmann::json to_json(const ScoreReport& r) {
  return {{"muc", to_json(r.muc)},
          {"b3", to_json(r.b3)},
          {"ceafe", to_json(r.ceafe)},
          {"conll_avg", r.conll_avg},
          {"mentions", to_json(r.mentions)},
          {"documents", r.documents},
          {"gold_mentions", r.gold_mentions},
          {"pred_mentions", r.pred_mentions},
          {"flags", r.flags}};
}

}  // namespace seqcoref
