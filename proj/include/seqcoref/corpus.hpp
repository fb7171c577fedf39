// Corpus input/output and data preparation.
//
// CoNLL-2012 column files: "#begin document (name); part NNN" ... "#end
// document", one token per line, blank lines between sentences, the word in
// column 4, the speaker in column 10 (when the row has at least 12 columns)
// and the coreference markers "(n", "n)", "(n)" joined by "|" in the last
// column. The document key is name + "_" + part number.
//
// Annotation records are JSON lines {doc_key, sentences, speakers?,
// clusters} with 0-based inclusive token offsets counted over the
// concatenated sentences.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqcoref/decoder.hpp"
#include "seqcoref/linearizer.hpp"
#include "seqcoref/model.hpp"
#include "seqcoref/scheme.hpp"

namespace seqcoref {

class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct AnnotatedDocument {
  Document document;
  CorefAnnotation annotation;
};

// ---------------------------------------------------------------------------
// CoNLL-2012

struct ConllDocument {
  std::string name;
  int part = 0;
  Document document;
  CorefAnnotation annotation;
  // All columns but the last, per token; empty when built from records.
  std::vector<std::vector<std::string>> columns;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) { return split_tokens(line); }

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline int parse_cluster_id(const std::string& s, std::size_t line) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw DataError("malformed coreference marker '" + s + "'", line);
  }
  return std::stoi(s);
}

// Splits "name_part" into its parts when the suffix is numeric.
inline std::pair<std::string, int> split_doc_key(const std::string& key) {
  auto pos = key.rfind('_');
  if (pos == std::string::npos || pos + 1 == key.size()) return {key, 0};
  const std::string suffix = key.substr(pos + 1);
  if (!std::all_of(suffix.begin(), suffix.end(), [](unsigned char c) { return std::isdigit(c); })) return {key, 0};
  return {key.substr(0, pos), std::stoi(suffix)};
}

}  // namespace detail

inline std::string conll_doc_key(const std::string& name, int part) { return name + "_" + std::to_string(part); }

inline std::vector<ConllDocument> read_conll(std::istream& in) {
  std::vector<ConllDocument> docs;
  std::optional<ConllDocument> cur;
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> sentence, speakers;
  // cluster id -> stack of (open start)
  std::map<int, std::vector<int>> stacks;
  std::vector<std::pair<Span, int>> spans;  // span with raw cluster id in .cluster
  std::set<std::tuple<int, int, int>> seen;
  std::size_t lineno = 0;
  std::string line;

  auto flush_sentence = [&]() {
    if (!sentence.empty()) sentences.push_back(std::move(sentence));
    sentence.clear();
  };
  auto add_span = [&](int start, int end, int id) {
    if (seen.insert({start, end, id}).second) spans.push_back({Span{start, end, id}, id});
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#begin document", 0) == 0) {
      if (cur) throw DataError("nested #begin document", lineno);
      cur.emplace();
      auto open = line.find('(');
      auto close = line.find(')', open == std::string::npos ? 0 : open);
      if (open == std::string::npos || close == std::string::npos) throw DataError("malformed #begin line", lineno);
      cur->name = line.substr(open + 1, close - open - 1);
      auto part = line.find("part", close);
      if (part != std::string::npos) {
        std::istringstream ps(line.substr(part + 4));
        ps >> cur->part;
      }
      sentences.clear();
      sentence.clear();
      speakers.clear();
      stacks.clear();
      spans.clear();
      seen.clear();
      continue;
    }
    if (line.rfind("#end document", 0) == 0) {
      if (!cur) throw DataError("#end document without #begin", lineno);
      flush_sentence();
      for (const auto& [id, st] : stacks) {
        if (!st.empty()) throw DataError("unclosed mention of cluster " + std::to_string(id), lineno);
      }
      cur->document = Document::from_sentences(conll_doc_key(cur->name, cur->part), sentences);
      if (!speakers.empty()) cur->document.speakers = speakers;
      std::map<int, int> labels;
      std::vector<Span> out;
      for (auto& [s, id] : spans) {
        auto [it, inserted] = labels.emplace(id, static_cast<int>(labels.size()) + 1);
        out.push_back({s.start, s.end, it->second});
      }
      cur->annotation = relabel(CorefAnnotation(std::move(out)));
      docs.push_back(std::move(*cur));
      cur.reset();
      continue;
    }
    if (!line.empty() && line[0] == '#') continue;
    auto cols = detail::split_ws(line);
    if (cols.empty()) {
      flush_sentence();
      continue;
    }
    if (!cur) throw DataError("token line outside a document", lineno);
    if (cols.size() < 5) throw DataError("expected at least 5 columns, found " + std::to_string(cols.size()), lineno);
    const int index = static_cast<int>(cur->columns.size()) + 1;
    sentence.push_back(cols[3]);
    if (cols.size() >= 12) speakers.push_back(cols[9]);
    const std::string coref = cols.back();
    cols.pop_back();
    cur->columns.push_back(std::move(cols));
    if (coref == "-") continue;
    for (const auto& part : detail::split_on(coref, '|')) {
      if (part.empty()) throw DataError("empty coreference marker", lineno);
      const bool opens = part.front() == '(';
      const bool closes = part.back() == ')';
      std::string body = part.substr(opens ? 1 : 0);
      if (closes) body.pop_back();
      const int id = detail::parse_cluster_id(body, lineno);
      if (opens && closes) {
        add_span(index, index, id);
      } else if (opens) {
        stacks[id].push_back(index);
      } else if (closes) {
        auto& st = stacks[id];
        if (st.empty()) throw DataError("close marker for cluster " + std::to_string(id) + " without an open", lineno);
        add_span(st.back(), index, id);
        st.pop_back();
      } else {
        throw DataError("malformed coreference marker '" + part + "'", lineno);
      }
    }
  }
  if (cur) throw DataError("missing #end document", lineno);
  for (auto& d : docs) {
    if (d.document.speakers && d.document.speakers->size() != d.document.tokens.size()) d.document.speakers.reset();
  }
  return docs;
}

inline std::vector<ConllDocument> read_conll_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_conll(in);
}

// Coreference field of every token: opens (outer first), singletons, then
// closes (inner first), cluster label l written as l - 1.
inline std::vector<std::string> coref_fields(const Document& doc, const CorefAnnotation& ann) {
  const auto v = validate(ann, doc);
  for (const auto& x : v.violations) {
    if (x.kind == ViolationKind::SpanOutOfRange || x.kind == ViolationKind::InvertedSpan) {
      throw DataError("cannot write " + doc.doc_key + ": " + to_string(x.kind) + " " + x.detail);
    }
  }
  const int n = doc.size();
  std::vector<std::vector<Span>> opens(n + 1), singles(n + 1), closes(n + 1);
  for (const auto& s : ann.spans()) {
    if (s.start == s.end) singles[s.start].push_back(s);
    else {
      opens[s.start].push_back(s);
      closes[s.end].push_back(s);
    }
  }
  std::vector<std::string> out(n);
  for (int i = 1; i <= n; ++i) {
    std::sort(opens[i].begin(), opens[i].end(), open_order_less);
    std::sort(singles[i].begin(), singles[i].end(), open_order_less);
    std::sort(closes[i].begin(), closes[i].end(), close_order_less);
    std::vector<std::string> parts;
    for (const auto& s : opens[i]) parts.push_back("(" + std::to_string(s.cluster - 1));
    for (const auto& s : singles[i]) parts.push_back("(" + std::to_string(s.cluster - 1) + ")");
    for (const auto& s : closes[i]) parts.push_back(std::to_string(s.cluster - 1) + ")");
    std::string field;
    for (std::size_t k = 0; k < parts.size(); ++k) field += (k ? "|" : "") + parts[k];
    out[static_cast<std::size_t>(i - 1)] = parts.empty() ? "-" : field;
  }
  return out;
}

inline void write_conll(std::ostream& os, const ConllDocument& d) {
  const auto fields = coref_fields(d.document, d.annotation);
  os << "#begin document (" << d.name << "); part " << std::setw(3) << std::setfill('0') << d.part << std::setfill(' ')
     << '\n';
  const bool have_cols = d.columns.size() == d.document.tokens.size();
  for (const auto& r : d.document.sentences) {
    for (int i = r.first; i <= r.last; ++i) {
      const auto k = static_cast<std::size_t>(i - 1);
      if (have_cols) {
        for (const auto& c : d.columns[k]) os << c << '\t';
      } else {
        const std::string speaker = d.document.speakers ? (*d.document.speakers)[k] : "-";
        os << d.name << '\t' << d.part << '\t' << (i - r.first) << '\t' << d.document.tokens[k] << "\t-\t-\t-\t-\t-\t"
           << speaker << "\t*\t";
      }
      os << fields[k] << '\n';
    }
    os << '\n';
  }
  os << "#end document\n";
}

inline ConllDocument to_conll_document(const Document& doc, const CorefAnnotation& ann) {
  auto [name, part] = detail::split_doc_key(doc.doc_key);
  return ConllDocument{name, part, doc, ann, {}};
}

// ---------------------------------------------------------------------------
// Annotation records

inline nlohmann::json to_record(const Document& doc, const CorefAnnotation& ann) {
  nlohmann::json sentences = nlohmann::json::array();
  nlohmann::json speakers = nlohmann::json::array();
  for (const auto& r : doc.sentences) {
    std::vector<std::string> s(doc.tokens.begin() + (r.first - 1), doc.tokens.begin() + r.last);
    sentences.push_back(s);
    if (doc.speakers) {
      std::vector<std::string> sp(doc.speakers->begin() + (r.first - 1), doc.speakers->begin() + r.last);
      speakers.push_back(sp);
    }
  }
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : ann.clusters()) {
    nlohmann::json cl = nlohmann::json::array();
    for (auto [s, e] : c) cl.push_back({s - 1, e - 1});
    clusters.push_back(cl);
  }
  nlohmann::json j{{"doc_key", doc.doc_key}, {"sentences", sentences}, {"clusters", clusters}};
  if (doc.speakers) j["speakers"] = speakers;
  return j;
}

inline AnnotatedDocument from_record(const nlohmann::json& j, std::size_t line = 0) {
  try {
    AnnotatedDocument out;
    const auto key = j.at("doc_key").get<std::string>();
    const auto sentences = j.at("sentences").get<std::vector<std::vector<std::string>>>();
    for (const auto& s : sentences) {
      if (s.empty()) throw DataError("empty sentence in " + key, line);
    }
    out.document = Document::from_sentences(key, sentences);
    if (j.contains("speakers") && !j["speakers"].is_null()) {
      const auto speakers = j["speakers"].get<std::vector<std::vector<std::string>>>();
      if (speakers.size() != sentences.size()) throw DataError("speakers do not match sentences in " + key, line);
      std::vector<std::string> flat;
      for (std::size_t i = 0; i < speakers.size(); ++i) {
        if (speakers[i].size() != sentences[i].size()) throw DataError("speakers do not match sentences in " + key, line);
        flat.insert(flat.end(), speakers[i].begin(), speakers[i].end());
      }
      out.document.speakers = std::move(flat);
    }
    std::vector<std::vector<std::pair<int, int>>> clusters;
    for (const auto& c : j.value("clusters", nlohmann::json::array())) {
      std::vector<std::pair<int, int>> cl;
      for (const auto& m : c) {
        const int s = m.at(0).get<int>() + 1, e = m.at(1).get<int>() + 1;
        if (s < 1 || e < s || e > out.document.size()) {
          throw DataError("mention [" + std::to_string(s - 1) + ", " + std::to_string(e - 1) + "] out of range in " + key, line);
        }
        cl.emplace_back(s, e);
      }
      clusters.push_back(std::move(cl));
    }
    out.annotation = CorefAnnotation::from_clusters(clusters);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad annotation record: ") + e.what(), line);
  }
}

inline std::vector<AnnotatedDocument> read_records(std::istream& in) {
  std::vector<AnnotatedDocument> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    out.push_back(from_record(j, lineno));
  }
  return out;
}

inline void write_record(std::ostream& os, const Document& doc, const CorefAnnotation& ann) {
  os << to_record(doc, ann).dump() << '\n';
}

// Reads either format; ".conll", ".gold_conll" and ".v4_gold_conll" files
// are CoNLL, everything else annotation records.
inline bool is_conll_path(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  return ext == ".conll" || ext == ".gold_conll" || ext == ".v4_gold_conll" || ext == ".auto_conll";
}

// Resolves a relative path that does not exist against $SEQCOREF_DATA.
inline std::string data_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::path(path).is_absolute() || fs::exists(path)) return path;
  if (const char* root = std::getenv("SEQCOREF_DATA")) {
    auto p = fs::path(root) / path;
    if (fs::exists(p)) return p.string();
  }
  return path;
}

inline std::vector<AnnotatedDocument> read_corpus(const std::string& path) {
  const auto resolved = data_path(path);
  std::ifstream in(resolved);
  if (!in) throw DataError("cannot open " + resolved);
  std::vector<AnnotatedDocument> out;
  if (is_conll_path(resolved)) {
    for (auto& d : read_conll(in)) out.push_back({std::move(d.document), std::move(d.annotation)});
  } else {
    out = read_records(in);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linearized pairs

inline nlohmann::json to_json(const LinearizedPair& p) {
  return {{"doc_key", p.doc_key}, {"scheme", to_string(p.scheme.representation)},
          {"sentence_markers", p.scheme.sentence_markers}, {"z", p.z}, {"y", p.y}};
}

inline LinearizedPair pair_from_json(const nlohmann::json& j, std::size_t line = 0) {
  try {
    LinearizedPair p;
    p.doc_key = j.at("doc_key").get<std::string>();
    p.scheme = parse_scheme(j.at("scheme").get<std::string>(), j.value("sentence_markers", false));
    p.z = j.at("z").get<std::vector<std::string>>();
    p.y = j.value("y", std::vector<std::string>{});
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad linearized record: ") + e.what(), line);
  } catch (const InvalidScheme& e) {
    throw DataError(e.what(), line);
  }
}

// ---------------------------------------------------------------------------
// Scripted scorers: {"doc_key": k, "steps": [{token: score, ...}, ...],
// "default": d}

inline std::map<std::string, ScriptedScorer> read_scripted_scorers(std::istream& in) {
  std::map<std::string, ScriptedScorer> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      std::vector<std::unordered_map<std::string, double>> steps;
      for (const auto& st : j.at("steps")) steps.push_back(st.get<std::unordered_map<std::string, double>>());
      out.insert_or_assign(j.at("doc_key").get<std::string>(), ScriptedScorer(std::move(steps), j.value("default", -10.0)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("bad scorer record: ") + e.what(), lineno);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Speaker insertion

struct SpeakerFormat {
  std::string open = "<speaker>";
  std::string close = "</speaker>";
};

struct SpeakerInsertion {
  Document document;
  std::vector<int> to_spliced;   // original index -> spliced index (1-based, slot 0 unused)
  std::vector<int> to_original;  // spliced index -> original index, 0 for inserted tokens

  CorefAnnotation forward(const CorefAnnotation& ann) const {
    std::vector<Span> out;
    for (const auto& s : ann.spans()) out.push_back({to_spliced[s.start], to_spliced[s.end], s.cluster});
    return CorefAnnotation(std::move(out));
  }

  // Spans touching inserted tokens are dropped.
  CorefAnnotation backward(const CorefAnnotation& ann) const {
    std::vector<Span> out;
    for (const auto& s : ann.spans()) {
      if (s.start < 1 || s.end >= static_cast<int>(to_original.size())) continue;
      const int a = to_original[s.start], b = to_original[s.end];
      if (a == 0 || b == 0) continue;
      out.push_back({a, b, s.cluster});
    }
    return relabel(CorefAnnotation(std::move(out)));
  }
};

// Splices "<speaker> name </speaker>" before the first token and before
// every token whose speaker differs from the previous one. Documents with
// no speakers or a single speaker are returned unchanged.
inline SpeakerInsertion insert_speakers(const Document& doc, const SpeakerFormat& format = {}) {
  SpeakerInsertion out;
  const int n = doc.size();
  out.to_spliced.resize(n + 1);
  bool splice = false;
  if (doc.speakers && static_cast<int>(doc.speakers->size()) == n) {
    std::set<std::string> distinct(doc.speakers->begin(), doc.speakers->end());
    splice = distinct.size() >= 2;
  }
  out.document.doc_key = doc.doc_key;
  out.to_original.push_back(0);
  std::vector<std::string> speakers;
  for (const auto& r : doc.sentences) {
    const int first = out.document.size() + 1;
    for (int i = r.first; i <= r.last; ++i) {
      const auto k = static_cast<std::size_t>(i - 1);
      if (splice && (i == 1 || (*doc.speakers)[k] != (*doc.speakers)[k - 1])) {
        std::vector<std::string> words{format.open};
        for (auto& w : split_tokens((*doc.speakers)[k])) words.push_back(w);
        words.push_back(format.close);
        for (auto& w : words) {
          out.document.tokens.push_back(w);
          out.to_original.push_back(0);
          speakers.push_back((*doc.speakers)[k]);
        }
      }
      out.document.tokens.push_back(doc.tokens[k]);
      out.to_original.push_back(i);
      out.to_spliced[i] = out.document.size();
      if (doc.speakers) speakers.push_back((*doc.speakers)[k]);
    }
    out.document.sentences.push_back({first, out.document.size()});
  }
  if (doc.speakers) out.document.speakers = std::move(speakers);
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation

// Cost of one word in segment-length units.
using TokenCounter = std::function<int(const std::string&)>;

struct PrepConfig {
  int max_length = 2048;
  int overlap = 1024;
  bool insert_speakers = false;
  bool sentence_markers = false;
  int inference_max_length = 4096;
  TokenCounter counter;  // one unit per word when empty

  void check() const {
    if (max_length < 1) throw std::invalid_argument("max segment length must be positive");
    if (overlap < 0 || overlap >= max_length) throw std::invalid_argument("overlap must be in [0, max length)");
  }
};

struct Segment {
  std::string parent_doc_key;
  int index = 0;
  TokenRange range;  // in the parent document
  Document document;
  CorefAnnotation annotation;
  int dropped = 0;
};

// Token ranges of the segments; windows of at most max_length units with
// starts max_length - overlap units apart.
inline std::vector<TokenRange> segment_ranges(const Document& doc, const PrepConfig& cfg) {
  cfg.check();
  const int n = doc.size();
  std::vector<long long> prefix(n + 1, 0);
  for (int i = 1; i <= n; ++i) prefix[i] = prefix[i - 1] + (cfg.counter ? std::max(cfg.counter(doc.token(i)), 0) : 1);
  const long long stride = cfg.max_length - cfg.overlap;
  std::vector<TokenRange> out;
  int start = 1;
  while (start <= n) {
    int end = start;
    while (end < n && prefix[end + 1] - prefix[start - 1] <= cfg.max_length) ++end;
    out.push_back({start, end});
    if (end == n) break;
    int next = start + 1;
    while (next <= end && prefix[next - 1] - prefix[start - 1] < stride) ++next;
    start = next;
  }
  return out;
}

inline std::vector<Segment> segment(const Document& doc, const CorefAnnotation& ann, const PrepConfig& cfg = {}) {
  std::vector<Segment> out;
  int index = 0;
  for (const auto& r : segment_ranges(doc, cfg)) {
    Segment seg;
    seg.parent_doc_key = doc.doc_key;
    seg.index = index++;
    seg.range = r;
    seg.document.doc_key = doc.doc_key + "#" + std::to_string(seg.index);
    seg.document.tokens.assign(doc.tokens.begin() + (r.first - 1), doc.tokens.begin() + r.last);
    if (doc.speakers) seg.document.speakers = std::vector<std::string>(doc.speakers->begin() + (r.first - 1), doc.speakers->begin() + r.last);
    for (const auto& s : doc.sentences) {
      const int a = std::max(s.first, r.first), b = std::min(s.last, r.last);
      if (a <= b) seg.document.sentences.push_back({a - r.first + 1, b - r.first + 1});
    }
    auto restricted = restrict_annotation(ann, r);
    seg.annotation = std::move(restricted.annotation);
    seg.dropped = restricted.dropped;
    out.push_back(std::move(seg));
  }
  return out;
}

// Maps segment-local predictions to document coordinates and unions two
// clusters from different segments whenever they share an identical span.
inline CorefAnnotation merge_segment_predictions(const std::vector<std::pair<Segment, CorefAnnotation>>& parts) {
  std::vector<std::pair<std::size_t, int>> nodes;  // (segment, local label)
  std::map<std::pair<std::size_t, int>, int> node_id;
  auto node = [&](std::size_t seg, int label) {
    auto [it, inserted] = node_id.emplace(std::make_pair(seg, label), static_cast<int>(nodes.size()));
    if (inserted) nodes.emplace_back(seg, label);
    return it->second;
  };
  std::vector<std::pair<std::pair<int, int>, int>> mentions;  // document span, node
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const int offset = parts[k].first.range.first - 1;
    for (const auto& s : parts[k].second.spans()) {
      mentions.push_back({{s.start + offset, s.end + offset}, node(k, s.cluster)});
    }
  }
  std::vector<int> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  std::map<std::pair<int, int>, std::vector<int>> by_span;
  for (const auto& [m, n] : mentions) by_span[m].push_back(n);
  for (const auto& [m, ns] : by_span) {
    for (std::size_t a = 0; a < ns.size(); ++a) {
      for (std::size_t b = a + 1; b < ns.size(); ++b) {
        if (nodes[ns[a]].first != nodes[ns[b]].first) parent[find(ns[a])] = find(ns[b]);
      }
    }
  }
  std::set<std::tuple<int, int, int>> seen;
  std::vector<Span> out;
  for (const auto& [m, n] : mentions) {
    const int root = find(n) + 1;
    if (seen.insert({m.first, m.second, root}).second) out.push_back({m.first, m.second, root});
  }
  return relabel(CorefAnnotation(std::move(out)));
}

}  // namespace seqcoref
