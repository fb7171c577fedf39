// seqcoref command-line tool. Records are newline-delimited JSON; errors are
// a single JSON line on stderr with exit status 1 (data) or 2 (usage).

#include <CLI11.hpp>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "seqcoref/seqcoref.hpp"

using namespace seqcoref;
using nlohmann::json;

namespace {


struct Options {
  std::string scheme = "full-copy";
  bool sentence_markers = false;
  double gap_slope = 0.0;
  int beam = 4;
  std::string profile = "preco";
  std::string format = "jsonl";
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string trace;
  std::string dump_alignment;
  std::string output;

  Scheme parsed_scheme() const { return parse_scheme(scheme, sentence_markers); }
  AlignOptions align() const {
    AlignOptions a;
    a.scores.gap_slope = gap_slope;
    return a;
  }
  ScoreOptions score() const {
    ScoreOptions s;
    s.singletons = parse_profile(profile);
    return s;
  }
};

// Document-parallel map preserving input order.
template <class T, class F>
auto parallel_map(const std::vector<T>& items, int jobs, F&& fn) {
  using R = decltype(fn(items.front(), std::size_t{0}));
  std::vector<std::optional<R>> out(items.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < items.size();) {
      try {
        out[i] = fn(items[i], i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(items.size())));
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  std::vector<R> result;
  result.reserve(out.size());
  for (auto& r : out) result.push_back(std::move(*r));
  return result;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw DataError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(data_path(path));
  if (!in) throw DataError("cannot open " + data_path(path));
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      j["__line"] = lineno;
      out.push_back(std::move(j));
    } catch (const json::parse_error& e) {
      throw DataError(std::string("invalid JSON: ") + e.what(), lineno);
    }
  }
  return out;
}

std::size_t line_of(const json& j) { return j.value("__line", std::size_t{0}); }

// Documents for sequence records: embedded sentences, else --documents.
class DocumentSource {
 public:
  explicit DocumentSource(const std::string& path) {
    if (path.empty()) return;
    for (auto& d : read_corpus(path)) docs_.emplace(d.document.doc_key, std::move(d.document));
  }

  Document get(const json& rec) const {
    const auto key = rec.at("doc_key").get<std::string>();
    if (rec.contains("sentences")) {
      json only{{"doc_key", key}, {"sentences", rec["sentences"]}};
      if (rec.contains("speakers")) only["speakers"] = rec["speakers"];
      return from_record(only, line_of(rec)).document;
    }
    auto it = docs_.find(key);
    if (it == docs_.end()) throw DataError("no document for " + key, line_of(rec));
    return it->second;
  }

 private:
  std::map<std::string, Document> docs_;
};

Scheme record_scheme(const json& rec, const Options& opts, const CLI::App& app) {
  const bool flag_given = app.count("--scheme") > 0 || app.count("--sentence-markers") > 0;
  if (rec.contains("scheme") && !flag_given) {
    try {
      return parse_scheme(rec["scheme"].get<std::string>(), rec.value("sentence_markers", false));
    } catch (const InvalidScheme& e) {
      throw DataError(e.what(), line_of(rec));
    }
  }
  return opts.parsed_scheme();
}

json diagnostics_json(const Diagnostics& d) {
  json j = json::object();
  for (const auto& [k, v] : d.summary()) j[k] = v;
  return j;
}

void write_annotations(std::ostream& os, const Options& opts, const std::vector<std::pair<Document, CorefAnnotation>>& docs,
                       const std::vector<json>& extra) {
  if (opts.format == "conll") {
    for (const auto& [doc, ann] : docs) write_conll(os, to_conll_document(doc, ann));
    return;
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto j = to_record(docs[i].first, docs[i].second);
    if (i < extra.size()) j.update(extra[i]);
    os << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

int cmd_encode(const Options& opts, const std::string& corpus) {
  const auto scheme = opts.parsed_scheme();
  const auto docs = read_corpus(corpus);
  const auto lines = parallel_map(docs, opts.jobs, [&](const AnnotatedDocument& d, std::size_t) {
    const auto check = validate(d.annotation, d.document);
    if (!check.ok()) {
      std::string why;
      for (const auto& v : check.violations) why += std::string(" ") + to_string(v.kind) + " " + v.detail;
      throw DataError("invalid annotation in " + d.document.doc_key + ":" + why);
    }
    auto p = linearize(d.document, d.annotation, scheme);
    auto j = to_json(p);
    j["sentences"] = to_record(d.document, CorefAnnotation())["sentences"];
    return j.dump();
  });
  Output out(opts.output);
  for (const auto& l : lines) out.stream() << l << '\n';
  return 0;
}

int cmd_decode(const Options& opts, const CLI::App& app, const std::string& input, const std::string& documents,
               const std::string& mode, const std::string& scorer_name) {
  const DocumentSource source(documents);
  const auto records = read_jsonl(input);
  std::ofstream trace;
  if (!opts.trace.empty()) {
    trace.open(opts.trace);
    if (!trace) throw DataError("cannot write " + opts.trace);
  }
  struct Decoded {
    Document doc;
    CorefAnnotation ann;
    json extra;
    std::string trace;
  };
  const auto results = parallel_map(records, opts.jobs, [&](const json& rec, std::size_t index) {
    const Document doc = source.get(rec);
    const Scheme scheme = record_scheme(rec, opts, app);
    std::vector<std::string> z;
    try {
      z = rec.at("z").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw DataError(std::string("bad sequence record: ") + e.what(), line_of(rec));
    }
    Decoded d{doc, {}, json::object(), {}};
    if (mode == "repair") {
      if (z.empty() || z.front() != "<s>") z.insert(z.begin(), "<s>");
      auto [ann, diag] = interpret(doc, z, scheme, {}, {}, opts.align());
      d.ann = std::move(ann);
      d.extra["diagnostics"] = diagnostics_json(diag);
    } else {
      DecodeOptions dopts;
      dopts.beam = opts.beam;
      dopts.align = opts.align();
      std::ostringstream tr;
      if (trace.is_open()) dopts.trace = &tr;
      std::vector<std::string> script = z;
      if (rec.contains("y")) script = rec["y"].get<std::vector<std::string>>();
      Scorer scorer = ScriptedScorer::following(script);
      if (scorer_name == "random") scorer = RandomScorer(opts.seed + index);
      if (scorer_name == "adversarial") scorer = AdversarialScorer(opts.seed + index);
      auto r = decode(doc, scorer, scheme, dopts);
      d.ann = std::move(r.annotation);
      d.extra["z"] = r.z;
      d.extra["truncated"] = r.truncated;
      d.extra["diagnostics"] = diagnostics_json(r.diagnostics);
      d.trace = tr.str();
    }
    return d;
  });
  Output out(opts.output);
  std::vector<std::pair<Document, CorefAnnotation>> docs;
  std::vector<json> extra;
  for (const auto& r : results) {
    docs.push_back({r.doc, r.ann});
    extra.push_back(r.extra);
    if (trace.is_open()) trace << "# " << r.doc.doc_key << '\n' << r.trace;
  }
  write_annotations(out.stream(), opts, docs, extra);
  return 0;
}

int cmd_align(const Options& opts, const CLI::App& app, const std::string& input, const std::string& documents) {
  const DocumentSource source(documents);
  const auto records = read_jsonl(input);
  std::ofstream dump;
  if (!opts.dump_alignment.empty()) {
    dump.open(opts.dump_alignment);
    if (!dump) throw DataError("cannot write " + opts.dump_alignment);
  }
  const auto results = parallel_map(records, opts.jobs, [&](const json& rec, std::size_t) {
    const Document doc = source.get(rec);
    const Scheme scheme = record_scheme(rec, opts, app);
    if (!scheme.is_partial()) throw DataError("align needs a partial scheme, got " + to_string(scheme), line_of(rec));
    auto z = rec.at("z").get<std::vector<std::string>>();
    if (z.empty() || z.front() != "<s>") z.insert(z.begin(), "<s>");
    if (z.back() != "</s>") z.push_back("</s>");
    return std::make_pair(doc, align_partial(doc, z, scheme, opts.align()));
  });
  Output out(opts.output);
  std::vector<std::pair<Document, CorefAnnotation>> docs;
  std::vector<json> extra;
  for (const auto& [doc, r] : results) {
    docs.push_back({doc, r.annotation});
    extra.push_back({{"dropped", r.dropped}, {"alignment_score", r.alignment.score}, {"diagnostics", diagnostics_json(r.diagnostics)}});
    if (dump.is_open()) {
      dump << "# " << doc.doc_key << '\n';
      write_alignment(dump, r.alignment);
    }
  }
  write_annotations(out.stream(), opts, docs, extra);
  return 0;
}

std::map<std::string, CorefAnnotation> annotations_of(const std::string& path) {
  std::map<std::string, CorefAnnotation> out;
  for (auto& d : read_corpus(path)) out[d.document.doc_key] = std::move(d.annotation);
  return out;
}

void write_report(std::ostream& os, const Options& opts, const ScoreReport& r, json extra = json::object()) {
  if (opts.format == "table") {
    write_table(os, r);
    return;
  }
  auto j = to_json(r);
  j.update(extra);
  os << j.dump() << '\n';
}

int cmd_score(const Options& opts, const std::string& gold, const std::string& pred) {
  const auto r = score(annotations_of(gold), annotations_of(pred), opts.score());
  Output out(opts.output);
  write_report(out.stream(), opts, r);
  return 0;
}

int cmd_roundtrip(const Options& opts, const std::string& corpus) {
  const auto scheme = opts.parsed_scheme();
  const auto docs = read_corpus(corpus);
  const auto decoded = parallel_map(docs, opts.jobs, [&](const AnnotatedDocument& d, std::size_t) {
    auto p = linearize(d.document, d.annotation, scheme);
    auto [ann, diag] = interpret(d.document, p.z_terminated(), scheme, {}, {}, opts.align());
    return std::make_pair(d.document.doc_key, ann);
  });
  std::map<std::string, CorefAnnotation> gold, pred;
  for (const auto& d : docs) gold[d.document.doc_key] = d.annotation;
  for (const auto& [k, a] : decoded) pred[k] = a;
  const auto r = score(gold, pred, opts.score());
  int imperfect = 0;
  for (const auto& d : docs) imperfect += !same_clustering(gold[d.document.doc_key], pred[d.document.doc_key]);
  Output out(opts.output);
  write_report(out.stream(), opts, r, {{"scheme", to_string(scheme)}, {"imperfect_documents", imperfect}});
  if (scheme.is_full() && imperfect > 0) {
    throw DataError("round trip is not exact for " + std::to_string(imperfect) + " document(s) under " + to_string(scheme));
  }
  return 0;
}

int cmd_oracle_align(const Options& opts, const std::string& corpus) {
  Scheme scheme{Representation::PartialToken, opts.sentence_markers};
  const auto docs = read_corpus(corpus);
  std::ofstream dump;
  if (!opts.dump_alignment.empty()) {
    dump.open(opts.dump_alignment);
    if (!dump) throw DataError("cannot write " + opts.dump_alignment);
  }
  const auto results = parallel_map(docs, opts.jobs, [&](const AnnotatedDocument& d, std::size_t) {
    auto p = linearize(d.document, d.annotation, scheme);
    return align_partial(d.document, p.z_terminated(), scheme, opts.align());
  });
  std::map<std::string, CorefAnnotation> gold, pred;
  int dropped = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    gold[docs[i].document.doc_key] = docs[i].annotation;
    pred[docs[i].document.doc_key] = results[i].annotation;
    dropped += results[i].dropped;
    if (dump.is_open()) {
      dump << "# " << docs[i].document.doc_key << '\n';
      write_alignment(dump, results[i].alignment);
    }
  }
  Output out(opts.output);
  write_report(out.stream(), opts, score(gold, pred, opts.score()),
               {{"scheme", to_string(scheme)}, {"gap_slope", opts.gap_slope}, {"dropped", dropped}});
  return 0;
}

int cmd_segment(const Options& opts, const std::string& corpus, const PrepConfig& cfg) {
  cfg.check();
  const auto docs = read_corpus(corpus);
  Output out(opts.output);
  for (const auto& d : docs) {
    Document doc = d.document;
    CorefAnnotation ann = d.annotation;
    if (cfg.insert_speakers) {
      auto ins = insert_speakers(doc);
      ann = ins.forward(ann);
      doc = ins.document;
    }
    for (const auto& s : segment(doc, ann, cfg)) {
      auto j = to_record(s.document, s.annotation);
      j["parent_doc_key"] = s.parent_doc_key;
      j["range"] = {s.range.first - 1, s.range.last - 1};
      j["dropped"] = s.dropped;
      out.stream() << j.dump() << '\n';
    }
  }
  return 0;
}

void fail(int code, const std::string& kind, const std::string& message, std::size_t line = 0) {
  json j{{"error", kind}, {"message", message}};
  if (line) j["line"] = line;
  std::cerr << j.dump() << std::endl;
  std::exit(code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence-to-sequence coreference toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with default flag values; flags given on the command line win");
  Options opts;
  app.add_option("--scheme", opts.scheme,
                 "full-token | full-copy | full-integer-free | full-integer-before | full-antecedent | partial-token")
      ->capture_default_str();
  app.add_flag("--sentence-markers", opts.sentence_markers, "wrap sentences in markers (partial only)");
  app.add_option("--gap-slope", opts.gap_slope, "affine gap slope p")->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--beam", opts.beam, "beam width")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--profile", opts.profile, "singleton profile: preco (keep) | ontonotes (drop)")->capture_default_str();
  app.add_option("--format", opts.format, "output format")->capture_default_str()->check(CLI::IsMember({"jsonl", "json", "conll", "table"}));
  app.add_option("--seed", opts.seed, "seed for every random choice")->capture_default_str();
  app.add_option("--jobs", opts.jobs, "documents processed in parallel")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--trace", opts.trace, "decode: write per-step trace to this file");
  app.add_option("--dump-alignment", opts.dump_alignment, "align/oracle-align: write aligned pairs to this file");
  app.add_option("-o,--output", opts.output, "output file (default stdout)");

  std::string corpus, input, documents, gold, pred, mode = "constrained", scorer = "follow";
  auto* encode = app.add_subcommand("encode", "corpus -> linearized pairs");
  encode->add_option("corpus", corpus, "CoNLL or JSONL annotation records")->required();

  auto* decode_cmd = app.add_subcommand("decode", "sequences -> annotations");
  decode_cmd->add_option("input", input, "JSONL records with doc_key and z (sentences optional)")->required();
  decode_cmd->add_option("--documents", documents, "documents for records without sentences; clusters are ignored");
  decode_cmd->add_option("--mode", mode, "constrained: replay through the masked beam search; repair: parse with repairs")
      ->capture_default_str()
      ->check(CLI::IsMember({"constrained", "repair"}));
  decode_cmd->add_option("--scorer", scorer, "follow the input sequence, or ignore it and score randomly/adversarially")
      ->capture_default_str()
      ->check(CLI::IsMember({"follow", "random", "adversarial"}));

  auto* align = app.add_subcommand("align", "partial sequences -> annotations");
  align->add_option("input", input, "JSONL records with doc_key and z")->required();
  align->add_option("--documents", documents, "documents for records without sentences");

  auto* score_cmd = app.add_subcommand("score", "gold + predictions -> MUC, B3, CEAFe");
  score_cmd->add_option("gold", gold)->required();
  score_cmd->add_option("pred", pred)->required();

  auto* roundtrip = app.add_subcommand("roundtrip", "encode, decode and score against gold");
  roundtrip->add_option("corpus", corpus)->required();

  auto* oracle = app.add_subcommand("oracle-align", "align gold partial linearizations and score");
  oracle->add_option("corpus", corpus)->required();

  PrepConfig prep;
  auto* seg = app.add_subcommand("segment", "corpus -> overlapping segments");
  seg->add_option("corpus", corpus)->required();
  seg->add_option("--max-length", prep.max_length, "segment length in words")->capture_default_str();
  seg->add_option("--overlap", prep.overlap, "overlap between neighbouring segments")->capture_default_str();
  seg->add_flag("--speakers", prep.insert_speakers, "insert speaker markup before segmenting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail(2, "usage", e.what());
  }

  try {
    if (*encode) return cmd_encode(opts, corpus);
    if (*decode_cmd) return cmd_decode(opts, app, input, documents, mode, scorer);
    if (*align) return cmd_align(opts, app, input, documents);
    if (*score_cmd) return cmd_score(opts, gold, pred);
    if (*roundtrip) return cmd_roundtrip(opts, corpus);
    if (*oracle) return cmd_oracle_align(opts, corpus);
    if (*seg) return cmd_segment(opts, corpus, prep);
  } catch (const DataError& e) {
    fail(1, "data", e.what(), e.line());
  } catch (const MissingDocuments& e) {
    fail(1, "data", e.what());
  } catch (const InvalidScheme& e) {
    fail(2, "usage", e.what());
  } catch (const std::invalid_argument& e) {
    fail(2, "usage", e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(1, "data", e.what());
  } catch (const std::exception& e) {
    fail(1, "data", e.what());
  }
  return 0;
}
