#include <gtest/gtest.h>

#include "seqcoref/linearizer.hpp"

using namespace seqcoref;

namespace {

using Toks = std::vector<std::string>;

Toks toks(const std::string& s) { return split_tokens(s); }

Document abcde() { return Document::from_tokens("d", {"a", "b", "c", "d", "e"}); }
CorefAnnotation running_example() { return CorefAnnotation({{2, 2, 1}, {5, 5, 2}, {2, 3, 2}}); }

const Scheme kFullToken{Representation::FullToken, false};
const Scheme kFullCopy{Representation::FullCopy, false};
const Scheme kIntegerFree{Representation::FullIntegerFree, false};
const Scheme kIntegerBefore{Representation::FullIntegerBefore, false};
const Scheme kAntecedent{Representation::FullAntecedentString, false};
const Scheme kPartial{Representation::PartialToken, false};
const Scheme kPartialMarkers{Representation::PartialToken, true};

}  // namespace

TEST(Linearize, FullTokenRunningExample) {
  auto p = linearize(abcde(), running_example(), kFullToken);
  EXPECT_EQ(p.z, toks("<s> a <m> <m> b | 1 </m> c | 2 </m> d <m> e | 2 </m>"));
  EXPECT_EQ(p.y.size(), p.z.size());
  EXPECT_EQ(p.y.back(), "</s>");
}

TEST(Linearize, PartialRunningExample) {
  auto p = linearize(abcde(), running_example(), kPartial);
  EXPECT_EQ(p.z, toks("<s> <m> <m> b | 1 </m> c | 2 </m> <m> e | 2 </m>"));
}

TEST(Linearize, TokenActionTwoTokens) {
  auto p = linearize(Document::from_tokens("d", {"a", "b"}), CorefAnnotation({{2, 2, 1}}), kFullToken);
  EXPECT_EQ(p.y, toks("a <m> b | 1 </m> </s>"));
  EXPECT_EQ(p.z_terminated(), toks("<s> a <m> b | 1 </m> </s>"));
}

TEST(Linearize, CopyActionTwoTokens) {
  auto p = linearize(Document::from_tokens("d", {"a", "b"}), CorefAnnotation({{2, 2, 1}}), kFullCopy);
  EXPECT_EQ(p.y, toks("<c> <m> <c> | 1 </m> </s>"));
}

TEST(Linearize, IntegerFreeTwoTokens) {
  auto p = linearize(Document::from_tokens("d", {"a", "b"}), CorefAnnotation({{1, 1, 1}, {2, 2, 1}}), kIntegerFree);
  EXPECT_EQ(p.y, toks("<m> <c> <new> <m> <c> </m_1> </s>"));
  EXPECT_EQ(p.z_terminated(), toks("<s> <m> a </m_1> <m> b </m_1> </s>"));
}

TEST(Linearize, NoMentions) {
  auto p = linearize(abcde(), CorefAnnotation(), kFullToken);
  EXPECT_EQ(p.z, toks("<s> a b c d e"));
  EXPECT_EQ(p.y, toks("a b c d e </s>"));
}

TEST(Linearize, TokenActionIsShiftedInput) {
  auto p = linearize(abcde(), running_example(), kFullToken);
  Toks shifted(p.z.begin() + 1, p.z.end());
  shifted.push_back("</s>");
  EXPECT_EQ(p.y, shifted);
}

TEST(Linearize, IntegerBeforePutsLabelAfterOpen) {
  auto p = linearize(abcde(), running_example(), kIntegerBefore);
  // Labels by open order: (2,3) opens first.
  EXPECT_EQ(p.z, toks("<s> a <m> 1 | <m> 2 | b </m> c </m> d <m> 1 | e </m>"));
  EXPECT_EQ(p.y, toks("<c> <m> 1 | <m> 2 | <c> </m> <c> </m> <c> <m> 1 | <c> </m> </s>"));
}

TEST(Linearize, IdenticalBoundariesCloseInLabelOrder) {
  auto doc = Document::from_tokens("d", {"a", "b"});
  auto p = linearize(doc, CorefAnnotation({{1, 1, 1}, {2, 2, 2}, {2, 2, 1}}), kFullToken);
  EXPECT_EQ(p.z, toks("<s> <m> a | 1 </m> <m> <m> b | 1 </m> | 2 </m>"));
}

TEST(Linearize, AntecedentString) {
  auto p = to_antecedent_string(abcde(), CorefAnnotation({{2, 3, 1}, {5, 5, 1}}));
  EXPECT_EQ(p.z, toks("<s> a <m> b c | b c </m> d <m> e | b c </m>"));
}

TEST(Linearize, AntecedentSingletonUsesOwnForm) {
  auto p = to_antecedent_string(abcde(), CorefAnnotation({{4, 4, 1}}));
  EXPECT_EQ(p.z, toks("<s> a b c <m> d | d </m> e"));
}

TEST(Linearize, SentenceMarkers) {
  auto doc = Document::from_sentences("d", {{"a", "b"}, {"c", "d"}});
  auto p = linearize(doc, CorefAnnotation({{2, 2, 1}, {4, 4, 1}}), kPartialMarkers);
  EXPECT_EQ(p.z, toks("<s> <sentence> <m> b | 1 </m> </sentence> <sentence> <m> d | 1 </m> </sentence>"));
}

TEST(Linearize, Rejections) {
  auto doc = abcde();
  EXPECT_THROW(linearize(doc, CorefAnnotation({{6, 6, 1}}), kFullToken), LinearizeError);
  EXPECT_THROW(linearize(doc, CorefAnnotation({{1, 1, 1}}), Scheme{Representation::FullCopy, true}), InvalidScheme);
  auto bad = Document::from_tokens("d", {"a", "<m>"});
  EXPECT_THROW(linearize(bad, CorefAnnotation(), kFullToken), SymbolCollision);
  SymbolTable small;
  small.max_clusters = 1;
  EXPECT_THROW(linearize(doc, running_example(), kIntegerFree, small), LinearizeError);
  EXPECT_NO_THROW(linearize(doc, running_example(), kFullToken, small));
  auto two = Document::from_sentences("d", {{"a", "b"}, {"c"}});
  EXPECT_THROW(linearize(two, CorefAnnotation({{2, 3, 1}}), kPartialMarkers), LinearizeError);
}

TEST(Linearize, SchemeNames) {
  EXPECT_EQ(parse_scheme("full-copy"), kFullCopy);
  EXPECT_THROW(parse_scheme("partial-copy"), InvalidScheme);
  EXPECT_THROW(parse_scheme("full-token", true), InvalidScheme);
  EXPECT_THROW(parse_scheme("nonsense"), InvalidScheme);
  for (auto [rep, name] : kRepresentationNames) EXPECT_EQ(parse_scheme(name).representation, rep);
}

TEST(Delinearize, RunningExampleRoundTrip) {
  auto doc = abcde();
  for (auto scheme : {kFullToken, kFullCopy, kIntegerFree, kIntegerBefore}) {
    auto p = linearize(doc, running_example(), scheme);
    auto from_z = delinearize(p.z_terminated(), doc, scheme);
    EXPECT_EQ(from_z.annotation, canonical_labels(running_example(), scheme)) << to_string(scheme);
    EXPECT_TRUE(from_z.diagnostics.empty()) << to_string(scheme);
    auto from_y = delinearize(p.y, doc, scheme);
    EXPECT_EQ(from_y.annotation, canonical_labels(running_example(), scheme)) << to_string(scheme);
  }
}

TEST(Delinearize, UnclosedMentionIsDropped) {
  auto doc = abcde();
  auto r = delinearize(toks("<s> a <m> b | 1 </m> c <m> d e </s>"), doc, kFullToken);
  EXPECT_EQ(r.annotation, CorefAnnotation({{2, 2, 1}}));
  EXPECT_EQ(r.diagnostics.count(Defect::UnclosedMention), 1);
  EXPECT_EQ(r.diagnostics.repairs(), 1);
}

TEST(Delinearize, PartialLocalSpans) {
  auto r = delinearize(toks("<s> <m> b | 1 </m> <m> b | 1 </m> </s>"), abcde(), kPartial);
  EXPECT_EQ(r.annotation, CorefAnnotation({{1, 1, 1}, {2, 2, 1}}));
}

TEST(Delinearize, MissingIntegerDropsMention) {
  auto r = delinearize(toks("<s> a <m> b | </m> c d e </s>"), abcde(), kFullToken);
  EXPECT_TRUE(r.annotation.empty());
  EXPECT_EQ(r.diagnostics.count(Defect::MissingIdentity), 1);
}

TEST(Delinearize, LargeLabelIsClampedToNewCluster) {
  auto r = delinearize(toks("<s> a <m> b | 7 </m> <m> c | 9 </m> d e </s>"), abcde(), kFullToken);
  EXPECT_EQ(r.annotation, CorefAnnotation({{2, 2, 1}, {3, 3, 2}}));
  EXPECT_EQ(r.diagnostics.count(Defect::ClampedLabel), 2);
}

TEST(Delinearize, MultiTokenIntegers) {
  SymbolTable sym;
  sym.integers = IntegerSpelling::Digits;
  std::vector<Span> spans;
  std::vector<std::string> words;
  for (int i = 1; i <= 12; ++i) {
    words.push_back("w" + std::to_string(i));
    spans.push_back({i, i, i});
  }
  auto doc = Document::from_tokens("d", words);
  auto p = linearize(doc, CorefAnnotation(spans), kFullToken, sym);
  EXPECT_NE(std::find(p.z.begin(), p.z.end(), "2"), p.z.end());
  auto r = delinearize(p.z_terminated(), doc, kFullToken, sym);
  EXPECT_EQ(r.annotation, CorefAnnotation(spans));
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(Delinearize, SkippedSourceResynchronises) {
  auto r = delinearize(toks("<s> a <m> c | 1 </m> d e </s>"), abcde(), kFullToken);
  EXPECT_EQ(r.annotation, CorefAnnotation({{3, 3, 1}}));
  EXPECT_EQ(r.diagnostics.count(Defect::SkippedSource), 1);
}

TEST(Delinearize, RepairBudget) {
  Toks seq{"<s>"};
  for (int i = 0; i < 80; ++i) seq.push_back("</m>");
  EXPECT_THROW(delinearize(seq, abcde(), kFullToken), ParseError);
  try {
    delinearize(seq, abcde(), kFullToken);
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 65u);
  }
  DelinearizeOptions loose;
  loose.max_repairs = 1000;
  EXPECT_NO_THROW(delinearize(seq, abcde(), kFullToken, {}, loose));
}

TEST(Antecedent, ResolvesToEarliestMatchingMention) {
  auto doc = Document::from_tokens("d", {"b", "x", "b", "y", "b"});
  // Two earlier singleton clusters share the form "b"; the third mention
  // links to "b" and must resolve to the first.
  auto r = from_antecedent_string(toks("<s> <m> b | b </m> x <m> b | b </m> y <m> b | b </m> </s>"), doc);
  EXPECT_EQ(r.annotation.num_clusters(), 1);
  auto p = to_antecedent_string(doc, CorefAnnotation({{1, 1, 1}, {3, 3, 2}, {5, 5, 1}}));
  auto back = from_antecedent_string(p.z_terminated(), doc);
  EXPECT_EQ(back.diagnostics.count(Defect::AmbiguousAntecedent), 0);
  // Distinct clusters with the same surface are merged by the inverse.
  EXPECT_EQ(back.annotation.num_clusters(), 1);
}

TEST(Antecedent, AmbiguityIsCounted) {
  auto doc = Document::from_tokens("d", {"b", "c", "b", "d", "b", "b"});
  // "b c" opens cluster 1, "b" opens cluster 2, (5,5) joins cluster 1 by
  // "b c". The last "b" then matches mentions of both clusters and resolves
  // to the earliest, (3,3).
  Toks seq = toks("<s> <m> b c | b c </m> <m> b | b </m> d <m> b | b c </m> <m> b | b </m> </s>");
  auto r = from_antecedent_string(seq, doc);
  EXPECT_EQ(r.diagnostics.count(Defect::AmbiguousAntecedent), 1);
  EXPECT_TRUE(same_clustering(r.annotation, CorefAnnotation({{1, 2, 1}, {5, 5, 1}, {3, 3, 2}, {6, 6, 2}})));
}

TEST(Antecedent, UnresolvedStringStartsNewCluster) {
  auto r = from_antecedent_string(toks("<s> a <m> b | zzz </m> c d e </s>"), abcde());
  EXPECT_EQ(r.annotation, CorefAnnotation({{2, 2, 1}}));
  EXPECT_EQ(r.diagnostics.count(Defect::UnresolvedAntecedent), 1);
}
