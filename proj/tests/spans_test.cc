#include "kbvqa/spans.h"

#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support/span_fixture.h"

namespace kbvqa {
namespace {

QuestionRecord Record(std::string id, std::string question,
                      std::optional<std::string> caption = std::nullopt) {
  QuestionRecord r;
  r.id = std::move(id);
  r.question = std::move(question);
  r.caption = std::move(caption);
  r.image_ref = "img";
  r.answers = {{"x", 1.0}};
  return r;
}

EntitySpan Span(std::string surface, size_t start, std::string label = "NP") {
  EntitySpan s;
  s.char_start = start;
  s.char_end = start + surface.size();
  s.surface = std::move(surface);
  s.ner_label = std::move(label);
  return s;
}

EmbeddingTable Entities(std::initializer_list<const char*> keys) {
  EmbeddingTable table(1);
  double v = 0;
  for (const char* k : keys) table.Add(Namespace::kEntity, k, Vector::Constant(1, v++));
  return table;
}

std::string Serialize(const SpanSet& s) {
  std::ostringstream out;
  WriteSpanSet(s, out);
  return out.str();
}

TEST(ComposeTextTest, Examples) {
  EXPECT_EQ(ComposeText(Record("a", "Who is this?", "Barack Obama in 2009.")),
            "Who is this? Barack Obama in 2009.");
  EXPECT_EQ(ComposeText(Record("a", "Who is this?")), "Who is this?");
  try {
    ComposeText(Record("a", "", "x"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty question");
  }
}

TEST(ExtractSpansTest, NerperKeepsPersons) {
  GazetteerNer ner;
  ner.AddEntry("Knute Nelson", "PERSON");
  const auto out = ExtractSpans(Record("a", "Where was Knute Nelson born?"),
                                SpanMethod::kNerPer, &ner, nullptr);
  ASSERT_EQ(out.spans.size(), 1u);
  EXPECT_EQ(out.spans[0].surface, "Knute Nelson");
  EXPECT_EQ(out.spans[0].field, TextField::kQuestion);
  EXPECT_EQ(out.spans[0].char_start, 10u);
  EXPECT_EQ(out.spans[0].ner_label, "PERSON");
}

TEST(ExtractSpansTest, NerperDropsOtherLabels) {
  GazetteerNer ner;
  ner.AddEntry("Berlin", "GPE");
  const auto out = ExtractSpans(Record("a", "Is this Berlin?", "Zanzibar view."),
                                SpanMethod::kNerPer, &ner, nullptr);
  EXPECT_TRUE(out.spans.empty());
}

TEST(ExtractSpansTest, NeragroMergesDuplicateSpan) {
  GazetteerNer ner;
  ner.AddEntry("Knute Nelson", "PERSON");
  LexiconChunker chunker;
  const auto out = ExtractSpans(Record("a", "Where was Knute Nelson born?"),
                                SpanMethod::kNerAgro, &ner, &chunker);
  ASSERT_EQ(out.spans.size(), 1u);
  EXPECT_EQ(out.spans[0].surface, "Knute Nelson");
  EXPECT_EQ(out.spans[0].ner_label, "PERSON");
}

TEST(ExtractSpansTest, NeragroKeepsRepeatedSurfaces) {
  GazetteerNer ner;
  LexiconChunker chunker;
  const auto out = ExtractSpans(Record("a", "Is the park near the park?"),
                                SpanMethod::kNerAgro, &ner, &chunker);
  ASSERT_EQ(out.spans.size(), 2u);
  EXPECT_EQ(out.spans[0].char_start, 3u);
  EXPECT_EQ(out.spans[1].char_start, 17u);
}

TEST(ExtractSpansTest, CaptionSpansUseComposedOffsets) {
  GazetteerNer ner;
  ner.AddEntry("Barack Obama", "PERSON");
  const auto out = ExtractSpans(Record("a", "Who is this?", "Barack Obama in 2009."),
                                SpanMethod::kNerPer, &ner, nullptr);
  ASSERT_EQ(out.spans.size(), 1u);
  EXPECT_EQ(out.spans[0].field, TextField::kCaption);
  EXPECT_EQ(out.spans[0].char_start, 13u);
}

TEST(ExtractSpansTest, MissingProvidersRaise) {
  GazetteerNer ner;
  EXPECT_THROW(ExtractSpans(Record("a", "q"), SpanMethod::kNerPer, nullptr, nullptr),
               Error);
  EXPECT_THROW(ExtractSpans(Record("a", "q"), SpanMethod::kNerAgro, &ner, nullptr),
               Error);
}

TEST(ExtractSpansTest, MetaPrependsAbsentNames) {
  QuestionRecord r = Record("a", "Who is shown?", "A pilot.");
  r.meta_entities = {{"Duke Cunningham", "Duke Cunningham"}};
  const auto out = ExtractSpans(r, SpanMethod::kMeta, nullptr, nullptr);
  EXPECT_EQ(out.composed_text, "Who is shown? Duke Cunningham; A pilot.");
  ASSERT_EQ(out.spans.size(), 1u);
  EXPECT_EQ(out.spans[0].field, TextField::kCaption);
  EXPECT_EQ(out.spans[0].surface, "Duke Cunningham");
  EXPECT_EQ(out.spans[0].char_start, 14u);
  EXPECT_EQ(out.spans[0].wiki_title, "Duke Cunningham");
}

TEST(ExtractSpansTest, MetaMatchesQuestionWordBounded) {
  QuestionRecord r = Record("a", "Is Ann with Anna or Ann?");
  r.meta_entities = {{"Ann", std::nullopt}, {"Bob", std::nullopt}, {"Cy", std::nullopt}};
  const auto out = ExtractSpans(r, SpanMethod::kMeta, nullptr, nullptr);
  EXPECT_EQ(out.composed_text, "Is Ann with Anna or Ann? Bob; Cy");
  ASSERT_EQ(out.spans.size(), 4u);
  EXPECT_EQ(out.spans[0].char_start, 3u);
  EXPECT_EQ(out.spans[1].char_start, 20u);
  EXPECT_EQ(out.spans[2].surface, "Bob");
  EXPECT_EQ(out.spans[3].surface, "Cy");
  EXPECT_EQ(out.spans[3].char_start, 30u);
}

TEST(ExtractSpansTest, MetaWithoutEntitiesIsEmpty) {
  const auto out = ExtractSpans(Record("a", "Who?", "cap"), SpanMethod::kMeta,
                                nullptr, nullptr);
  EXPECT_TRUE(out.spans.empty());
  EXPECT_EQ(out.composed_text, "Who? cap");
}

TEST(ResolveOverlapsTest, LongestThenEarliest) {
  const auto kept = ResolveOverlaps({Span("ab", 0), Span("bcd", 1), Span("de", 3),
                                     Span("xy", 10), Span("yz", 11)});
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].surface, "bcd");
  EXPECT_EQ(kept[1].surface, "xy");
}

TEST(ResolveOverlapsTest, EqualSpansKeepFirstInput) {
  const auto kept = ResolveOverlaps({Span("ab", 0, "PERSON"), Span("ab", 0, "NP")});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].ner_label, "PERSON");
}

TEST(ResolveLinksTest, LinksKeepsVerifiedOnly) {
  const auto table = Entities({"Barack Obama"});
  const auto out = ResolveLinks({Span("Barack Obama", 0), Span("obscure person", 20)},
                                LinkMode::kLinks, nullptr, table);
  ASSERT_EQ(out.spans.size(), 1u);
  EXPECT_EQ(out.spans[0].link_status, LinkStatus::kVerified);
  EXPECT_EQ(out.spans[0].wiki_title, "Barack Obama");
}

TEST(ResolveLinksTest, TitlecasedSurfaceVerifies) {
  const auto table = Entities({"Barack Obama"});
  const auto out = ResolveLinks({Span("barack obama", 0)}, LinkMode::kLinks, nullptr, table);
  ASSERT_EQ(out.spans.size(), 1u);
  EXPECT_EQ(out.spans[0].wiki_title, "Barack Obama");
}

TEST(ResolveLinksTest, NoisySearchesUnlinked) {
  const auto table = Entities({"Barack Obama"});
  StubLinkResolver stub(std::map<std::string, std::string>{{"Top Gun", "Top Gun"}});
  stub.AddFailingQuery("down");
  const auto out = ResolveLinks(
      {Span("Barack Obama", 0), Span("Top Gun", 20), Span("nothing", 30), Span("down", 40)},
      LinkMode::kNoisy, &stub, table);
  ASSERT_EQ(out.spans.size(), 4u);
  EXPECT_EQ(out.spans[0].link_status, LinkStatus::kVerified);
  EXPECT_EQ(out.spans[1].link_status, LinkStatus::kSearched);
  EXPECT_EQ(out.spans[1].wiki_title, "Top Gun");
  EXPECT_EQ(out.spans[2].link_status, LinkStatus::kUnlinked);
  EXPECT_EQ(out.spans[3].link_status, LinkStatus::kUnlinked);
  EXPECT_EQ(out.searches, 3);
  EXPECT_EQ(out.transport_failures, 1);
  EXPECT_EQ(stub.calls(), 3);
}

TEST(ResolveLinksTest, AsIsPassesThrough) {
  const auto table = Entities({"X"});
  const std::vector<EntitySpan> spans = {Span("a", 0), Span("b", 2)};
  EXPECT_EQ(ResolveLinks(spans, LinkMode::kAsIs, nullptr, table).spans, spans);
  EXPECT_THROW(ResolveLinks(spans, LinkMode::kNoisy, nullptr, table), Error);
}

OkRuleset GenericRules() {
  OkRuleset rules;
  rules.stopwords = {"the", "a"};
  rules.generic_nouns = {"park"};
  rules.generic_labels = {"DATE"};
  rules.min_length = 3;
  return rules;
}

TEST(FilterOkvqaTest, Ok4kDropsGenericNoun) {
  const auto out = FilterOkvqa({Span("the park", 0), Span("Eiffel Tower", 10)},
                               OkLevel::kOk4k, GenericRules(), nullptr);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].surface, "Eiffel Tower");
}

TEST(FilterOkvqaTest, RuleNames) {
  const auto rules = GenericRules();
  EXPECT_EQ(rules.Rejects(Span("ab", 0)), "min_length");
  EXPECT_EQ(rules.Rejects(Span("1999", 0, "DATE")), "generic_label");
  EXPECT_EQ(rules.Rejects(Span("the a", 0)), "stopword_only");
  EXPECT_EQ(rules.Rejects(Span("Park", 0)), "generic_noun");
  EXPECT_EQ(rules.Rejects(Span("the big park", 0)), std::nullopt);
}

TEST(FilterOkvqaTest, Ok13kPassesThrough) {
  const std::vector<EntitySpan> spans = {Span("the park", 0), Span("ab", 10)};
  EXPECT_EQ(FilterOkvqa(spans, OkLevel::kOk13k, GenericRules(), nullptr), spans);
}

TEST(FilterOkvqaTest, Ok2_5kUsesExclusionList) {
  const std::set<std::string> exclusion = {"eiffel tower"};
  EXPECT_TRUE(FilterOkvqa({Span("Eiffel Tower", 0)}, OkLevel::kOk2_5k, GenericRules(),
                          &exclusion)
                  .empty());
  try {
    FilterOkvqa({Span("Eiffel Tower", 0)}, OkLevel::kOk2_5k, GenericRules(), nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "manual list required");
  }
}

TEST(SpanStatsTest, Examples) {
  const auto table = Entities({"Barack Obama"});
  SpanSet set;
  set.records = {{"a", "Barack Obama", {Span("Barack Obama", 0)}}, {"b", "x", {}}};
  EXPECT_EQ(ComputeSpanStats(set, table, 2), (SpanStats{0.5, 0.5, 0.5}));
  SpanSet empty;
  empty.records = {{"a", "x", {}}, {"b", "y", {}}};
  EXPECT_EQ(ComputeSpanStats(empty, table, 2), (SpanStats{0, 0, 0}));
  EXPECT_THROW(ComputeSpanStats(empty, table, 0), Error);
}

TEST(SpanStatsTest, WikiTitleResolves) {
  const auto table = Entities({"Top Gun"});
  EntitySpan s = Span("the film", 0);
  EXPECT_FALSE(SpanResolvesInTable(s, table));
  s.wiki_title = "Top Gun";
  EXPECT_TRUE(SpanResolvesInTable(s, table));
}

TEST(SpanSetIoTest, RoundTrip) {
  SpanSet set;
  set.method = SpanMethod::kNerAgro;
  set.link_mode = LinkMode::kNoisy;
  EntitySpan s = Span("Top Gun", 4);
  s.field = TextField::kCaption;
  s.link_status = LinkStatus::kSearched;
  s.wiki_title = "Top Gun";
  set.records = {{"r1", "see Top Gun", {s}}, {"r2", "nothing", {}}};
  std::istringstream in(Serialize(set));
  const SpanSet back = ReadSpanSet(in);
  EXPECT_EQ(back.method, set.method);
  EXPECT_EQ(back.link_mode, set.link_mode);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[0].spans, set.records[0].spans);
  EXPECT_EQ(Serialize(back), Serialize(set));
}

TEST(SpanSetIoTest, RejectsSliceMismatch) {
  std::istringstream in(
      R"({"record_id":"r","method":"meta","link_mode":"as_is","spans":[{"surface":"abc","field":"QUESTION","char_start":0,"char_end":3,"ner_label":"X","link_status":"UNLINKED","wiki_title":null}],"composed_text":"abd"})");
  try {
    ReadSpanSet(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(NamesTest, RoundTrip) {
  for (auto m : {SpanMethod::kNerPer, SpanMethod::kNerAgro, SpanMethod::kMeta,
                 SpanMethod::kOk13k, SpanMethod::kOk4k, SpanMethod::kOk2_5k}) {
    EXPECT_EQ(ParseSpanMethod(SpanMethodName(m)), m);
  }
  for (auto l : {LinkMode::kAsIs, LinkMode::kLinks, LinkMode::kNoisy}) {
    EXPECT_EQ(ParseLinkMode(LinkModeName(l)), l);
  }
  EXPECT_THROW(ParseSpanMethod("spacy"), Error);
}

// Random questions over a small vocabulary with capitalized names, noun
// phrases and meta entities, for the property tests below.
std::vector<QuestionRecord> RandomRecords(unsigned seed, int n) {
  static const char* kWords[] = {"who", "is", "the", "park", "Ada", "Lovelace", "in",
                                 "this", "photo", "Berlin", "old", "bridge", "near",
                                 "Top", "Gun", "a", "man", "Paris", "?", ","};
  static const char* kNames[] = {"Ada Lovelace", "Berlin", "Top Gun", "Leo"};
  std::mt19937 rng(seed);
  std::vector<QuestionRecord> out;
  for (int i = 0; i < n; ++i) {
    std::string q = "Who";
    const int len = 3 + static_cast<int>(rng() % 10);
    for (int k = 0; k < len; ++k) {
      q += ' ';
      q += kWords[rng() % std::size(kWords)];
    }
    std::optional<std::string> caption;
    if (rng() % 2) caption = std::string(kWords[rng() % std::size(kWords)]) + " Paris.";
    QuestionRecord r = Record("r" + std::to_string(i), q, caption);
    for (int k = static_cast<int>(rng() % 3); k > 0; --k) {
      r.meta_entities.push_back({kNames[rng() % std::size(kNames)], std::nullopt});
    }
    out.push_back(std::move(r));
  }
  return out;
}

class SpanPropertyTest : public ::testing::TestWithParam<unsigned> {};

TEST_P(SpanPropertyTest, FidelitySubsetsAndDeterminism) {
  const auto records = RandomRecords(GetParam(), 40);
  GazetteerNer ner;
  ner.AddEntry("Ada Lovelace", "PERSON");
  const LexiconChunker chunker;
  const auto table = Entities({"Ada Lovelace", "Berlin", "The Park"});
  OkRuleset rules = GenericRules();
  const std::set<std::string> exclusion = {"berlin"};

  std::map<std::pair<SpanMethod, LinkMode>, SpanSet> sets;
  for (auto method : {SpanMethod::kNerPer, SpanMethod::kNerAgro, SpanMethod::kMeta,
                      SpanMethod::kOk13k, SpanMethod::kOk4k, SpanMethod::kOk2_5k}) {
    for (auto mode : {LinkMode::kAsIs, LinkMode::kLinks, LinkMode::kNoisy}) {
      std::string first;
      for (int rep = 0; rep < 2; ++rep) {
        StubLinkResolver stub({{"Top Gun", "Top Gun"}, {"Paris", "Paris"}});
        SpanBuildOptions opt{method, mode, &ner, &chunker, &stub, &rules, &exclusion};
        const SpanSet set = BuildSpanSet(records, table, opt).spanset;
        const std::string text = Serialize(set);
        if (rep == 0) {
          first = text;
          sets[{method, mode}] = set;
        } else {
          EXPECT_EQ(text, first) << SpanMethodName(method);
        }
      }
      const SpanSet& set = sets[{method, mode}];
      for (const auto& rec : set.records) {
        size_t prev_end = 0;
        for (const auto& s : rec.spans) {
          ASSERT_LT(s.char_start, s.char_end);
          ASSERT_LE(s.char_end, rec.composed_text.size());
          EXPECT_EQ(rec.composed_text.substr(s.char_start, s.char_end - s.char_start),
                    s.surface);
          EXPECT_GE(s.char_start, prev_end) << "overlap in " << rec.record_id;
          prev_end = s.char_end;
        }
      }
      const SpanStats stats = ComputeSpanStats(set, table, records.size());
      EXPECT_GE(stats.frac_q_with_eberts, 0.0);
      EXPECT_LE(stats.frac_q_with_eberts, 1.0);
      EXPECT_LE(stats.eberts_per_q, stats.ents_per_q);
    }
    using testing::SpanSubset;
    EXPECT_TRUE(SpanSubset(sets[{method, LinkMode::kLinks}], sets[{method, LinkMode::kAsIs}]));
    EXPECT_TRUE(SpanSubset(sets[{method, LinkMode::kLinks}], sets[{method, LinkMode::kNoisy}]));
    EXPECT_GE(ComputeSpanStats(sets[{method, LinkMode::kNoisy}], table, records.size())
                  .eberts_per_q,
              ComputeSpanStats(sets[{method, LinkMode::kLinks}], table, records.size())
                  .eberts_per_q);
  }
  for (auto mode : {LinkMode::kAsIs, LinkMode::kLinks, LinkMode::kNoisy}) {
    EXPECT_TRUE(testing::SpanSubset(sets[{SpanMethod::kOk4k, mode}],
                                    sets[{SpanMethod::kOk13k, mode}]));
    EXPECT_TRUE(testing::SpanSubset(sets[{SpanMethod::kOk2_5k, mode}],
                                    sets[{SpanMethod::kOk4k, mode}]));
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, SpanPropertyTest, ::testing::Range(1u, 11u));

TEST(SpanFixtureTest, MatchesGoldenFiles) {
  const auto result = testing::RunSpanFixture(std::string(KBVQA_TEST_DATA) + "/spans");
  EXPECT_EQ(result.records, 50);
  EXPECT_EQ(result.combos_checked, static_cast<int>(testing::FixtureCombos().size()));
  for (const auto& f : result.failures) ADD_FAILURE() << f;
}

}  // namespace
}  // namespace kbvqa
