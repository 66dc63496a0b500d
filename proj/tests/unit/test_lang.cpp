#include "vsat/lang.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "vsat/error.hpp"
#include "vsat/text.hpp"

namespace vsat {
namespace {

using nlohmann::json;

Cue make_cue(int id, std::int64_t start, std::int64_t end, std::vector<std::string> lines) {
  Cue c;
  c.id = id;
  c.start.ms = start;
  c.end.ms = end;
  c.lines = std::move(lines);
  return c;
}

json load_fixture(const std::string& name) {
  std::ifstream in(std::string(VSAT_FIXTURE_DIR "/realign/") + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return json::parse(ss.str());
}

// ---------------------------------------------------------------------------
// Issue 1: spelling rules
// ---------------------------------------------------------------------------

TEST(SpellRules, SuffixListMatchesTheNinePublishedSuffixes) {
  const std::vector<std::string> expected = {"y", "ness", "ful", "less", "ed", "ly", "ing", "s", "es"};
  std::vector<std::string> got(std::begin(kSpellSuffixes), std::end(kSpellSuffixes));
  EXPECT_EQ(got, expected);
}

TEST(SpellRules, Rule1RejectsEverySuffixedCandidate) {
  for (const char* s : kSpellSuffixes) {
    const auto r = validate_spell_rules("wood", std::string("wood") + s);
    EXPECT_FALSE(r.pass) << s;
    EXPECT_EQ(r.failed_rule, 1) << s;
  }
}

TEST(SpellRules, Rule3RejectsIdentity) {
  const auto r = validate_spell_rules("desert", "desert");
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.failed_rule, 3);
}

TEST(SpellRules, GenuineHomophoneAccepted) {
  EXPECT_TRUE(validate_spell_rules("desert", "dessert").pass);
  // Prefix changes and suffix removal are not Rule 1.
  EXPECT_TRUE(validate_spell_rules("woods", "wood").pass);
  EXPECT_TRUE(validate_spell_rules("wood", "woodsy").pass);
}

TEST(SpellContext, TakesUpToThreePrecedingCues) {
  SubtitleDoc doc;
  for (int i = 1; i <= 5; ++i) doc.cues.push_back(make_cue(i, i * 1000, i * 1000 + 500, {"c" + std::to_string(i)}));
  EXPECT_EQ(spell_context(doc, 4), (std::vector<std::string>{"c2", "c3", "c4"}));
  EXPECT_EQ(spell_context(doc, 1), (std::vector<std::string>{"c1"}));
  EXPECT_TRUE(spell_context(doc, 0).empty());
}

TEST(ContextualSpelling, SuffixCandidateDroppedAndHomophoneKept) {
  const auto cue = make_cue(1, 0, 2000, {"Serve the desert cold"});
  MockLlm llm;
  llm.add(spell_findings_request(cue, {}), {{"findings", {{{"word", "desert"}, {"rationale", "food context"}}}}});
  llm.add(spell_fix_request(cue, {}, "desert"), {{"candidates", {"deserty", "desert", "dessert"}}});
  std::vector<std::string> warnings;
  const auto findings = detect_contextual_spelling(cue, {}, llm, &warnings);
  ASSERT_EQ(findings.size(), 1u);
  EXPECT_EQ(findings[0].candidates, std::vector<std::string>{"dessert"});
  ASSERT_EQ(findings[0].rejected.size(), 2u);
  EXPECT_EQ(findings[0].rejected[0].rule, 1);
  EXPECT_EQ(findings[0].rejected[1].rule, 3);
  EXPECT_EQ(findings[0].span, (CharSpan{10, 16}));

  const auto issue = spelling_issue(cue, findings);
  ASSERT_TRUE(issue);
  EXPECT_EQ(issue->suggestion.type, SuggestionType::ReplaceText);
  EXPECT_EQ(issue->suggestion.lines, std::vector<std::string>{"Serve the dessert cold"});
}

TEST(ContextualSpelling, OnlySuffixCandidatesMeansNoIssue) {
  const auto cue = make_cue(1, 0, 2000, {"the wood was dry"});
  MockLlm llm;
  llm.add(spell_findings_request(cue, {}), {{"findings", {{{"word", "wood"}, {"rationale", "?"}}}}});
  llm.add(spell_fix_request(cue, {}, "wood"), {{"candidates", {"woody", "woods"}}});
  const auto findings = detect_contextual_spelling(cue, {}, llm);
  EXPECT_TRUE(findings.empty());
  EXPECT_FALSE(spelling_issue(cue, findings));
}

TEST(ContextualSpelling, CaseCarriedOntoReplacement) {
  const auto cue = make_cue(1, 0, 2000, {"Flower is key"});
  MockLlm llm;
  llm.add(spell_findings_request(cue, {}), {{"findings", {{{"word", "flower"}, {"rationale", ""}}}}});
  llm.add(spell_fix_request(cue, {}, "Flower"), {{"candidates", {"flour"}}});
  const auto issue = spelling_issue(cue, detect_contextual_spelling(cue, {}, llm));
  ASSERT_TRUE(issue);
  EXPECT_EQ(issue->suggestion.lines, std::vector<std::string>{"Flour is key"});
}

TEST(FindWord, RespectsWordBoundaries) {
  EXPECT_EQ(find_word("bored board", "board"), (CharSpan{6, 11}));
  EXPECT_FALSE(find_word("boards", "board"));
  EXPECT_EQ(find_word("\xc3\xa9t\xc3\xa9 pale", "pale"), (CharSpan{4, 8}));
}

// ---------------------------------------------------------------------------
// Issue 2: harmful words
// ---------------------------------------------------------------------------

TEST(Harmful, SpanOnYouIdiot) {
  const auto cue = make_cue(1, 0, 1000, {"you idiot!"});
  MockLlm llm;
  llm.add(harm_spans_request(cue), json::parse(R"({"spans":[{"start":4,"end":9}]})"));
  const auto issue = detect_harmful(cue, llm);
  ASSERT_TRUE(issue);
  EXPECT_EQ(issue->suggestion.type, SuggestionType::MaskSpans);
  EXPECT_EQ(mask_spans(cue.joined_text(), issue->suggestion.spans), "you *****!");
}

TEST(Harmful, NoSpansNoIssue) {
  const auto cue = make_cue(1, 0, 1000, {"hello"});
  MockLlm llm;
  llm.add(harm_spans_request(cue), json::parse(R"({"spans":[]})"));
  EXPECT_FALSE(detect_harmful(cue, llm));
}

TEST(MaskSpans, LengthPreservedInCodePoints) {
  const std::string t = "caf\xc3\xa9 idiot \xe2\x99\xaa";
  const auto masked = mask_spans(t, {{5, 10}});
  EXPECT_EQ(text::length(masked), text::length(t));
  EXPECT_EQ(masked, "caf\xc3\xa9 ***** \xe2\x99\xaa");
}

TEST(MaskSpans, OverlappingSpansMerge) {
  EXPECT_EQ(mask_spans("abcdefgh", {{1, 4}, {3, 6}}), "a*****gh");
  EXPECT_EQ(checked_spans("abcdefgh", {{3, 6}, {1, 4}}), (std::vector<CharSpan>{{1, 6}}));
}

TEST(MaskSpans, CrossingLineBreakRejected) {
  EXPECT_THROW(mask_spans("ab\ncd", {{1, 4}}), ValidationError);
  EXPECT_THROW(mask_spans("abc", {{2, 5}}), ValidationError);
  EXPECT_THROW(mask_spans("abc", {{2, 2}}), ValidationError);
}

// ---------------------------------------------------------------------------
// Issue 3: time sync
// ---------------------------------------------------------------------------

double brute_cosine(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> vocab(a);
  vocab.insert(vocab.end(), b.begin(), b.end());
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  double dot = 0, na = 0, nb = 0;
  for (const auto& v : vocab) {
    const double x = static_cast<double>(std::count(a.begin(), a.end(), v));
    const double y = static_cast<double>(std::count(b.begin(), b.end(), v));
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  return dot / std::sqrt(na * nb);
}

TEST(Cosine, MatchesDenseVectorOracle) {
  std::mt19937 rng(7);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> a, b;
    const int na = 1 + static_cast<int>(rng() % 8);
    const int nb = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < na; ++i) a.push_back(words[rng() % words.size()]);
    for (int i = 0; i < nb; ++i) b.push_back(words[rng() % words.size()]);
    EXPECT_NEAR(cosine_bow(a, b), brute_cosine(a, b), 1e-12);
  }
}

TEST(Cosine, EdgeCases) {
  EXPECT_EQ(cosine_bow({}, {}), 1.0);
  EXPECT_EQ(cosine_bow({"a"}, {}), 0.0);
  EXPECT_EQ(cosine_bow({"a", "b"}, {"b", "a"}), 1.0);
  EXPECT_EQ(cosine_bow({"a"}, {"b"}), 0.0);
}

TEST(TimeSync, ThresholdBoundary) {
  EXPECT_FALSE(time_sync_flags(0.7));
  EXPECT_TRUE(time_sync_flags(0.699));
  EXPECT_EQ(kTimeSyncThreshold, 0.7);
}

TEST(TimeSync, ExactlyPointSevenIsNotFlagged) {
  // counts {x:3,y:1} vs {x:2,y:1,z:2,w:1}: dot 7, norms sqrt(10) each.
  const auto cue = make_cue(1, 0, 3000, {"apple apple apple pear"});
  std::vector<TranscriptWord> words;
  for (const char* w : {"apple", "apple", "pear", "plum", "plum", "fig"}) words.push_back({w, 0, 100, 1.0});
  EXPECT_EQ(cosine_bow(text::normalize_tokens(cue.joined_text()), {"apple", "apple", "pear", "plum", "plum", "fig"}),
            0.7);
  EXPECT_FALSE(detect_time_sync(cue, words));
  words.push_back({"kiwi", 0, 100, 1.0});
  const auto issue = detect_time_sync(cue, words);
  ASSERT_TRUE(issue);
  EXPECT_EQ(issue->suggestion.lines, std::vector<std::string>{"apple apple pear plum plum fig kiwi"});
}

TEST(TimeSync, SilenceFlagsWithoutSuggestion) {
  const auto cue = make_cue(1, 0, 3000, {"hello there"});
  const auto issue = detect_time_sync(cue, {});
  ASSERT_TRUE(issue);
  EXPECT_EQ(issue->suggestion.type, SuggestionType::None);
}

// ---------------------------------------------------------------------------
// Issue 4: non-word events
// ---------------------------------------------------------------------------

TEST(NonWord, MusicAboveThresholdTagged) {
  const auto cue = make_cue(1, 0, 1000, {"\xe2\x99\xaa"});
  const auto issue = detect_non_word(cue, {{"Music", 0.71}, {"Speech", 0.1}});
  ASSERT_TRUE(issue);
  EXPECT_EQ(issue->suggestion.type, SuggestionType::AppendTag);
  EXPECT_EQ(issue->suggestion.tag, "[music]");
}

TEST(NonWord, ThresholdBoundary) {
  const auto cue = make_cue(1, 0, 1000, {"hi"});
  EXPECT_FALSE(detect_non_word(cue, {{"Laughter", 0.3}}));
  EXPECT_TRUE(detect_non_word(cue, {{"Laughter", 0.301}}));
  EXPECT_EQ(kEventThreshold, 0.3);
}

TEST(NonWord, SpeechNeverTagged) {
  const auto cue = make_cue(1, 0, 1000, {"hi"});
  EXPECT_FALSE(detect_non_word(cue, {{"Speech", 0.99}}));
}

TEST(NonWord, ExistingTagSuppresses) {
  const auto cue = make_cue(1, 0, 1000, {"hi [Music]"});
  EXPECT_FALSE(detect_non_word(cue, {{"Music", 0.9}}));
}

// ---------------------------------------------------------------------------
// Issue 5: segmentation
// ---------------------------------------------------------------------------

TEST(Segmentation, CplBoundary) {
  EXPECT_FALSE(cpl_flags(50));
  EXPECT_TRUE(cpl_flags(51));
  EXPECT_FALSE(detect_segmentation(make_cue(1, 0, 1000, {std::string(50, 'a')}), {}));
  EXPECT_TRUE(detect_segmentation(make_cue(1, 0, 1000, {std::string(51, 'a')}), {}));
}

TEST(Segmentation, CplCountsCodePoints) {
  std::string line;
  for (int i = 0; i < 50; ++i) line += "\xc3\xa9";
  EXPECT_FALSE(detect_segmentation(make_cue(1, 0, 1000, {line}), {}));
}

class Realign : public ::testing::TestWithParam<const char*> {};

TEST_P(Realign, MatchesHandSetBoundaries) {
  const auto fx = load_fixture(GetParam());
  const auto cue = make_cue(1, fx["cue"]["start_ms"], fx["cue"]["end_ms"], {fx["cue"]["text"].get<std::string>()});
  const auto words = parse_transcript_json(fx["words"]);
  const auto r = split_cue_detailed(cue, words);
  EXPECT_TRUE(r.realigned);
  ASSERT_EQ(r.cues.size(), fx["expected"].size());
  for (std::size_t i = 0; i < r.cues.size(); ++i) {
    const auto& e = fx["expected"][i];
    EXPECT_EQ(r.cues[i].start.ms, e["start_ms"].get<std::int64_t>()) << i;
    EXPECT_EQ(r.cues[i].end.ms, e["end_ms"].get<std::int64_t>()) << i;
    EXPECT_EQ(r.cues[i].lines, std::vector<std::string>{e["text"].get<std::string>()}) << i;
  }
}

INSTANTIATE_TEST_SUITE_P(Fixtures, Realign, ::testing::Values("two_segments.json", "three_segments.json"));

TEST(Segmentation, NoTranscriptFallsBackToProportional) {
  // 50 + 40 chars: boundary at 50/90 of the duration.
  const auto cue = make_cue(1, 1000, 2000, {std::string(40, 'a') + " " + std::string(9, 'b') + " " +
                                            std::string(40, 'c')});
  const auto r = split_cue_detailed(cue, {});
  ASSERT_EQ(r.cues.size(), 2u);
  EXPECT_FALSE(r.realigned);
  EXPECT_EQ(r.cues[0].end.ms, 1000 + 1000 * 50 / 90);
  EXPECT_EQ(r.cues[1].start.ms, r.cues[0].end.ms);
}

TEST(Segmentation, OverlongWordHardSplit) {
  const auto cue = make_cue(1, 0, 1200, {std::string(120, 'x')});
  const auto r = split_cue_detailed(cue, {});
  ASSERT_EQ(r.cues.size(), 3u);
  for (const auto& c : r.cues) EXPECT_LE(text::length(c.lines[0]), 50u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Segmentation, TooShortKeepsOneCueWithLines) {
  const auto cue = make_cue(1, 0, 1, {std::string(30, 'a') + " " + std::string(30, 'b')});
  const auto r = split_cue_detailed(cue, {});
  ASSERT_EQ(r.cues.size(), 1u);
  EXPECT_EQ(r.cues[0].lines.size(), 2u);
}

TEST(Segmentation, RandomizedProperties) {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 200; ++trial) {
    std::string line;
    const auto target = 51 + rng() % 250;
    while (line.size() < target) {
      if (!line.empty()) line += ' ';
      line += std::string(1 + rng() % 12, static_cast<char>('a' + rng() % 26));
    }
    const std::int64_t start = static_cast<std::int64_t>(rng() % 100000);
    const std::int64_t end = start + 500 + static_cast<std::int64_t>(rng() % 9000);
    const auto cue = make_cue(1, start, end, {line});
    const auto parts = split_cue(cue, {});
    ASSERT_FALSE(parts.empty());
    EXPECT_EQ(parts.front().start.ms, start);
    EXPECT_EQ(parts.back().end.ms, end);
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      EXPECT_LT(parts[i].start.ms, parts[i].end.ms);
      if (i > 0) EXPECT_EQ(parts[i].start.ms, parts[i - 1].end.ms);
      for (const auto& l : parts[i].lines) {
        EXPECT_LE(text::length(l), 50u);
        texts.push_back(l);
      }
    }
    EXPECT_EQ(text::join(texts, " "), line);
  }
}

}  // namespace
}  // namespace vsat
