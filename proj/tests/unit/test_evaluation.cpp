#include "vsat/evaluation.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <random>

#include "vsat/error.hpp"

namespace vsat {
namespace {

using nlohmann::json;

Cue cue_of(int id, std::int64_t start, std::int64_t end, std::vector<std::string> lines) {
  Cue c;
  c.id = id;
  c.start.ms = start;
  c.end.ms = end;
  c.lines = std::move(lines);
  return c;
}

SubtitleDoc doc_of(std::vector<Cue> cues) {
  SubtitleDoc d;
  d.cues = std::move(cues);
  return d;
}

// Top-down recursion over suffixes; shares nothing with the library's DP.
int oracle_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::size_t, std::size_t>, int> memo;
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> int {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    const auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    int best = go(i + 1, j) + 1;
    best = std::min(best, go(i, j + 1) + 1);
    best = std::min(best, go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1));
    return memo[key] = best;
  };
  return go(0, 0);
}

std::vector<std::string> strings_of(const std::vector<MetricToken>& toks) {
  std::vector<std::string> out;
  for (const auto& t : toks) out.push_back(token_string(t));
  return out;
}

std::vector<std::string> random_lines(std::mt19937_64& rng, int max_words) {
  static const std::vector<std::string> vocab = {"salt", "pan", "oil", "heat", "stir", "lid", "egg"};
  const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_words));
  std::vector<std::string> lines(1);
  for (int i = 0; i < n; ++i) {
    if (!lines.back().empty() && rng() % 5 == 0) lines.emplace_back();
    if (!lines.back().empty()) lines.back() += ' ';
    lines.back() += vocab[rng() % vocab.size()];
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

TEST(Tokenize, SingleLineCue) {
  const auto toks = tokenize_cue(cue_of(1, 0, 1, {"Hello, world"}));
  EXPECT_EQ(strings_of(toks), (std::vector<std::string>{"hello", "world", "<eob>"}));
}

TEST(Tokenize, TwoLinesGetEol) {
  const auto toks = tokenize_cue(cue_of(1, 0, 1, {"a", "b"}));
  ASSERT_EQ(toks.size(), 4u);
  EXPECT_EQ(toks[0], MetricToken::word("a"));
  EXPECT_EQ(toks[1], MetricToken::eol());
  EXPECT_EQ(toks[2], MetricToken::word("b"));
  EXPECT_EQ(toks[3], MetricToken::eob());
}

TEST(Tokenize, EmptyDoc) { EXPECT_TRUE(tokenize_doc(SubtitleDoc{}).empty()); }

// ---------------------------------------------------------------------------
// Edit distance
// ---------------------------------------------------------------------------

TEST(EditDistance, MatchesOracleOnRandomPairs) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto ra = tokenize_cue(cue_of(1, 0, 1000, random_lines(rng, 11)));
    const auto rb = tokenize_cue(cue_of(1, 0, 1000, random_lines(rng, 11)));
    const int expected = oracle_distance(strings_of(ra), strings_of(rb));
    EXPECT_EQ(token_edit_distance(ra, rb), expected);
    EXPECT_EQ(count_edits(align_tokens(ra, rb)).total(), expected);
  }
}

TEST(EditDistance, AlignmentReconstructsBothSides) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ra = tokenize_cue(cue_of(1, 0, 1000, random_lines(rng, 11)));
    const auto rb = tokenize_cue(cue_of(1, 0, 1000, random_lines(rng, 11)));
    std::vector<MetricToken> got_ref, got_hyp;
    for (const auto& op : align_tokens(ra, rb)) {
      if (op.type != EditOp::Type::Insert) got_ref.push_back(ra[static_cast<std::size_t>(op.ref)]);
      if (op.type != EditOp::Type::Delete) got_hyp.push_back(rb[static_cast<std::size_t>(op.hyp)]);
    }
    EXPECT_EQ(got_ref, ra);
    EXPECT_EQ(got_hyp, rb);
  }
}

// ---------------------------------------------------------------------------
// suber
// ---------------------------------------------------------------------------

TEST(Suber, IdentityIsZero) {
  const auto d = doc_of({cue_of(1, 0, 1000, {"one two"}), cue_of(2, 1000, 2000, {"three", "four"})});
  const auto r = suber(d, d);
  EXPECT_EQ(r.score, 0.0);
  EXPECT_EQ(r.edits.total(), 0);
  EXPECT_EQ(r.ref_tokens, 4);
}

TEST(Suber, OneSubstitutionInTenWords) {
  const auto ref = doc_of({cue_of(1, 0, 4000, {"a b c d e f g h i j"})});
  const auto hyp = doc_of({cue_of(1, 0, 4000, {"a b c d e f g h i x"})});
  const auto r = suber(hyp, ref);
  EXPECT_EQ(r.edits.substitution, 1);
  EXPECT_DOUBLE_EQ(r.score, 10.0);
}

TEST(Suber, MissingFourWordCueOfTwenty) {
  std::vector<Cue> cues;
  for (int i = 0; i < 5; ++i) cues.push_back(cue_of(i + 1, i * 1000, i * 1000 + 900, {"w x y z"}));
  const auto ref = doc_of(cues);
  cues.erase(cues.begin() + 2);
  const auto r = suber(doc_of(cues), ref);
  EXPECT_EQ(r.edits.deletion, 5);
  EXPECT_EQ(r.ref_tokens, 20);
  EXPECT_DOUBLE_EQ(r.score, 25.0);
}

TEST(Suber, EmptyRefIsAnError) {
  const auto hyp = doc_of({cue_of(1, 0, 1000, {"x"})});
  EXPECT_THROW(suber(hyp, SubtitleDoc{}), ValidationError);
}

TEST(Suber, TranslationInvariant) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Cue> rc, hc;
    for (int i = 0; i < 4; ++i) {
      rc.push_back(cue_of(i + 1, i * 1000, i * 1000 + 800, random_lines(rng, 6)));
      const std::int64_t jitter = static_cast<std::int64_t>(rng() % 300);
      hc.push_back(cue_of(i + 1, i * 1000 + jitter, i * 1000 + 700 + jitter, random_lines(rng, 6)));
    }
    const auto base = suber(doc_of(hc), doc_of(rc));
    for (auto& c : rc) c.start.ms += 50000, c.end.ms += 50000;
    for (auto& c : hc) c.start.ms += 50000, c.end.ms += 50000;
    const auto moved = suber(doc_of(hc), doc_of(rc));
    EXPECT_EQ(moved.edits, base.edits);
    EXPECT_EQ(moved.score, base.score);
  }
}

TEST(Suber, ShiftPassCollapsesMovedWord) {
  // "b" moves from the first cue to the second.
  const auto ref = doc_of({cue_of(1, 0, 1000, {"a b"}), cue_of(2, 1000, 2000, {"c d"})});
  const auto hyp = doc_of({cue_of(1, 0, 1000, {"a"}), cue_of(2, 1000, 2000, {"b c d"})});
  const auto plain = suber(hyp, ref, {false});
  EXPECT_EQ(plain.edits.deletion, 1);
  EXPECT_EQ(plain.edits.insertion, 1);
  const auto shifted = suber(hyp, ref);
  EXPECT_EQ(shifted.edits.shift, 1);
  EXPECT_EQ(shifted.edits.total(), 1);
}

TEST(Suber, SingleCuePairMatchesOracle) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rc = cue_of(1, 0, 1000, random_lines(rng, 11));
    const auto hc = cue_of(1, 0, 1000, random_lines(rng, 11));
    const auto r = suber(doc_of({hc}), doc_of({rc}), {false});
    EXPECT_EQ(r.edits.total(), oracle_distance(strings_of(tokenize_cue(rc)), strings_of(tokenize_cue(hc))));
  }
}

TEST(PairCues, GreedyByOverlapRejectsCrossings) {
  const auto ref = doc_of({cue_of(1, 0, 1000, {"a"}), cue_of(2, 1000, 2000, {"b"})});
  const auto hyp = doc_of({cue_of(1, 900, 1900, {"b"}), cue_of(2, 1950, 3000, {"c"})});
  const auto pairs = pair_cues(hyp, ref);
  // hyp 0 overlaps ref 1 by 900, ref 0 by 100; hyp 1 overlaps ref 1 by 50 only.
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], (std::pair<int, int>{1, 0}));
}

TEST(PairCues, TieGoesToEarlierRef) {
  const auto ref = doc_of({cue_of(1, 0, 1000, {"a"}), cue_of(2, 1000, 2000, {"b"})});
  const auto hyp = doc_of({cue_of(1, 500, 1500, {"x"})});
  const auto pairs = pair_cues(hyp, ref);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].first, 0);
}

// ---------------------------------------------------------------------------
// F1
// ---------------------------------------------------------------------------

std::vector<DetectionLabel> labels_from(int tp, int fp, int fn, int tn) {
  std::vector<DetectionLabel> out;
  int id = 1;
  for (int i = 0; i < tp; ++i) out.push_back({id++, IssueKind::Positioning, true, true});
  for (int i = 0; i < fp; ++i) out.push_back({id++, IssueKind::Positioning, false, true});
  for (int i = 0; i < fn; ++i) out.push_back({id++, IssueKind::Positioning, true, false});
  for (int i = 0; i < tn; ++i) out.push_back({id++, IssueKind::Positioning, false, false});
  return out;
}

TEST(F1, Arithmetic) {
  const auto c = confusion(labels_from(4, 1, 1, 3));
  EXPECT_DOUBLE_EQ(c.precision(), 0.8);
  EXPECT_DOUBLE_EQ(c.recall(), 0.8);
  EXPECT_NEAR(f1(labels_from(4, 1, 1, 3)), 0.8, 1e-12);
  EXPECT_EQ(f1(labels_from(3, 0, 0, 2)), 1.0);
  EXPECT_EQ(f1(labels_from(0, 0, 3, 2)), 0.0);
  EXPECT_EQ(f1({}), 0.0);
}

TEST(F1, RandomizedAgainstDirectFormula) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int tp = static_cast<int>(rng() % 10), fp = static_cast<int>(rng() % 10),
              fn = static_cast<int>(rng() % 10), tn = static_cast<int>(rng() % 10);
    const double expected = (tp + fp + fn) == 0 || tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    EXPECT_NEAR(f1(labels_from(tp, fp, fn, tn)), expected, 1e-12);
  }
}

TEST(F1, ScoreDetectionsAddsUnlabelledFalsePositives) {
  std::vector<DetectionLabel> truth = {{1, IssueKind::FontColor, true, false}, {2, IssueKind::FontColor, false, false}};
  std::vector<Issue> issues = {make_issue(1, IssueKind::FontColor, json::object(), Suggestion::set_color(FontColor::Black)),
                               make_issue(5, IssueKind::FontColor, json::object(), Suggestion::set_color(FontColor::Black))};
  const auto scored = score_detections(truth, issues);
  const auto c = confusion(scored);
  EXPECT_EQ(c.tp, 1);
  EXPECT_EQ(c.fp, 1);
  EXPECT_EQ(c.fn, 0);
  EXPECT_EQ(c.tn, 1);
  const auto rep = detection_report(scored, {IssueKind::FontColor});
  EXPECT_DOUBLE_EQ(rep["font_color"]["precision"].get<double>(), 0.5);
}

TEST(F1, LabelJsonRoundTrip) {
  std::vector<DetectionLabel> labels = {{3, IssueKind::Positioning, true, false}, {4, IssueKind::NonWord, false, false}};
  const auto back = parse_truth_labels(truth_labels_to_json(labels));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].cue_id, 3);
  EXPECT_EQ(back[1].kind, IssueKind::NonWord);
  EXPECT_FALSE(back[1].truth);
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

TEST(Stages, NoFixesSingleRow) {
  const auto ref = doc_of({cue_of(1, 0, 1000, {"a b"})});
  const auto hyp = doc_of({cue_of(1, 0, 1000, {"a c"})});
  const auto rows = stage_report(hyp, ref, {}, {});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].name, "input");
  EXPECT_EQ(rows[0].report.score, suber(hyp, ref).score);
}

TEST(Stages, OnlySegmentationFaultLowersLastStage) {
  const std::string long_line = "one two three four five six seven eight nine ten eleven twelve";
  const auto ref = doc_of({cue_of(1, 0, 1500, {"one two three four five six seven"}),
                           cue_of(2, 1500, 3000, {"eight nine ten eleven twelve"})});
  const auto hyp = doc_of({cue_of(1, 0, 3000, {long_line})});
  Cue a = cue_of(0, 0, 1500, {"one two three four five six seven"});
  Cue b = cue_of(0, 1500, 3000, {"eight nine ten eleven twelve"});
  const auto issue = make_issue(1, IssueKind::Segmentation, json::object(), Suggestion::split_cue({a, b}));
  const auto rows = stage_report(hyp, ref, {issue}, kLanguageStages);
  ASSERT_EQ(rows.size(), 6u);
  for (int i = 1; i < 5; ++i) EXPECT_EQ(rows[i].report.score, rows[0].report.score) << rows[i].name;
  EXPECT_LT(rows[5].report.score, rows[4].report.score);
  EXPECT_EQ(rows[5].report.score, 0.0);
  EXPECT_EQ(rows[5].name, "Issue_1+2+3+4+5");
}

}  // namespace
}  // namespace vsat
