#include "vsat/subtitle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "vsat/error.hpp"

namespace vsat {
namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// parse_srt
// ---------------------------------------------------------------------------

TEST(ParseSrt, MinimalBlock) {
  const auto doc = parse_srt("1\n00:00:01,000 --> 00:00:02,500\nHello\n\n");
  ASSERT_EQ(doc.cues.size(), 1u);
  EXPECT_EQ(doc.cues[0].id, 1);
  EXPECT_EQ(doc.cues[0].start.ms, 1000);
  EXPECT_EQ(doc.cues[0].end.ms, 2500);
  EXPECT_EQ(doc.cues[0].lines, std::vector<std::string>{"Hello"});
  EXPECT_TRUE(doc.header.empty());
}

TEST(ParseSrt, InvertedIntervalIsAnError) {
  try {
    parse_srt("1\n00:00:02,000 --> 00:00:01,000\nX\n\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("start >= end at cue 1"), std::string::npos);
  }
}

TEST(ParseSrt, MultiLineSecondBlock) {
  const auto doc = parse_srt(read_file(VSAT_FIXTURE_DIR "/subtitles/02_two_blocks_multiline.srt"));
  ASSERT_EQ(doc.cues.size(), 2u);
  EXPECT_EQ(doc.cues[1].lines, (std::vector<std::string>{"line a", "line b"}));
  EXPECT_EQ(doc.cues[1].start.ms, 3000);
  EXPECT_EQ(doc.cues[1].end.ms, 5000);
}

TEST(ParseSrt, MalformedTimecodeCarriesLineNumber) {
  try {
    parse_srt("1\n00:00:01,000 --> 00:00:02,000\nok\n\n2\n00:00:03.000 --> 00:00:04,000\nbad\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
}

TEST(ParseSrt, IndicesAreReassigned) {
  const auto doc = parse_srt(read_file(VSAT_FIXTURE_DIR "/subtitles/05_gapped_indices.srt"));
  ASSERT_EQ(doc.cues.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(doc.cues[i].id, i + 1);
}

TEST(ParseSrt, CrlfAndBomAccepted) {
  const auto crlf = parse_srt(read_file(VSAT_FIXTURE_DIR "/subtitles/03_crlf.srt"));
  ASSERT_EQ(crlf.cues.size(), 2u);
  EXPECT_EQ(crlf.cues[1].lines, (std::vector<std::string>{"second", "block"}));
  const auto bom = parse_srt(read_file(VSAT_FIXTURE_DIR "/subtitles/04_bom.srt"));
  ASSERT_EQ(bom.cues.size(), 1u);
  EXPECT_EQ(bom.cues[0].lines[0], "BOM at start");
}

TEST(ParseSrt, RejectsNonUtf8) {
  EXPECT_THROW(parse_srt("1\n00:00:01,000 --> 00:00:02,000\n\xff\xfe bad\n"), FormatError);
  EXPECT_THROW(parse_srt(std::string("\xff\xfe" "1\0\n", 6)), FormatError);
}

TEST(ParseSrt, ThreeDigitHoursRejected) {
  EXPECT_THROW(parse_srt("1\n100:00:00,000 --> 100:00:01,000\nx\n"), ParseError);
}

TEST(ParseSrt, SortsShuffledBlocks) {
  const auto doc = parse_srt(read_file(VSAT_FIXTURE_DIR "/subtitles/06_unsorted.srt"));
  ASSERT_EQ(doc.cues.size(), 3u);
  EXPECT_EQ(doc.cues[0].lines[0], "earlier");
  EXPECT_EQ(doc.cues[1].lines[0], "middle");
  EXPECT_EQ(doc.cues[2].lines[0], "later");
}

// ---------------------------------------------------------------------------
// parse_vtt
// ---------------------------------------------------------------------------

TEST(ParseVtt, Minimal) {
  const auto doc = parse_vtt("WEBVTT\n\n00:00:01.000 --> 00:00:02.000\nHi\n");
  ASSERT_EQ(doc.cues.size(), 1u);
  EXPECT_EQ(doc.format, SubtitleFormat::Vtt);
  EXPECT_EQ(doc.cues[0].lines[0], "Hi");
  EXPECT_FALSE(doc.cues[0].position.has_value());
}

TEST(ParseVtt, MissingMagic) {
  EXPECT_THROW(parse_vtt("00:00:01.000 --> 00:00:02.000\nHi\n"), FormatError);
  EXPECT_THROW(parse_vtt("WEBVTTX\n\n"), FormatError);
}

TEST(ParseVtt, CommaTimecodeRejected) {
  EXPECT_THROW(parse_vtt("WEBVTT\n\n00:00:01,000 --> 00:00:02,000\nHi\n"), ParseError);
}

TEST(ParseVtt, LineSettingMapsToRegion) {
  const auto doc = parse_vtt("WEBVTT\n\n00:00:01.000 --> 00:00:02.000 line:10%\ntop\n");
  ASSERT_TRUE(doc.cues[0].position.has_value());
  EXPECT_DOUBLE_EQ(doc.cues[0].position->y, 0.10);
  EXPECT_EQ(doc.cues[0].settings, "line:10%");
}

// WebVTT positioning table: line:% with start/center/end line alignment,
// position:% with line-left/center/line-right alignment, size:% as width.
// Height is fixed at one subtitle band (0.10).
TEST(ParseVtt, SettingsMappingTable) {
  struct Row {
    const char* settings;
    double x, y, w;
  };
  const Row rows[] = {
      {"line:10%", 0.2, 0.10, 0.6},
      {"line:50%,center", 0.2, 0.45, 0.6},
      {"line:90%,end", 0.2, 0.80, 0.6},
      {"line:90% align:center", 0.2, 0.90, 0.6},
      {"position:30%,line-left size:40% line:50%", 0.30, 0.50, 0.40},
      {"position:50% size:60%", 0.20, 0.85, 0.60},
      {"position:70% align:end", 0.10, 0.85, 0.60},
      {"line:100%", 0.2, 0.90, 0.6},  // clamped so the band stays on screen
  };
  for (const auto& r : rows) {
    const auto region = region_from_vtt_settings(r.settings);
    ASSERT_TRUE(region.has_value()) << r.settings;
    EXPECT_DOUBLE_EQ(region->x, r.x) << r.settings;
    EXPECT_DOUBLE_EQ(region->y, r.y) << r.settings;
    EXPECT_DOUBLE_EQ(region->w, r.w) << r.settings;
    EXPECT_DOUBLE_EQ(region->h, 0.10) << r.settings;
  }
  EXPECT_FALSE(region_from_vtt_settings("align:start vertical:rl").has_value());
  EXPECT_FALSE(region_from_vtt_settings("line:3").has_value());  // line number, not a percentage
}

TEST(ParseVtt, HeaderBlocksPreserved) {
  const auto doc = parse_vtt(read_file(VSAT_FIXTURE_DIR "/subtitles/19_note_style.vtt"));
  ASSERT_EQ(doc.cues.size(), 2u);
  EXPECT_EQ(doc.header,
            "\n\nSTYLE\n::cue {\n  color: yellow;\n}\n\nNOTE this is a comment\n\nNOTE trailing\ncomment block");
}

TEST(ParseVtt, HoursAboveNinetyNine) {
  const auto doc = parse_vtt(read_file(VSAT_FIXTURE_DIR "/subtitles/23_hours_over_99.vtt"));
  EXPECT_EQ(doc.cues[0].start.ms, 123LL * 3600 * 1000);
  EXPECT_NE(serialize_vtt(doc).find("123:00:00.000"), std::string::npos);
}

// ---------------------------------------------------------------------------
// serialize
// ---------------------------------------------------------------------------

TEST(Serialize, SrtMinimalIsByteIdenticalModuloTrailingNewline) {
  const std::string in = "1\n00:00:01,000 --> 00:00:02,500\nHello\n\n";
  const auto out = serialize_srt(parse_srt(in));
  EXPECT_EQ(out + "\n", in);
}

TEST(Serialize, EmptyDocs) {
  SubtitleDoc srt;
  EXPECT_EQ(serialize_srt(srt), "");
  SubtitleDoc vtt;
  vtt.format = SubtitleFormat::Vtt;
  EXPECT_EQ(serialize_vtt(vtt), "WEBVTT\n");
  vtt.header = " - title";
  EXPECT_EQ(serialize_vtt(vtt), "WEBVTT - title\n");
}

TEST(Serialize, PositionHintEmitsLineSetting) {
  SubtitleDoc doc;
  doc.format = SubtitleFormat::Vtt;
  Cue cue;
  cue.id = 1;
  cue.start = {0};
  cue.end = {1000};
  cue.lines = {"moved"};
  set_position(cue, Region::make(0.2, 0.45, 0.6, 0.1), SubtitleFormat::Vtt);
  doc.cues.push_back(cue);
  const auto out = serialize_vtt(doc);
  EXPECT_NE(out.find("line:45%"), std::string::npos) << out;
  EXPECT_EQ(parse_vtt(out), doc);
}

TEST(Serialize, SrtIndicesRenumbered) {
  const auto doc = parse_srt(read_file(VSAT_FIXTURE_DIR "/subtitles/05_gapped_indices.srt"));
  const auto out = serialize_srt(doc);
  EXPECT_EQ(out.rfind("1\n", 0), 0u);
  EXPECT_NE(out.find("\n\n2\n"), std::string::npos);
  EXPECT_NE(out.find("\n\n3\n"), std::string::npos);
}

// Every fixture file must survive parse -> serialize -> parse unchanged.
TEST(Serialize, FixtureCorpusRoundTrip) {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(VSAT_FIXTURE_DIR "/subtitles")) {
    const auto path = entry.path().string();
    const auto format = format_from_path(path);
    const auto doc = parse_subtitle(read_file(entry.path()), format);
    ASSERT_TRUE(is_valid(doc)) << path;
    const auto again = parse_subtitle(serialize(doc, format), format);
    EXPECT_EQ(again, doc) << path;
    ++count;
  }
  EXPECT_EQ(count, 30);
}

// ---------------------------------------------------------------------------
// property tests
// ---------------------------------------------------------------------------

std::string random_line(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {"alpha", "Beta", "gamma,", "δέλτα", "naïve",
                                                 "x", "--", "<i>tag</i>", "99", "end."};
  std::string out;
  const int n = 1 + static_cast<int>(rng() % 6);
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += words[rng() % words.size()];
  }
  return out;
}

SubtitleDoc random_doc(std::mt19937_64& rng, SubtitleFormat format) {
  SubtitleDoc doc;
  doc.format = format;
  if (format == SubtitleFormat::Vtt && rng() % 2) doc.header = "\n\nNOTE generated";
  std::int64_t t = static_cast<std::int64_t>(rng() % 5000);
  const int n = static_cast<int>(rng() % 12);
  for (int i = 0; i < n; ++i) {
    Cue c;
    c.id = i + 1;
    c.start = {t};
    c.end = {t + 1 + static_cast<std::int64_t>(rng() % 4000)};
    t = c.start.ms + static_cast<std::int64_t>(rng() % 3000);
    const int lines = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < lines; ++k) c.lines.push_back(random_line(rng));
    if (format == SubtitleFormat::Vtt && rng() % 3 == 0) {
      const double y = static_cast<double>(rng() % 91) / 100.0;
      const double w = static_cast<double>(10 + rng() % 91) / 100.0;
      const double x = static_cast<double>(rng() % 101) / 100.0 * (1.0 - w);
      if (rng() % 2) c.settings = "align:start";
      set_position(c, Region::make(x, y, w, 0.1), format);
    }
    doc.cues.push_back(std::move(c));
  }
  std::stable_sort(doc.cues.begin(), doc.cues.end(),
                   [](const Cue& a, const Cue& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < doc.cues.size(); ++i) doc.cues[i].id = static_cast<int>(i) + 1;
  return doc;
}

TEST(SubtitleProperty, RoundTripRandomDocs) {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 300; ++iter) {
    for (auto format : {SubtitleFormat::Srt, SubtitleFormat::Vtt}) {
      const auto doc = random_doc(rng, format);
      ASSERT_TRUE(is_valid(doc));
      EXPECT_EQ(parse_subtitle(serialize(doc, format), format), doc) << serialize(doc, format);
    }
  }
}

TEST(SubtitleProperty, ShuffledInputParsesSorted) {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 100; ++iter) {
    auto doc = random_doc(rng, SubtitleFormat::Srt);
    auto shuffled = doc;
    std::shuffle(shuffled.cues.begin(), shuffled.cues.end(), rng);
    const auto parsed = parse_srt(serialize_srt(shuffled));
    ASSERT_EQ(parsed.cues.size(), doc.cues.size());
    for (std::size_t i = 1; i < parsed.cues.size(); ++i) {
      EXPECT_LE(parsed.cues[i - 1].start, parsed.cues[i].start);
    }
  }
}

TEST(SubtitleProperty, TimecodeBijection) {
  std::mt19937_64 rng(3);
  std::vector<std::int64_t> samples = {0, 1, 999, 1000, 59999, 60000, 3599999, 3600000, 359999999};
  for (int i = 0; i < 20000; ++i) samples.push_back(static_cast<std::int64_t>(rng() % 360000000));
  for (auto ms : samples) {
    const std::string block = "1\n" + format_srt_timecode({ms}) + " --> " +
                              format_srt_timecode({ms + 1}) + "\nx\n";
    const std::string tail = "1\n" + format_srt_timecode({ms - 1}) + " --> " +
                             format_srt_timecode({ms}) + "\nx\n";
    if (ms + 1 < 360000000) {
      ASSERT_EQ(parse_srt(block).cues[0].start.ms, ms) << format_srt_timecode({ms});
    } else {
      ASSERT_EQ(parse_srt(tail).cues[0].end.ms, ms) << format_srt_timecode({ms});
    }
  }
}

// ---------------------------------------------------------------------------
// to_table / validate
// ---------------------------------------------------------------------------

TEST(ToTable, HelloRow) {
  const auto rows = to_table(parse_srt("1\n00:00:01,000 --> 00:00:02,500\nHello\n"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].cpl_max, 5);
  EXPECT_NEAR(rows[0].cps, 5.0 / 1.5, 1e-12);
  EXPECT_EQ(rows[0].text, "Hello");
}

TEST(ToTable, CplMaxIsLongestLine) {
  Cue c;
  c.id = 1;
  c.start = {0};
  c.end = {2000};
  c.lines = {std::string(10, 'a'), std::string(50, 'b')};
  SubtitleDoc doc;
  doc.cues.push_back(c);
  const auto rows = to_table(doc);
  EXPECT_EQ(rows[0].cpl_max, 50);
  EXPECT_EQ(rows[0].text, std::string(10, 'a') + "\\n" + std::string(50, 'b'));
  EXPECT_TRUE(to_table(SubtitleDoc{}).empty());
}

TEST(ToTable, CsvEscaping) {
  const auto doc = parse_srt("1\n00:00:00,000 --> 00:00:02,000\nSay \"hi\", friend\nsecond\n");
  const auto csv = table_to_csv(to_table(doc));
  EXPECT_EQ(csv,
            "id,start_ms,end_ms,text,cpl_max,cps\r\n"
            "1,0,2000,\"Say \"\"hi\"\", friend\\nsecond\",16,11.000\r\n");
}

TEST(ToTable, RowsRecomputableFromCues) {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 50; ++iter) {
    const auto doc = random_doc(rng, SubtitleFormat::Srt);
    const auto rows = to_table(doc);
    ASSERT_EQ(rows.size(), doc.cues.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EXPECT_EQ(rows[i].cpl_max, cue_cpl_max(doc.cues[i]));
      EXPECT_DOUBLE_EQ(rows[i].cps, cue_cps(doc.cues[i]));
      EXPECT_GT(rows[i].end_ms, rows[i].start_ms);
    }
  }
}

TEST(Validate, OverlapFinding) {
  const auto doc = parse_srt(read_file(VSAT_FIXTURE_DIR "/subtitles/13_overlapping.srt"));
  const auto findings = validate(doc);
  ASSERT_EQ(findings.size(), 1u);
  EXPECT_EQ(findings[0].kind, StructuralFinding::Kind::Overlap);
  EXPECT_EQ(findings[0].cue_id, 2);
  EXPECT_EQ(findings[0].other_cue_id, 1);
}

TEST(Validate, CleanDocHasNoFindings) {
  const auto doc = parse_srt(read_file(VSAT_FIXTURE_DIR "/subtitles/02_two_blocks_multiline.srt"));
  EXPECT_TRUE(validate(doc).empty());
}

TEST(Validate, TooShortAndBeyondMedia) {
  const auto doc = parse_srt("1\n00:00:00,000 --> 00:00:00,099\na\n\n2\n00:00:01,000 --> 00:00:01,100\nb\n\n"
                             "3\n00:02:59,000 --> 00:03:01,000\nc\n");
  const auto findings = validate(doc, 180000);
  ASSERT_EQ(findings.size(), 2u);
  EXPECT_EQ(findings[0].kind, StructuralFinding::Kind::TooShort);
  EXPECT_EQ(findings[0].cue_id, 1);
  EXPECT_EQ(findings[1].kind, StructuralFinding::Kind::BeyondMedia);
  EXPECT_EQ(findings[1].cue_id, 3);
}

TEST(Validate, OutOfOrderAndZeroLengthOnHandBuiltDoc) {
  SubtitleDoc doc;
  doc.cues.push_back({1, {5000}, {6000}, {"a"}, std::nullopt, ""});
  doc.cues.push_back({2, {1000}, {1000}, {"b"}, std::nullopt, ""});
  const auto before = doc;
  const auto findings = validate(doc);
  EXPECT_EQ(doc, before);
  ASSERT_GE(findings.size(), 2u);
  EXPECT_EQ(findings[0].kind, StructuralFinding::Kind::ZeroLength);
  EXPECT_EQ(findings[1].kind, StructuralFinding::Kind::OutOfOrder);
}

}  // namespace
}  // namespace vsat
