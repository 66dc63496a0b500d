#include "vsat/pipeline.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include "temp_dir.hpp"
#include "vsat/corpus.hpp"
#include "vsat/error.hpp"

namespace vsat {
namespace {

using nlohmann::json;
using vsat::testing::TempDir;
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunConfig corpus_config(const SyntheticCorpus& c, const fs::path& out) {
  RunConfig cfg;
  cfg.load_file(c.config_path);
  cfg.subs = c.faulted_path;
  cfg.assets = c.assets_dir;
  cfg.out_dir = out;
  return cfg;
}

// ---------------------------------------------------------------------------
// Corpus generator
// ---------------------------------------------------------------------------

TEST(Corpus, OneFaultPerKind) {
  TempDir dir("corpus");
  const auto c = make_synthetic_corpus(1, FaultSpec::one_per_kind(), dir.path());
  int positives = 0;
  std::map<IssueKind, int> per_kind;
  for (const auto& l : c.labels) {
    if (l.truth) {
      ++positives;
      ++per_kind[l.kind];
    }
  }
  EXPECT_EQ(positives, 7);
  for (auto k : kAllIssueKinds) EXPECT_EQ(per_kind[k], 1) << kind_name(k);
  for (const auto& p : {c.ref_path, c.faulted_path, c.labels_path, c.mock_path, c.config_path}) {
    EXPECT_TRUE(fs::exists(p)) << p;
  }
}

TEST(Corpus, Deterministic) {
  TempDir a("ca"), b("cb");
  const auto x = make_synthetic_corpus(5, FaultSpec::one_per_kind(), a.path());
  const auto y = make_synthetic_corpus(5, FaultSpec::one_per_kind(), b.path());
  for (const char* f : {"ref.srt", "faulted.srt", "labels.json", "mock_llm.json", "vsat.conf"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  for (const auto& e : fs::recursive_directory_iterator(a / "assets")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a.path());
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / rel)) << rel;
  }
}

TEST(Corpus, SeedsDiffer) {
  TempDir a("sa"), b("sb");
  const auto x = make_synthetic_corpus(1, FaultSpec::one_per_kind(), a.path());
  const auto y = make_synthetic_corpus(2, FaultSpec::one_per_kind(), b.path());
  EXPECT_NE(serialize_srt(x.faulted), serialize_srt(y.faulted));
}

TEST(Corpus, ZeroFaultsMeansFaultedEqualsRef) {
  TempDir dir("zero");
  const auto c = make_synthetic_corpus(3, FaultSpec::none(), dir.path());
  EXPECT_EQ(slurp(c.ref_path), slurp(c.faulted_path));
  for (const auto& l : c.labels) EXPECT_FALSE(l.truth);
}

TEST(Corpus, BaseTranscriptFitsLineLimit) {
  const auto d = synthetic_base_doc();
  EXPECT_GE(d.cues.size(), 20u);
  for (const auto& c : d.cues) EXPECT_LE(cue_cpl_max(c), 50) << c.id;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

TEST(Config, ParsesSectionsAndQuotes) {
  const auto v = parse_config_text(
      "# comment\n"
      "top = 1\n"
      "[thresholds]\n"
      "timesync = 0.65  # trailing\n"
      "[backend]\n"
      "llm = \"mock\"\n"
      "mock_table = \"a # b.json\"\n");
  EXPECT_EQ(v.at("top"), "1");
  EXPECT_EQ(v.at("thresholds.timesync"), "0.65");
  EXPECT_EQ(v.at("backend.llm"), "mock");
  EXPECT_EQ(v.at("backend.mock_table"), "a # b.json");
}

TEST(Config, AppliesKnownKeys) {
  RunConfig cfg;
  cfg.apply({{"thresholds.timesync", "0.6"},
             {"thresholds.cpl", "42"},
             {"detect.fontcolor", "false"},
             {"backend.mock_table", "t.json"}},
            "/base");
  EXPECT_EQ(cfg.language.timesync_threshold, 0.6);
  EXPECT_EQ(cfg.language.max_cpl, 42);
  EXPECT_FALSE(cfg.image.fontcolor);
  EXPECT_EQ(cfg.mock_table, fs::path("/base/t.json"));
}

TEST(Config, DefaultsArePublishedThresholds) {
  RunConfig cfg;
  EXPECT_EQ(cfg.language.timesync_threshold, 0.7);
  EXPECT_EQ(cfg.language.event_threshold, 0.3);
  EXPECT_EQ(cfg.language.max_cpl, 50);
  EXPECT_EQ(cfg.image.overlap_threshold, 0.006);
  EXPECT_EQ(cfg.image.brightness_threshold, 128.0);
}

TEST(Config, Rejections) {
  RunConfig cfg;
  EXPECT_THROW(cfg.apply({{"detect.telepathy", "true"}}), ConfigError);
  EXPECT_THROW(cfg.apply({{"thresholds.cpl", "many"}}), ConfigError);
  EXPECT_THROW(cfg.set_detectors("spelling,bogus"), ConfigError);
}

TEST(Config, DetectorSelection) {
  RunConfig cfg;
  cfg.set_detectors("none");
  EXPECT_FALSE(cfg.language.spelling || cfg.language.harmful || cfg.language.timesync || cfg.language.nonword ||
               cfg.language.segmentation || cfg.image.positioning || cfg.image.fontcolor);
  cfg.set_detectors("image,spelling");
  EXPECT_TRUE(cfg.image.positioning && cfg.image.fontcolor && cfg.language.spelling);
  EXPECT_FALSE(cfg.language.harmful);
}

// ---------------------------------------------------------------------------
// check / fix / eval
// ---------------------------------------------------------------------------

class CorpusRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("run");
    corpus_ = new SyntheticCorpus(make_synthetic_corpus(1, FaultSpec::one_per_kind(), dir_->path() / "corpus"));
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete dir_;
  }
  static TempDir* dir_;
  static SyntheticCorpus* corpus_;
};
TempDir* CorpusRun::dir_ = nullptr;
SyntheticCorpus* CorpusRun::corpus_ = nullptr;

TEST_F(CorpusRun, CheckFindsPlantedIssues) {
  const auto out = cmd_check(corpus_config(*corpus_, dir_->path() / "out1"));
  EXPECT_EQ(out.report.issues.size(), 7u);
  EXPECT_TRUE(out.report.skips.empty());
  EXPECT_EQ(exit_code_for(out.report), 0);
  EXPECT_TRUE(fs::exists(out.report_path));
  EXPECT_TRUE(fs::exists(out.table_path));
  EXPECT_NO_THROW(check_report_matches(out.doc, out.report));
}

TEST_F(CorpusRun, ReportIsDeterministic) {
  const auto a = cmd_check(corpus_config(*corpus_, dir_->path() / "d1"));
  const auto b = cmd_check(corpus_config(*corpus_, dir_->path() / "d2"));
  EXPECT_EQ(canonical_report(a.report), canonical_report(b.report));
  EXPECT_EQ(canonical_report(report_from_json(report_to_json(a.report))), canonical_report(a.report));
}

TEST_F(CorpusRun, ParallelMatchesSerial) {
  auto cfg = corpus_config(*corpus_, dir_->path() / "p");
  const auto serial = cmd_check(cfg);
  cfg.parallelism = 4;
  cfg.language.parallelism = 4;
  cfg.image.parallelism = 4;
  EXPECT_EQ(canonical_report(cmd_check(cfg).report), canonical_report(serial.report));
}

TEST_F(CorpusRun, DetectNoneGivesEmptyReport) {
  auto cfg = corpus_config(*corpus_, dir_->path() / "none");
  cfg.set_detectors("none");
  const auto out = cmd_check(cfg);
  EXPECT_TRUE(out.report.issues.empty());
  EXPECT_TRUE(out.report.skips.empty());
}

TEST_F(CorpusRun, MissingAssetsBecomeSkips) {
  auto cfg = corpus_config(*corpus_, dir_->path() / "skip");
  TempDir empty("noassets");
  fs::copy_file(corpus_->assets_dir / "manifest.json", empty / "manifest.json");
  cfg.assets = empty.path();
  cfg.set_detectors("nonword");
  const auto out = cmd_check(cfg);
  EXPECT_FALSE(out.report.skips.empty());
  EXPECT_EQ(exit_code_for(out.report), 2);
}

TEST_F(CorpusRun, FixThenEval) {
  const auto cfg = corpus_config(*corpus_, dir_->path() / "fix");
  const auto check = cmd_check(cfg);
  const auto fixed = cmd_fix(cfg, check.report);
  EXPECT_TRUE(fixed.outcome.conflicts.empty());
  EXPECT_EQ(fixed.subtitle_path.filename(), "faulted.fixed.srt");
  EXPECT_TRUE(fs::exists(fixed.placement_path));
  EXPECT_TRUE(fs::exists(fixed.mux_path));

  EvalRequest before{corpus_->ref_path, corpus_->faulted_path};
  EvalRequest after{corpus_->ref_path, fixed.subtitle_path};
  const double s0 = cmd_eval(before)["suber"]["score"].get<double>();
  const double s1 = cmd_eval(after)["suber"]["score"].get<double>();
  EXPECT_LT(s1, s0);

  EvalRequest staged{corpus_->ref_path, corpus_->faulted_path, true, check.report_path, corpus_->labels_path};
  const auto j = cmd_eval(staged);
  ASSERT_TRUE(j.contains("stages"));
  double prev = 1e9;
  for (const auto& row : j["stages"]) {
    EXPECT_LE(row["score"].get<double>(), prev);
    prev = row["score"].get<double>();
  }
  for (const auto& [kind, row] : j["detection"].items()) EXPECT_EQ(row["f1"], 1.0) << kind;
}

TEST_F(CorpusRun, FixWithDecisionLogAppliesOnlyDecided) {
  const auto cfg = corpus_config(*corpus_, dir_->path() / "dec");
  const auto check = cmd_check(cfg);
  DecisionLog log;
  const auto& first = check.report.issues.front();
  log.decisions.push_back({first.issue_id, DecisionAction::Accept, std::nullopt, "t", "a"});
  const auto out = cmd_fix(cfg, check.report, log);
  const auto expected = apply_fixes(check.doc, accept_all({first}));
  EXPECT_EQ(out.bundle.subtitle, serialize_srt(expected.doc));
}

TEST_F(CorpusRun, FixRejectsMismatchedReport) {
  auto cfg = corpus_config(*corpus_, dir_->path() / "bad");
  RunReport r;
  r.issues.push_back(make_issue(999, IssueKind::TimeSync, json::object(), Suggestion::replace_text({"x"})));
  EXPECT_THROW(cmd_fix(cfg, r), ValidationError);
}

TEST(Pipeline, MissingSubtitleFile) {
  RunConfig cfg;
  cfg.subs = "/nonexistent/x.srt";
  EXPECT_THROW(load_subtitles(cfg.subs), IngestError);
}

TEST(Pipeline, ReportJsonShape) {
  RunReport r;
  r.timings["total"] = 12;
  const auto j = report_to_json(r);
  EXPECT_EQ(j["tool"], "vsat");
  EXPECT_EQ(j["version"], kVersion);
  EXPECT_TRUE(j.contains("timings"));
  EXPECT_FALSE(report_to_json(r, false).contains("timings"));
}

}  // namespace
}  // namespace vsat
