#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vsat/issues.hpp"
#include "vsat/subtitle.hpp"

namespace vsat {

struct MetricToken {
  enum class Kind { Word, EOL, EOB };
  Kind kind = Kind::Word;
  std::string text;  // Word only

  static MetricToken word(std::string t) { return {Kind::Word, std::move(t)}; }
  static MetricToken eol() { return {Kind::EOL, {}}; }
  static MetricToken eob() { return {Kind::EOB, {}}; }

  friend bool operator==(const MetricToken&, const MetricToken&) = default;
};

std::string token_string(const MetricToken& t);

std::vector<MetricToken> tokenize_cue(const Cue& cue);
std::vector<MetricToken> tokenize_doc(const SubtitleDoc& doc);

struct EditCounts {
  int substitution = 0;
  int insertion = 0;
  int deletion = 0;
  int shift = 0;

  int total() const { return substitution + insertion + deletion + shift; }
  EditCounts& operator+=(const EditCounts& o);
  friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

struct EditOp {
  enum class Type { Match, Substitute, Insert, Delete };
  Type type = Type::Match;
  int ref = -1;  // index into ref, -1 for Insert
  int hyp = -1;  // index into hyp, -1 for Delete
};

/// Minimum-cost alignment (unit costs). Backtrace prefers match/substitute,
/// then delete, then insert.
std::vector<EditOp> align_tokens(const std::vector<MetricToken>& ref, const std::vector<MetricToken>& hyp);
EditCounts count_edits(const std::vector<EditOp>& ops);
int token_edit_distance(const std::vector<MetricToken>& ref, const std::vector<MetricToken>& hyp);

/// Greedy one-to-one pairing by time overlap (largest first, overlap > 0,
/// ties to the earlier ref cue then the earlier hyp cue), rejecting pairs
/// that would cross an accepted one. Returns (ref index, hyp index) sorted.
std::vector<std::pair<int, int>> pair_cues(const SubtitleDoc& hyp, const SubtitleDoc& ref);

struct SuberOptions {
  bool shift_pass = true;
};

struct SuberReport {
  double score = 0.0;  // edits per 100 reference words
  EditCounts edits;
  int ref_tokens = 0;  // Word tokens in the reference
};

SuberReport suber(const SubtitleDoc& hyp, const SubtitleDoc& ref, const SuberOptions& options = {});
nlohmann::json suber_to_json(const SuberReport& r);

// ---------------------------------------------------------------- F1

struct DetectionLabel {
  int cue_id = 0;
  IssueKind kind = IssueKind::Positioning;
  bool truth = false;
  bool predicted = false;
};

struct Confusion {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int tn = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

Confusion confusion(const std::vector<DetectionLabel>& labels);
double f1(const std::vector<DetectionLabel>& labels);

/// Ground-truth file: JSON list of {cue_id, kind, truth}.
std::vector<DetectionLabel> parse_truth_labels(const nlohmann::json& j);
nlohmann::json truth_labels_to_json(const std::vector<DetectionLabel>& labels);

/// Marks each truth label predicted when an issue of that (cue, kind)
/// exists; issues without a label become false positives.
std::vector<DetectionLabel> score_detections(const std::vector<DetectionLabel>& truth, const std::vector<Issue>& issues);

/// Per-kind confusion over `kinds`, keyed by kind slug.
nlohmann::json detection_report(const std::vector<DetectionLabel>& scored, const std::vector<IssueKind>& kinds);

// ---------------------------------------------------------------- stages

struct StageRow {
  std::string name;  // "input", "Issue_1", "Issue_1+2", ...
  SuberReport report;
};

/// Scores `base`, then applies the issues' own suggestions cumulatively, one
/// kind per stage in the given order, re-scoring after each.
std::vector<StageRow> stage_report(const SubtitleDoc& base, const SubtitleDoc& ref, const std::vector<Issue>& issues,
                                   const std::vector<IssueKind>& stages, const SuberOptions& options = {});
nlohmann::json stage_report_to_json(const std::vector<StageRow>& rows);

inline const std::vector<IssueKind> kLanguageStages = {IssueKind::ContextualSpelling, IssueKind::HarmfulWord,
                                                       IssueKind::TimeSync, IssueKind::NonWord,
                                                       IssueKind::Segmentation};

}  // namespace vsat
