#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vsat/backends.hpp"
#include "vsat/issues.hpp"
#include "vsat/media.hpp"
#include "vsat/subtitle.hpp"

namespace vsat {

inline constexpr double kTimeSyncThreshold = 0.7;
inline constexpr double kEventThreshold = 0.3;
inline constexpr int kMaxCpl = 50;
inline constexpr int kSpellContextCues = 3;

// ---------------------------------------------------------------- Issue 1

struct SpellFinding {
  struct Rejected {
    std::string candidate;
    int rule = 0;
  };
  std::string word;
  CharSpan span;  // code points over the joined cue text
  std::vector<std::string> candidates;
  std::vector<Rejected> rejected;
  std::string rationale;
};

struct RuleCheck {
  bool pass = true;
  int failed_rule = 0;  // 1: suffix added, 3: identical word
  std::string detail;
};

inline constexpr const char* kSpellSuffixes[] = {"y", "ness", "ful", "less", "ed", "ly", "ing", "s", "es"};

/// Both tokens are expected lowercase-normalized.
RuleCheck validate_spell_rules(const std::string& original, const std::string& candidate);

/// Preceding cue texts, oldest first, at most `n`.
std::vector<std::string> spell_context(const SubtitleDoc& doc, std::size_t cue_index, int n = kSpellContextCues);

LlmRequest spell_findings_request(const Cue& cue, const std::vector<std::string>& context);
LlmRequest spell_fix_request(const Cue& cue, const std::vector<std::string>& context, const std::string& word);
LlmRequest harm_spans_request(const Cue& cue);

/// Locates `word` in `text` as a whole word (exact case first, then
/// case-insensitive). Offsets are code points.
std::optional<CharSpan> find_word(const std::string& text, const std::string& word);

std::vector<SpellFinding> detect_contextual_spelling(const Cue& cue, const std::vector<std::string>& context,
                                                     LlmBackend& llm,
                                                     std::vector<std::string>* warnings = nullptr);
/// Aggregates a cue's findings into one issue whose ReplaceText uses each
/// finding's first candidate.
std::optional<Issue> spelling_issue(const Cue& cue, const std::vector<SpellFinding>& findings);

// ---------------------------------------------------------------- Issue 2

/// Every code point inside a span becomes '*'. Spans must lie inside `text`
/// and must not cover a line break (ValidationError).
std::string mask_spans(const std::string& text, const std::vector<CharSpan>& spans);
/// Sorts and merges overlapping spans, checking them against `text`.
std::vector<CharSpan> checked_spans(const std::string& text, std::vector<CharSpan> spans);

std::optional<Issue> detect_harmful(const Cue& cue, LlmBackend& llm);

// ---------------------------------------------------------------- Issue 3

double cosine_bow(const std::vector<std::string>& a, const std::vector<std::string>& b);
/// Strict: flags only when the similarity falls below the threshold.
inline bool time_sync_flags(double similarity, double threshold = kTimeSyncThreshold) {
  return similarity < threshold;
}
std::optional<Issue> detect_time_sync(const Cue& cue, const std::vector<TranscriptWord>& words,
                                      double threshold = kTimeSyncThreshold);

// ---------------------------------------------------------------- Issue 4

inline bool event_flags(double score, double threshold = kEventThreshold) { return score > threshold; }
std::optional<Issue> detect_non_word(const Cue& cue, const std::vector<EventScore>& events,
                                     double threshold = kEventThreshold);

// ---------------------------------------------------------------- Issue 5

inline bool cpl_flags(int chars, int max_cpl = kMaxCpl) { return chars > max_cpl; }

struct SplitResult {
  std::vector<Cue> cues;
  bool realigned = false;  // every boundary came from the transcript
  std::vector<std::string> warnings;
};

/// Greedy word packing into single-line segments of at most `max_cpl`
/// characters, with boundaries realigned to transcript word ends.
SplitResult split_cue_detailed(const Cue& cue, const std::vector<TranscriptWord>& words, int max_cpl = kMaxCpl);
std::vector<Cue> split_cue(const Cue& cue, const std::vector<TranscriptWord>& words, int max_cpl = kMaxCpl);

std::optional<Issue> detect_segmentation(const Cue& cue, const std::vector<TranscriptWord>& words,
                                         int max_cpl = kMaxCpl);

// ---------------------------------------------------------------- pass

struct LanguageConfig {
  bool spelling = true;
  bool harmful = true;
  bool timesync = true;
  bool nonword = true;
  bool segmentation = true;
  double timesync_threshold = kTimeSyncThreshold;
  double event_threshold = kEventThreshold;
  int max_cpl = kMaxCpl;
  int context_cues = kSpellContextCues;
  int parallelism = 1;
};

struct LanguageBackends {
  LlmBackend* llm = nullptr;
  AsrBackend* asr = nullptr;
  EventBackend* events = nullptr;
  MediaSource* media = nullptr;
};

/// Runs every enabled detector on every cue. Backend failures become skips;
/// issues come back ordered by (cue_id, kind).
PassResult run_language_pass(const SubtitleDoc& doc, const LanguageBackends& backends, const LanguageConfig& config);

}  // namespace vsat
