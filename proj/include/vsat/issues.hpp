#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vsat/backends.hpp"
#include "vsat/subtitle.hpp"

namespace vsat {

// Declaration order is the report order within one cue.
enum class IssueKind { ContextualSpelling, HarmfulWord, TimeSync, NonWord, Segmentation, Positioning, FontColor };

inline constexpr IssueKind kAllIssueKinds[] = {IssueKind::ContextualSpelling, IssueKind::HarmfulWord,
                                               IssueKind::TimeSync,           IssueKind::NonWord,
                                               IssueKind::Segmentation,       IssueKind::Positioning,
                                               IssueKind::FontColor};

std::string_view kind_name(IssueKind k);        // "ContextualSpelling"
std::string_view kind_slug(IssueKind k);        // "contextual_spelling"
IssueKind kind_from_name(std::string_view name);  // accepts either spelling
bool is_image_kind(IssueKind k);

enum class FontColor { White, Black };
std::string_view color_name(FontColor c);
FontColor color_from_name(std::string_view name);

enum class SuggestionType { None, ReplaceText, MaskSpans, AppendTag, SplitCue, MoveRegion, SetColor };
std::string_view suggestion_type_name(SuggestionType t);

/// One machine-applicable edit. Only the fields belonging to `type` are
/// meaningful.
struct Suggestion {
  SuggestionType type = SuggestionType::None;
  std::vector<std::string> lines;  // ReplaceText
  std::vector<CharSpan> spans;     // MaskSpans, code points over joined cue text
  std::string tag;                 // AppendTag, e.g. "[music]"
  std::vector<Cue> cues;           // SplitCue (ids unset)
  Region region;                   // MoveRegion
  FontColor color = FontColor::White;  // SetColor

  static Suggestion none() { return {}; }
  static Suggestion replace_text(std::vector<std::string> lines);
  static Suggestion mask_spans(std::vector<CharSpan> spans);
  static Suggestion append_tag(std::string tag);
  static Suggestion split_cue(std::vector<Cue> cues);
  static Suggestion move_region(Region region);
  static Suggestion set_color(FontColor color);

  friend bool operator==(const Suggestion&, const Suggestion&) = default;
};

struct Issue {
  std::string issue_id;
  int cue_id = 0;
  IssueKind kind = IssueKind::ContextualSpelling;
  nlohmann::json evidence = nlohmann::json::object();
  Suggestion suggestion;

  friend bool operator==(const Issue&, const Issue&) = default;
};

/// "c<cue_id>-<kind slug>"; at most one issue per (cue, kind).
std::string make_issue_id(int cue_id, IssueKind kind);
Issue make_issue(int cue_id, IssueKind kind, nlohmann::json evidence, Suggestion suggestion);

/// Orders by (cue_id, kind).
void sort_issues(std::vector<Issue>& issues);

nlohmann::json suggestion_to_json(const Suggestion& s);
/// Validates shape and field invariants; raises ValidationError.
Suggestion suggestion_from_json(const nlohmann::json& j);
nlohmann::json issue_to_json(const Issue& issue);
Issue issue_from_json(const nlohmann::json& j);

/// Checks the variant invariants (ReplaceText lines non-empty, SplitCue
/// tiles `cue`, MoveRegion valid, ...). Raises ValidationError.
void check_suggestion(const Suggestion& s, const Cue& cue);

/// A detector that could not run for one cue.
struct Skip {
  int cue_id = 0;
  std::string detector;
  std::string reason;

  friend bool operator==(const Skip&, const Skip&) = default;
};

nlohmann::json skip_to_json(const Skip& s);
Skip skip_from_json(const nlohmann::json& j);

struct PassResult {
  std::vector<Issue> issues;
  std::vector<Skip> skips;
  std::vector<std::string> warnings;
};

}  // namespace vsat
