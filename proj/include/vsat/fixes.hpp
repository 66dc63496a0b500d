#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsat/issues.hpp"
#include "vsat/subtitle.hpp"

namespace vsat {

/// An issue together with the suggestion to apply for it (the issue's own
/// suggestion when accepted, the annotator's payload when edited).
struct AppliedFix {
  Issue issue;
  Suggestion suggestion;
};

/// Where an output cue came from: original cue id and segment index (0
/// unless the cue was split).
struct CueOrigin {
  int cue_id = 0;
  int segment = 0;

  friend auto operator<=>(const CueOrigin&, const CueOrigin&) = default;
};

/// A text edit made directly by an annotator, addressed by origin so that it
/// survives renumbering.
struct ManualEdit {
  CueOrigin target;
  std::vector<std::string> old_lines;
  std::vector<std::string> new_lines;
  std::string timestamp;
  std::string actor;
};

struct Placement {
  std::optional<Region> region;
  std::optional<FontColor> color;
};

struct FixOutcome {
  SubtitleDoc doc;
  std::vector<CueOrigin> origins;  // parallel to doc.cues
  std::map<int, Placement> placement;  // output cue id -> placement changes
  std::vector<std::string> conflicts;
  std::vector<std::size_t> orphaned_edits;  // indexes into the edit list
};

/// Applies fixes per original cue in a fixed order: ReplaceText, MaskSpans,
/// AppendTag (text level), then MoveRegion / SetColor, then SplitCue. Mask
/// spans are rebased onto replaced text; a split whose text changed is
/// re-validated and recomputed. Manual edits apply last. Output ids are
/// renumbered 1..n.
FixOutcome apply_fixes(const SubtitleDoc& original, const std::vector<AppliedFix>& fixes,
                       const std::vector<ManualEdit>& edits = {});

/// Every issue applied with its own suggestion.
std::vector<AppliedFix> accept_all(const std::vector<Issue>& issues);

/// Sidecar JSON listing the region and font color of every output cue.
nlohmann::json placement_sidecar(const FixOutcome& outcome, const Region& default_region, FontColor default_color);

/// Shell script that attaches `subtitle_file` to `video` as a soft track.
std::string mux_script(const std::string& video, const std::string& subtitle_file, SubtitleFormat format,
                       const std::string& output_video);

}  // namespace vsat
