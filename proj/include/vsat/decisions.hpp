#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsat/fixes.hpp"
#include "vsat/issues.hpp"

namespace vsat {

enum class DecisionAction { Accept, Reject, Edit };

std::string_view action_name(DecisionAction a);
DecisionAction action_from_name(std::string_view name);  // ValidationError

struct ReviewDecision {
  std::string issue_id;
  DecisionAction action = DecisionAction::Accept;
  std::optional<Suggestion> payload;  // Edit only
  std::string decided_at;
  std::string actor;
};

/// Everything an annotator did, in order. Later decisions on an issue
/// replace earlier ones; all entries are kept for audit.
struct DecisionLog {
  std::vector<ReviewDecision> decisions;
  std::vector<ManualEdit> manual_edits;
};

nlohmann::json decision_to_json(const ReviewDecision& d);
ReviewDecision decision_from_json(const nlohmann::json& j);
nlohmann::json manual_edit_to_json(const ManualEdit& e);
ManualEdit manual_edit_from_json(const nlohmann::json& j);
nlohmann::json decision_log_to_json(const DecisionLog& log);
DecisionLog decision_log_from_json(const nlohmann::json& j);

/// Checks a decision against its issue and the original cue: Edit needs a
/// payload, Accept/Reject forbid one, image kinds take only a region (6) or
/// a color (7) payload, and text payloads must fit the cue.
void validate_decision(const Issue& issue, const ReviewDecision& decision, const Cue& cue);

/// Latest decision per issue, turned into fixes. Undecided and rejected
/// issues contribute nothing; decisions for unknown issues are NotFoundError.
std::vector<AppliedFix> resolve_decisions(const std::vector<Issue>& issues, const std::vector<ReviewDecision>& decisions);

/// Replays a log over the original document.
FixOutcome replay(const SubtitleDoc& original, const std::vector<Issue>& issues, const DecisionLog& log);

}  // namespace vsat
