#include "vsat/decisions.hpp"

#include <map>

#include "vsat/error.hpp"

namespace vsat {

using nlohmann::json;

std::string_view action_name(DecisionAction a) {
  switch (a) {
    case DecisionAction::Accept: return "accept";
    case DecisionAction::Reject: return "reject";
    default: return "edit";
  }
}

DecisionAction action_from_name(std::string_view name) {
  if (name == "accept") return DecisionAction::Accept;
  if (name == "reject") return DecisionAction::Reject;
  if (name == "edit") return DecisionAction::Edit;
  throw ValidationError("unknown action \"" + std::string(name) + "\" (expected accept, reject or edit)");
}

namespace {

template <class T>
T get(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(std::string(where) + ": missing field \"" + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(where) + ": field \"" + key + "\" has the wrong type");
  }
}

std::vector<std::string> get_lines(const json& j, const char* key, const char* where) {
  return get<std::vector<std::string>>(j, key, where);
}

}  // namespace

json decision_to_json(const ReviewDecision& d) {
  json j = {{"issue_id", d.issue_id},
            {"action", action_name(d.action)},
            {"decided_at", d.decided_at},
            {"actor", d.actor}};
  if (d.payload) j["payload"] = suggestion_to_json(*d.payload);
  return j;
}

ReviewDecision decision_from_json(const json& j) {
  ReviewDecision d;
  d.issue_id = get<std::string>(j, "issue_id", "decision");
  d.action = action_from_name(get<std::string>(j, "action", "decision"));
  if (j.contains("payload") && !j["payload"].is_null()) d.payload = suggestion_from_json(j["payload"]);
  d.decided_at = j.value("decided_at", "");
  d.actor = j.value("actor", "");
  return d;
}

json manual_edit_to_json(const ManualEdit& e) {
  return {{"cue_id", e.target.cue_id}, {"segment", e.target.segment}, {"old_lines", e.old_lines},
          {"new_lines", e.new_lines},  {"timestamp", e.timestamp},    {"actor", e.actor}};
}

ManualEdit manual_edit_from_json(const json& j) {
  ManualEdit e;
  e.target.cue_id = get<int>(j, "cue_id", "manual edit");
  e.target.segment = j.value("segment", 0);
  e.old_lines = j.contains("old_lines") ? get_lines(j, "old_lines", "manual edit") : std::vector<std::string>{};
  e.new_lines = get_lines(j, "new_lines", "manual edit");
  e.timestamp = j.value("timestamp", "");
  e.actor = j.value("actor", "");
  return e;
}

json decision_log_to_json(const DecisionLog& log) {
  json d = json::array();
  for (const auto& x : log.decisions) d.push_back(decision_to_json(x));
  json m = json::array();
  for (const auto& x : log.manual_edits) m.push_back(manual_edit_to_json(x));
  return {{"decisions", d}, {"manual_edits", m}};
}

DecisionLog decision_log_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("decision log must be a JSON object");
  DecisionLog log;
  if (j.contains("decisions")) {
    if (!j["decisions"].is_array()) throw ValidationError("decisions must be a list");
    for (const auto& d : j["decisions"]) log.decisions.push_back(decision_from_json(d));
  }
  if (j.contains("manual_edits")) {
    if (!j["manual_edits"].is_array()) throw ValidationError("manual_edits must be a list");
    for (const auto& e : j["manual_edits"]) log.manual_edits.push_back(manual_edit_from_json(e));
  }
  return log;
}

void validate_decision(const Issue& issue, const ReviewDecision& d, const Cue& cue) {
  if (d.action != DecisionAction::Edit) {
    if (d.payload) throw ValidationError(std::string(action_name(d.action)) + " takes no payload");
    return;
  }
  if (!d.payload) throw ValidationError("edit requires a payload");
  const auto t = d.payload->type;
  auto allowed = [&]() -> bool {
    switch (issue.kind) {
      case IssueKind::Positioning: return t == SuggestionType::MoveRegion;
      case IssueKind::FontColor: return t == SuggestionType::SetColor;
      case IssueKind::Segmentation: return t == SuggestionType::SplitCue || t == SuggestionType::ReplaceText;
      default:
        return t == SuggestionType::ReplaceText || t == SuggestionType::MaskSpans || t == SuggestionType::AppendTag;
    }
  };
  if (!allowed()) {
    throw ValidationError("a " + std::string(suggestion_type_name(t)) + " payload cannot edit a " +
                          std::string(kind_name(issue.kind)) + " issue");
  }
  check_suggestion(*d.payload, cue);
}

std::vector<AppliedFix> resolve_decisions(const std::vector<Issue>& issues, const std::vector<ReviewDecision>& decisions) {
  std::map<std::string, const ReviewDecision*> latest;
  for (const auto& d : decisions) latest[d.issue_id] = &d;
  std::map<std::string, const Issue*> by_id;
  for (const auto& i : issues) by_id[i.issue_id] = &i;
  for (const auto& [id, d] : latest) {
    if (!by_id.count(id)) throw NotFoundError("decision for unknown issue " + id);
  }
  std::vector<AppliedFix> out;
  for (const auto& i : issues) {
    const auto it = latest.find(i.issue_id);
    if (it == latest.end()) continue;
    switch (it->second->action) {
      case DecisionAction::Accept: out.push_back({i, i.suggestion}); break;
      case DecisionAction::Edit: out.push_back({i, *it->second->payload}); break;
      default: break;
    }
  }
  return out;
}

FixOutcome replay(const SubtitleDoc& original, const std::vector<Issue>& issues, const DecisionLog& log) {
  return apply_fixes(original, resolve_decisions(issues, log.decisions), log.manual_edits);
}

}  // namespace vsat
