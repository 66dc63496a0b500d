#include "vsat/issues.hpp"

#include <algorithm>

#include "vsat/error.hpp"
#include "vsat/text.hpp"

namespace vsat {

using nlohmann::json;

std::string_view kind_name(IssueKind k) {
  switch (k) {
    case IssueKind::ContextualSpelling:
      return "ContextualSpelling";
    case IssueKind::HarmfulWord:
      return "HarmfulWord";
    case IssueKind::TimeSync:
      return "TimeSync";
    case IssueKind::NonWord:
      return "NonWord";
    case IssueKind::Segmentation:
      return "Segmentation";
    case IssueKind::Positioning:
      return "Positioning";
    case IssueKind::FontColor:
      return "FontColor";
  }
  return "?";
}

std::string_view kind_slug(IssueKind k) {
  switch (k) {
    case IssueKind::ContextualSpelling:
      return "contextual_spelling";
    case IssueKind::HarmfulWord:
      return "harmful_word";
    case IssueKind::TimeSync:
      return "time_sync";
    case IssueKind::NonWord:
      return "non_word";
    case IssueKind::Segmentation:
      return "segmentation";
    case IssueKind::Positioning:
      return "positioning";
    case IssueKind::FontColor:
      return "font_color";
  }
  return "?";
}

IssueKind kind_from_name(std::string_view name) {
  for (auto k : kAllIssueKinds) {
    if (name == kind_name(k) || name == kind_slug(k)) return k;
  }
  throw ValidationError("unknown issue kind \"" + std::string(name) + "\"");
}

bool is_image_kind(IssueKind k) { return k == IssueKind::Positioning || k == IssueKind::FontColor; }

std::string_view color_name(FontColor c) { return c == FontColor::Black ? "black" : "white"; }

FontColor color_from_name(std::string_view name) {
  if (name == "black") return FontColor::Black;
  if (name == "white") return FontColor::White;
  throw ValidationError("unknown color \"" + std::string(name) + "\" (expected black or white)");
}

std::string_view suggestion_type_name(SuggestionType t) {
  switch (t) {
    case SuggestionType::None:
      return "None";
    case SuggestionType::ReplaceText:
      return "ReplaceText";
    case SuggestionType::MaskSpans:
      return "MaskSpans";
    case SuggestionType::AppendTag:
      return "AppendTag";
    case SuggestionType::SplitCue:
      return "SplitCue";
    case SuggestionType::MoveRegion:
      return "MoveRegion";
    case SuggestionType::SetColor:
      return "SetColor";
  }
  return "?";
}

Suggestion Suggestion::replace_text(std::vector<std::string> lines) {
  Suggestion s;
  s.type = SuggestionType::ReplaceText;
  s.lines = std::move(lines);
  return s;
}
Suggestion Suggestion::mask_spans(std::vector<CharSpan> spans) {
  Suggestion s;
  s.type = SuggestionType::MaskSpans;
  s.spans = std::move(spans);
  return s;
}
Suggestion Suggestion::append_tag(std::string tag) {
  Suggestion s;
  s.type = SuggestionType::AppendTag;
  s.tag = std::move(tag);
  return s;
}
Suggestion Suggestion::split_cue(std::vector<Cue> cues) {
  Suggestion s;
  s.type = SuggestionType::SplitCue;
  s.cues = std::move(cues);
  return s;
}
Suggestion Suggestion::move_region(Region region) {
  Suggestion s;
  s.type = SuggestionType::MoveRegion;
  s.region = region;
  return s;
}
Suggestion Suggestion::set_color(FontColor color) {
  Suggestion s;
  s.type = SuggestionType::SetColor;
  s.color = color;
  return s;
}

std::string make_issue_id(int cue_id, IssueKind kind) {
  return "c" + std::to_string(cue_id) + "-" + std::string(kind_slug(kind));
}

Issue make_issue(int cue_id, IssueKind kind, json evidence, Suggestion suggestion) {
  return Issue{make_issue_id(cue_id, kind), cue_id, kind, std::move(evidence), std::move(suggestion)};
}

void sort_issues(std::vector<Issue>& issues) {
  std::stable_sort(issues.begin(), issues.end(), [](const Issue& a, const Issue& b) {
    if (a.cue_id != b.cue_id) return a.cue_id < b.cue_id;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
}

// ---------------------------------------------------------------- JSON

namespace {

json region_json(const Region& r) { return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }

template <class T>
T field(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(std::string(where) + ": missing field \"" + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(where) + ": field \"" + key + "\" has the wrong type");
  }
}

Region region_from(const json& j) {
  const auto r = Region::make(field<double>(j, "x", "region"), field<double>(j, "y", "region"),
                              field<double>(j, "w", "region"), field<double>(j, "h", "region"));
  if (!r.valid()) throw ValidationError("region lies outside the frame or is empty");
  return r;
}

std::vector<std::string> lines_from(const json& j, const char* where) {
  auto lines = field<std::vector<std::string>>(j, "lines", where);
  if (lines.empty()) throw ValidationError(std::string(where) + ": lines must not be empty");
  for (const auto& l : lines) {
    if (l.empty()) throw ValidationError(std::string(where) + ": empty line");
    if (l.find('\n') != std::string::npos || l.find('\r') != std::string::npos) {
      throw ValidationError(std::string(where) + ": a line contains a line break");
    }
  }
  return lines;
}

}  // namespace

json suggestion_to_json(const Suggestion& s) {
  json j = {{"type", suggestion_type_name(s.type)}};
  switch (s.type) {
    case SuggestionType::None:
      break;
    case SuggestionType::ReplaceText:
      j["lines"] = s.lines;
      break;
    case SuggestionType::MaskSpans: {
      json spans = json::array();
      for (const auto& sp : s.spans) spans.push_back({{"start", sp.start}, {"end", sp.end}});
      j["spans"] = spans;
      break;
    }
    case SuggestionType::AppendTag:
      j["tag"] = s.tag;
      break;
    case SuggestionType::SplitCue: {
      json cues = json::array();
      for (const auto& c : s.cues) {
        json cj = {{"start_ms", c.start.ms}, {"end_ms", c.end.ms}, {"lines", c.lines}};
        if (c.position) cj["position"] = region_json(*c.position);
        if (!c.settings.empty()) cj["settings"] = c.settings;
        cues.push_back(cj);
      }
      j["cues"] = cues;
      break;
    }
    case SuggestionType::MoveRegion:
      j["region"] = region_json(s.region);
      break;
    case SuggestionType::SetColor:
      j["color"] = color_name(s.color);
      break;
  }
  return j;
}

Suggestion suggestion_from_json(const json& j) {
  const auto type = field<std::string>(j, "type", "suggestion");
  if (type == "None") return Suggestion::none();
  if (type == "ReplaceText") return Suggestion::replace_text(lines_from(j, "ReplaceText"));
  if (type == "MaskSpans") {
    std::vector<CharSpan> spans;
    for (const auto& sp : field<json>(j, "spans", "MaskSpans")) {
      const CharSpan c{field<int>(sp, "start", "span"), field<int>(sp, "end", "span")};
      if (c.start < 0 || c.end <= c.start) throw ValidationError("MaskSpans: need 0 <= start < end");
      spans.push_back(c);
    }
    if (spans.empty()) throw ValidationError("MaskSpans: no spans");
    return Suggestion::mask_spans(std::move(spans));
  }
  if (type == "AppendTag") {
    auto tag = field<std::string>(j, "tag", "AppendTag");
    if (tag.empty() || tag.find('\n') != std::string::npos) throw ValidationError("AppendTag: bad tag");
    return Suggestion::append_tag(std::move(tag));
  }
  if (type == "SplitCue") {
    std::vector<Cue> cues;
    for (const auto& cj : field<json>(j, "cues", "SplitCue")) {
      Cue c;
      c.start.ms = field<std::int64_t>(cj, "start_ms", "SplitCue cue");
      c.end.ms = field<std::int64_t>(cj, "end_ms", "SplitCue cue");
      c.lines = lines_from(cj, "SplitCue cue");
      if (cj.contains("position")) c.position = region_from(cj["position"]);
      if (cj.contains("settings")) c.settings = field<std::string>(cj, "settings", "SplitCue cue");
      cues.push_back(std::move(c));
    }
    if (cues.empty()) throw ValidationError("SplitCue: no cues");
    return Suggestion::split_cue(std::move(cues));
  }
  if (type == "MoveRegion") return Suggestion::move_region(region_from(field<json>(j, "region", "MoveRegion")));
  if (type == "SetColor") return Suggestion::set_color(color_from_name(field<std::string>(j, "color", "SetColor")));
  throw ValidationError("unknown suggestion type \"" + type + "\"");
}

json issue_to_json(const Issue& issue) {
  return {{"issue_id", issue.issue_id},
          {"cue_id", issue.cue_id},
          {"kind", kind_name(issue.kind)},
          {"evidence", issue.evidence},
          {"suggestion", suggestion_to_json(issue.suggestion)}};
}

Issue issue_from_json(const json& j) {
  Issue i;
  i.issue_id = field<std::string>(j, "issue_id", "issue");
  i.cue_id = field<int>(j, "cue_id", "issue");
  i.kind = kind_from_name(field<std::string>(j, "kind", "issue"));
  i.evidence = j.value("evidence", json::object());
  i.suggestion = suggestion_from_json(field<json>(j, "suggestion", "issue"));
  return i;
}

void check_suggestion(const Suggestion& s, const Cue& cue) {
  switch (s.type) {
    case SuggestionType::None:
      return;
    case SuggestionType::ReplaceText:
      if (s.lines.empty()) throw ValidationError("ReplaceText needs at least one line");
      for (const auto& l : s.lines) {
        if (l.empty() || l.find('\n') != std::string::npos) throw ValidationError("ReplaceText: bad line");
      }
      return;
    case SuggestionType::MaskSpans: {
      const auto cps = text::decode(cue.joined_text());
      for (const auto& sp : s.spans) {
        if (sp.start < 0 || sp.end <= sp.start || static_cast<std::size_t>(sp.end) > cps.size()) {
          throw ValidationError("mask span out of bounds");
        }
        for (int i = sp.start; i < sp.end; ++i) {
          if (cps[static_cast<std::size_t>(i)] == U'\n') throw ValidationError("mask span crosses a line break");
        }
      }
      return;
    }
    case SuggestionType::AppendTag:
      if (s.tag.empty() || s.tag.find('\n') != std::string::npos) throw ValidationError("AppendTag: bad tag");
      return;
    case SuggestionType::SplitCue: {
      if (s.cues.empty()) throw ValidationError("SplitCue: no cues");
      Timecode at = cue.start;
      for (const auto& c : s.cues) {
        if (c.start != at) throw ValidationError("SplitCue: segments leave a gap or overlap");
        if (c.end <= c.start) throw ValidationError("SplitCue: empty segment");
        if (c.lines.empty()) throw ValidationError("SplitCue: segment without text");
        for (const auto& l : c.lines) {
          if (l.empty() || l.find('\n') != std::string::npos) throw ValidationError("SplitCue: bad line");
        }
        at = c.end;
      }
      if (at != cue.end) throw ValidationError("SplitCue: segments do not end at the cue end");
      return;
    }
    case SuggestionType::MoveRegion:
      if (!s.region.valid()) throw ValidationError("MoveRegion: invalid region");
      return;
    case SuggestionType::SetColor:
      return;
  }
}

json skip_to_json(const Skip& s) { return {{"cue_id", s.cue_id}, {"detector", s.detector}, {"reason", s.reason}}; }

Skip skip_from_json(const json& j) {
  return {field<int>(j, "cue_id", "skip"), field<std::string>(j, "detector", "skip"),
          field<std::string>(j, "reason", "skip")};
}

}  // namespace vsat
