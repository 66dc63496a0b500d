#include "vsat/fixes.hpp"

#include <algorithm>

#include "vsat/error.hpp"
#include "vsat/lang.hpp"
#include "vsat/text.hpp"

namespace vsat {

using nlohmann::json;

namespace {

std::vector<std::string> split_lines(const std::string& joined) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (true) {
    const auto nl = joined.find('\n', pos);
    lines.push_back(joined.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos));
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return lines;
}

std::string tag_of(const Cue& cue) { return "c" + std::to_string(cue.id) + ": "; }

// Moves spans defined on `before` onto `after`. Spans inside an unchanged
// prefix or suffix shift by the length change; others are looked up by the
// word they covered.
std::vector<CharSpan> rebase_spans(const std::string& before, const std::string& after,
                                   const std::vector<CharSpan>& spans, std::vector<std::string>& lost) {
  if (before == after) return spans;
  const auto a = text::decode(before);
  const auto b = text::decode(after);
  std::size_t prefix = 0;
  while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
         a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) {
    ++suffix;
  }
  const auto delta = static_cast<int>(b.size()) - static_cast<int>(a.size());
  std::vector<CharSpan> out;
  for (const auto& s : spans) {
    if (static_cast<std::size_t>(s.end) <= prefix) {
      out.push_back(s);
    } else if (static_cast<std::size_t>(s.start) >= a.size() - suffix) {
      out.push_back({s.start + delta, s.end + delta});
    } else {
      const auto word = text::encode(std::u32string_view(a).substr(s.start, s.end - s.start));
      if (auto found = find_word(after, word)) {
        out.push_back(*found);
      } else {
        lost.push_back(word);
      }
    }
  }
  return out;
}

// Re-fills the word slots of `segs` with `words`, keeping each line's word
// count. Empty result when the counts disagree or a line grows too long.
std::optional<std::vector<Cue>> refill_segments(const std::vector<Cue>& segs, const std::vector<std::string>& words,
                                                int max_cpl) {
  std::size_t need = 0;
  for (const auto& s : segs) {
    for (const auto& l : s.lines) need += text::split_words(l).size();
  }
  if (need != words.size()) return std::nullopt;
  std::vector<Cue> out = segs;
  std::size_t at = 0;
  for (auto& s : out) {
    for (auto& l : s.lines) {
      const auto n = text::split_words(l).size();
      std::vector<std::string> part(words.begin() + static_cast<std::ptrdiff_t>(at),
                                    words.begin() + static_cast<std::ptrdiff_t>(at + n));
      at += n;
      l = text::join(part, " ");
      if (l.empty() || cpl_flags(static_cast<int>(text::length(l)), max_cpl)) return std::nullopt;
    }
  }
  return out;
}

}  // namespace

std::vector<AppliedFix> accept_all(const std::vector<Issue>& issues) {
  std::vector<AppliedFix> out;
  out.reserve(issues.size());
  for (const auto& i : issues) {
    if (i.suggestion.type != SuggestionType::None) out.push_back({i, i.suggestion});
  }
  return out;
}

FixOutcome apply_fixes(const SubtitleDoc& original, const std::vector<AppliedFix>& fixes,
                       const std::vector<ManualEdit>& edits) {
  FixOutcome out;
  out.doc.format = original.format;
  out.doc.header = original.header;

  std::map<int, std::vector<const AppliedFix*>> by_cue;
  for (const auto& f : fixes) {
    const Cue* cue = original.find(f.issue.cue_id);
    if (!cue) {
      out.conflicts.push_back(f.issue.issue_id + ": cue " + std::to_string(f.issue.cue_id) + " does not exist");
      continue;
    }
    try {
      check_suggestion(f.suggestion, *cue);
    } catch (const ValidationError& e) {
      out.conflicts.push_back(f.issue.issue_id + ": " + e.what());
      continue;
    }
    by_cue[cue->id].push_back(&f);
  }
  for (auto& [id, list] : by_cue) {
    std::stable_sort(list.begin(), list.end(), [](auto* a, auto* b) {
      return static_cast<int>(a->issue.kind) < static_cast<int>(b->issue.kind);
    });
  }

  std::vector<std::optional<FontColor>> colors;
  for (const auto& orig : original.cues) {
    Cue c = orig;
    std::optional<FontColor> color;
    const auto it = by_cue.find(orig.id);
    if (it == by_cue.end()) {
      out.doc.cues.push_back(std::move(c));
      out.origins.push_back({orig.id, 0});
      colors.push_back(std::nullopt);
      continue;
    }
    const auto& items = it->second;
    auto each = [&](SuggestionType t, auto&& fn) {
      for (const auto* f : items) {
        if (f->suggestion.type == t) fn(*f);
      }
    };

    const AppliedFix* replaced_by = nullptr;
    each(SuggestionType::ReplaceText, [&](const AppliedFix& f) {
      if (replaced_by) {
        out.conflicts.push_back(tag_of(orig) + f.issue.issue_id + " replacement dropped; text already replaced by " +
                                replaced_by->issue.issue_id);
        return;
      }
      c.lines = f.suggestion.lines;
      replaced_by = &f;
    });

    each(SuggestionType::MaskSpans, [&](const AppliedFix& f) {
      std::vector<std::string> lost;
      const auto current = c.joined_text();
      const auto spans = rebase_spans(orig.joined_text(), current, f.suggestion.spans, lost);
      for (const auto& w : lost) {
        out.conflicts.push_back(tag_of(orig) + f.issue.issue_id + " could not find \"" + w + "\" after text change");
      }
      if (spans.empty()) return;
      try {
        c.lines = split_lines(mask_spans(current, spans));
      } catch (const ValidationError& e) {
        out.conflicts.push_back(tag_of(orig) + f.issue.issue_id + ": " + e.what());
      }
    });

    each(SuggestionType::AppendTag, [&](const AppliedFix& f) {
      if (text::to_lower(c.joined_text()).find(text::to_lower(f.suggestion.tag)) == std::string::npos) {
        c.lines.push_back(f.suggestion.tag);
      }
    });

    each(SuggestionType::MoveRegion, [&](const AppliedFix& f) { set_position(c, f.suggestion.region, original.format); });
    each(SuggestionType::SetColor, [&](const AppliedFix& f) { color = f.suggestion.color; });

    const AppliedFix* split = nullptr;
    each(SuggestionType::SplitCue, [&](const AppliedFix& f) {
      if (!split) split = &f;
    });
    if (!split) {
      out.doc.cues.push_back(std::move(c));
      out.origins.push_back({orig.id, 0});
      colors.push_back(color);
      continue;
    }

    const int max_cpl = split->issue.evidence.value("max_cpl", kMaxCpl);
    std::vector<Cue> segs = split->suggestion.cues;
    const auto words = text::split_words(c.flat_text());
    std::vector<std::string> seg_words;
    for (const auto& s : segs) {
      for (const auto& w : text::split_words(s.flat_text())) seg_words.push_back(w);
    }
    if (words != seg_words) {
      if (auto refilled = refill_segments(segs, words, max_cpl)) {
        segs = std::move(*refilled);
      } else {
        std::vector<TranscriptWord> transcript;
        if (split->issue.evidence.contains("transcript")) {
          try {
            transcript = parse_transcript_json(split->issue.evidence["transcript"]);
          } catch (const Error&) {
            transcript.clear();
          }
        }
        segs = split_cue(c, transcript, max_cpl);
        out.conflicts.push_back(tag_of(orig) + split->issue.issue_id +
                                ": text changed before the split; segments recomputed");
      }
    }
    for (std::size_t k = 0; k < segs.size(); ++k) {
      Cue n = segs[k];
      n.position = c.position;
      n.settings = c.settings;
      out.doc.cues.push_back(std::move(n));
      out.origins.push_back({orig.id, static_cast<int>(k)});
      colors.push_back(color);
    }
  }

  for (std::size_t e = 0; e < edits.size(); ++e) {
    const auto& edit = edits[e];
    const auto pos = std::find(out.origins.begin(), out.origins.end(), edit.target);
    if (pos == out.origins.end()) {
      out.orphaned_edits.push_back(e);
      continue;
    }
    bool ok = !edit.new_lines.empty();
    for (const auto& l : edit.new_lines) ok = ok && !l.empty() && l.find('\n') == std::string::npos;
    if (!ok) {
      out.orphaned_edits.push_back(e);
      continue;
    }
    out.doc.cues[static_cast<std::size_t>(pos - out.origins.begin())].lines = edit.new_lines;
  }

  for (std::size_t i = 0; i < out.doc.cues.size(); ++i) {
    auto& cue = out.doc.cues[i];
    cue.id = static_cast<int>(i) + 1;
    const bool moved = cue.position.has_value() && cue.position != original.find(out.origins[i].cue_id)->position;
    if (moved || colors[i]) {
      Placement p;
      if (moved) p.region = cue.position;
      p.color = colors[i];
      out.placement[cue.id] = p;
    }
  }
  return out;
}

json placement_sidecar(const FixOutcome& outcome, const Region& default_region, FontColor default_color) {
  json cues = json::array();
  for (std::size_t i = 0; i < outcome.doc.cues.size(); ++i) {
    const auto& c = outcome.doc.cues[i];
    const auto it = outcome.placement.find(c.id);
    const Region r = c.position.value_or(default_region);
    FontColor color = default_color;
    if (it != outcome.placement.end() && it->second.color) color = *it->second.color;
    cues.push_back({{"cue_id", c.id},
                    {"start_ms", c.start.ms},
                    {"end_ms", c.end.ms},
                    {"region", {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}},
                    {"color", color_name(color)},
                    {"source_cue", outcome.origins[i].cue_id},
                    {"changed", it != outcome.placement.end()}});
  }
  return {{"cues", cues}};
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') {
      out += "'\\''";
    } else {
      out += ch;
    }
  }
  return out + "'";
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::string mux_script(const std::string& video, const std::string& subtitle_file, SubtitleFormat format,
                       const std::string& output_video) {
  std::string codec = format == SubtitleFormat::Vtt ? "webvtt" : "srt";
  if (ends_with(output_video, ".mp4") || ends_with(output_video, ".mov") || ends_with(output_video, ".m4v")) {
    codec = "mov_text";
  }
  return "#!/bin/sh\n"
         "# Attaches the corrected subtitles to the video as a selectable track.\n"
         "set -e\n"
         "ffmpeg -nostdin -y -i " +
         quote(video) + " -i " + quote(subtitle_file) + " -map 0 -map 1 -c copy -c:s " + codec + " " +
         quote(output_video) + "\n";
}

}  // namespace vsat
