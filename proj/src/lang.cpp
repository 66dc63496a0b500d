#include "vsat/lang.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "vsat/error.hpp"
#include "vsat/parallel.hpp"
#include "vsat/text.hpp"

namespace vsat {

using nlohmann::json;

namespace {

json span_json(const CharSpan& s) { return {{"start", s.start}, {"end", s.end}}; }

int max_line_chars(const Cue& cue) {
  int m = 0;
  for (const auto& l : cue.lines) m = std::max(m, static_cast<int>(text::length(l)));
  return m;
}

std::string ascii_upper(std::string s) {
  for (auto& c : s) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
  }
  return s;
}

// Carries the capitalization of `original` over to `replacement`.
std::string transfer_case(const std::string& original, const std::string& replacement) {
  bool any_lower = false;
  bool any_upper = false;
  for (char c : original) {
    any_lower |= (c >= 'a' && c <= 'z');
    any_upper |= (c >= 'A' && c <= 'Z');
  }
  if (any_upper && !any_lower && text::length(original) > 1) return ascii_upper(replacement);
  if (!original.empty() && original[0] >= 'A' && original[0] <= 'Z' && !replacement.empty() &&
      replacement[0] >= 'a' && replacement[0] <= 'z') {
    std::string r = replacement;
    r[0] = static_cast<char>(r[0] - 32);
    return r;
  }
  return replacement;
}

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

std::string normalized_word(const std::string& word) {
  const auto tokens = text::normalize_tokens(word);
  if (tokens.size() == 1) return tokens[0];
  return text::to_lower(text::trim(word));
}

}  // namespace

// ---------------------------------------------------------------- Issue 1

RuleCheck validate_spell_rules(const std::string& original, const std::string& candidate) {
  if (candidate == original) return {false, 3, "candidate is the original word"};
  for (const char* suffix : kSpellSuffixes) {
    if (candidate == original + suffix) return {false, 1, std::string("candidate adds the suffix -") + suffix};
  }
  return {};
}

std::vector<std::string> spell_context(const SubtitleDoc& doc, std::size_t cue_index, int n) {
  std::vector<std::string> ctx;
  const std::size_t from = cue_index > static_cast<std::size_t>(std::max(n, 0)) ? cue_index - n : 0;
  for (std::size_t i = from; i < cue_index && i < doc.cues.size(); ++i) ctx.push_back(doc.cues[i].flat_text());
  return ctx;
}

LlmRequest spell_findings_request(const Cue& cue, const std::vector<std::string>& context) {
  LlmRequest req;
  req.schema = SchemaId::SpellFindings;
  req.system_prompt = std::string(system_prompt(req.schema));
  req.user_prompt = json{{"context", context}, {"cue", cue.joined_text()}}.dump();
  return req;
}

LlmRequest spell_fix_request(const Cue& cue, const std::vector<std::string>& context, const std::string& word) {
  LlmRequest req;
  req.schema = SchemaId::SpellFix;
  req.system_prompt = std::string(system_prompt(req.schema));
  req.user_prompt = json{{"context", context}, {"cue", cue.joined_text()}, {"word", word}}.dump();
  return req;
}

LlmRequest harm_spans_request(const Cue& cue) {
  LlmRequest req;
  req.schema = SchemaId::HarmSpans;
  req.system_prompt = std::string(system_prompt(req.schema));
  req.user_prompt = json{{"text", cue.joined_text()}}.dump();
  return req;
}

std::optional<CharSpan> find_word(const std::string& haystack, const std::string& word) {
  const auto hay = text::decode(haystack);
  const auto needle = text::decode(word);
  if (needle.empty() || needle.size() > hay.size()) return std::nullopt;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
      bool eq = true;
      for (std::size_t k = 0; k < needle.size() && eq; ++k) {
        eq = pass == 0 ? hay[i + k] == needle[k] : text::to_lower(hay[i + k]) == text::to_lower(needle[k]);
      }
      if (!eq) continue;
      const bool left_ok = i == 0 || !text::is_alnum(hay[i - 1]);
      const std::size_t e = i + needle.size();
      const bool right_ok = e == hay.size() || !text::is_alnum(hay[e]);
      if (left_ok && right_ok) return CharSpan{static_cast<int>(i), static_cast<int>(e)};
    }
  }
  return std::nullopt;
}

std::vector<SpellFinding> detect_contextual_spelling(const Cue& cue, const std::vector<std::string>& context,
                                                     LlmBackend& llm, std::vector<std::string>* warnings) {
  const auto joined = cue.joined_text();
  const auto response = llm.spell_findings(spell_findings_request(cue, context));
  std::vector<SpellFinding> out;
  std::set<std::string> seen;
  for (const auto& f : response.findings) {
    const auto word = text::trim(f.word);
    if (!seen.insert(text::to_lower(word)).second) continue;
    const auto span = find_word(joined, word);
    if (!span) {
      if (warnings) warnings->push_back("cue " + std::to_string(cue.id) + ": reported word \"" + word + "\" not found");
      continue;
    }
    const auto as_written = text::substr(joined, span->start, span->end);
    const auto fix = llm.spell_fix(spell_fix_request(cue, context, as_written));

    SpellFinding finding;
    finding.word = as_written;
    finding.span = *span;
    finding.rationale = f.rationale;
    const auto original = normalized_word(as_written);
    std::set<std::string> kept;
    for (const auto& raw : fix.candidates) {
      const auto cand = text::trim(raw);
      if (cand.empty() || text::split_words(cand).size() != 1) {
        finding.rejected.push_back({raw, 0});
        continue;
      }
      const auto check = validate_spell_rules(original, normalized_word(cand));
      if (!check.pass) {
        finding.rejected.push_back({cand, check.failed_rule});
        continue;
      }
      if (kept.insert(text::to_lower(cand)).second) finding.candidates.push_back(cand);
    }
    if (!finding.candidates.empty()) out.push_back(std::move(finding));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.span.start < b.span.start; });
  return out;
}

std::optional<Issue> spelling_issue(const Cue& cue, const std::vector<SpellFinding>& findings) {
  if (findings.empty()) return std::nullopt;
  auto cps = text::decode(cue.joined_text());
  std::vector<const SpellFinding*> order;
  for (const auto& f : findings) order.push_back(&f);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->span.start > b->span.start; });
  for (const auto* f : order) {
    const auto written = text::encode(std::u32string_view(cps).substr(f->span.start, f->span.end - f->span.start));
    const auto repl = text::decode(transfer_case(written, f->candidates.front()));
    cps.replace(f->span.start, f->span.end - f->span.start, repl);
  }

  json items = json::array();
  for (const auto& f : findings) {
    json rejected = json::array();
    for (const auto& r : f.rejected) rejected.push_back({{"candidate", r.candidate}, {"rule", r.rule}});
    items.push_back({{"word", f.word},
                     {"span", span_json(f.span)},
                     {"candidates", f.candidates},
                     {"rejected", rejected},
                     {"rationale", f.rationale}});
  }
  json evidence = {{"findings", items}, {"rule2", "delegated to the language model"}};
  return make_issue(cue.id, IssueKind::ContextualSpelling, std::move(evidence),
                    Suggestion::replace_text(split_lines(text::encode(cps))));
}

// ---------------------------------------------------------------- Issue 2

std::vector<CharSpan> checked_spans(const std::string& text_in, std::vector<CharSpan> spans) {
  const auto cps = text::decode(text_in);
  for (const auto& s : spans) {
    if (s.start < 0 || s.end <= s.start || static_cast<std::size_t>(s.end) > cps.size()) {
      throw ValidationError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                            ") lies outside the cue text");
    }
    for (int i = s.start; i < s.end; ++i) {
      if (cps[static_cast<std::size_t>(i)] == U'\n') {
        throw ValidationError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                              ") crosses a line break; spans must not cross line boundaries");
      }
    }
  }
  std::sort(spans.begin(), spans.end());
  std::vector<CharSpan> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.start <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }
  return merged;
}

std::string mask_spans(const std::string& text_in, const std::vector<CharSpan>& spans) {
  auto cps = text::decode(text_in);
  for (const auto& s : checked_spans(text_in, spans)) {
    for (int i = s.start; i < s.end; ++i) cps[static_cast<std::size_t>(i)] = U'*';
  }
  return text::encode(cps);
}

std::optional<Issue> detect_harmful(const Cue& cue, LlmBackend& llm) {
  const auto response = llm.harm_spans(harm_spans_request(cue));
  if (response.spans.empty()) return std::nullopt;
  const auto joined = cue.joined_text();
  const auto spans = checked_spans(joined, response.spans);
  json items = json::array();
  for (const auto& s : spans) {
    items.push_back({{"start", s.start}, {"end", s.end}, {"text", text::substr(joined, s.start, s.end)}});
  }
  return make_issue(cue.id, IssueKind::HarmfulWord, {{"spans", items}}, Suggestion::mask_spans(spans));
}

// ---------------------------------------------------------------- Issue 3

double cosine_bow(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  std::map<std::string, std::int64_t> ca;
  std::map<std::string, std::int64_t> cb;
  for (const auto& t : a) ++ca[t];
  for (const auto& t : b) ++cb[t];
  std::int64_t dot = 0;
  std::int64_t na = 0;
  std::int64_t nb = 0;
  for (const auto& [t, c] : ca) {
    na += c * c;
    const auto it = cb.find(t);
    if (it != cb.end()) dot += c * it->second;
  }
  for (const auto& [t, c] : cb) nb += c * c;
  // The norm product is formed in integers so that ratios such as 7/10 come
  // out as the nearest double.
  const double sim = static_cast<double>(dot) / std::sqrt(static_cast<double>(na * nb));
  return std::clamp(sim, 0.0, 1.0);
}

std::optional<Issue> detect_time_sync(const Cue& cue, const std::vector<TranscriptWord>& words, double threshold) {
  std::vector<std::string> spoken;
  for (const auto& w : words) spoken.push_back(w.text);
  const auto transcript = text::join(spoken, " ");
  const auto cue_tokens = text::normalize_tokens(cue.joined_text());
  const auto tr_tokens = text::normalize_tokens(transcript);
  const double sim = cosine_bow(cue_tokens, tr_tokens);
  if (!time_sync_flags(sim, threshold)) return std::nullopt;
  json evidence = {{"similarity", sim},
                   {"threshold", threshold},
                   {"cue_tokens", cue_tokens},
                   {"transcript_tokens", tr_tokens},
                   {"transcript", transcript}};
  auto suggestion = text::trim(transcript).empty() ? Suggestion::none()
                                                   : Suggestion::replace_text({text::trim(transcript)});
  return make_issue(cue.id, IssueKind::TimeSync, std::move(evidence), std::move(suggestion));
}

// ---------------------------------------------------------------- Issue 4

std::optional<Issue> detect_non_word(const Cue& cue, const std::vector<EventScore>& events, double threshold) {
  const EventScore* top = nullptr;
  for (const auto& e : events) {
    if (e.label == "Speech") continue;
    if (!top || e.score > top->score) top = &e;
  }
  if (!top || !event_flags(top->score, threshold)) return std::nullopt;
  const auto tag = "[" + text::to_lower(top->label) + "]";
  if (text::to_lower(cue.joined_text()).find(tag) != std::string::npos) return std::nullopt;
  json ranked = json::array();
  for (std::size_t i = 0; i < events.size() && i < 5; ++i) {
    ranked.push_back({{"label", events[i].label}, {"score", events[i].score}});
  }
  json evidence = {{"label", top->label}, {"score", top->score}, {"threshold", threshold}, {"events", ranked}};
  return make_issue(cue.id, IssueKind::NonWord, std::move(evidence), Suggestion::append_tag(tag));
}

// ---------------------------------------------------------------- Issue 5

SplitResult split_cue_detailed(const Cue& cue, const std::vector<TranscriptWord>& words, int max_cpl) {
  SplitResult result;
  if (max_line_chars(cue) <= max_cpl) {
    result.cues.push_back(cue);
    result.realigned = true;
    return result;
  }

  // Greedy packing. Each segment remembers the cue-word range it covers.
  struct Segment {
    std::string text;
    std::size_t first_word = 0;
    std::size_t last_word = 0;  // inclusive
    bool ends_word = true;      // false for a leading piece of a hard-split word
  };
  const auto cue_words = text::split_words(cue.flat_text());
  std::vector<Segment> segs;
  std::size_t cur_len = 0;
  bool open = false;
  for (std::size_t i = 0; i < cue_words.size(); ++i) {
    const auto& w = cue_words[i];
    const auto len = text::length(w);
    if (len > static_cast<std::size_t>(max_cpl)) {
      open = false;
      result.warnings.push_back("word of " + std::to_string(len) + " characters hard-split at " +
                                std::to_string(max_cpl));
      for (std::size_t at = 0; at < len; at += max_cpl) {
        const bool last_piece = at + max_cpl >= len;
        segs.push_back({text::substr(w, at, at + max_cpl), i, i, last_piece});
      }
      continue;
    }
    if (open && cur_len + 1 + len <= static_cast<std::size_t>(max_cpl)) {
      segs.back().text += " " + w;
      segs.back().last_word = i;
      cur_len += 1 + len;
    } else {
      segs.push_back({w, i, i, true});
      cur_len = len;
      open = true;
    }
  }
  if (segs.empty()) {
    result.cues.push_back(cue);
    return result;
  }

  // Monotone alignment of normalized tokens (longest common subsequence).
  std::vector<std::string> a;
  std::vector<std::size_t> a_owner;
  for (std::size_t i = 0; i < cue_words.size(); ++i) {
    for (auto& t : text::normalize_tokens(cue_words[i])) {
      a.push_back(std::move(t));
      a_owner.push_back(i);
    }
  }
  std::vector<std::string> b;
  std::vector<std::size_t> b_owner;
  for (std::size_t j = 0; j < words.size(); ++j) {
    for (auto& t : text::normalize_tokens(words[j].text)) {
      b.push_back(std::move(t));
      b_owner.push_back(j);
    }
  }
  std::vector<std::optional<std::int64_t>> word_end(cue_words.size());
  if (!a.empty() && !b.empty()) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<std::uint32_t> lcs((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return lcs[i * (m + 1) + j]; };
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = m; j-- > 0;) {
        at(i, j) = a[i] == b[j] ? at(i + 1, j + 1) + 1 : std::max(at(i + 1, j), at(i, j + 1));
      }
    }
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < n && j < m) {
      if (a[i] == b[j] && at(i, j) == at(i + 1, j + 1) + 1) {
        word_end[a_owner[i]] = words[b_owner[j]].end_ms;
        ++i;
        ++j;
      } else if (at(i + 1, j) >= at(i, j + 1)) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const std::size_t nseg = segs.size();
  const std::int64_t start = cue.start.ms;
  const std::int64_t end = cue.end.ms;
  const std::int64_t dur = end - start;
  if (dur < static_cast<std::int64_t>(nseg)) {
    // Too short to hold one millisecond per segment: keep one cue, one
    // segment per line.
    Cue c = cue;
    c.lines.clear();
    for (const auto& s : segs) c.lines.push_back(s.text);
    result.cues.push_back(std::move(c));
    result.warnings.push_back("cue too short to split; segments kept as lines");
    return result;
  }

  // Proportional boundaries by character count.
  std::vector<std::int64_t> prop(nseg - 1);
  {
    std::int64_t total = 0;
    for (const auto& s : segs) total += static_cast<std::int64_t>(text::length(s.text));
    std::int64_t cum = 0;
    for (std::size_t k = 0; k + 1 < nseg; ++k) {
      cum += static_cast<std::int64_t>(text::length(segs[k].text));
      prop[k] = start + dur * cum / total;
    }
  }
  auto make_monotone = [&](std::vector<std::int64_t>& b) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      const std::int64_t lo = (k == 0 ? start : b[k - 1]) + 1;
      b[k] = std::max(b[k], lo);
    }
    for (std::size_t k = b.size(); k-- > 0;) {
      const std::int64_t hi = (k + 1 == b.size() ? end : b[k + 1]) - 1;
      b[k] = std::min(b[k], hi);
    }
  };

  std::vector<std::int64_t> bounds(nseg - 1);
  std::size_t from_transcript = 0;
  for (std::size_t k = 0; k + 1 < nseg; ++k) {
    std::optional<std::int64_t> t;
    if (segs[k].ends_word) {
      for (std::size_t w = segs[k].last_word + 1; w-- > segs[k].first_word;) {
        if (word_end[w]) {
          t = start + *word_end[w];
          break;
        }
      }
    }
    if (t && *t > start && *t < end) {
      bounds[k] = *t;
      ++from_transcript;
    } else {
      bounds[k] = prop[k];
    }
  }
  bool increasing = true;
  for (std::size_t k = 1; k < bounds.size(); ++k) increasing &= bounds[k] > bounds[k - 1];
  if (!increasing) {
    result.warnings.push_back("transcript boundaries not increasing; using proportional timing");
    bounds = prop;
    from_transcript = 0;
  }
  make_monotone(bounds);
  result.realigned = from_transcript == bounds.size();
  if (!result.realigned && !words.empty()) {
    result.warnings.push_back(std::to_string(bounds.size() - from_transcript) + " of " +
                              std::to_string(bounds.size()) + " boundaries placed proportionally");
  }

  for (std::size_t k = 0; k < nseg; ++k) {
    Cue c;
    c.start.ms = k == 0 ? start : bounds[k - 1];
    c.end.ms = k + 1 == nseg ? end : bounds[k];
    c.lines = {segs[k].text};
    c.position = cue.position;
    c.settings = cue.settings;
    result.cues.push_back(std::move(c));
  }
  return result;
}

std::vector<Cue> split_cue(const Cue& cue, const std::vector<TranscriptWord>& words, int max_cpl) {
  return split_cue_detailed(cue, words, max_cpl).cues;
}

std::optional<Issue> detect_segmentation(const Cue& cue, const std::vector<TranscriptWord>& words, int max_cpl) {
  const int longest = max_line_chars(cue);
  if (!cpl_flags(longest, max_cpl)) return std::nullopt;
  auto split = split_cue_detailed(cue, words, max_cpl);
  json evidence = {{"max_line_chars", longest},
                   {"max_cpl", max_cpl},
                   {"segments", split.cues.size()},
                   {"realigned", split.realigned},
                   {"warnings", split.warnings},
                   {"transcript", transcript_to_json(words)}};
  return make_issue(cue.id, IssueKind::Segmentation, std::move(evidence), Suggestion::split_cue(std::move(split.cues)));
}

// ---------------------------------------------------------------- pass

PassResult run_language_pass(const SubtitleDoc& doc, const LanguageBackends& backends, const LanguageConfig& config) {
  std::vector<PassResult> per_cue(doc.cues.size());

  parallel_for(doc.cues.size(), config.parallelism, [&](std::size_t idx) {
    const Cue& cue = doc.cues[idx];
    PassResult& r = per_cue[idx];
    const auto cue_tag = "cue " + std::to_string(cue.id) + ": ";
    auto skip = [&](const char* detector, const std::string& reason) {
      r.skips.push_back({cue.id, detector, reason});
    };
    auto attempt = [&](const char* detector, auto&& body) {
      try {
        body();
      } catch (const std::exception& e) {
        skip(detector, e.what());
      }
    };

    if (config.spelling || config.harmful) {
      const auto context = spell_context(doc, idx, config.context_cues);
      if (config.spelling) {
        if (!backends.llm) {
          skip("spelling", "no language model backend");
        } else {
          attempt("spelling", [&] {
            if (auto issue = spelling_issue(cue, detect_contextual_spelling(cue, context, *backends.llm, &r.warnings))) {
              r.issues.push_back(std::move(*issue));
            }
          });
        }
      }
      if (config.harmful) {
        if (!backends.llm) {
          skip("harmful", "no language model backend");
        } else {
          attempt("harmful", [&] {
            if (auto issue = detect_harmful(cue, *backends.llm)) r.issues.push_back(std::move(*issue));
          });
        }
      }
    }

    if (!(config.timesync || config.nonword || config.segmentation)) return;

    std::optional<AudioClip> clip;
    std::string audio_error;
    if (!backends.media) {
      audio_error = "no media source";
    } else {
      try {
        clip = backends.media->extract_audio_clip({cue.id, cue.start, cue.end});
      } catch (const std::exception& e) {
        audio_error = e.what();
      }
    }

    std::optional<Transcript> transcript;
    std::string asr_error = audio_error;
    if ((config.timesync || config.segmentation) && clip) {
      if (!backends.asr) {
        asr_error = "no speech recognition backend";
      } else {
        try {
          transcript = backends.asr->transcribe(*clip);
          for (const auto& w : transcript->warnings) r.warnings.push_back(cue_tag + w);
        } catch (const std::exception& e) {
          asr_error = e.what();
        }
      }
    }

    if (config.timesync) {
      if (!transcript) {
        skip("timesync", asr_error);
      } else {
        attempt("timesync", [&] {
          if (auto issue = detect_time_sync(cue, transcript->words, config.timesync_threshold)) {
            r.issues.push_back(std::move(*issue));
          }
        });
      }
    }

    if (config.nonword) {
      if (!clip) {
        skip("nonword", audio_error);
      } else if (!backends.events) {
        skip("nonword", "no audio event backend");
      } else {
        attempt("nonword", [&] {
          const auto events = backends.events->classify(*clip);
          if (auto issue = detect_non_word(cue, events, config.event_threshold)) r.issues.push_back(std::move(*issue));
        });
      }
    }

    if (config.segmentation) {
      attempt("segmentation", [&] {
        const std::vector<TranscriptWord> none;
        const auto& words = transcript ? transcript->words : none;
        if (auto issue = detect_segmentation(cue, words, config.max_cpl)) {
          if (!transcript) r.warnings.push_back(cue_tag + "no transcript (" + asr_error + "); split timing is proportional");
          r.issues.push_back(std::move(*issue));
        }
      });
    }
  });

  PassResult out;
  for (auto& r : per_cue) {
    for (auto& i : r.issues) out.issues.push_back(std::move(i));
    for (auto& s : r.skips) out.skips.push_back(std::move(s));
    for (auto& w : r.warnings) out.warnings.push_back(std::move(w));
  }
  sort_issues(out.issues);
  return out;
}

}  // namespace vsat
