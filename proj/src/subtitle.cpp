#include "vsat/subtitle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "vsat/error.hpp"
#include "vsat/text.hpp"

namespace vsat {

namespace {

double quantize(double v) { return static_cast<double>(std::llround(v * 10000.0)) / 10000.0; }

struct Line {
  std::size_t number;  // 1-based
  std::string text;
};

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      ++i;
      continue;
    }
    if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

// BOM stripping, encoding check and line splitting (CRLF, LF and lone CR).
std::vector<Line> split_lines(std::string_view text) {
  if (text.size() >= 2 && ((text[0] == '\xFF' && text[1] == '\xFE') ||
                           (text[0] == '\xFE' && text[1] == '\xFF'))) {
    throw FormatError("UTF-16 input is not supported; convert to UTF-8");
  }
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  if (!valid_utf8(text)) throw FormatError("input is not valid UTF-8");

  std::vector<Line> lines;
  std::string cur;
  std::size_t number = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\r' || c == '\n') {
      lines.push_back({number++, cur});
      cur.clear();
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back({number, cur});
  return lines;
}

bool is_blank(const std::string& s) { return text::trim(s).empty(); }

std::vector<std::vector<Line>> split_blocks(const std::vector<Line>& lines, std::size_t from) {
  std::vector<std::vector<Line>> blocks;
  std::vector<Line> cur;
  for (std::size_t i = from; i < lines.size(); ++i) {
    if (is_blank(lines[i].text)) {
      if (!cur.empty()) blocks.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(lines[i]);
    }
  }
  if (!cur.empty()) blocks.push_back(std::move(cur));
  return blocks;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Parses [H...:]MM:SS<sep>mmm. `max_hour_digits` = 0 means unbounded.
std::optional<Timecode> parse_timecode(std::string_view s, char sep, bool hours_required,
                                       std::size_t max_hour_digits) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ':') {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  if (parts.size() != 2 && parts.size() != 3) return std::nullopt;
  if (parts.size() == 2 && hours_required) return std::nullopt;

  std::int64_t hours = 0;
  std::size_t idx = 0;
  if (parts.size() == 3) {
    const auto h = parts[0];
    if (!all_digits(h)) return std::nullopt;
    if (max_hour_digits != 0 && h.size() > max_hour_digits) return std::nullopt;
    if (h.size() > 9) return std::nullopt;
    hours = std::stoll(std::string(h));
    idx = 1;
  }
  const auto mm = parts[idx];
  const auto rest = parts[idx + 1];
  if (mm.size() != 2 || !all_digits(mm)) return std::nullopt;
  const auto dot = rest.find(sep);
  if (dot != 2 || rest.size() != 6) return std::nullopt;
  const auto ss = rest.substr(0, 2);
  const auto ms = rest.substr(3, 3);
  if (!all_digits(ss) || !all_digits(ms)) return std::nullopt;
  const int minutes = std::stoi(std::string(mm));
  const int seconds = std::stoi(std::string(ss));
  if (minutes > 59 || seconds > 59) return std::nullopt;
  return Timecode{((hours * 60 + minutes) * 60 + seconds) * 1000 + std::stoi(std::string(ms))};
}

struct Timing {
  Timecode start;
  Timecode end;
  std::string settings;
};

Timing parse_timing_line(const Line& line, bool vtt) {
  const auto arrow = line.text.find("-->");
  if (arrow == std::string::npos) throw ParseError(line.number, "expected cue timing line");
  const std::string left = text::trim(std::string_view(line.text).substr(0, arrow));
  const std::string right = text::trim(std::string_view(line.text).substr(arrow + 3));

  std::string end_tok;
  std::string settings;
  {
    const auto ws = right.find_first_of(" \t");
    end_tok = right.substr(0, ws);
    if (ws != std::string::npos) settings = text::trim(std::string_view(right).substr(ws));
  }
  const char sep = vtt ? '.' : ',';
  const auto start = parse_timecode(left, sep, !vtt, vtt ? 0 : 2);
  const auto end = parse_timecode(end_tok, sep, !vtt, vtt ? 0 : 2);
  if (!start || !end) {
    throw ParseError(line.number, std::string("malformed timecode in '") + line.text + "'");
  }
  if (vtt && !settings.empty()) {
    // Collapse whitespace between settings tokens.
    settings = text::join(text::split_words(settings), " ");
  }
  return {*start, *end, settings};
}

void finalize(SubtitleDoc& doc) {
  std::stable_sort(doc.cues.begin(), doc.cues.end(),
                   [](const Cue& a, const Cue& b) { return a.start < b.start; });
  int id = 1;
  for (auto& c : doc.cues) c.id = id++;
}

std::string format_timecode(Timecode t, char sep) {
  const std::int64_t ms = t.ms < 0 ? 0 : t.ms;
  const std::int64_t h = ms / 3600000;
  const std::int64_t m = (ms / 60000) % 60;
  const std::int64_t s = (ms / 1000) % 60;
  const std::int64_t f = ms % 1000;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%02lld:%02lld:%02lld%c%03lld", static_cast<long long>(h),
                static_cast<long long>(m), static_cast<long long>(s), sep,
                static_cast<long long>(f));
  return buf;
}

std::string percent(double v) {
  const long long k = std::llround(v * 10000.0);
  char buf[32];
  if (k % 100 == 0) {
    std::snprintf(buf, sizeof(buf), "%lld%%", k / 100);
  } else if (k % 10 == 0) {
    std::snprintf(buf, sizeof(buf), "%lld.%lld%%", k / 100, (k % 100) / 10);
  } else {
    std::snprintf(buf, sizeof(buf), "%lld.%02lld%%", k / 100, k % 100);
  }
  return buf;
}

std::optional<double> parse_percent(std::string_view v) {
  if (v.empty() || v.back() != '%') return std::nullopt;
  v.remove_suffix(1);
  if (v.empty()) return std::nullopt;
  for (char c : v) {
    if (!((c >= '0' && c <= '9') || c == '.' || c == '-' || c == '+')) return std::nullopt;
  }
  const double pct = std::strtod(std::string(v).c_str(), nullptr);
  if (!std::isfinite(pct)) return std::nullopt;
  return static_cast<double>(std::llround(pct * 100.0)) / 10000.0;
}

bool is_region_token(std::string_view tok) {
  return tok.starts_with("line:") || tok.starts_with("position:") || tok.starts_with("size:");
}

std::string strip_region_tokens(std::string_view settings) {
  std::vector<std::string> kept;
  for (auto& tok : text::split_words(settings)) {
    if (!is_region_token(tok)) kept.push_back(tok);
  }
  return text::join(kept, " ");
}

std::string settings_for_serialization(const Cue& cue) {
  const auto implied = region_from_vtt_settings(cue.settings);
  if (cue.position) {
    if (implied && *implied == *cue.position) return cue.settings;
    return vtt_settings_for_region(cue.settings, *cue.position);
  }
  return implied ? strip_region_tokens(cue.settings) : cue.settings;
}

}  // namespace

std::string format_srt_timecode(Timecode t) { return format_timecode(t, ','); }
std::string format_vtt_timecode(Timecode t) { return format_timecode(t, '.'); }

Region Region::make(double x, double y, double w, double h) {
  return Region{quantize(x), quantize(y), quantize(w), quantize(h)};
}

bool Region::valid() const {
  constexpr double eps = 1e-9;
  return x >= 0.0 && y >= 0.0 && w > 0.0 && h > 0.0 && x + w <= 1.0 + eps && y + h <= 1.0 + eps;
}

bool Region::contains_point(double px, double py) const {
  return px >= x && px < x + w && py >= y && py < y + h;
}

std::string_view format_name(SubtitleFormat f) { return f == SubtitleFormat::Srt ? "srt" : "vtt"; }

SubtitleFormat format_from_name(std::string_view name) {
  const std::string n = text::to_lower(name);
  if (n == "srt") return SubtitleFormat::Srt;
  if (n == "vtt" || n == "webvtt") return SubtitleFormat::Vtt;
  throw ValidationError("unknown subtitle format '" + std::string(name) + "'");
}

SubtitleFormat format_from_path(std::string_view path) {
  const auto dot = path.rfind('.');
  if (dot == std::string_view::npos) throw FormatError("cannot infer subtitle format of " + std::string(path));
  try {
    return format_from_name(path.substr(dot + 1));
  } catch (const ValidationError&) {
    throw FormatError("unsupported subtitle extension: " + std::string(path));
  }
}

std::string Cue::joined_text() const { return text::join(lines, "\n"); }
std::string Cue::flat_text() const { return text::join(lines, " "); }

const Cue* SubtitleDoc::find(int cue_id) const {
  for (const auto& c : cues) {
    if (c.id == cue_id) return &c;
  }
  return nullptr;
}

SubtitleDoc parse_srt(std::string_view input) {
  const auto lines = split_lines(input);
  SubtitleDoc doc;
  doc.format = SubtitleFormat::Srt;
  int ordinal = 0;
  for (const auto& block : split_blocks(lines, 0)) {
    ++ordinal;
    std::size_t t = 0;
    if (block[0].text.find("-->") == std::string::npos) {
      if (block.size() < 2) {
        throw ParseError(block[0].number, "expected cue timing after index line");
      }
      t = 1;
    }
    const auto timing = parse_timing_line(block[t], false);
    if (timing.start >= timing.end) {
      throw ParseError(block[t].number, "start >= end at cue " + std::to_string(ordinal));
    }
    Cue cue;
    cue.start = timing.start;
    cue.end = timing.end;
    cue.settings = timing.settings;
    for (std::size_t i = t + 1; i < block.size(); ++i) cue.lines.push_back(block[i].text);
    if (cue.lines.empty()) {
      throw ParseError(block[t].number, "cue " + std::to_string(ordinal) + " has no text");
    }
    doc.cues.push_back(std::move(cue));
  }
  finalize(doc);
  return doc;
}

SubtitleDoc parse_vtt(std::string_view input) {
  const auto lines = split_lines(input);
  if (lines.empty() || !lines[0].text.starts_with("WEBVTT") ||
      (lines[0].text.size() > 6 && lines[0].text[6] != ' ' && lines[0].text[6] != '\t')) {
    throw FormatError("missing WEBVTT magic");
  }

  SubtitleDoc doc;
  doc.format = SubtitleFormat::Vtt;
  doc.header = lines[0].text.substr(6);

  // Lines directly under the magic line belong to the header block.
  std::size_t i = 1;
  while (i < lines.size() && !is_blank(lines[i].text)) {
    if (lines[i].text.find("-->") != std::string::npos) {
      throw ParseError(lines[i].number, "cue timing inside the WEBVTT header block");
    }
    doc.header += "\n" + lines[i].text;
    ++i;
  }

  int ordinal = 0;
  for (const auto& block : split_blocks(lines, i)) {
    const bool timing_first = block[0].text.find("-->") != std::string::npos;
    const bool timing_second = block.size() > 1 && block[1].text.find("-->") != std::string::npos;
    if (!timing_first && !timing_second) {
      const auto& head = block[0].text;
      const bool known = head.starts_with("NOTE") || head.starts_with("STYLE") ||
                         head.starts_with("REGION");
      if (!known) throw ParseError(block[0].number, "expected cue timing line");
      std::vector<std::string> texts;
      for (const auto& l : block) texts.push_back(l.text);
      doc.header += "\n\n" + text::join(texts, "\n");
      continue;
    }
    ++ordinal;
    const std::size_t t = timing_first ? 0 : 1;
    const auto timing = parse_timing_line(block[t], true);
    if (timing.start >= timing.end) {
      throw ParseError(block[t].number, "start >= end at cue " + std::to_string(ordinal));
    }
    Cue cue;
    cue.start = timing.start;
    cue.end = timing.end;
    cue.settings = timing.settings;
    cue.position = region_from_vtt_settings(cue.settings);
    for (std::size_t k = t + 1; k < block.size(); ++k) cue.lines.push_back(block[k].text);
    if (cue.lines.empty()) {
      throw ParseError(block[t].number, "cue " + std::to_string(ordinal) + " has no text");
    }
    doc.cues.push_back(std::move(cue));
  }
  finalize(doc);
  return doc;
}

SubtitleDoc parse_subtitle(std::string_view text, SubtitleFormat format) {
  return format == SubtitleFormat::Srt ? parse_srt(text) : parse_vtt(text);
}

std::string serialize_srt(const SubtitleDoc& doc) {
  std::string out;
  int index = 1;
  for (const auto& cue : doc.cues) {
    if (index > 1) out += "\n";
    out += std::to_string(index++) + "\n";
    out += format_srt_timecode(cue.start) + " --> " + format_srt_timecode(cue.end);
    if (!cue.settings.empty()) out += " " + cue.settings;
    out += "\n";
    for (const auto& l : cue.lines) out += l + "\n";
  }
  return out;
}

std::string serialize_vtt(const SubtitleDoc& doc) {
  std::string out = "WEBVTT" + doc.header + "\n";
  for (const auto& cue : doc.cues) {
    out += "\n";
    out += format_vtt_timecode(cue.start) + " --> " + format_vtt_timecode(cue.end);
    const auto settings = settings_for_serialization(cue);
    if (!settings.empty()) out += " " + settings;
    out += "\n";
    for (const auto& l : cue.lines) out += l + "\n";
  }
  return out;
}

std::string serialize(const SubtitleDoc& doc, SubtitleFormat format) {
  return format == SubtitleFormat::Srt ? serialize_srt(doc) : serialize_vtt(doc);
}

std::optional<Region> region_from_vtt_settings(std::string_view settings) {
  std::optional<double> line;
  std::optional<double> position;
  std::optional<double> size;
  std::string line_align = "start";
  std::string pos_align;
  std::string text_align = "center";

  for (const auto& tok : text::split_words(settings)) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) continue;
    const std::string name = tok.substr(0, colon);
    std::string value = tok.substr(colon + 1);
    std::string align;
    if (const auto comma = value.find(','); comma != std::string::npos) {
      align = value.substr(comma + 1);
      value = value.substr(0, comma);
    }
    if (name == "line") {
      line = parse_percent(value);
      if (!align.empty()) line_align = align;
    } else if (name == "position") {
      position = parse_percent(value);
      if (!align.empty()) pos_align = align;
    } else if (name == "size") {
      size = parse_percent(value);
    } else if (name == "align") {
      text_align = value;
    }
  }
  if (!line && !position) return std::nullopt;

  const double h = kDefaultSubtitleRegion.h;
  double w = size ? std::clamp(*size, 0.0001, 1.0) : kDefaultSubtitleRegion.w;

  double x = (1.0 - w) / 2.0;
  if (position) {
    if (pos_align.empty()) {
      if (text_align == "start" || text_align == "left") pos_align = "line-left";
      else if (text_align == "end" || text_align == "right") pos_align = "line-right";
      else pos_align = "center";
    }
    if (pos_align == "line-left" || pos_align == "start") x = *position;
    else if (pos_align == "line-right" || pos_align == "end") x = *position - w;
    else x = *position - w / 2.0;
  }

  double y = kDefaultSubtitleRegion.y;
  if (line) {
    if (line_align == "center" || line_align == "middle") y = *line - h / 2.0;
    else if (line_align == "end") y = *line - h;
    else y = *line;
  }
  x = std::clamp(x, 0.0, 1.0 - w);
  y = std::clamp(y, 0.0, 1.0 - h);
  return Region::make(x, y, w, h);
}

std::string vtt_settings_for_region(std::string_view base, const Region& region) {
  std::string out = strip_region_tokens(base);
  if (!out.empty()) out += " ";
  out += "line:" + percent(region.y) + " position:" + percent(region.x) + ",line-left size:" +
         percent(region.w);
  return out;
}

void set_position(Cue& cue, const Region& region, SubtitleFormat format) {
  cue.position = region;
  if (format == SubtitleFormat::Vtt) {
    const auto implied = region_from_vtt_settings(cue.settings);
    if (!implied || !(*implied == region)) cue.settings = vtt_settings_for_region(cue.settings, region);
  }
}

int cue_cpl_max(const Cue& cue) {
  std::size_t m = 0;
  for (const auto& l : cue.lines) m = std::max(m, text::length(l));
  return static_cast<int>(m);
}

double cue_cps(const Cue& cue) {
  std::size_t chars = 0;
  for (const auto& l : cue.lines) chars += text::length(l);
  const double secs = static_cast<double>(cue.end.ms - cue.start.ms) / 1000.0;
  return secs > 0.0 ? static_cast<double>(chars) / secs : 0.0;
}

std::vector<CueTableRow> to_table(const SubtitleDoc& doc) {
  std::vector<CueTableRow> rows;
  rows.reserve(doc.cues.size());
  for (const auto& cue : doc.cues) {
    rows.push_back({cue.id, cue.start.ms, cue.end.ms, text::join(cue.lines, "\\n"), cue_cpl_max(cue),
                    cue_cps(cue)});
  }
  return rows;
}

namespace {
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}
}  // namespace

std::string table_to_csv(const std::vector<CueTableRow>& rows) {
  std::string out = "id,start_ms,end_ms,text,cpl_max,cps\r\n";
  for (const auto& r : rows) {
    char cps[32];
    std::snprintf(cps, sizeof(cps), "%.3f", r.cps);
    out += std::to_string(r.id) + "," + std::to_string(r.start_ms) + "," + std::to_string(r.end_ms) +
           "," + csv_field(r.text) + "," + std::to_string(r.cpl_max) + "," + cps + "\r\n";
  }
  return out;
}

std::string_view finding_kind_name(StructuralFinding::Kind k) {
  switch (k) {
    case StructuralFinding::Kind::Overlap: return "overlap";
    case StructuralFinding::Kind::ZeroLength: return "zero_length";
    case StructuralFinding::Kind::TooShort: return "too_short";
    case StructuralFinding::Kind::OutOfOrder: return "out_of_order";
    case StructuralFinding::Kind::EmptyText: return "empty_text";
    case StructuralFinding::Kind::SrtRange: return "srt_range";
    case StructuralFinding::Kind::BeyondMedia: return "beyond_media";
  }
  return "unknown";
}

std::vector<StructuralFinding> validate(const SubtitleDoc& doc,
                                        std::optional<std::int64_t> media_duration_ms) {
  using K = StructuralFinding::Kind;
  std::vector<StructuralFinding> out;
  const Cue* prev = nullptr;
  const Cue* max_end_cue = nullptr;
  for (const auto& cue : doc.cues) {
    const auto dur = cue.end.ms - cue.start.ms;
    if (dur <= 0) {
      out.push_back({K::ZeroLength, cue.id, 0, "cue has end <= start"});
    } else if (dur < kMinCueDurationMs) {
      out.push_back({K::TooShort, cue.id, 0,
                     "cue lasts " + std::to_string(dur) + "ms (< " + std::to_string(kMinCueDurationMs) + "ms)"});
    }
    if (prev && cue.start < prev->start) {
      out.push_back({K::OutOfOrder, cue.id, prev->id, "cue starts before the preceding cue"});
    }
    if (max_end_cue && cue.start < max_end_cue->end) {
      out.push_back({K::Overlap, cue.id, max_end_cue->id,
                     "cue overlaps cue " + std::to_string(max_end_cue->id)});
    }
    bool empty = cue.lines.empty();
    for (const auto& l : cue.lines) {
      if (text::trim(l).empty() || l.find('\n') != std::string::npos || l.find('\r') != std::string::npos) {
        empty = true;
      }
    }
    if (empty) out.push_back({K::EmptyText, cue.id, 0, "cue has an empty or multi-line text line"});
    if (doc.format == SubtitleFormat::Srt && cue.end.ms >= 100LL * 3600 * 1000) {
      out.push_back({K::SrtRange, cue.id, 0, "timecode exceeds the SRT 99:59:59,999 range"});
    }
    if (media_duration_ms && cue.end.ms > *media_duration_ms) {
      out.push_back({K::BeyondMedia, cue.id, 0, "cue ends after the media duration"});
    }
    prev = &cue;
    if (!max_end_cue || cue.end > max_end_cue->end) max_end_cue = &cue;
  }
  return out;
}

bool is_valid(const SubtitleDoc& doc) {
  if (doc.format == SubtitleFormat::Srt && !doc.header.empty()) return false;
  if (!doc.header.empty() && doc.header[0] != ' ' && doc.header[0] != '\t' && doc.header[0] != '\n') {
    return false;
  }
  std::set<int> ids;
  const Cue* prev = nullptr;
  for (const auto& cue : doc.cues) {
    if (!ids.insert(cue.id).second) return false;
    if (cue.start.ms < 0 || cue.start >= cue.end) return false;
    if (prev && cue.start < prev->start) return false;
    if (cue.lines.empty()) return false;
    for (const auto& l : cue.lines) {
      if (text::trim(l).empty() || l.find_first_of("\r\n") != std::string::npos) return false;
    }
    if (cue.position && !cue.position->valid()) return false;
    prev = &cue;
  }
  return true;
}

}  // namespace vsat
