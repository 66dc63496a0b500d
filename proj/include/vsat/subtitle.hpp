#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vsat {

/// Milliseconds since video start.
struct Timecode {
  std::int64_t ms = 0;

  friend auto operator<=>(const Timecode&, const Timecode&) = default;
};

/// "HH:MM:SS,mmm". Hours are zero-padded to two digits and widen past 99.
std::string format_srt_timecode(Timecode t);
/// "HH:MM:SS.mmm".
std::string format_vtt_timecode(Timecode t);

/// Normalized placement rectangle, top-left origin. Coordinates are kept on a
/// 1e-4 grid so that they survive a trip through VTT percentage settings.
struct Region {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  static Region make(double x, double y, double w, double h);
  bool valid() const;
  bool contains_point(double px, double py) const;

  friend bool operator==(const Region&, const Region&) = default;
};

/// Bottom-center band used when a cue carries no position hint.
inline constexpr Region kDefaultSubtitleRegion{0.2, 0.85, 0.6, 0.1};

enum class SubtitleFormat { Srt, Vtt };

std::string_view format_name(SubtitleFormat f);
SubtitleFormat format_from_name(std::string_view name);
/// Picks the format by file extension (.srt / .vtt).
SubtitleFormat format_from_path(std::string_view path);

struct Cue {
  int id = 0;
  Timecode start;
  Timecode end;
  std::vector<std::string> lines;
  std::optional<Region> position;
  /// Raw VTT cue settings (or trailing SRT timing-line text), round-tripped.
  std::string settings;

  /// Lines joined with '\n'; the coordinate space for character spans.
  std::string joined_text() const;
  /// Lines joined with a single space.
  std::string flat_text() const;

  friend bool operator==(const Cue&, const Cue&) = default;
};

struct SubtitleDoc {
  SubtitleFormat format = SubtitleFormat::Srt;
  /// VTT only: text that follows the "WEBVTT" magic up to the first cue,
  /// including NOTE/STYLE/REGION blocks. Either empty or starting with a
  /// space, tab or newline.
  std::string header;
  std::vector<Cue> cues;

  const Cue* find(int cue_id) const;

  friend bool operator==(const SubtitleDoc&, const SubtitleDoc&) = default;
};

SubtitleDoc parse_srt(std::string_view text);
SubtitleDoc parse_vtt(std::string_view text);
/// Dispatches on `format`.
SubtitleDoc parse_subtitle(std::string_view text, SubtitleFormat format);

std::string serialize_srt(const SubtitleDoc& doc);
std::string serialize_vtt(const SubtitleDoc& doc);
std::string serialize(const SubtitleDoc& doc, SubtitleFormat format);

/// Maps VTT cue settings (line/position/size percentages) to a region hint.
std::optional<Region> region_from_vtt_settings(std::string_view settings);
/// Settings string carrying `region`, keeping unrelated tokens of `base`.
std::string vtt_settings_for_region(std::string_view base, const Region& region);
/// Sets the cue's region hint; for VTT the settings string is rewritten to
/// carry it so that the cue still round-trips field-wise.
void set_position(Cue& cue, const Region& region, SubtitleFormat format);

struct CueTableRow {
  int id = 0;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::string text;  // lines joined with a literal "\n" escape
  int cpl_max = 0;
  double cps = 0.0;
};

int cue_cpl_max(const Cue& cue);
double cue_cps(const Cue& cue);

std::vector<CueTableRow> to_table(const SubtitleDoc& doc);
/// RFC 4180 CSV with header id,start_ms,end_ms,text,cpl_max,cps.
std::string table_to_csv(const std::vector<CueTableRow>& rows);

inline constexpr std::int64_t kMinCueDurationMs = 100;

struct StructuralFinding {
  enum class Kind { Overlap, ZeroLength, TooShort, OutOfOrder, EmptyText, SrtRange, BeyondMedia };
  Kind kind;
  int cue_id = 0;
  int other_cue_id = 0;  // the overlapped / preceding cue, when relevant
  std::string message;
};

std::string_view finding_kind_name(StructuralFinding::Kind k);

/// Reports structural problems without mutating the document. When
/// `media_duration_ms` is given, cues ending after it are reported too.
std::vector<StructuralFinding> validate(const SubtitleDoc& doc,
                                        std::optional<std::int64_t> media_duration_ms = std::nullopt);

/// True when the doc satisfies every SubtitleDoc/Cue invariant.
bool is_valid(const SubtitleDoc& doc);

}  // namespace vsat
