#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsat/backends.hpp"
#include "vsat/decisions.hpp"
#include "vsat/fixes.hpp"
#include "vsat/image.hpp"
#include "vsat/issues.hpp"
#include "vsat/lang.hpp"
#include "vsat/media.hpp"
#include "vsat/subtitle.hpp"

namespace vsat {

inline constexpr const char* kVersion = "0.1.0";

/// Flat "section.key" -> raw value map read from a TOML-style file:
/// [section] headers, key = value lines, '#' comments, quoted or bare values.
std::map<std::string, std::string> parse_config_text(std::string_view text);

struct RunConfig {
  std::string video;
  std::filesystem::path subs;
  std::optional<std::filesystem::path> assets;
  std::filesystem::path out_dir = ".";

  LanguageConfig language;
  ImageConfig image;
  int parallelism = 1;

  std::string llm_backend = "http";  // http | mock
  std::string asr_backend = "assets";  // assets | http
  std::string events_backend = "assets";  // assets | http
  std::filesystem::path mock_table;
  std::optional<std::filesystem::path> label_file;
  HttpLlmConfig llm;
  HttpServiceConfig asr_http;
  HttpServiceConfig events_http;
  ExternalToolConfig media;

  /// Applies keys from a config map; relative paths resolve against `base`.
  /// Unknown keys and bad values are ConfigError.
  void apply(const std::map<std::string, std::string>& values, const std::filesystem::path& base = {});
  void load_file(const std::filesystem::path& path);
  /// Enables exactly the listed detectors. Accepts detector names plus
  /// "language", "image", "all" and "none", comma separated.
  void set_detectors(std::string_view list);
  void check() const;
  /// Echo for the run report (no secrets).
  nlohmann::json to_json() const;
};

struct RunReport {
  std::string tool = "vsat";
  std::string version = kVersion;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json input = nlohmann::json::object();
  std::vector<Issue> issues;
  std::vector<Skip> skips;
  std::vector<std::string> warnings;
  nlohmann::json timings = nlohmann::json::object();  // phase -> milliseconds
};

nlohmann::json report_to_json(const RunReport& r, bool with_timings = true);
RunReport report_from_json(const nlohmann::json& j);
/// Report JSON without timings or worker count, for determinism comparisons.
std::string canonical_report(const RunReport& r);

/// Every issue must name a cue of `doc` and carry an applicable suggestion;
/// issue ids must be unique. ValidationError otherwise.
void check_report_matches(const SubtitleDoc& doc, const RunReport& report);

/// Owns the backends a run uses.
struct Backends {
  std::unique_ptr<LabelTable> labels;
  std::unique_ptr<LlmBackend> llm;
  std::unique_ptr<AsrBackend> asr;
  std::unique_ptr<EventBackend> events;
  std::unique_ptr<MediaSource> media;

  LanguageBackends view() const { return {llm.get(), asr.get(), events.get(), media.get()}; }
};

Backends make_backends(const RunConfig& config);

SubtitleDoc load_subtitles(const std::filesystem::path& path);

struct CheckOutput {
  SubtitleDoc doc;
  RunReport report;
  std::filesystem::path report_path;
  std::filesystem::path table_path;
};

/// Parses the subtitles, caches the cue table as CSV, runs both passes and
/// writes report.json into the output directory.
CheckOutput cmd_check(const RunConfig& config);
/// Same as cmd_check but with caller-provided backends and no files written.
RunReport run_check(const SubtitleDoc& doc, const RunConfig& config, const Backends& backends);

/// Subtitle text, placement sidecar and mux script for one fixed document.
struct ExportBundle {
  SubtitleFormat format = SubtitleFormat::Srt;
  std::string filename;
  std::string subtitle;
  nlohmann::json placement;
  std::string mux_script;
};

ExportBundle make_export(const FixOutcome& outcome, SubtitleFormat format, const std::string& subtitle_name,
                         const std::string& video, const Region& default_region, FontColor default_color);

struct FixOutput {
  FixOutcome outcome;
  ExportBundle bundle;
  std::filesystem::path subtitle_path;
  std::filesystem::path placement_path;
  std::filesystem::path mux_path;
};

/// Applies every suggestion, or only the decided ones when a log is given,
/// and writes the result in the input's format (or `format`).
FixOutput cmd_fix(const RunConfig& config, const RunReport& report, const std::optional<DecisionLog>& decisions = {},
                  std::optional<SubtitleFormat> format = {});

struct EvalRequest {
  std::filesystem::path ref;
  std::filesystem::path hyp;
  bool stages = false;
  std::optional<std::filesystem::path> report;  // issues detected on hyp
  std::optional<std::filesystem::path> labels;  // ground truth for F1
  bool shift_pass = true;
};

nlohmann::json cmd_eval(const EvalRequest& request);

/// 0 ok, 2 when any cue was skipped.
int exit_code_for(const RunReport& report);

}  // namespace vsat
