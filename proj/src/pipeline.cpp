#include "vsat/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

#include "vsat/error.hpp"
#include "vsat/evaluation.hpp"
#include "vsat/text.hpp"

namespace vsat {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

namespace {

std::string unquote(std::string_view v, std::size_t line_no) {
  std::string out;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const char c = v[i];
    if (c == '"') {
      const auto rest = text::trim(v.substr(i + 1));
      if (!rest.empty() && rest[0] != '#') {
        throw ConfigError("line " + std::to_string(line_no) + ": text after closing quote");
      }
      return out;
    }
    if (c == '\\' && i + 1 < v.size()) {
      const char e = v[++i];
      out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
    } else {
      out += c;
    }
  }
  throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got \"" + v + "\"");
}

double parse_positive(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && d > 0) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a positive number, got \"" + v + "\"");
}

int parse_positive_int(const std::string& key, const std::string& v) {
  const double d = parse_positive(key, v);
  if (d != static_cast<int>(d)) throw ConfigError(key + ": expected an integer, got \"" + v + "\"");
  return static_cast<int>(d);
}

Region parse_region(const std::string& key, const std::string& v) {
  std::vector<double> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError(key + ": bad number \"" + item + "\"");
    }
  }
  if (parts.size() != 4) throw ConfigError(key + ": expected \"x,y,w,h\"");
  const auto r = Region::make(parts[0], parts[1], parts[2], parts[3]);
  if (!r.valid()) throw ConfigError(key + ": region must lie inside the frame");
  return r;
}

json region_json(const Region& r) { return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::map<std::string, std::string> parse_config_text(std::string_view src) {
  std::map<std::string, std::string> out;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= src.size()) {
    auto nl = src.find('\n', pos);
    if (nl == std::string_view::npos) nl = src.size();
    const std::string line = text::trim(src.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == '[') {
      const auto close = line.find(']');
      if (close == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": unclosed section");
      section = text::trim(std::string_view(line).substr(1, close - 1));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const auto key = text::trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    std::string value = text::trim(std::string_view(line).substr(eq + 1));
    if (!value.empty() && value[0] == '"') {
      value = unquote(value, line_no);
    } else if (const auto hash = value.find('#'); hash != std::string::npos) {
      value = text::trim(std::string_view(value).substr(0, hash));
    }
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

void RunConfig::apply(const std::map<std::string, std::string>& values, const fs::path& base) {
  auto path_of = [&](const std::string& v) {
    fs::path p(v);
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  for (const auto& [key, v] : values) {
    if (key == "detect.spelling") language.spelling = parse_bool(key, v);
    else if (key == "detect.harmful") language.harmful = parse_bool(key, v);
    else if (key == "detect.timesync") language.timesync = parse_bool(key, v);
    else if (key == "detect.nonword") language.nonword = parse_bool(key, v);
    else if (key == "detect.segmentation") language.segmentation = parse_bool(key, v);
    else if (key == "detect.positioning") image.positioning = parse_bool(key, v);
    else if (key == "detect.fontcolor") image.fontcolor = parse_bool(key, v);
    else if (key == "thresholds.timesync") language.timesync_threshold = parse_positive(key, v);
    else if (key == "thresholds.event") language.event_threshold = parse_positive(key, v);
    else if (key == "thresholds.cpl") language.max_cpl = parse_positive_int(key, v);
    else if (key == "thresholds.overlap") image.overlap_threshold = parse_positive(key, v);
    else if (key == "thresholds.brightness") image.brightness_threshold = parse_positive(key, v);
    else if (key == "region.default") image.default_region = parse_region(key, v);
    else if (key == "fontcolor.current") {
      try {
        image.current_color = color_from_name(v);
      } catch (const ValidationError& e) {
        throw ConfigError(key + ": " + e.what());
      }
    }
    else if (key == "run.parallelism") parallelism = parse_positive_int(key, v);
    else if (key == "run.context_cues") language.context_cues = parse_positive_int(key, v);
    else if (key == "media.audio_cmd") media.audio_cmd = v;
    else if (key == "media.frame_cmd") media.frame_cmd = v;
    else if (key == "media.probe_cmd") media.probe_cmd = v;
    else if (key == "backend.llm") llm_backend = v;
    else if (key == "backend.asr") asr_backend = v;
    else if (key == "backend.events") events_backend = v;
    else if (key == "backend.mock_table") mock_table = path_of(v);
    else if (key == "backend.labels") label_file = path_of(v);
    else if (key == "backend.asr_url") asr_http.url = v;
    else if (key == "backend.events_url") events_http.url = v;
    else if (key == "llm.base_url") llm.base_url = v;
    else if (key == "llm.model") llm.model = v;
    else if (key == "llm.api_key") llm.api_key = v;
    else if (key == "llm.max_in_flight") llm.max_in_flight = parse_positive_int(key, v);
    else if (key == "http.max_attempts") {
      llm.retry.max_attempts = asr_http.retry.max_attempts = events_http.retry.max_attempts =
          parse_positive_int(key, v);
    } else if (key == "http.timeout_s") {
      llm.retry.timeout_s = asr_http.retry.timeout_s = events_http.retry.timeout_s = parse_positive(key, v);
    } else {
      throw ConfigError("unknown config key \"" + key + "\"");
    }
  }
  check();
}

void RunConfig::load_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  apply(parse_config_text(read_text_file(path)), path.parent_path());
}

void RunConfig::set_detectors(std::string_view list) {
  bool flags[7] = {};
  std::stringstream ss{std::string(list)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = text::trim(item);
    if (item == "none" || item.empty()) continue;
    if (item == "all" || item == "language") std::fill(flags, flags + 5, true);
    if (item == "all" || item == "image") flags[5] = flags[6] = true;
    if (item == "all" || item == "language" || item == "image") continue;
    static const char* names[] = {"spelling", "harmful", "timesync", "nonword", "segmentation", "positioning",
                                  "fontcolor"};
    const auto it = std::find(std::begin(names), std::end(names), item);
    if (it == std::end(names)) throw ConfigError("unknown detector \"" + item + "\"");
    flags[it - std::begin(names)] = true;
  }
  language.spelling = flags[0];
  language.harmful = flags[1];
  language.timesync = flags[2];
  language.nonword = flags[3];
  language.segmentation = flags[4];
  image.positioning = flags[5];
  image.fontcolor = flags[6];
}

void RunConfig::check() const {
  if (llm_backend != "http" && llm_backend != "mock") throw ConfigError("backend.llm must be http or mock");
  if (asr_backend != "assets" && asr_backend != "http") throw ConfigError("backend.asr must be assets or http");
  if (events_backend != "assets" && events_backend != "http") {
    throw ConfigError("backend.events must be assets or http");
  }
  if (parallelism < 1) throw ConfigError("run.parallelism must be at least 1");
}

json RunConfig::to_json() const {
  return {
      {"video", video},
      {"subs", subs.string()},
      {"assets", assets ? json(assets->string()) : json(nullptr)},
      {"detect",
       {{"spelling", language.spelling},
        {"harmful", language.harmful},
        {"timesync", language.timesync},
        {"nonword", language.nonword},
        {"segmentation", language.segmentation},
        {"positioning", image.positioning},
        {"fontcolor", image.fontcolor}}},
      {"thresholds",
       {{"timesync", language.timesync_threshold},
        {"event", language.event_threshold},
        {"cpl", language.max_cpl},
        {"overlap", image.overlap_threshold},
        {"brightness", image.brightness_threshold}}},
      {"region", {{"default", region_json(image.default_region)}}},
      {"context_cues", language.context_cues},
      {"parallelism", parallelism},
      {"backend",
       {{"llm", llm_backend}, {"asr", asr_backend}, {"events", events_backend},
        {"llm_model", llm_backend == "http" ? llm.model : ""}}},
  };
}

// ---------------------------------------------------------------- report

json report_to_json(const RunReport& r, bool with_timings) {
  json issues = json::array();
  for (const auto& i : r.issues) issues.push_back(issue_to_json(i));
  json skips = json::array();
  for (const auto& s : r.skips) skips.push_back(skip_to_json(s));
  json j = {{"tool", r.tool},   {"version", r.version}, {"config", r.config},     {"input", r.input},
            {"issues", issues}, {"skips", skips},       {"warnings", r.warnings}};
  if (with_timings) j["timings"] = r.timings;
  return j;
}

RunReport report_from_json(const json& j) {
  if (!j.is_object() || !j.contains("issues") || !j["issues"].is_array()) {
    throw ValidationError("report must be an object with an \"issues\" list");
  }
  RunReport r;
  r.tool = j.value("tool", "vsat");
  r.version = j.value("version", "");
  r.config = j.value("config", json::object());
  r.input = j.value("input", json::object());
  for (const auto& i : j["issues"]) r.issues.push_back(issue_from_json(i));
  if (j.contains("skips")) {
    for (const auto& s : j["skips"]) r.skips.push_back(skip_from_json(s));
  }
  if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
  r.timings = j.value("timings", json::object());
  return r;
}

// Timings and the worker count do not change results, so they stay out.
std::string canonical_report(const RunReport& r) {
  auto j = report_to_json(r, false);
  if (j.contains("config")) j["config"].erase("parallelism");
  return j.dump(2);
}

void check_report_matches(const SubtitleDoc& doc, const RunReport& report) {
  std::set<std::string> ids;
  for (const auto& i : report.issues) {
    if (!ids.insert(i.issue_id).second) throw ValidationError("duplicate issue id " + i.issue_id);
    const Cue* cue = doc.find(i.cue_id);
    if (!cue) throw ValidationError("issue " + i.issue_id + " references unknown cue " + std::to_string(i.cue_id));
    check_suggestion(i.suggestion, *cue);
  }
}

int exit_code_for(const RunReport& report) { return report.skips.empty() ? 0 : 2; }

// ---------------------------------------------------------------- check

Backends make_backends(const RunConfig& config) {
  Backends b;
  b.labels = std::make_unique<LabelTable>(config.label_file ? LabelTable::parse(read_text_file(*config.label_file))
                                                            : LabelTable::builtin());
  if (config.llm_backend == "mock") {
    if (config.mock_table.empty()) throw ConfigError("backend.llm = mock needs backend.mock_table");
    b.llm = std::make_unique<MockLlm>(MockLlm::from_file(config.mock_table));
  } else {
    auto llm = config.llm;
    llm.apply_env();
    if (!llm.base_url.empty()) b.llm = std::make_unique<HttpLlm>(llm);
  }
  if (config.asr_backend == "http") {
    if (config.asr_http.url.empty()) throw ConfigError("backend.asr = http needs backend.asr_url");
    b.asr = std::make_unique<HttpAsr>(config.asr_http);
  } else if (config.assets) {
    b.asr = std::make_unique<AssetsAsr>(*config.assets);
  }
  if (config.events_backend == "http") {
    if (config.events_http.url.empty()) throw ConfigError("backend.events = http needs backend.events_url");
    b.events = std::make_unique<HttpEvents>(config.events_http, *b.labels);
  } else if (config.assets) {
    b.events = std::make_unique<AssetsEvents>(*config.assets, *b.labels);
  }
  if (config.assets) {
    if (!fs::is_directory(*config.assets)) throw IngestError("assets directory not found: " + config.assets->string());
    b.media = std::make_unique<OfflineAssetSource>(*config.assets);
  } else if (!config.video.empty()) {
    b.media = std::make_unique<ExternalToolSource>(config.video, config.out_dir / "cache", config.media);
  }
  return b;
}

SubtitleDoc load_subtitles(const fs::path& path) {
  if (!fs::exists(path)) throw IngestError("subtitle file not found: " + path.string());
  return parse_subtitle(read_text_file(path), format_from_path(path.string()));
}

RunReport run_check(const SubtitleDoc& doc, const RunConfig& config, const Backends& backends) {
  RunReport report;
  report.config = config.to_json();
  report.input = {{"subtitle", config.subs.filename().string()},
                  {"format", format_name(doc.format)},
                  {"cue_count", doc.cues.size()},
                  {"video", config.video}};

  auto lang_cfg = config.language;
  lang_cfg.parallelism = config.parallelism;
  auto image_cfg = config.image;
  image_cfg.parallelism = config.parallelism;

  auto t0 = std::chrono::steady_clock::now();
  auto lang = run_language_pass(doc, backends.view(), lang_cfg);
  report.timings["language"] = ms_since(t0);
  t0 = std::chrono::steady_clock::now();
  auto image = run_image_pass(doc, backends.media.get(), image_cfg);
  report.timings["image"] = ms_since(t0);

  report.issues = std::move(lang.issues);
  for (auto& i : image.issues) report.issues.push_back(std::move(i));
  sort_issues(report.issues);
  report.skips = std::move(lang.skips);
  for (auto& s : image.skips) report.skips.push_back(std::move(s));
  std::stable_sort(report.skips.begin(), report.skips.end(),
                   [](const Skip& a, const Skip& b) { return a.cue_id < b.cue_id; });
  report.warnings = std::move(lang.warnings);
  for (auto& w : image.warnings) report.warnings.push_back(std::move(w));
  return report;
}

CheckOutput cmd_check(const RunConfig& config) {
  config.check();
  const auto t0 = std::chrono::steady_clock::now();
  CheckOutput out;
  out.doc = load_subtitles(config.subs);
  fs::create_directories(config.out_dir);
  out.table_path = config.out_dir / "cues.csv";
  write_text_file_atomic(out.table_path, table_to_csv(to_table(out.doc)));
  const double ingest = ms_since(t0);

  const auto backends = make_backends(config);
  out.report = run_check(out.doc, config, backends);
  out.report.timings["ingest"] = ingest;
  out.report.timings["total"] = ms_since(t0);
  out.report_path = config.out_dir / "report.json";
  write_text_file_atomic(out.report_path, report_to_json(out.report).dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------- fix

namespace {

std::string extension_for(SubtitleFormat f) { return f == SubtitleFormat::Vtt ? ".vtt" : ".srt"; }

}  // namespace

ExportBundle make_export(const FixOutcome& outcome, SubtitleFormat format, const std::string& subtitle_name,
                         const std::string& video, const Region& default_region, FontColor default_color) {
  ExportBundle b;
  b.format = format;
  const auto stem = fs::path(subtitle_name.empty() ? "subtitles" : subtitle_name).stem().string();
  b.filename = stem + ".fixed" + extension_for(format);
  b.subtitle = serialize(outcome.doc, format);
  b.placement = placement_sidecar(outcome, default_region, default_color);
  const fs::path vid(video.empty() ? "input.mp4" : video);
  const auto out_video = (vid.parent_path() / (vid.stem().string() + ".subtitled" + vid.extension().string())).string();
  b.mux_script = mux_script(vid.string(), b.filename, format, out_video);
  return b;
}

FixOutput cmd_fix(const RunConfig& config, const RunReport& report, const std::optional<DecisionLog>& decisions,
                  std::optional<SubtitleFormat> format) {
  const auto doc = load_subtitles(config.subs);
  check_report_matches(doc, report);
  FixOutput out;
  if (decisions) {
    for (const auto& d : decisions->decisions) {
      const auto it = std::find_if(report.issues.begin(), report.issues.end(),
                                   [&](const Issue& i) { return i.issue_id == d.issue_id; });
      if (it == report.issues.end()) throw NotFoundError("decision for unknown issue " + d.issue_id);
      validate_decision(*it, d, *doc.find(it->cue_id));
    }
    out.outcome = replay(doc, report.issues, *decisions);
  } else {
    out.outcome = apply_fixes(doc, accept_all(report.issues));
  }
  out.bundle = make_export(out.outcome, format.value_or(doc.format), config.subs.filename().string(), config.video,
                           config.image.default_region, config.image.current_color);
  fs::create_directories(config.out_dir);
  out.subtitle_path = config.out_dir / out.bundle.filename;
  const auto stem = fs::path(out.bundle.filename).stem().string();
  out.placement_path = config.out_dir / (stem + ".placement.json");
  out.mux_path = config.out_dir / (stem + ".mux.sh");
  write_text_file_atomic(out.subtitle_path, out.bundle.subtitle);
  write_text_file_atomic(out.placement_path, out.bundle.placement.dump(2) + "\n");
  write_text_file_atomic(out.mux_path, out.bundle.mux_script);
  fs::permissions(out.mux_path, fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                  fs::perm_options::add);
  return out;
}

// ---------------------------------------------------------------- eval

json cmd_eval(const EvalRequest& req) {
  const auto ref = load_subtitles(req.ref);
  const auto hyp = load_subtitles(req.hyp);
  SuberOptions opts;
  opts.shift_pass = req.shift_pass;
  json out = {{"suber", suber_to_json(suber(hyp, ref, opts))}};
  std::optional<RunReport> report;
  if (req.report) report = report_from_json(json::parse(read_text_file(*req.report)));
  if (req.stages) {
    if (!report) throw ConfigError("--stages needs --report with the issues detected on the hypothesis");
    check_report_matches(hyp, *report);
    out["stages"] = stage_report_to_json(stage_report(hyp, ref, report->issues, kLanguageStages, opts));
  }
  if (req.labels) {
    if (!report) throw ConfigError("--labels needs --report");
    const auto truth = parse_truth_labels(json::parse(read_text_file(*req.labels)));
    const auto scored = score_detections(truth, report->issues);
    out["detection"] =
        detection_report(scored, std::vector<IssueKind>(std::begin(kAllIssueKinds), std::end(kAllIssueKinds)));
  }
  return out;
}

}  // namespace vsat
