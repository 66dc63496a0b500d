#include <iostream>

#include "CLI11.hpp"
#include "vsat/corpus.hpp"
#include "vsat/error.hpp"
#include "vsat/pipeline.hpp"
#include "vsat/review.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string video;
  std::string subs;
  std::string assets;
  std::string out = ".";
  std::string config;
  std::string detect;
  int parallel = 0;
};

void add_common(CLI::App* cmd, Common& c, bool subs_required) {
  auto* subs = cmd->add_option("--subs", c.subs, "Subtitle file (.srt or .vtt)");
  if (subs_required) subs->required();
  cmd->add_option("--video", c.video, "Source video, used for media extraction and the mux script");
  cmd->add_option("--assets", c.assets, "Directory of pre-extracted per-cue assets");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--config", c.config, "Config file (key = value, [sections])");
  cmd->add_option("--detect", c.detect,
                  "Comma-separated detectors to run: spelling, harmful, timesync, nonword, segmentation, "
                  "positioning, fontcolor, language, image, all, none");
  cmd->add_option("--parallel", c.parallel, "Per-cue worker bound");
}

vsat::RunConfig make_config(const Common& c) {
  vsat::RunConfig cfg;
  if (!c.config.empty()) cfg.load_file(c.config);
  cfg.video = c.video;
  cfg.subs = c.subs;
  if (!c.assets.empty()) cfg.assets = fs::path(c.assets);
  cfg.out_dir = c.out;
  if (!c.detect.empty()) cfg.set_detectors(c.detect);
  if (c.parallel > 0) cfg.parallelism = c.parallel;
  cfg.check();
  return cfg;
}

json load_json(const std::string& path) {
  if (!fs::exists(path)) throw vsat::IngestError("file not found: " + path);
  try {
    return json::parse(vsat::read_text_file(path));
  } catch (const json::exception& e) {
    throw vsat::FormatError(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vsat: subtitle quality checks and corrections"};
  app.set_version_flag("--version", std::string(vsat::kVersion));
  app.require_subcommand(1);

  Common check_opts;
  auto* check = app.add_subcommand("check", "Detect issues and write report.json");
  add_common(check, check_opts, true);

  Common fix_opts;
  std::string fix_report;
  std::string decisions;
  std::string fix_format;
  auto* fix = app.add_subcommand("fix", "Apply suggestions and write the corrected subtitles");
  add_common(fix, fix_opts, true);
  fix->add_option("--report", fix_report, "Report from a previous check (runs a check when omitted)");
  fix->add_option("--decisions", decisions, "Decision log; only decided issues are applied");
  fix->add_option("--format", fix_format, "Output format (srt or vtt); defaults to the input's")
      ->check(CLI::IsMember({"srt", "vtt"}));

  vsat::EvalRequest eval_req;
  std::string ref;
  std::string hyp;
  std::string eval_report;
  std::string labels;
  bool no_shift = false;
  auto* eval = app.add_subcommand("eval", "Score a hypothesis against a reference");
  eval->add_option("--ref", ref, "Reference subtitles")->required();
  eval->add_option("--hyp", hyp, "Hypothesis subtitles")->required();
  eval->add_flag("--stages", eval_req.stages, "Score each cumulative fix stage (needs --report)");
  eval->add_option("--report", eval_report, "Report of issues detected on the hypothesis");
  eval->add_option("--labels", labels, "Ground-truth labels for detection F1 (needs --report)");
  eval->add_flag("--no-shift", no_shift, "Disable the shift pass");

  Common serve_opts;
  serve_opts.out = "vsat-state";
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string serve_report;
  auto* serve = app.add_subcommand("serve", "Run the review service");
  add_common(serve, serve_opts, false);
  serve->add_option("--port", port, "Port to listen on")->capture_default_str();
  serve->add_option("--host", host, "Address to bind")->capture_default_str();
  serve->add_option("--report", serve_report, "Report for the preloaded project");

  std::uint64_t seed = 1;
  std::string corpus_out = "corpus";
  bool no_faults = false;
  auto* corpus = app.add_subcommand("corpus", "Write a synthetic corpus with one planted issue per kind");
  corpus->add_option("--seed", seed, "Generator seed")->capture_default_str();
  corpus->add_option("--out", corpus_out, "Output directory")->capture_default_str();
  corpus->add_flag("--clean", no_faults, "Plant no faults");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) {
      const auto out = vsat::cmd_check(make_config(check_opts));
      std::cout << out.report.issues.size() << " issues, " << out.report.skips.size() << " skips -> "
                << out.report_path.string() << "\n";
      for (const auto& s : out.report.skips) {
        std::cerr << "skip: cue " << s.cue_id << " " << s.detector << ": " << s.reason << "\n";
      }
      return vsat::exit_code_for(out.report);
    }
    if (fix->parsed()) {
      const auto cfg = make_config(fix_opts);
      vsat::RunReport report =
          fix_report.empty() ? vsat::cmd_check(cfg).report : vsat::report_from_json(load_json(fix_report));
      std::optional<vsat::DecisionLog> log;
      if (!decisions.empty()) log = vsat::decision_log_from_json(load_json(decisions));
      std::optional<vsat::SubtitleFormat> fmt;
      if (!fix_format.empty()) fmt = vsat::format_from_name(fix_format);
      const auto out = vsat::cmd_fix(cfg, report, log, fmt);
      for (const auto& c : out.outcome.conflicts) std::cerr << "conflict: " << c << "\n";
      for (auto e : out.outcome.orphaned_edits) std::cerr << "orphaned manual edit #" << e << "\n";
      std::cout << out.outcome.doc.cues.size() << " cues -> " << out.subtitle_path.string() << "\n";
      return 0;
    }
    if (eval->parsed()) {
      eval_req.ref = ref;
      eval_req.hyp = hyp;
      if (!eval_report.empty()) eval_req.report = fs::path(eval_report);
      if (!labels.empty()) eval_req.labels = fs::path(labels);
      eval_req.shift_pass = !no_shift;
      std::cout << vsat::cmd_eval(eval_req).dump(2) << "\n";
      return 0;
    }
    if (serve->parsed()) {
      vsat::ServeOptions opts;
      opts.state_dir = serve_opts.out;
      opts.host = host;
      opts.port = port;
      if (!serve_opts.subs.empty()) {
        auto cfg = make_config(serve_opts);
        cfg.out_dir = fs::path(serve_opts.out) / "preload";
        opts.preload = cfg;
        if (!serve_report.empty()) opts.preload_report = fs::path(serve_report);
      }
      return vsat::cmd_serve(opts);
    }
    if (corpus->parsed()) {
      const auto c = vsat::make_synthetic_corpus(seed, no_faults ? vsat::FaultSpec::none()
                                                                 : vsat::FaultSpec::one_per_kind(),
                                                 corpus_out);
      std::cout << c.faulted.cues.size() << " cues, " << c.labels.size() << " planted issues -> " << c.dir.string()
                << "\n";
      return 0;
    }
  } catch (const vsat::Error& e) {
    std::cerr << "vsat: " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "vsat: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
