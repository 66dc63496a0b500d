#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vsat/corpus.hpp"
#include "vsat/error.hpp"
#include "vsat/evaluation.hpp"
#include "vsat/image.hpp"
#include "vsat/lang.hpp"
#include "vsat/pipeline.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python side decodes it.
std::string dump(const json& j) { return j.dump(); }

vsat::RunConfig make_config(const fs::path& subs, const std::optional<fs::path>& config_file,
                            const std::map<std::string, std::string>& overrides, const fs::path& out_dir) {
  vsat::RunConfig cfg;
  if (config_file) cfg.load_file(*config_file);
  cfg.apply(overrides, fs::current_path());
  cfg.subs = subs;
  cfg.out_dir = out_dir;
  return cfg;
}

vsat::SubtitleDoc doc_from(const std::string& text, const std::string& format) {
  return vsat::parse_subtitle(text, vsat::format_from_name(format));
}

}  // namespace

PYBIND11_MODULE(_vsat, m) {
  m.doc() = "Subtitle quality checks: parsing, detectors, metric and the check/fix/eval pipeline";
  m.attr("__version__") = vsat::kVersion;

  static PyObject* error = py::exception<vsat::Error>(m, "VsatError").ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const vsat::Error& e) {
      // "code: message"; the Python side splits the code off.
      PyErr_SetString(error, (e.code() + ": " + e.what()).c_str());
    }
  });

  m.attr("TIME_SYNC_THRESHOLD") = vsat::kTimeSyncThreshold;
  m.attr("EVENT_THRESHOLD") = vsat::kEventThreshold;
  m.attr("MAX_CPL") = vsat::kMaxCpl;
  m.attr("OVERLAP_THRESHOLD") = vsat::kOverlapThreshold;
  m.attr("BRIGHTNESS_THRESHOLD") = vsat::kBrightnessThreshold;

  py::class_<vsat::Cue>(m, "Cue")
      .def(py::init([](int id, std::int64_t start_ms, std::int64_t end_ms, std::vector<std::string> lines) {
             vsat::Cue c;
             c.id = id;
             c.start.ms = start_ms;
             c.end.ms = end_ms;
             c.lines = std::move(lines);
             return c;
           }),
           py::arg("id"), py::arg("start_ms"), py::arg("end_ms"), py::arg("lines"))
      .def_readwrite("id", &vsat::Cue::id)
      .def_property(
          "start_ms", [](const vsat::Cue& c) { return c.start.ms; }, [](vsat::Cue& c, std::int64_t v) { c.start.ms = v; })
      .def_property(
          "end_ms", [](const vsat::Cue& c) { return c.end.ms; }, [](vsat::Cue& c, std::int64_t v) { c.end.ms = v; })
      .def_readwrite("lines", &vsat::Cue::lines)
      .def("__eq__", [](const vsat::Cue& a, const vsat::Cue& b) { return a == b; })
      .def("__repr__", [](const vsat::Cue& c) {
        return "<Cue " + std::to_string(c.id) + " " + std::to_string(c.start.ms) + "-" + std::to_string(c.end.ms) +
               " " + py::repr(py::cast(c.lines)).cast<std::string>() + ">";
      });

  m.def("parse_cues", [](const std::string& text, const std::string& format) { return doc_from(text, format).cues; },
        py::arg("text"), py::arg("format") = "srt", "Parse SRT or VTT text into cues.");
  m.def(
      "round_trip",
      [](const std::string& text, const std::string& format) {
        const auto fmt = vsat::format_from_name(format);
        return vsat::serialize(vsat::parse_subtitle(text, fmt), fmt);
      },
      py::arg("text"), py::arg("format") = "srt", "Parse then serialize.");
  m.def(
      "serialize_cues",
      [](const std::vector<vsat::Cue>& cues, const std::string& format) {
        vsat::SubtitleDoc d;
        d.format = vsat::format_from_name(format);
        d.cues = cues;
        return vsat::serialize(d, d.format);
      },
      py::arg("cues"), py::arg("format") = "srt");

  m.def(
      "split_cue", [](const vsat::Cue& cue, int max_cpl) { return vsat::split_cue(cue, {}, max_cpl); },
      py::arg("cue"), py::arg("max_cpl") = vsat::kMaxCpl, "Split an over-long cue without a transcript.");
  m.def("cosine_bow", &vsat::cosine_bow, py::arg("a"), py::arg("b"));
  m.def("time_sync_flags", [](double s) { return vsat::time_sync_flags(s); }, py::arg("similarity"));
  m.def("event_flags", [](double s) { return vsat::event_flags(s); }, py::arg("score"));
  m.def("cpl_flags", [](int n) { return vsat::cpl_flags(n); }, py::arg("chars"));
  m.def("overlap_flags", [](double s) { return vsat::overlap_flags(s); }, py::arg("score"));
  m.def(
      "font_color_for_brightness",
      [](double b) { return std::string(vsat::color_name(vsat::font_color_for_brightness(b))); },
      py::arg("brightness"));

  m.def(
      "saliency",
      [](int width, int height, py::bytes rgb) {
        vsat::Frame f;
        f.width = width;
        f.height = height;
        const std::string raw = rgb;
        f.pixels.assign(raw.begin(), raw.end());
        return vsat::saliency_spectral_residual(f).values;
      },
      py::arg("width"), py::arg("height"), py::arg("rgb"), "64x64 spectral-residual map, row-major, summing to 1.");

  m.def(
      "suber",
      [](const std::string& hyp, const std::string& ref, const std::string& format, bool shift_pass) {
        return dump(vsat::suber_to_json(vsat::suber(doc_from(hyp, format), doc_from(ref, format), {shift_pass})));
      },
      py::arg("hyp"), py::arg("ref"), py::arg("format") = "srt", py::arg("shift_pass") = true);

  m.def(
      "make_synthetic_corpus",
      [](std::uint64_t seed, const fs::path& dir, bool faults) {
        const auto c = vsat::make_synthetic_corpus(
            seed, faults ? vsat::FaultSpec::one_per_kind() : vsat::FaultSpec::none(), dir);
        return dump({{"dir", c.dir.string()},
                     {"ref", c.ref_path.string()},
                     {"faulted", c.faulted_path.string()},
                     {"labels", c.labels_path.string()},
                     {"assets", c.assets_dir.string()},
                     {"mock_table", c.mock_path.string()},
                     {"config", c.config_path.string()}});
      },
      py::arg("seed"), py::arg("dir"), py::arg("faults") = true);

  m.def(
      "check",
      [](const fs::path& subs, const std::optional<fs::path>& assets, const std::optional<fs::path>& config_file,
         const std::map<std::string, std::string>& overrides, const fs::path& out_dir) {
        py::gil_scoped_release release;
        auto cfg = make_config(subs, config_file, overrides, out_dir);
        cfg.assets = assets;
        const auto out = vsat::cmd_check(cfg);
        return dump({{"report", vsat::report_to_json(out.report)},
                     {"report_path", out.report_path.string()},
                     {"exit_code", vsat::exit_code_for(out.report)}});
      },
      py::arg("subs"), py::arg("assets") = std::nullopt, py::arg("config") = std::nullopt,
      py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("out_dir") = fs::path("."));

  m.def(
      "fix",
      [](const fs::path& subs, const fs::path& report, const std::optional<fs::path>& config_file,
         const std::map<std::string, std::string>& overrides, const fs::path& out_dir) {
        py::gil_scoped_release release;
        const auto cfg = make_config(subs, config_file, overrides, out_dir);
        const auto out = vsat::cmd_fix(cfg, vsat::report_from_json(json::parse(vsat::read_text_file(report))));
        return dump({{"subtitle", out.subtitle_path.string()},
                     {"placement", out.placement_path.string()},
                     {"mux", out.mux_path.string()},
                     {"conflicts", out.outcome.conflicts}});
      },
      py::arg("subs"), py::arg("report"), py::arg("config") = std::nullopt,
      py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("out_dir") = fs::path("."));

  m.def(
      "evaluate",
      [](const fs::path& ref, const fs::path& hyp, bool stages, const std::optional<fs::path>& report,
         const std::optional<fs::path>& labels, bool shift_pass) {
        py::gil_scoped_release release;
        return dump(vsat::cmd_eval({ref, hyp, stages, report, labels, shift_pass}));
      },
      py::arg("ref"), py::arg("hyp"), py::arg("stages") = false, py::arg("report") = std::nullopt,
      py::arg("labels") = std::nullopt, py::arg("shift_pass") = true);
}
