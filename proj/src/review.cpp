#include "vsat/review.hpp"

#include <atomic>
#include <csignal>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "vsat/error.hpp"
#include "vsat/text.hpp"

namespace vsat {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return os.str();
}

// ---------------------------------------------------------------- state

namespace {

json region_json(const Region& r) { return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }

Region region_from(const json& j) {
  return Region::make(j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
                      j.at("h").get<double>());
}

SubtitleFormat input_format(const std::string& name) {
  try {
    return format_from_path(name);
  } catch (const Error&) {
    throw ValidationError("subtitle_name must end in .srt or .vtt, got \"" + name + "\"");
  }
}

void refresh(Project& p) {
  p.working = replay(p.original, p.report.issues, p.log);
  if (!is_valid(p.working.doc)) throw ValidationError("the change would leave the working document invalid");
}

std::string fnv_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace

json project_state_to_json(const Project& p) {
  return {{"id", p.id},
          {"video", p.video},
          {"subtitle_name", p.subtitle_name},
          {"subtitle", serialize(p.original, p.original.format)},
          {"report", report_to_json(p.report)},
          {"log", decision_log_to_json(p.log)},
          {"status", p.status},
          {"assets_dir", p.assets_dir},
          {"default_region", region_json(p.default_region)},
          {"default_color", color_name(p.default_color)},
          {"export_count", p.export_count}};
}

Project project_state_from_json(const json& j) {
  Project p;
  p.id = j.at("id").get<std::string>();
  p.video = j.value("video", "");
  p.subtitle_name = j.at("subtitle_name").get<std::string>();
  p.original = parse_subtitle(j.at("subtitle").get<std::string>(), input_format(p.subtitle_name));
  p.report = report_from_json(j.at("report"));
  p.log = decision_log_from_json(j.at("log"));
  p.status = j.value("status", "open");
  p.assets_dir = j.value("assets_dir", "");
  if (j.contains("default_region")) p.default_region = region_from(j["default_region"]);
  p.default_color = color_from_name(j.value("default_color", "white"));
  p.export_count = j.value("export_count", 0);
  refresh(p);
  return p;
}

CreateRequest create_request_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("body must be a JSON object");
  CreateRequest r;
  auto str = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key)) {
      if (required) throw ValidationError(std::string("missing field \"") + key + "\"");
      return "";
    }
    if (!j[key].is_string()) throw ValidationError(std::string("field \"") + key + "\" must be a string");
    return j[key].get<std::string>();
  };
  r.video = str("video", false);
  r.subtitle_name = str("subtitle_name", true);
  r.subtitle_text = str("subtitle", true);
  r.assets_dir = str("assets_dir", false);
  if (!j.contains("report") || !j["report"].is_object()) throw ValidationError("missing object field \"report\"");
  r.report = j["report"];
  return r;
}

std::string project_id_for(const CreateRequest& req, const RunReport& report) {
  json issues = json::array();
  for (const auto& i : report.issues) issues.push_back(issue_to_json(i));
  std::string key = req.video;
  key += '\0';
  key += req.subtitle_name;
  key += '\0';
  key += req.subtitle_text;
  key += '\0';
  key += issues.dump();
  return fnv_hex(key);
}

ProjectStore::ProjectStore(fs::path state_dir) : dir_(std::move(state_dir)) {
  fs::create_directories(dir_);
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    try {
      auto p = std::make_shared<Project>(project_state_from_json(json::parse(read_text_file(entry.path()))));
      auto s = std::make_unique<Slot>();
      s->snapshot = std::move(p);
      slots_[s->snapshot->id] = std::move(s);
    } catch (const std::exception& e) {
      std::cerr << "vsat: skipping unreadable project state " << entry.path() << ": " << e.what() << "\n";
    }
  }
}

ProjectStore::Slot& ProjectStore::slot(const std::string& id) const {
  std::shared_lock lock(map_mu_);
  const auto it = slots_.find(id);
  if (it == slots_.end()) throw NotFoundError("no project " + id);
  return *it->second;
}

std::shared_ptr<const Project> ProjectStore::get(const std::string& id) const {
  auto& s = slot(id);
  std::lock_guard lock(s.read);
  return s.snapshot;
}

std::vector<std::string> ProjectStore::ids() const {
  std::shared_lock lock(map_mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : slots_) out.push_back(id);
  return out;
}

void ProjectStore::persist(const Project& p) const {
  write_text_file_atomic(dir_ / (p.id + ".json"), project_state_to_json(p).dump(2) + "\n");
}

ProjectStore::Created ProjectStore::create(const CreateRequest& req) {
  Project p;
  p.video = req.video;
  p.subtitle_name = fs::path(req.subtitle_name).filename().string();
  p.original = parse_subtitle(req.subtitle_text, input_format(p.subtitle_name));
  p.report = report_from_json(req.report);
  check_report_matches(p.original, p.report);
  p.assets_dir = req.assets_dir;
  if (req.report.contains("config") && req.report["config"].contains("region")) {
    try {
      p.default_region = region_from(req.report["config"]["region"]["default"]);
    } catch (const std::exception&) {
      p.default_region = kDefaultSubtitleRegion;
    }
  }
  p.id = project_id_for(req, p.report);
  refresh(p);

  std::unique_lock lock(map_mu_);
  if (slots_.count(p.id)) return {p.id, false};
  persist(p);
  auto s = std::make_unique<Slot>();
  s->snapshot = std::make_shared<Project>(std::move(p));
  const auto id = s->snapshot->id;
  slots_[id] = std::move(s);
  return {id, true};
}

std::shared_ptr<const Project> ProjectStore::mutate(const std::string& id, const std::function<void(Project&)>& fn) {
  auto& s = slot(id);
  std::lock_guard write(s.write);
  std::shared_ptr<const Project> current;
  {
    std::lock_guard lock(s.read);
    current = s.snapshot;
  }
  auto next = std::make_shared<Project>(*current);
  fn(*next);
  refresh(*next);
  persist(*next);
  std::lock_guard lock(s.read);
  s.snapshot = next;
  return next;
}

void ProjectStore::flush_all() const {
  for (const auto& id : ids()) persist(*get(id));
}

// ---------------------------------------------------------------- views

namespace {

std::string asset_url(const Project& p, int cue_id, const char* what) {
  return "/api/v1/projects/" + p.id + "/assets/" + std::to_string(cue_id) + "/" + what;
}

const ReviewDecision* latest_decision(const Project& p, const std::string& issue_id) {
  const ReviewDecision* out = nullptr;
  for (const auto& d : p.log.decisions) {
    if (d.issue_id == issue_id) out = &d;
  }
  return out;
}

json cue_json(const Cue& c) {
  json j = {{"cue_id", c.id}, {"start_ms", c.start.ms}, {"end_ms", c.end.ms}, {"lines", c.lines}};
  j["position"] = c.position ? region_json(*c.position) : json(nullptr);
  if (!c.settings.empty()) j["settings"] = c.settings;
  return j;
}

}  // namespace

json project_summary(const Project& p) {
  json by_kind = json::object();
  for (auto k : kAllIssueKinds) by_kind[std::string(kind_slug(k))] = 0;
  for (const auto& i : p.report.issues) by_kind[std::string(kind_slug(i.kind))] = by_kind[std::string(kind_slug(i.kind))].get<int>() + 1;
  std::set<std::string> decided;
  for (const auto& d : p.log.decisions) decided.insert(d.issue_id);
  return {{"project_id", p.id},
          {"video", p.video},
          {"subtitle_name", p.subtitle_name},
          {"format", format_name(p.original.format)},
          {"status", p.status},
          {"cue_count", p.working.doc.cues.size()},
          {"original_cue_count", p.original.cues.size()},
          {"issue_count", p.report.issues.size()},
          {"issues_by_kind", by_kind},
          {"decided_count", decided.size()},
          {"decision_count", p.log.decisions.size()},
          {"manual_edit_count", p.log.manual_edits.size()},
          {"skips", report_to_json(p.report)["skips"]},
          {"conflicts", p.working.conflicts},
          {"orphaned_edits", p.working.orphaned_edits},
          {"export_count", p.export_count}};
}

json cue_views(const Project& p) {
  json cues = json::array();
  for (std::size_t i = 0; i < p.working.doc.cues.size(); ++i) {
    const auto& c = p.working.doc.cues[i];
    const auto origin = p.working.origins[i];
    json j = cue_json(c);
    j["origin"] = {{"cue_id", origin.cue_id}, {"segment", origin.segment}};
    json ids = json::array();
    for (const auto& issue : p.report.issues) {
      if (issue.cue_id == origin.cue_id) ids.push_back(issue.issue_id);
    }
    j["issue_ids"] = ids;
    bool edited = false;
    for (const auto& e : p.log.manual_edits) edited = edited || e.target == origin;
    j["edited"] = edited;
    j["assets"] = {{"audio", asset_url(p, origin.cue_id, "audio")}, {"frame", asset_url(p, origin.cue_id, "frame")}};
    cues.push_back(std::move(j));
  }
  return {{"project_id", p.id}, {"cues", cues}};
}

json issue_view(const Project& p, const Issue& issue) {
  json j = issue_to_json(issue);
  const Cue* cue = p.original.find(issue.cue_id);
  j["cue"] = cue_json(*cue);
  json current = json::array();
  for (std::size_t i = 0; i < p.working.origins.size(); ++i) {
    if (p.working.origins[i].cue_id == issue.cue_id) current.push_back(p.working.doc.cues[i].id);
  }
  j["working_cue_ids"] = current;
  const auto* d = latest_decision(p, issue.issue_id);
  j["decision"] = d ? decision_to_json(*d) : json(nullptr);
  j["state"] = d ? std::string(action_name(d->action)) : "pending";
  j["assets"] = {{"audio", asset_url(p, issue.cue_id, "audio")}, {"frame", asset_url(p, issue.cue_id, "frame")}};
  return j;
}

json issue_views(const Project& p, const std::string& kind, const std::string& cue) {
  std::optional<IssueKind> k;
  if (!kind.empty()) k = kind_from_name(kind);
  std::optional<int> cue_id;
  if (!cue.empty()) {
    try {
      std::size_t used = 0;
      cue_id = std::stoi(cue, &used);
      if (used != cue.size()) throw std::invalid_argument(cue);
    } catch (const std::exception&) {
      throw ValidationError("cue must be an integer, got \"" + cue + "\"");
    }
  }
  json items = json::array();
  for (const auto& i : p.report.issues) {
    if (k && i.kind != *k) continue;
    if (cue_id && i.cue_id != *cue_id) continue;
    items.push_back(issue_view(p, i));
  }
  return {{"project_id", p.id}, {"count", items.size()}, {"issues", items}};
}

json decide(ProjectStore& store, const std::string& id, const std::string& issue_id, const json& body,
            const std::string& actor) {
  if (!body.is_object()) throw ValidationError("body must be a JSON object");
  ReviewDecision d;
  d.issue_id = issue_id;
  if (!body.contains("action") || !body["action"].is_string()) throw ValidationError("missing string field \"action\"");
  d.action = action_from_name(body["action"].get<std::string>());
  if (body.contains("payload") && !body["payload"].is_null()) d.payload = suggestion_from_json(body["payload"]);
  d.actor = actor;
  d.decided_at = utc_timestamp();
  const auto p = store.mutate(id, [&](Project& proj) {
    const auto it = std::find_if(proj.report.issues.begin(), proj.report.issues.end(),
                                 [&](const Issue& i) { return i.issue_id == issue_id; });
    if (it == proj.report.issues.end()) throw NotFoundError("no issue " + issue_id + " in project " + id);
    validate_decision(*it, d, *proj.original.find(it->cue_id));
    proj.log.decisions.push_back(d);
  });
  for (const auto& i : p->report.issues) {
    if (i.issue_id == issue_id) return issue_view(*p, i);
  }
  throw NotFoundError("no issue " + issue_id);
}

json manual_edit(ProjectStore& store, const std::string& id, int cue_id, const json& body, const std::string& actor) {
  if (!body.is_object() || !body.contains("lines") || !body["lines"].is_array()) {
    throw ValidationError("body must carry a \"lines\" list");
  }
  std::vector<std::string> lines;
  for (const auto& l : body["lines"]) {
    if (!l.is_string()) throw ValidationError("lines must be strings");
    lines.push_back(l.get<std::string>());
  }
  if (lines.empty()) throw ValidationError("lines must not be empty");
  for (const auto& l : lines) {
    if (text::trim(l).empty()) throw ValidationError("lines must not be blank");
    if (l.find('\n') != std::string::npos) throw ValidationError("a line must not contain a line break");
  }
  CueOrigin target;
  const auto p = store.mutate(id, [&](Project& proj) {
    if (cue_id < 1 || static_cast<std::size_t>(cue_id) > proj.working.doc.cues.size()) {
      throw NotFoundError("no cue " + std::to_string(cue_id) + " in project " + id);
    }
    const auto idx = static_cast<std::size_t>(cue_id - 1);
    ManualEdit e;
    e.target = target = proj.working.origins[idx];
    e.old_lines = proj.working.doc.cues[idx].lines;
    e.new_lines = lines;
    e.timestamp = utc_timestamp();
    e.actor = actor;
    proj.log.manual_edits.push_back(std::move(e));
  });
  for (std::size_t i = 0; i < p->working.origins.size(); ++i) {
    if (p->working.origins[i] == target) {
      json j = cue_json(p->working.doc.cues[i]);
      j["origin"] = {{"cue_id", target.cue_id}, {"segment", target.segment}};
      j["edited"] = true;
      return j;
    }
  }
  throw NotFoundError("edited cue disappeared");
}

json export_project(ProjectStore& store, const std::string& id, const std::string& format) {
  std::optional<SubtitleFormat> fmt;
  if (!format.empty()) {
    if (format != "srt" && format != "vtt") throw ValidationError("format must be srt or vtt, got \"" + format + "\"");
    fmt = format == "vtt" ? SubtitleFormat::Vtt : SubtitleFormat::Srt;
  }
  ExportBundle bundle;
  const auto p = store.mutate(id, [&](Project& proj) {
    bundle = make_export(proj.working, fmt.value_or(proj.original.format), proj.subtitle_name, proj.video,
                         proj.default_region, proj.default_color);
    proj.status = "exported";
    ++proj.export_count;
  });
  const auto dir = store.state_dir() / id / "export";
  fs::create_directories(dir);
  write_text_file_atomic(dir / bundle.filename, bundle.subtitle);
  write_text_file_atomic(dir / (fs::path(bundle.filename).stem().string() + ".placement.json"),
                         bundle.placement.dump(2) + "\n");
  write_text_file_atomic(dir / (fs::path(bundle.filename).stem().string() + ".mux.sh"), bundle.mux_script);
  return {{"project_id", id},
          {"format", format_name(bundle.format)},
          {"filename", bundle.filename},
          {"subtitle", bundle.subtitle},
          {"placement", bundle.placement},
          {"mux_script", bundle.mux_script},
          {"conflicts", p->working.conflicts},
          {"status", p->status}};
}

std::pair<int, json> error_body(const std::exception& e) {
  int status = 500;
  std::string code = "internal_error";
  json details = json::object();
  if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
    status = 422;
    code = pe->code();
    details["line"] = pe->line();
  } else if (dynamic_cast<const NotFoundError*>(&e)) {
    status = 404;
    code = "not_found";
  } else if (dynamic_cast<const ConflictError*>(&e)) {
    status = 409;
    code = "conflict";
  } else if (const auto* ve = dynamic_cast<const Error*>(&e)) {
    code = ve->code();
    status = dynamic_cast<const BackendError*>(&e) || dynamic_cast<const IngestError*>(&e) ? 502 : 422;
    if (dynamic_cast<const AssetMissingError*>(&e)) status = 404;
  } else if (dynamic_cast<const json::exception*>(&e)) {
    status = 400;
    code = "bad_request";
  }
  return {status, {{"code", code}, {"message", e.what()}, {"details", details}}};
}

// ---------------------------------------------------------------- HTTP

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw json::parse_error::create(101, 0, std::string("request body is not JSON: ") + e.what(), nullptr);
  }
}

std::string actor_of(const httplib::Request& req) {
  return req.has_header("X-Actor") ? req.get_header_value("X-Actor") : "anonymous";
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const std::exception& e) {
      const auto [status, body] = error_body(e);
      send_json(res, status, body);
    }
  };
}

int cue_param(const httplib::Request& req) {
  const auto& v = req.path_params.at("cid");
  try {
    std::size_t used = 0;
    const int id = std::stoi(v, &used);
    if (used == v.size()) return id;
  } catch (const std::exception&) {
  }
  throw NotFoundError("no cue " + v);
}

}  // namespace

ReviewService::ReviewService(fs::path state_dir)
    : store_(std::move(state_dir)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

ReviewService::~ReviewService() = default;

void ReviewService::routes() {
  auto& s = *server_;
  s.Get("/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
          send_json(res, 200, {{"status", "ok"}, {"version", kVersion}});
        }));
  s.Post("/api/v1/projects", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto created = store_.create(create_request_from_json(parse_body(req)));
           auto body = project_summary(*store_.get(created.id));
           body["created"] = created.created;
           send_json(res, created.created ? 201 : 200, body);
         }));
  s.Get("/api/v1/projects/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, project_summary(*store_.get(req.path_params.at("id"))));
        }));
  s.Get("/api/v1/projects/:id/cues", guarded([this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, cue_views(*store_.get(req.path_params.at("id"))));
        }));
  s.Get("/api/v1/projects/:id/issues", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto p = store_.get(req.path_params.at("id"));
          send_json(res, 200,
                    issue_views(*p, req.get_param_value("kind"), req.get_param_value("cue")));
        }));
  s.Post("/api/v1/projects/:id/issues/:iid/decision",
         guarded([this](const httplib::Request& req, httplib::Response& res) {
           send_json(res, 200,
                     decide(store_, req.path_params.at("id"), req.path_params.at("iid"), parse_body(req),
                            actor_of(req)));
         }));
  s.Post("/api/v1/projects/:id/cues/:cid/edit", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto id = req.path_params.at("id");
           store_.get(id);
           send_json(res, 200, manual_edit(store_, id, cue_param(req), parse_body(req), actor_of(req)));
         }));
  s.Post("/api/v1/projects/:id/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
           send_json(res, 200, export_project(store_, req.path_params.at("id"), req.get_param_value("format")));
         }));
  s.Get("/api/v1/projects/:id/assets/:cid/:what", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto p = store_.get(req.path_params.at("id"));
          const int cue = cue_param(req);
          if (!p->original.find(cue)) throw NotFoundError("no cue " + std::to_string(cue));
          const auto& what = req.path_params.at("what");
          std::string file;
          std::string type;
          if (what == "audio") {
            file = "audio.wav";
            type = "audio/wav";
          } else if (what == "frame") {
            file = "frame.ppm";
            type = "image/x-portable-pixmap";
          } else {
            throw NotFoundError("unknown asset \"" + what + "\" (expected audio or frame)");
          }
          if (p->assets_dir.empty()) throw NotFoundError("project has no asset directory");
          const auto path = fs::path(p->assets_dir) / std::to_string(cue) / file;
          if (!fs::exists(path)) throw NotFoundError("asset not found: " + path.string());
          const auto bytes = read_binary_file(path);
          res.set_header("Accept-Ranges", "bytes");
          // httplib answers Range requests from the full body.
          res.set_content(std::string(bytes.begin(), bytes.end()), type);
        }));
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    json body = {{"code", res.status == 404 ? "not_found" : "http_error"},
                 {"message", res.status == 404 ? "no route for " + req.method + " " + req.path
                                               : "request failed with status " + std::to_string(res.status)},
                 {"details", json::object()}};
    res.set_content(body.dump(2) + "\n", "application/json");
  });
}

bool ReviewService::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    return port_ > 0;
  }
  if (!server_->bind_to_port(host, port)) return false;
  port_ = port;
  return true;
}

void ReviewService::run() {
  server_->listen_after_bind();
  store_.flush_all();
}

void ReviewService::stop() { server_->stop(); }

void ReviewService::wait_until_ready() const { server_->wait_until_ready(); }

int cmd_serve(const ServeOptions& options) {
  // Signals are taken by a dedicated thread so that shutdown runs outside a
  // signal handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  ReviewService service(options.state_dir);
  if (options.preload) {
    const auto& cfg = *options.preload;
    CreateRequest req;
    req.video = cfg.video;
    req.subtitle_name = cfg.subs.filename().string();
    req.subtitle_text = read_text_file(cfg.subs);
    req.assets_dir = cfg.assets ? fs::absolute(*cfg.assets).string() : "";
    if (options.preload_report) {
      req.report = json::parse(read_text_file(*options.preload_report));
    } else {
      req.report = report_to_json(cmd_check(cfg).report);
    }
    const auto created = service.store().create(req);
    std::cout << "project " << created.id << (created.created ? " created" : " loaded") << std::endl;
  }
  if (!service.bind(options.host, options.port)) {
    std::cerr << "vsat: cannot listen on " << options.host << ":" << options.port << "\n";
    return 1;
  }
  std::cout << "vsat " << kVersion << " serving on http://" << options.host << ":" << service.port() << std::endl;

  std::atomic<bool> signalled{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    signalled = true;
    service.stop();
  });
  service.run();
  // Unblock the waiter if the server stopped for another reason.
  if (!signalled) pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  std::cout << "vsat: state flushed, bye" << std::endl;
  return 0;
}

}  // namespace vsat
