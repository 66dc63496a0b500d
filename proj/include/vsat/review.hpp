#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "json.hpp"
#include "vsat/decisions.hpp"
#include "vsat/fixes.hpp"
#include "vsat/pipeline.hpp"

namespace httplib {
class Server;
}

namespace vsat {

struct Project {
  std::string id;
  std::string video;
  std::string subtitle_name;
  SubtitleDoc original;
  RunReport report;
  DecisionLog log;
  std::string status = "open";  // open | exported
  std::string assets_dir;
  Region default_region = kDefaultSubtitleRegion;
  FontColor default_color = FontColor::White;
  int export_count = 0;

  FixOutcome working;  // replay(original, report.issues, log); not persisted
};

nlohmann::json project_state_to_json(const Project& p);
/// Rebuilds a project, replaying its log.
Project project_state_from_json(const nlohmann::json& j);

struct CreateRequest {
  std::string video;
  std::string subtitle_name;  // decides the input format by extension
  std::string subtitle_text;
  nlohmann::json report;
  std::string assets_dir;
};

CreateRequest create_request_from_json(const nlohmann::json& j);

/// Content hash of the upload; equal uploads map to one project.
std::string project_id_for(const CreateRequest& req, const RunReport& report);

/// Projects kept in memory and mirrored to <state_dir>/<id>.json. Writers to
/// one project are serialized; readers get immutable snapshots.
class ProjectStore {
 public:
  explicit ProjectStore(std::filesystem::path state_dir);

  struct Created {
    std::string id;
    bool created = false;
  };
  Created create(const CreateRequest& req);
  std::shared_ptr<const Project> get(const std::string& id) const;  // NotFoundError
  std::vector<std::string> ids() const;

  /// Runs `fn` on a copy under the project's write lock, replays, checks the
  /// working doc, persists, then publishes the copy.
  std::shared_ptr<const Project> mutate(const std::string& id, const std::function<void(Project&)>& fn);

  void flush_all() const;
  const std::filesystem::path& state_dir() const { return dir_; }

 private:
  struct Slot {
    std::mutex write;
    mutable std::mutex read;
    std::shared_ptr<const Project> snapshot;
  };
  Slot& slot(const std::string& id) const;
  void persist(const Project& p) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
};

// API operations, independent of the HTTP layer.
nlohmann::json project_summary(const Project& p);
nlohmann::json cue_views(const Project& p);
/// `kind` and `cue` come straight from the query string (empty = no filter).
nlohmann::json issue_views(const Project& p, const std::string& kind, const std::string& cue);
nlohmann::json issue_view(const Project& p, const Issue& issue);
nlohmann::json decide(ProjectStore& store, const std::string& id, const std::string& issue_id,
                      const nlohmann::json& body, const std::string& actor);
nlohmann::json manual_edit(ProjectStore& store, const std::string& id, int cue_id, const nlohmann::json& body,
                           const std::string& actor);
nlohmann::json export_project(ProjectStore& store, const std::string& id, const std::string& format);

/// {code, message, details} plus the HTTP status for an exception.
std::pair<int, nlohmann::json> error_body(const std::exception& e);

class ReviewService {
 public:
  explicit ReviewService(std::filesystem::path state_dir);
  ~ReviewService();

  ProjectStore& store() { return store_; }

  /// Binds without serving. Port 0 picks a free port. False when the port is
  /// taken.
  bool bind(const std::string& host, int port);
  int port() const { return port_; }
  /// Serves until stop(); flushes state on the way out.
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  void routes();

  ProjectStore store_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
};

struct ServeOptions {
  std::filesystem::path state_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  /// When set, the subtitles are checked (or the report loaded) and a
  /// project created before serving.
  std::optional<RunConfig> preload;
  std::optional<std::filesystem::path> preload_report;
};

/// Serves until SIGINT/SIGTERM. Returns 1 when the port is unavailable.
int cmd_serve(const ServeOptions& options);

std::string utc_timestamp();

}  // namespace vsat
