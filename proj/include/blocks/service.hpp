#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "blocks/fit.hpp"
#include "blocks/hint.hpp"
#include "blocks/io.hpp"
#include "blocks/render.hpp"

namespace httplib {
class Server;
}

namespace bw {

struct ServiceOptions {
  /// Longest side of PNG previews unless full=1 is requested.
  int preview_max_side = 512;
  double max_distance = kDefaultMaxDistance;
  HintOptions hint;
  FitConfig fit;
};

/// One editing session. Scenes of every published revision are kept so any
/// revision can be rendered; scene_at(rev) equals replaying the first
/// log_length_at(rev) log entries on the source.
struct Session {
  std::string id;
  Scene source;
  std::vector<EditScript> log;
  int revision = 0;
  std::map<int, Scene> published;
  std::map<int, std::size_t> log_length_at;
  std::map<int, std::shared_ptr<const RenderProduct>> renders;
  std::mutex mutex;
};

/// Outcome of a request handler, independent of the HTTP transport.
struct ServiceReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;
};

/// Session store behind the HTTP endpoints. All methods are thread-safe;
/// edits within a session are serialized by compare-and-set on the
/// revision.
class EditService {
 public:
  explicit EditService(ServiceOptions opts = {});

  /// {"scene": {...}} or {"depth": [[...], ...], "camera": {...}, "k": K}.
  ServiceReply create_session(const std::string& body);
  ServiceReply get_scene(const std::string& id);
  /// {"base_revision": n, "edits": [...], "camera_delta": {...}?}.
  ServiceReply post_transforms(const std::string& id, const std::string& body);
  /// Optional {"base_revision": n}.
  ServiceReply undo(const std::string& id, const std::string& body);
  /// kind: depth | convex | points; format: png | pfm | cvxm (convex only).
  ServiceReply render(const std::string& id, const std::string& kind,
                      std::optional<int> rev, const std::string& format,
                      bool full);
  /// PNG body; ustar archive of the hint package and correspondence.
  ServiceReply hint(const std::string& id, const std::string& png_body,
                    std::optional<int> rev);

  /// Registers every endpoint on `server`.
  void install(httplib::Server& server);

 private:
  std::shared_ptr<Session> find(const std::string& id);
  std::shared_ptr<const RenderProduct> render_locked(Session& s, int rev);
  static Scene replay(const Scene& source, const std::vector<EditScript>& log,
                      std::size_t count);

  ServiceOptions opts_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// Blocks serving on host:port until the server is stopped.
void serve(const std::string& host, int port, const ServiceOptions& opts = {});

}  // namespace bw
