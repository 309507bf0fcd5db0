#include "blocks/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "blocks/correspond.hpp"
#include "blocks/errors.hpp"
#include "blocks/pipeline.hpp"
#include "blocks/tar.hpp"

namespace bw {

namespace {

ServiceReply json_reply(int status, const Json& j) {
  return {status, dump_json(j), "application/json", {}};
}

ServiceReply error_reply(int status, const std::string& message) {
  return json_reply(status, {{"error", message}});
}

Json parse_body(const std::string& body) {
  Json j = parse_json(body);
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

// Nearest-neighbour decimation so the longest side is at most max_side.
FloatRaster downscale(const FloatRaster& img, int max_side) {
  const int longest = std::max(img.width(), img.height());
  if (longest <= max_side) return img;
  const int f = (longest + max_side - 1) / max_side;
  FloatRaster out((img.width() + f - 1) / f, (img.height() + f - 1) / f, img.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(x * f, y * f, c);
    }
  }
  return out;
}

FloatRaster ids_as_float(const IdRaster& map) {
  FloatRaster out(map.width(), map.height(), 1);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) out.at(x, y) = static_cast<float>(map.at(x, y));
  }
  return out;
}

FloatRaster points_preview(const FloatRaster& points, const IdRaster& map) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (map.at(x, y) < 0) continue;
      for (int c = 0; c < 3; ++c) {
        lo[c] = std::min<double>(lo[c], points.at(x, y, c));
        hi[c] = std::max<double>(hi[c], points.at(x, y, c));
      }
    }
  }
  FloatRaster out(points.width(), points.height(), 3, 0.0f);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (map.at(x, y) < 0) continue;
      for (int c = 0; c < 3; ++c) {
        const double span = hi[c] > lo[c] ? hi[c] - lo[c] : 1.0;
        out.at(x, y, c) = static_cast<float>((points.at(x, y, c) - lo[c]) / span);
      }
    }
  }
  return out;
}

std::optional<int> base_revision(const Json& j, bool required) {
  if (!j.contains("base_revision")) {
    if (required) throw ValidationError("base_revision is required");
    return std::nullopt;
  }
  if (!j.at("base_revision").is_number_integer()) {
    throw ValidationError("base_revision must be an integer");
  }
  return j.at("base_revision").get<int>();
}

// Handlers map library errors onto status codes.
template <class F>
ServiceReply guarded(int validation_status, F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    return error_reply(validation_status, e.what());
  } catch (const NumericalError& e) {
    return error_reply(500, e.what());
  }
}

}  // namespace

EditService::EditService(ServiceOptions opts) : opts_(std::move(opts)) {}

std::shared_ptr<Session> EditService::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

Scene EditService::replay(const Scene& source, const std::vector<EditScript>& log,
                          std::size_t count) {
  Scene scene = source;
  for (std::size_t i = 0; i < count; ++i) scene = apply_edits(scene, log[i]);
  return scene;
}

std::shared_ptr<const RenderProduct> EditService::render_locked(Session& s, int rev) {
  auto it = s.renders.find(rev);
  if (it == s.renders.end()) {
    auto product = std::make_shared<const RenderProduct>(render_scene(s.published.at(rev)));
    it = s.renders.emplace(rev, std::move(product)).first;
  }
  return it->second;
}

ServiceReply EditService::create_session(const std::string& body) {
  return guarded(400, [&] {
    const Json j = parse_body(body);
    auto session = std::make_shared<Session>();
    Json reply;
    if (j.contains("scene")) {
      session->source = scene_from_json(j.at("scene"));
    } else if (j.contains("depth") && j.contains("camera")) {
      const CameraIntrinsics cam = camera_from_json(j.at("camera"));
      const Json& rows = j.at("depth");
      if (!rows.is_array() || static_cast<int>(rows.size()) != cam.height) {
        throw ValidationError("depth must hold one row per image row");
      }
      DepthMap depth(cam.width, cam.height, 1);
      for (int y = 0; y < cam.height; ++y) {
        if (!rows[y].is_array() || static_cast<int>(rows[y].size()) != cam.width) {
          throw ValidationError("depth row length differs from the camera width");
        }
        for (int x = 0; x < cam.width; ++x) {
          if (!rows[y][x].is_number()) throw ValidationError("depth values must be numbers");
          depth.at(x, y) = rows[y][x].get<float>();
        }
      }
      FitConfig cfg = opts_.fit;
      cfg.k = j.value("k", cfg.k);
      cfg.steps = j.value("steps", cfg.steps);
      cfg.seed = j.value("seed", cfg.seed);
      const FitResult fitted = fit_depth(depth, cam, cfg);
      if (fitted.report.diverged) throw NumericalError("fit diverged");
      session->source = fitted.scene;
      reply["fit_report"] = fit_report_to_json(fitted.report);
    } else {
      throw ValidationError("body needs a scene or a depth map with a camera");
    }
    session->published.emplace(0, session->source);
    session->log_length_at.emplace(0, 0);
    {
      std::lock_guard lock(mutex_);
      session->id = "s" + std::to_string(next_id_++);
      sessions_.emplace(session->id, session);
    }
    reply["session"] = session->id;
    reply["revision"] = 0;
    return json_reply(201, reply);
  });
}

ServiceReply EditService::get_scene(const std::string& id) {
  const auto s = find(id);
  if (!s) return error_reply(404, "unknown session");
  std::lock_guard lock(s->mutex);
  ServiceReply r{200, dump_json(scene_to_json(s->published.at(s->revision))),
                 "application/json", {}};
  r.headers["X-Scene-Revision"] = std::to_string(s->revision);
  return r;
}

ServiceReply EditService::post_transforms(const std::string& id, const std::string& body) {
  const auto s = find(id);
  if (!s) return error_reply(404, "unknown session");
  Json j;
  std::optional<int> base;
  try {
    j = parse_body(body);
    base = base_revision(j, true);
  } catch (const ValidationError& e) {
    return error_reply(400, e.what());
  }
  return guarded(422, [&] {
    const EditScript script = edits_from_json(j);
    std::lock_guard lock(s->mutex);
    if (*base != s->revision) {
      return error_reply(409, "base_revision " + std::to_string(*base) +
                                  " is stale; current revision is " +
                                  std::to_string(s->revision));
    }
    const Scene& current = s->published.at(s->revision);
    validate_edits(current, script);
    Scene next = apply_edits(current, script);
    s->log.push_back(script);
    ++s->revision;
    s->published.emplace(s->revision, std::move(next));
    s->log_length_at.emplace(s->revision, s->log.size());
    return json_reply(200, {{"revision", s->revision}});
  });
}

ServiceReply EditService::undo(const std::string& id, const std::string& body) {
  const auto s = find(id);
  if (!s) return error_reply(404, "unknown session");
  std::optional<int> base;
  try {
    if (!body.empty()) base = base_revision(parse_body(body), false);
  } catch (const ValidationError& e) {
    return error_reply(400, e.what());
  }
  std::lock_guard lock(s->mutex);
  if (base && *base != s->revision) return error_reply(409, "base_revision is stale");
  if (s->log.empty()) return error_reply(409, "transform log is empty");
  s->log.pop_back();
  ++s->revision;
  s->published.emplace(s->revision, replay(s->source, s->log, s->log.size()));
  s->log_length_at.emplace(s->revision, s->log.size());
  return json_reply(200, {{"revision", s->revision}});
}

ServiceReply EditService::render(const std::string& id, const std::string& kind,
                                 std::optional<int> rev, const std::string& format,
                                 bool full) {
  const auto s = find(id);
  if (!s) return error_reply(404, "unknown session");
  if (kind != "depth" && kind != "convex" && kind != "points") {
    return error_reply(400, "kind must be depth, convex or points");
  }
  if (format != "png" && format != "pfm" && format != "cvxm") {
    return error_reply(400, "format must be png, pfm or cvxm");
  }
  if (format == "cvxm" && kind != "convex") return error_reply(400, "cvxm holds convex maps only");
  return guarded(400, [&] {
    std::shared_ptr<const RenderProduct> product;
    int r;
    {
      std::lock_guard lock(s->mutex);
      r = rev.value_or(s->revision);
      if (!s->published.contains(r)) return error_reply(404, "unknown revision");
      product = render_locked(*s, r);
    }
    ServiceReply reply;
    reply.headers["X-Scene-Revision"] = std::to_string(r);
    if (format == "cvxm") {
      reply.body = encode_cvxm(product->convex_map);
      reply.content_type = "application/octet-stream";
    } else if (format == "pfm") {
      reply.content_type = "application/x-pfm";
      if (kind == "depth") reply.body = encode_pfm(product->depth);
      else if (kind == "points") reply.body = encode_pfm(product->points);
      else reply.body = encode_pfm(ids_as_float(product->convex_map));
    } else {
      FloatRaster preview = kind == "depth"    ? depth_preview(product->depth)
                            : kind == "convex" ? convex_preview(product->convex_map)
                                               : points_preview(product->points, product->convex_map);
      if (!full) preview = downscale(preview, opts_.preview_max_side);
      reply.body = encode_png(preview);
      reply.content_type = "image/png";
    }
    return reply;
  });
}

ServiceReply EditService::hint(const std::string& id, const std::string& png_body,
                               std::optional<int> rev) {
  const auto s = find(id);
  if (!s) return error_reply(404, "unknown session");
  return guarded(422, [&] {
    const FloatRaster img = decode_png(png_body);
    EditScript combined;
    Scene source;
    std::shared_ptr<const RenderProduct> src_render;
    std::shared_ptr<const RenderProduct> dst_render;
    int r;
    {
      std::lock_guard lock(s->mutex);
      r = rev.value_or(s->revision);
      if (!s->published.contains(r)) return error_reply(404, "unknown revision");
      source = s->source;
      const std::size_t n = s->log_length_at.at(r);
      for (std::size_t i = 0; i < n; ++i) {
        const EditScript& e = s->log[i];
        combined.edits.insert(combined.edits.end(), e.edits.begin(), e.edits.end());
        if (e.camera_delta) {
          combined.camera_delta =
              combined.camera_delta ? *combined.camera_delta * *e.camera_delta : *e.camera_delta;
        }
      }
      src_render = render_locked(*s, 0);
      dst_render = render_locked(*s, r);
    }
    EditProducts products;
    products.transforms = collect_transforms(combined);
    products.corr = correspond_edit(source, products.transforms, *src_render, *dst_render,
                                    opts_.max_distance);
    products.dst_render = *dst_render;
    const HintPackage pkg = hint_from_products(img, products, opts_.hint);
    const std::string archive = write_tar({
        {"hint.png", encode_png(pkg.hint)},
        {"inpainted.png", encode_png(pkg.inpainted)},
        {"mask.pfm", encode_pfm(pkg.mask.values)},
        {"mask_full.pfm", encode_pfm(pkg.mask_full)},
        {"coords.pfm", encode_pfm(products.corr.coords)},
        {"confidence.pfm", encode_pfm(products.corr.confidence)},
    });
    ServiceReply reply{200, archive, "application/x-tar", {}};
    reply.headers["X-Scene-Revision"] = std::to_string(r);
    return reply;
  });
}

void EditService::install(httplib::Server& server) {
  auto send = [](httplib::Response& res, const ServiceReply& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
  };
  auto optional_int = [](const httplib::Request& req, const char* key) -> std::optional<int> {
    if (!req.has_param(key)) return std::nullopt;
    const std::string v = req.get_param_value(key);
    std::size_t used = 0;
    const int n = std::stoi(v, &used);
    if (used != v.size()) throw ValidationError(std::string(key) + " must be an integer");
    return n;
  };

  server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body));
  });
  server.Get(R"(/sessions/([^/]+)/scene)",
             [this, send](const httplib::Request& req, httplib::Response& res) {
               send(res, get_scene(req.matches[1]));
             });
  server.Post(R"(/sessions/([^/]+)/transforms)",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, post_transforms(req.matches[1], req.body));
              });
  server.Post(R"(/sessions/([^/]+)/undo)",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, undo(req.matches[1], req.body));
              });
  server.Get(R"(/sessions/([^/]+)/render)",
             [this, send, optional_int](const httplib::Request& req, httplib::Response& res) {
               std::optional<int> rev;
               try {
                 rev = optional_int(req, "rev");
               } catch (const std::exception&) {
                 send(res, error_reply(400, "rev must be an integer"));
                 return;
               }
               const std::string kind =
                   req.has_param("kind") ? req.get_param_value("kind") : "depth";
               const std::string format =
                   req.has_param("format") ? req.get_param_value("format") : "png";
               const bool full = req.has_param("full") && req.get_param_value("full") == "1";
               send(res, render(req.matches[1], kind, rev, format, full));
             });
  server.Post(R"(/sessions/([^/]+)/hint)",
              [this, send, optional_int](const httplib::Request& req, httplib::Response& res) {
                std::optional<int> rev;
                try {
                  rev = optional_int(req, "rev");
                } catch (const std::exception&) {
                  send(res, error_reply(400, "rev must be an integer"));
                  return;
                }
                send(res, hint(req.matches[1], req.body, rev));
              });
}

void serve(const std::string& host, int port, const ServiceOptions& opts) {
  EditService service(opts);
  httplib::Server server;
  service.install(server);
  spdlog::info("listening on {}:{}", host, port);
  if (!server.listen(host, port)) {
    throw ValidationError("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace bw
