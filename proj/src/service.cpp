#include "recon/service.hpp"

#include <algorithm>
#include <cstring>

#include <httplib.h>
#include <json.hpp>

#include "recon/stages.hpp"

namespace recon {

using nlohmann::json;

namespace {

Vec3 cell_center(const Cell& c) {
  Vec2 m = Vec2::Zero();
  for (const auto& p : c.footprint) m += p;
  m /= static_cast<double>(c.footprint.size());
  return {m.x(), m.y(), 0.5 * (c.z_lo + c.z_hi)};
}

bool cell_contains(const Cell& c, const Vec3& p) {
  if (p.z() <= c.z_lo || p.z() >= c.z_hi) return false;
  const std::size_t n = c.footprint.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = c.footprint[(i + 1) % n] - c.footprint[i];
    const Vec2 d = p.head<2>() - c.footprint[i];
    if (e.x() * d.y() - e.y() * d.x() <= 0) return false;
  }
  return true;
}

int cell_at(const CellComplex& cx, const Vec3& p) {
  for (const auto& c : cx.cells)
    if (cell_contains(c, p)) return c.id;
  return -1;
}

json constraint_json(const UserConstraint& c) {
  json j{{"id", c.id}, {"kind", kind_name(c.kind)}, {"cell", c.cell}, {"active", c.active}};
  if (c.kind == UserConstraint::Kind::force_room && c.room >= 0) j["room"] = c.room;
  if (c.kind == UserConstraint::Kind::force_wall || c.kind == UserConstraint::Kind::forbid_wall) j["wall"] = c.wall;
  return j;
}

SurfaceCandidate virtual_surface(const Vec3& normal, double offset, const Vec2& a, const Vec2& b, double z_lo,
                                 double z_hi, int labels, double pixel) {
  SurfaceCandidate s;
  s.cls = SurfaceClass::wall;
  s.frame = PlaneFrame::make(normal, offset);
  s.occupancy.pixel_size = pixel;
  s.support.labels = labels;
  s.extent.z_lo = z_lo;
  s.extent.z_hi = z_hi;
  s.extent.end_a = a;
  s.extent.end_b = b;
  s.extent.xy_lo = a.cwiseMin(b);
  s.extent.xy_hi = a.cwiseMax(b);
  const Vec2 m = 0.5 * (a + b);
  s.extent.center = Vec3(m.x(), m.y(), 0.5 * (z_lo + z_hi));
  s.is_virtual = true;
  return s;
}

bool same_plane(const PlaneFrame& f, const Vec3& n, double offset, const Config& cfg) {
  return f.normal.dot(n) >= std::cos(deg2rad(cfg.merge_angle_deg)) &&
         std::abs(f.offset - offset) <= cfg.merge_distance;
}

}  // namespace

const char* job_state_name(JobState s) {
  switch (s) {
    case JobState::idle: return "idle";
    case JobState::solving: return "solving";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "?";
}

Session::Session(Reconstruction rec, Config cfg) : rec_(std::move(rec)), cfg_(cfg) { validate_config(cfg_); }

Session::~Session() {
  if (worker_.joinable()) worker_.join();
}

std::unique_ptr<Session> Session::open(const std::filesystem::path& dir, const Config& cfg) {
  return std::make_unique<Session>(load_reconstruction(dir, cfg), cfg);
}

JobStatus Session::status() const {
  std::lock_guard lk(mu_);
  return status_;
}

Config Session::config() const {
  std::lock_guard lk(mu_);
  return cfg_;
}

std::vector<UserConstraint> Session::constraints() const {
  std::lock_guard lk(mu_);
  return constraints_;
}

void Session::check_idle() const {
  if (status_.state == JobState::solving) throw ConflictError("a solve is running; edits are rejected until it finishes");
}

void Session::check_constraint(const UserConstraint& c) const {
  const auto& cx = rec_.complex;
  if (c.cell < 0 || c.cell >= static_cast<int>(cx.cells.size()))
    throw NotFoundError("cell " + std::to_string(c.cell) + " does not exist");
  using K = UserConstraint::Kind;
  if (c.kind == K::force_room && c.room >= rec_.room_labels)
    throw NotFoundError("room label " + std::to_string(c.room) + " does not exist");
  if (c.kind == K::force_wall || c.kind == K::forbid_wall) {
    if (c.wall < 0 || c.wall >= static_cast<int>(cx.wall_count()))
      throw NotFoundError("wall " + std::to_string(c.wall) + " does not exist");
    const auto& w = cx.cells[c.cell].walls;
    if (!std::binary_search(w.begin(), w.end(), c.wall))
      throw NotFoundError("cell " + std::to_string(c.cell) + " is not in wall " + std::to_string(c.wall));
  }
}

int Session::add_constraint(UserConstraint c) {
  std::lock_guard lk(mu_);
  check_idle();
  check_constraint(c);
  c.id = next_constraint_++;
  constraints_.push_back(c);
  anchors_.push_back(cell_center(rec_.complex.cells[c.cell]));
  return c.id;
}

void Session::remove_constraint(int id) {
  std::lock_guard lk(mu_);
  check_idle();
  auto it = std::find_if(constraints_.begin(), constraints_.end(), [&](const auto& c) { return c.id == id; });
  if (it == constraints_.end()) throw NotFoundError("constraint " + std::to_string(id) + " does not exist");
  anchors_.erase(anchors_.begin() + (it - constraints_.begin()));
  constraints_.erase(it);
}

void Session::set_alpha(double alpha) {
  std::lock_guard lk(mu_);
  check_idle();
  Config next = cfg_;
  next.alpha = alpha;
  validate_config(next);
  cfg_ = next;
}

VirtualWallResult Session::add_virtual_wall(const VirtualWallRequest& req) {
  std::lock_guard lk(mu_);
  check_idle();
  const Vec2 d = req.b - req.a;
  if (!(d.norm() > 1e-6)) throw ConfigError("virtual wall segment has zero length");
  const auto& cx = rec_.complex;
  const double z_lo = req.z_lo.value_or(cx.z_levels.size() > 2 ? cx.z_levels[1] : cx.lo.z());
  const double z_hi = req.z_hi.value_or(cx.z_levels.size() > 2 ? cx.z_levels[cx.z_levels.size() - 2] : cx.hi.z());
  const double t = req.thickness.value_or(cfg_.virtual_thickness);
  if (!(z_hi > z_lo)) throw ConfigError("virtual wall z-range is empty");
  if (!(t > 0 && t <= cfg_.max_thickness)) throw ConfigError("virtual wall thickness must be in (0, max_thickness]");
  for (const Vec2& p : {req.a, req.b})
    if ((p.array() < cx.lo.head<2>().array()).any() || (p.array() > cx.hi.head<2>().array()).any())
      throw ConfigError("virtual wall segment leaves the scene bounds");

  const Vec2 dir = d.normalized();
  const Vec3 n(-dir.y(), dir.x(), 0);
  const Vec2 m = 0.5 * (req.a + req.b);
  const double center = n.head<2>().dot(m);
  const double off_a = center + 0.5 * t, off_b = -center + 0.5 * t;

  VirtualWallResult res;
  for (const auto& w : rec_.pairs.walls) {
    if (w.orientation != SurfaceClass::wall) continue;
    const auto& sa = rec_.pairs.surfaces[w.surface_a].frame;
    const auto& sb = rec_.pairs.surfaces[w.surface_b].frame;
    if ((same_plane(sa, n, off_a, cfg_) && same_plane(sb, -n, off_b, cfg_)) ||
        (same_plane(sa, -n, off_b, cfg_) && same_plane(sb, n, off_a, cfg_))) {
      res.wall = w.id;
      res.merged = true;
      return res;
    }
  }

  const Vec2 shift = 0.5 * t * n.head<2>();
  const int labels = rec_.room_labels;
  const double pixel = cfg_.occupancy_pixel;
  auto& pairs = rec_.pairs;
  WallCandidate w;
  w.id = static_cast<int>(pairs.walls.size());
  w.surface_a = static_cast<int>(pairs.surfaces.size());
  w.surface_b = w.surface_a + 1;
  w.thickness = t;
  w.orientation = SurfaceClass::wall;
  pairs.surfaces.push_back(virtual_surface(n, off_a, req.a + shift, req.b + shift, z_lo, z_hi, labels, pixel));
  pairs.surfaces.push_back(virtual_surface(-n, off_b, req.a - shift, req.b - shift, z_lo, z_hi, labels, pixel));
  pairs.walls.push_back(w);
  rec_.complex = build_complex(complex_input(pairs, complex_params(cfg_)), complex_params(cfg_));
  rec_.priors = compute_priors(rec_.complex, pairs.surfaces, labels, prior_params(cfg_));
  ++complex_generation_;
  res.wall = w.id;

  std::vector<UserConstraint> kept;
  std::vector<Vec3> kept_anchors;
  for (std::size_t i = 0; i < constraints_.size(); ++i) {
    UserConstraint c = constraints_[i];
    c.cell = cell_at(rec_.complex, anchors_[i]);
    bool ok = c.cell >= 0;
    if (ok) {
      try {
        check_constraint(c);
      } catch (const Error&) {
        ok = false;
      }
    }
    if (!ok) {
      res.dropped_constraints.push_back(c.id);
      continue;
    }
    kept.push_back(c);
    kept_anchors.push_back(cell_center(rec_.complex.cells[c.cell]));
  }
  constraints_ = std::move(kept);
  anchors_ = std::move(kept_anchors);
  return res;
}

int Session::start_solve() {
  std::lock_guard lk(mu_);
  if (status_.state == JobState::solving) throw ConflictError("a solve is already running");
  if (worker_.joinable()) worker_.join();
  const int job = ++status_.job;
  status_.state = JobState::solving;
  status_.message.clear();
  status_.conflict_hint.clear();
  std::vector<UserConstraint> forced;
  for (const auto& c : constraints_)
    if (c.active) forced.push_back(c);
  worker_ = std::thread(&Session::run_job, this, job, &rec_, cfg_, std::move(forced));
  return job;
}

void Session::run_job(int job, Reconstruction const* rec, Config cfg, std::vector<UserConstraint> forced) {
  std::optional<SolveOutcome> out;
  std::string error;
  try {
    out = optimize(*rec, cfg, forced);
  } catch (const std::exception& e) {
    error = e.what();
  }
  std::lock_guard lk(mu_);
  if (!out) {
    status_.state = JobState::failed;
    status_.message = error;
  } else if (out->labeling.status == Labeling::Status::infeasible) {
    status_.state = JobState::failed;
    status_.solver_status = status_name(out->labeling.status);
    status_.message = "constraints are contradictory";
    status_.conflict_hint = out->labeling.conflict_hint;
  } else {
    status_.state = JobState::done;
    status_.solver_status = status_name(out->labeling.status);
    status_.objective = out->labeling.objective;
    status_.gap = out->labeling.gap;
    status_.model_job = job;
    if (!out->violations.empty()) status_.message = std::to_string(out->violations.size()) + " validation violations";
    outcome_ = std::move(out);
    outcome_constraints_ = forced;
    outcome_generation_ = complex_generation_;
  }
  idle_cv_.notify_all();
}

void Session::wait() const {
  std::unique_lock lk(mu_);
  idle_cv_.wait(lk, [&] { return status_.state != JobState::solving; });
}

std::optional<SolveOutcome> Session::outcome() const {
  std::lock_guard lk(mu_);
  return outcome_;
}

std::string Session::model_json() const {
  std::lock_guard lk(mu_);
  json j;
  j["api_version"] = kApiVersion;
  j["job"] = status_.model_job;
  j["state"] = job_state_name(status_.state);
  j["stale"] = outcome_generation_ != complex_generation_;
  j["constraints"] = json::array();
  for (const auto& c : outcome_constraints_) j["constraints"].push_back(constraint_json(c));
  j["pending_constraints"] = json::array();
  for (const auto& c : constraints_) j["pending_constraints"].push_back(constraint_json(c));
  j["counts"] = {{"cells", rec_.complex.cells.size()}, {"walls", rec_.complex.wall_count()},
                 {"room_labels", rec_.room_labels}};
  if (outcome_) {
    j["model"] = json::parse(export_model_json(outcome_->building));
    j["objective"] = outcome_->labeling.objective;
    j["status"] = status_name(outcome_->labeling.status);
  } else {
    j["model"] = nullptr;
  }
  return j.dump();
}

std::string Session::cells_json(const Vec3& lo, const Vec3& hi) const {
  std::lock_guard lk(mu_);
  const auto& cx = rec_.complex;
  const bool labeled = outcome_ && outcome_generation_ == complex_generation_;
  CellLabels lab;
  if (labeled) lab = cell_labels(outcome_->model, outcome_->labeling);
  json j;
  j["api_version"] = kApiVersion;
  j["labeled"] = labeled;
  j["cells"] = json::array();
  for (const auto& c : cx.cells) {
    Vec2 flo = c.footprint[0], fhi = flo;
    for (const auto& p : c.footprint) {
      flo = flo.cwiseMin(p);
      fhi = fhi.cwiseMax(p);
    }
    if (fhi.x() < lo.x() || flo.x() > hi.x() || fhi.y() < lo.y() || flo.y() > hi.y() || c.z_hi < lo.z() ||
        c.z_lo > hi.z())
      continue;
    json fp = json::array();
    for (const auto& p : c.footprint) fp.push_back({p.x(), p.y()});
    json e{{"id", c.id}, {"footprint", fp}, {"z", {c.z_lo, c.z_hi}}, {"volume", c.volume}, {"walls", c.walls}};
    if (labeled) {
      const int r = lab.room[c.id];
      e["label"] = r >= 0 ? "room_" + std::to_string(r) : r == -1 ? "outside" : "invalid";
      e["active_walls"] = lab.walls[c.id];
    }
    j["cells"].push_back(std::move(e));
  }
  return j.dump();
}

BuildingModel Session::mesh_entities(const std::string& entity) const {
  std::lock_guard lk(mu_);
  BuildingModel bm;
  if (!outcome_) throw NotFoundError("no model yet; POST /solve first");
  const auto& full = outcome_->building;
  if (entity == "all") return full;
  if (entity == "rooms") {
    bm.rooms = full.rooms;
    return bm;
  }
  if (entity == "walls") {
    bm.walls = full.walls;
    return bm;
  }
  auto pick = [&](const std::string& prefix) -> std::optional<int> {
    if (entity.rfind(prefix, 0) != 0) return std::nullopt;
    try {
      std::size_t used = 0;
      const int id = std::stoi(entity.substr(prefix.size()), &used);
      if (used + prefix.size() != entity.size()) return std::nullopt;
      return id;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };
  if (auto id = pick("room_")) {
    for (const auto& r : full.rooms)
      if (r.id == *id) {
        bm.rooms.push_back(r);
        return bm;
      }
  } else if (auto wid = pick("wall_")) {
    for (const auto& w : full.walls)
      if (w.id == *wid) {
        bm.walls.push_back(w);
        return bm;
      }
  }
  throw NotFoundError("no entity '" + entity + "'");
}

std::size_t Session::cell_count() const {
  std::lock_guard lk(mu_);
  return rec_.complex.cells.size();
}

std::size_t Session::wall_count() const {
  std::lock_guard lk(mu_);
  return rec_.complex.wall_count();
}

std::string binary_mesh(const BuildingModel& bm) {
  std::vector<float> data;
  auto add = [&](const std::vector<Polygon3>& boundary) {
    const Mesh m = triangulate(boundary);
    for (const auto& t : m.triangles)
      for (int k : t.v)
        for (int c = 0; c < 3; ++c) data.push_back(static_cast<float>(m.vertices[k][c]));
  };
  for (const auto& r : bm.rooms) add(r.boundary);
  for (const auto& w : bm.walls) add(w.boundary);
  const std::uint32_t count = static_cast<std::uint32_t>(data.size() / 9);
  std::string out(4 + data.size() * 4, '\0');
  // Host order is little-endian on every supported target; write bytes explicitly anyway.
  for (int b = 0; b < 4; ++b) out[b] = static_cast<char>((count >> (8 * b)) & 0xff);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    for (int b = 0; b < 4; ++b) out[4 + 4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

struct Service::Impl {
  Session& session;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Session& s) : session(s) { routes(); }

  static void reply(httplib::Response& res, int code, json body) {
    body["api_version"] = kApiVersion;
    res.status = code;
    res.set_header("X-Api-Version", std::to_string(kApiVersion));
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, int code, const std::string& msg) { reply(res, code, {{"error", msg}}); }

  // Runs a handler, mapping exceptions to status codes.
  template <class F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const ConflictError& e) {
      fail(res, 409, e.what());
    } catch (const NotFoundError& e) {
      fail(res, 404, e.what());
    } catch (const ModelError& e) {
      fail(res, 404, e.what());
    } catch (const json::exception& e) {
      fail(res, 400, std::string("bad request body: ") + e.what());
    } catch (const ConfigError& e) {
      fail(res, 400, e.what());
    } catch (const std::exception& e) {
      fail(res, 500, e.what());
    }
  }

  void routes() {
    server.Get("/model", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        res.set_header("X-Api-Version", std::to_string(kApiVersion));
        res.set_content(session.model_json(), "application/json");
      });
    });

    server.Get("/cells", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        Vec3 lo = Vec3::Constant(-std::numeric_limits<double>::infinity()), hi = -lo;
        if (req.has_param("bbox")) {
          std::vector<double> v;
          std::stringstream ss(req.get_param_value("bbox"));
          std::string tok;
          while (std::getline(ss, tok, ',')) {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw ConfigError("bbox values must be numbers");
          }
          if (v.size() == 4) {
            lo.head<2>() = Vec2(v[0], v[1]);
            hi.head<2>() = Vec2(v[2], v[3]);
          } else if (v.size() == 6) {
            lo = Vec3(v[0], v[1], v[2]);
            hi = Vec3(v[3], v[4], v[5]);
          } else {
            throw ConfigError("bbox takes x0,y0,x1,y1 or x0,y0,z0,x1,y1,z1");
          }
        }
        res.set_header("X-Api-Version", std::to_string(kApiVersion));
        res.set_content(session.cells_json(lo, hi), "application/json");
      });
    });

    server.Post("/constraints", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = json::parse(req.body);
        UserConstraint c;
        const std::string kind = body.at("kind").get<std::string>();
        auto k = parse_kind(kind);
        if (!k) throw ConfigError("unknown constraint kind '" + kind + "'");
        c.kind = *k;
        c.cell = body.at("cell").get<int>();
        c.room = body.value("room", -1);
        c.wall = body.value("wall", -1);
        c.active = body.value("active", true);
        if ((c.kind == UserConstraint::Kind::force_wall || c.kind == UserConstraint::Kind::forbid_wall) &&
            !body.contains("wall"))
          throw ConfigError(kind + " needs a wall id");
        const int id = session.add_constraint(c);
        reply(res, 201, {{"id", id}});
      });
    });

    server.Delete(R"(/constraints/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        session.remove_constraint(std::stoi(req.matches[1]));
        reply(res, 200, {{"removed", std::stoi(req.matches[1])}});
      });
    });

    server.Post("/walls/virtual", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = json::parse(req.body);
        VirtualWallRequest w;
        w.a = Vec2(body.at("a").at(0).get<double>(), body.at("a").at(1).get<double>());
        w.b = Vec2(body.at("b").at(0).get<double>(), body.at("b").at(1).get<double>());
        if (body.contains("z")) {
          w.z_lo = body["z"].at(0).get<double>();
          w.z_hi = body["z"].at(1).get<double>();
        }
        if (body.contains("thickness")) w.thickness = body["thickness"].get<double>();
        const auto r = session.add_virtual_wall(w);
        reply(res, r.merged ? 200 : 201, {{"wall", r.wall}, {"merged", r.merged}, {"dropped_constraints", r.dropped_constraints}});
      });
    });

    server.Post("/solve", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.body.empty()) {
          const json body = json::parse(req.body);
          if (body.contains("alpha")) session.set_alpha(body["alpha"].get<double>());
        }
        const int job = session.start_solve();
        reply(res, 202, {{"job", job}});
      });
    });

    server.Get("/solve/status", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        const JobStatus s = session.status();
        reply(res, 200, {{"state", job_state_name(s.state)}, {"job", s.job}, {"model_job", s.model_job},
                         {"status", s.solver_status}, {"objective", s.objective}, {"gap", s.gap},
                         {"message", s.message}, {"conflict_hint", s.conflict_hint},
                         {"alpha", session.config().alpha}});
      });
    });

    server.Get(R"(/mesh/([A-Za-z0-9_]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const BuildingModel bm = session.mesh_entities(req.matches[1]);
        const std::string fmt = req.has_param("format") ? req.get_param_value("format") : "obj";
        res.set_header("X-Api-Version", std::to_string(kApiVersion));
        if (fmt == "obj") res.set_content(export_mesh(bm, MeshSelection::all), "text/plain");
        else if (fmt == "binary") res.set_content(binary_mesh(bm), "application/octet-stream");
        else throw ConfigError("format must be obj or binary");
      });
    });
  }
};

Service::Service(Session& session) : impl_(std::make_unique<Impl>(session)) {}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) bound = impl_->server.bind_to_any_port(host);
  else if (!impl_->server.bind_to_port(host, port)) bound = -1;
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace recon
