#include "recon/stages.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace recon {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec(const Vec2& v) { return {v.x(), v.y()}; }
json vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec2 vec2(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
Vec3 vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

std::string bits_string(const std::vector<std::uint8_t>& bits) {
  std::string s(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) s[i] = '1';
  return s;
}

std::vector<std::uint8_t> bits_from(const std::string& s) {
  std::vector<std::uint8_t> bits(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) bits[i] = s[i] == '1';
  return bits;
}

json frame_json(const PlaneFrame& f) {
  return {{"normal", vec(f.normal)}, {"offset", f.offset}, {"u", vec(f.u)}, {"v", vec(f.v)}};
}

PlaneFrame frame_from(const json& j) {
  PlaneFrame f;
  f.normal = vec3(j.at("normal"));
  f.offset = j.at("offset").get<double>();
  f.u = vec3(j.at("u"));
  f.v = vec3(j.at("v"));
  return f;
}

json occupancy_json(const OccupancyBitmap& b) {
  return {{"origin", vec(b.origin)}, {"pixel_size", b.pixel_size}, {"width", b.width},
          {"height", b.height}, {"bits", bits_string(b.bits)}};
}

OccupancyBitmap occupancy_from(const json& j) {
  OccupancyBitmap b;
  b.origin = vec2(j.at("origin"));
  b.pixel_size = j.at("pixel_size").get<double>();
  b.width = j.at("width").get<int>();
  b.height = j.at("height").get<int>();
  b.bits = bits_from(j.at("bits").get<std::string>());
  return b;
}

json support_json(const MultiLabelBitmap& b) {
  return {{"origin", vec(b.origin)}, {"pixel_size", b.pixel_size}, {"width", b.width}, {"height", b.height},
          {"labels", b.labels}, {"values", b.values}, {"occupied", bits_string(b.occupied)}};
}

MultiLabelBitmap support_from(const json& j) {
  MultiLabelBitmap b;
  b.origin = vec2(j.at("origin"));
  b.pixel_size = j.at("pixel_size").get<double>();
  b.width = j.at("width").get<int>();
  b.height = j.at("height").get<int>();
  b.labels = j.at("labels").get<int>();
  b.values = j.at("values").get<std::vector<double>>();
  b.occupied = bits_from(j.at("occupied").get<std::string>());
  return b;
}

json extent_json(const SurfaceExtent& e) {
  return {{"z_lo", e.z_lo}, {"z_hi", e.z_hi}, {"xy_lo", vec(e.xy_lo)}, {"xy_hi", vec(e.xy_hi)},
          {"end_a", vec(e.end_a)}, {"end_b", vec(e.end_b)}, {"center", vec(e.center)}};
}

SurfaceExtent extent_from(const json& j) {
  SurfaceExtent e;
  e.z_lo = j.at("z_lo").get<double>();
  e.z_hi = j.at("z_hi").get<double>();
  e.xy_lo = vec2(j.at("xy_lo"));
  e.xy_hi = vec2(j.at("xy_hi"));
  e.end_a = vec2(j.at("end_a"));
  e.end_b = vec2(j.at("end_b"));
  e.center = vec3(j.at("center"));
  return e;
}

const char* class_name(SurfaceClass c) { return c == SurfaceClass::wall ? "wall" : "slab"; }
SurfaceClass class_from(const json& j) { return j.get<std::string>() == "slab" ? SurfaceClass::slab : SurfaceClass::wall; }

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + " is not valid JSON: " + e.what(), 1);
  }
}

// Dump file that must exist before a stage can run.
fs::path need(const fs::path& dir, const std::string& file, const std::string& producer) {
  const fs::path p = dir / file;
  if (!fs::exists(p)) throw IoError("missing " + p.string() + " (run stage '" + producer + "' first)");
  return p;
}

using Clock = std::chrono::steady_clock;

struct CleanInput {
  PointCloud cloud;
  std::vector<DetectedPlane> planes;
};

CleanInput load_clean(const fs::path& dir) {
  CleanInput in;
  in.cloud = load(need(dir, "clean_cloud.ply", "clean"), CloudFormat::ply_binary);
  in.planes = planes_from_json(read_text(need(dir, "clean_planes.json", "clean")));
  return in;
}

void attach_labels(PointCloud& cloud, const fs::path& dir, int& n) {
  const json j = parse_json(read_text(need(dir, "labels.json", "roomlabel")), "labels.json");
  n = j.at("n").get<int>();
  cloud.labels = j.at("assignment").get<std::vector<int>>();
  if (cloud.labels.size() != cloud.size()) throw PreconditionError("labels.json does not match clean_cloud.ply");
}

void write_clean(const fs::path& dir, const CleanResult& cr, std::size_t input_points) {
  save(cr.cloud, dir / "clean_cloud.ply", CloudFormat::ply_binary);
  write_text(dir / "clean_planes.json", planes_to_json(cr.planes));
  json j{{"input_points", input_points}, {"kept_points", cr.kept.size()},
         {"removed_per_iteration", cr.removed_per_iteration}};
  write_text(dir / "clean.json", j.dump(2));
}

void write_labels(const fs::path& dir, int n, const std::vector<int>& assignment) {
  write_text(dir / "labels.json", json{{"n", n}, {"assignment", assignment}}.dump());
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string planes_to_json(const std::vector<DetectedPlane>& planes) {
  json j = json::array();
  for (const auto& p : planes)
    j.push_back({{"frame", frame_json(p.frame)}, {"inliers", p.inliers}, {"occupancy", occupancy_json(p.occupancy)}});
  return j.dump();
}

std::vector<DetectedPlane> planes_from_json(const std::string& text) {
  const json j = parse_json(text, "planes dump");
  std::vector<DetectedPlane> out;
  for (const auto& p : j)
    out.push_back({frame_from(p.at("frame")), p.at("inliers").get<std::vector<int>>(), occupancy_from(p.at("occupancy"))});
  return out;
}

std::string candidates_to_json(const PairResult& pairs) {
  json j;
  j["surfaces"] = json::array();
  for (const auto& s : pairs.surfaces)
    j["surfaces"].push_back({{"class", class_name(s.cls)}, {"frame", frame_json(s.frame)},
                             {"occupancy", occupancy_json(s.occupancy)}, {"support", support_json(s.support)},
                             {"extent", extent_json(s.extent)}, {"inliers", s.inliers},
                             {"source_plane", s.source_plane}, {"virtual", s.is_virtual}});
  j["walls"] = json::array();
  for (const auto& w : pairs.walls)
    j["walls"].push_back({{"id", w.id}, {"surface_a", w.surface_a}, {"surface_b", w.surface_b},
                          {"thickness", w.thickness}, {"orientation", class_name(w.orientation)}});
  return j.dump();
}

PairResult candidates_from_json(const std::string& text) {
  const json j = parse_json(text, "candidates dump");
  PairResult r;
  try {
    for (const auto& s : j.at("surfaces")) {
      SurfaceCandidate c;
      c.cls = class_from(s.at("class"));
      c.frame = frame_from(s.at("frame"));
      c.occupancy = occupancy_from(s.at("occupancy"));
      c.support = support_from(s.at("support"));
      c.extent = extent_from(s.at("extent"));
      c.inliers = s.at("inliers").get<std::vector<int>>();
      c.source_plane = s.at("source_plane").get<int>();
      c.is_virtual = s.at("virtual").get<bool>();
      r.surfaces.push_back(std::move(c));
    }
    for (const auto& w : j.at("walls")) {
      WallCandidate c;
      c.id = w.at("id").get<int>();
      c.surface_a = w.at("surface_a").get<int>();
      c.surface_b = w.at("surface_b").get<int>();
      c.thickness = w.at("thickness").get<double>();
      c.orientation = class_from(w.at("orientation"));
      r.walls.push_back(c);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("candidates dump: ") + e.what(), 1);
  }
  return r;
}

std::string priors_to_json(const Priors& p) {
  return json{{"labels", p.labels}, {"cell", p.cell}, {"face", p.face}}.dump();
}

Priors priors_from_json(const std::string& text) {
  const json j = parse_json(text, "priors dump");
  Priors p;
  p.labels = j.at("labels").get<int>();
  p.cell = j.at("cell").get<std::vector<std::vector<double>>>();
  p.face = j.at("face").get<std::vector<double>>();
  return p;
}

std::string complex_to_json(const CellComplex& cx) {
  json j;
  j["box"] = {{"lo", vec(cx.lo)}, {"hi", vec(cx.hi)}};
  j["z_levels"] = cx.z_levels;
  j["cells"] = json::array();
  for (const auto& c : cx.cells) {
    json fp = json::array();
    for (const auto& p : c.footprint) fp.push_back(vec(p));
    j["cells"].push_back({{"id", c.id}, {"footprint", fp}, {"z", {c.z_lo, c.z_hi}}, {"volume", c.volume},
                          {"walls", c.walls}});
  }
  j["faces"] = json::array();
  for (const auto& f : cx.faces)
    j["faces"].push_back({{"id", f.id}, {"cells", {f.ca, f.cb}}, {"area", f.area}, {"horizontal", f.horizontal},
                          {"normal", vec(f.normal)}, {"boundary_walls", f.boundary_walls},
                          {"inner_walls", f.inner_walls}});
  j["wall_cells"] = cx.wall_cells;
  j["inner_face_diagnostics"] = cx.inner_face_diagnostics;
  return j.dump();
}

std::string labeling_to_json(const IlpModel& model, const Labeling& lab) {
  json vars = json::object();
  if (lab.x.size() == model.vars.size())
    for (std::size_t v = 0; v < model.vars.size(); ++v) vars[model.var_name(static_cast<int>(v))] = int(lab.x[v]);
  return json{{"status", status_name(lab.status)}, {"objective", lab.objective}, {"bound", lab.bound},
              {"gap", lab.gap}, {"nodes", lab.nodes}, {"conflict_hint", lab.conflict_hint}, {"variables", vars}}
      .dump(1);
}

void write_solution(const fs::path& dir, const SolveOutcome& o) {
  write_text(dir / "labeling.json", labeling_to_json(o.model, o.labeling));
  write_text(dir / "model.lp", export_lp(o.model));
  json v{{"violations", json::array()}, {"objective", o.labeling.objective},
         {"recomputed_objective", o.recomputed_objective}};
  for (const auto& x : o.violations)
    v["violations"].push_back({{"constraint", x.constraint}, {"cell", x.cell}, {"face", x.face}, {"message", x.message}});
  write_text(dir / "validation.json", v.dump(2));
  write_text(dir / "model.json", export_model_json(o.building));
  write_text(dir / "rooms.obj", export_mesh(o.building, MeshSelection::rooms));
  write_text(dir / "walls.obj", export_mesh(o.building, MeshSelection::walls));
  write_text(dir / "building.obj", export_mesh(o.building, MeshSelection::all));
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"load", "planes", "clean", "roomlabel", "candidates",
                                              "complex", "priors", "solve"};
  return names;
}

Reconstruction load_reconstruction(const fs::path& dir, const Config& cfg, Exec exec) {
  Reconstruction rec;
  CleanInput in = load_clean(dir);
  rec.cloud = std::move(in.cloud);
  rec.planes = std::move(in.planes);
  attach_labels(rec.cloud, dir, rec.room_labels);
  rec.pairs = candidates_from_json(read_text(need(dir, "candidates.json", "candidates")));
  rec.complex = build_complex(complex_input(rec.pairs, complex_params(cfg)), complex_params(cfg));
  if (fs::exists(dir / "priors.json")) rec.priors = priors_from_json(read_text(dir / "priors.json"));
  else rec.priors = compute_priors(rec.complex, rec.pairs.surfaces, rec.room_labels, prior_params(cfg), exec);
  return rec;
}

StageTiming run_stage(const std::string& stage, const fs::path& dir, const Config& cfg,
                      const std::optional<fs::path>& input, Exec exec) {
  const auto& names = stage_names();
  if (std::find(names.begin(), names.end(), stage) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw StageError(stage, "unknown stage (stages: " + list + ")", kExitUsage);
  }
  const auto t0 = Clock::now();
  try {
    validate_config(cfg);
    fs::create_directories(dir);
    if (stage == "load") {
      if (!input) throw PreconditionError("stage 'load' needs an input cloud");
      save(preprocess(load(*input), cfg, exec), dir / "cloud.ply", CloudFormat::ply_binary);
    } else if (stage == "planes") {
      PointCloud cloud = load(need(dir, "cloud.ply", "load"), CloudFormat::ply_binary);
      write_text(dir / "planes.json", planes_to_json(detect_planes(cloud, ransac_params(cfg), exec)));
    } else if (stage == "clean") {
      CleanInput in;
      if (fs::exists(dir / "clean_cloud.ply") && fs::exists(dir / "clean_planes.json")) {
        in = load_clean(dir);
      } else {
        in.cloud = load(need(dir, "cloud.ply", "load"), CloudFormat::ply_binary);
        in.planes = planes_from_json(read_text(need(dir, "planes.json", "planes")));
      }
      const CleanResult cr = clean(in.cloud, in.planes, clean_params(cfg), exec);
      write_clean(dir, cr, in.cloud.size());
    } else if (stage == "roomlabel") {
      CleanInput in = load_clean(dir);
      const int n = label_rooms(in.cloud, in.planes, cfg, exec);
      write_labels(dir, n, in.cloud.labels);
    } else if (stage == "candidates") {
      CleanInput in = load_clean(dir);
      int n = 0;
      attach_labels(in.cloud, dir, n);
      write_text(dir / "candidates.json", candidates_to_json(make_candidates(in.cloud, in.planes, n, cfg)));
    } else if (stage == "complex") {
      const PairResult pairs = candidates_from_json(read_text(need(dir, "candidates.json", "candidates")));
      write_text(dir / "complex.json",
                 complex_to_json(build_complex(complex_input(pairs, complex_params(cfg)), complex_params(cfg))));
    } else if (stage == "priors") {
      need(dir, "complex.json", "complex");
      const PairResult pairs = candidates_from_json(read_text(need(dir, "candidates.json", "candidates")));
      const json labels = parse_json(read_text(need(dir, "labels.json", "roomlabel")), "labels.json");
      const CellComplex cx = build_complex(complex_input(pairs, complex_params(cfg)), complex_params(cfg));
      write_text(dir / "priors.json",
                 priors_to_json(compute_priors(cx, pairs.surfaces, labels.at("n").get<int>(), prior_params(cfg), exec)));
    } else {  // solve
      need(dir, "priors.json", "priors");
      const Reconstruction rec = load_reconstruction(dir, cfg, exec);
      const SolveOutcome out = optimize(rec, cfg, {}, exec);
      if (out.labeling.status == Labeling::Status::infeasible)
        throw StageError(stage, "model is infeasible", kExitInfeasible);
      write_solution(dir, out);
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what(), exit_code_for(e));
  }
  return {stage, std::chrono::duration<double>(Clock::now() - t0).count()};
}

RunResult run_to_dir(const fs::path& input, const Config& cfg, const fs::path& dir, Exec exec,
                     const StageObserver& observer) {
  validate_config(cfg);
  const auto t0 = Clock::now();
  PointCloud cloud;
  try {
    cloud = load(input);
  } catch (const std::exception& e) {
    throw StageError("load", e.what(), exit_code_for(e));
  }
  const StageTiming load_time{"load", std::chrono::duration<double>(Clock::now() - t0).count()};
  if (observer) observer(load_time);
  RunResult res = run_pipeline(cloud, cfg, exec, observer);
  res.timings.insert(res.timings.begin(), load_time);

  const auto t1 = Clock::now();
  try {
    fs::create_directories(dir);
    write_text(dir / "config.txt", config_to_text(cfg));
    save(res.preprocessed, dir / "cloud.ply", CloudFormat::ply_binary);
    write_text(dir / "planes.json", planes_to_json(res.detected));
    write_clean(dir, CleanResult{res.rec.cloud, res.rec.planes, res.kept, res.removed_per_iteration},
                res.preprocessed.size());
    write_labels(dir, res.rec.room_labels, res.rec.cloud.labels);
    write_text(dir / "candidates.json", candidates_to_json(res.rec.pairs));
    write_text(dir / "complex.json", complex_to_json(res.rec.complex));
    write_text(dir / "priors.json", priors_to_json(res.rec.priors));
    write_solution(dir, res.outcome);
  } catch (const std::exception& e) {
    throw StageError("export", e.what(), exit_code_for(e));
  }
  res.timings.push_back({"export", std::chrono::duration<double>(Clock::now() - t1).count()});
  if (observer) observer(res.timings.back());
  write_text(dir / "timing.json", timing_json(res.timings));
  return res;
}

}  // namespace recon
