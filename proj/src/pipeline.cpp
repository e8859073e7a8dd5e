#include "recon/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>

#include <json.hpp>

namespace recon {

namespace {

using Field = std::variant<double*, int*, bool*, std::uint64_t*>;

struct Entry {
  const char* key;
  Field field;
};

std::vector<Entry> entries(Config& c) {
  return {
      {"subsample_distance", &c.subsample_distance},
      {"normal_k", &c.normal_k},
      {"ransac_distance", &c.ransac_distance},
      {"ransac_cluster_epsilon", &c.ransac_cluster_epsilon},
      {"ransac_normal_deg", &c.ransac_normal_deg},
      {"ransac_min_points", &c.ransac_min_points},
      {"ransac_miss_probability", &c.ransac_miss_probability},
      {"occupancy_pixel", &c.occupancy_pixel},
      {"clean_threshold", &c.clean_threshold},
      {"clean_iterations", &c.clean_iterations},
      {"clean_rays", &c.clean_rays},
      {"patch_size", &c.patch_size},
      {"visibility_epsilon", &c.visibility_epsilon},
      {"mcl_inflation", &c.mcl_inflation},
      {"mcl_max_iterations", &c.mcl_max_iterations},
      {"support_pixel", &c.support_pixel},
      {"dilation_radius", &c.dilation_radius},
      {"min_wall_area", &c.min_wall_area},
      {"min_slab_area", &c.min_slab_area},
      {"vertical_tolerance_deg", &c.vertical_tolerance_deg},
      {"horizontal_tolerance_deg", &c.horizontal_tolerance_deg},
      {"max_thickness", &c.max_thickness},
      {"pair_angle_deg", &c.pair_angle_deg},
      {"virtual_thickness", &c.virtual_thickness},
      {"merge_distance", &c.merge_distance},
      {"merge_angle_deg", &c.merge_angle_deg},
      {"bbox_margin", &c.bbox_margin},
      {"prior_k_base", &c.prior_k_base},
      {"prior_min_samples", &c.prior_min_samples},
      {"prior_directions", &c.prior_directions},
      {"alpha", &c.alpha},
      {"prune_room_variables", &c.prune_room_variables},
      {"redundant_constraint", &c.redundant_constraint},
      {"boundary_outside", &c.boundary_outside},
      {"gap_tolerance", &c.gap_tolerance},
      {"time_limit", &c.time_limit},
      {"seed", &c.seed},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(const std::string& v, T& out) {
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  return ec == std::errc() && p == end;
}

bool assign(const Field& f, const std::string& v) {
  return std::visit(
      [&](auto* p) -> bool {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (v == "true" || v == "1") *p = true;
          else if (v == "false" || v == "0") *p = false;
          else return false;
          return true;
        } else {
          return parse_number(v, *p);
        }
      },
      f);
}

std::string format(const Field& f) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else {
          char buf[64];
          auto [end, ec] = std::to_chars(buf, buf + sizeof buf, *p);
          return std::string(buf, end);
        }
      },
      f);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

Config parse_config(const std::string& text) {
  Config cfg;
  auto table = entries(cfg);
  std::map<std::string, Field> by_key;
  for (auto& e : table) by_key.emplace(e.key, e.field);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!assign(it->second, value)) throw ConfigError(where + "bad value '" + value + "' for " + key);
  }
  validate_config(cfg);
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_text(const Config& cfg) {
  Config copy = cfg;
  std::string out;
  for (const auto& e : entries(copy)) out += std::string(e.key) + " = " + format(e.field) + "\n";
  return out;
}

void validate_config(const Config& c) {
  for (auto [v, name] : {std::pair{c.subsample_distance, "subsample_distance"},
                         {c.ransac_distance, "ransac_distance"},
                         {c.ransac_cluster_epsilon, "ransac_cluster_epsilon"},
                         {c.occupancy_pixel, "occupancy_pixel"},
                         {c.patch_size, "patch_size"},
                         {c.visibility_epsilon, "visibility_epsilon"},
                         {c.support_pixel, "support_pixel"},
                         {c.max_thickness, "max_thickness"},
                         {c.virtual_thickness, "virtual_thickness"},
                         {c.merge_distance, "merge_distance"},
                         {c.bbox_margin, "bbox_margin"},
                         {c.prior_k_base, "prior_k_base"},
                         {c.time_limit, "time_limit"}})
    require(v > 0, std::string(name) + " must be positive");
  for (auto [v, name] : {std::pair{c.ransac_normal_deg, "ransac_normal_deg"},
                         {c.vertical_tolerance_deg, "vertical_tolerance_deg"},
                         {c.horizontal_tolerance_deg, "horizontal_tolerance_deg"},
                         {c.pair_angle_deg, "pair_angle_deg"},
                         {c.merge_angle_deg, "merge_angle_deg"}})
    require(v > 0 && v < 90, std::string(name) + " must be in (0, 90) degrees");
  require(c.alpha >= 0, "alpha must be non-negative");
  require(c.normal_k >= 3, "normal_k must be at least 3");
  require(c.ransac_min_points >= 3, "ransac_min_points must be at least 3");
  require(c.ransac_miss_probability > 0 && c.ransac_miss_probability < 1,
          "ransac_miss_probability must be in (0, 1)");
  require(c.clean_threshold >= 0 && c.clean_threshold <= 1, "clean_threshold must be in [0, 1]");
  require(c.clean_iterations >= 0, "clean_iterations must be non-negative");
  require(c.clean_rays >= 1, "clean_rays must be positive");
  require(c.mcl_inflation > 1, "mcl_inflation must be greater than 1");
  require(c.mcl_max_iterations >= 1, "mcl_max_iterations must be positive");
  require(c.dilation_radius >= 0, "dilation_radius must be non-negative");
  require(c.min_wall_area >= 0 && c.min_slab_area >= 0, "minimum areas must be non-negative");
  require(c.prior_min_samples >= 1 && c.prior_directions >= 1, "prior sample counts must be positive");
  require(c.gap_tolerance >= 0, "gap_tolerance must be non-negative");
}

RansacParams ransac_params(const Config& c) {
  RansacParams p;
  p.distance_threshold = c.ransac_distance;
  p.cluster_epsilon = c.ransac_cluster_epsilon;
  p.normal_threshold_deg = c.ransac_normal_deg;
  p.min_points = static_cast<std::size_t>(c.ransac_min_points);
  p.miss_probability = c.ransac_miss_probability;
  p.pixel_size = c.occupancy_pixel;
  p.seed = c.seed;
  return p;
}

CleanParams clean_params(const Config& c) {
  CleanParams p;
  p.threshold = c.clean_threshold;
  p.iterations = c.clean_iterations;
  p.rays = c.clean_rays;
  p.distance_threshold = c.ransac_distance;
  p.seed = c.seed;
  return p;
}

ClassifyParams classify_params(const Config& c) {
  ClassifyParams p;
  p.min_wall_area = c.min_wall_area;
  p.min_slab_area = c.min_slab_area;
  p.vertical_tolerance_deg = c.vertical_tolerance_deg;
  p.horizontal_tolerance_deg = c.horizontal_tolerance_deg;
  return p;
}

PairParams pair_params(const Config& c) {
  PairParams p;
  p.max_thickness = c.max_thickness;
  p.max_angle_deg = c.pair_angle_deg;
  p.virtual_thickness = c.virtual_thickness;
  return p;
}

ComplexParams complex_params(const Config& c) {
  ComplexParams p;
  p.merge_distance = c.merge_distance;
  p.merge_angle_deg = c.merge_angle_deg;
  p.bbox_margin = c.bbox_margin;
  p.virtual_thickness = c.virtual_thickness;
  return p;
}

PriorParams prior_params(const Config& c) {
  PriorParams p;
  p.k_base = c.prior_k_base;
  p.min_samples = c.prior_min_samples;
  p.directions = c.prior_directions;
  p.seed = c.seed;
  return p;
}

ModelOptions model_options(const Config& c) {
  ModelOptions o;
  o.prune_room_variables = c.prune_room_variables;
  o.redundant_outside_constraint = c.redundant_constraint;
  o.boundary_outside = c.boundary_outside;
  return o;
}

SolveParams solve_params(const Config& c) {
  SolveParams p;
  p.gap_tolerance = c.gap_tolerance;
  p.time_limit = c.time_limit;
  return p;
}

PointCloud preprocess(const PointCloud& cloud, const Config& cfg, Exec exec) {
  if (cloud.empty()) throw EmptyCloudError("input cloud is empty");
  PointCloud out = subsample(cloud, cfg.subsample_distance);
  if (!out.has_normals()) out = estimate_normals(out, static_cast<std::size_t>(cfg.normal_k), exec).cloud;
  return out;
}

int label_rooms(PointCloud& cloud, const std::vector<DetectedPlane>& planes, const Config& cfg, Exec exec) {
  const PatchSet patches = build_patches(planes, cloud, cfg.patch_size);
  const VisibilityGraph graph = visibility_graph(patches, planes, cfg.visibility_epsilon, exec);
  MclParams mp;
  mp.inflation = cfg.mcl_inflation;
  mp.max_iterations = cfg.mcl_max_iterations;
  const Clustering clusters = markov_cluster(graph, mp, exec);
  RoomLabelSet set = label_points(cloud, planes, patches, clusters);
  cloud.labels = std::move(set.assignment);
  return set.n;
}

PairResult make_candidates(const PointCloud& cloud, const std::vector<DetectedPlane>& planes, int room_labels,
                           const Config& cfg) {
  std::vector<SurfaceCandidate> surfaces = classify_rectify(planes, cloud, classify_params(cfg));
  for (auto& s : surfaces)
    s.support = dilate_support(build_support(s, cloud, cloud.labels, room_labels, cfg.support_pixel),
                               cfg.dilation_radius);
  return pair_walls(surfaces, pair_params(cfg));
}

void build_geometry(Reconstruction& rec, const Config& cfg, Exec exec) {
  rec.complex = build_complex(complex_input(rec.pairs, complex_params(cfg)), complex_params(cfg));
  rec.priors = compute_priors(rec.complex, rec.pairs.surfaces, rec.room_labels, prior_params(cfg), exec);
}

SolveOutcome optimize(const Reconstruction& rec, const Config& cfg, const std::vector<UserConstraint>& forced,
                      Exec exec) {
  SolveOutcome out;
  out.model = build_model(rec.complex, rec.priors, cfg.alpha, forced, model_options(cfg));
  out.labeling = solve(out.model, solve_params(cfg));
  if (out.labeling.status == Labeling::Status::infeasible) return out;
  out.violations = validate(out.labeling, out.model, rec.complex);
  out.recomputed_objective = recompute_objective(out.labeling, out.model, rec.complex, rec.priors);
  out.building = extract(out.model, out.labeling, rec.complex, &rec.pairs, exec);
  return out;
}

RunResult run_pipeline(const PointCloud& input, const Config& cfg, Exec exec, const StageObserver& observer) {
  validate_config(cfg);
  RunResult res;
  auto stage = [&](const char* name, auto&& body) {
    const auto t0 = Clock::now();
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what(), exit_code_for(e));
    }
    res.timings.push_back({name, seconds_since(t0)});
    if (observer) observer(res.timings.back());
  };

  stage("preprocess", [&] { res.preprocessed = preprocess(input, cfg, exec); });
  stage("planes", [&] { res.detected = detect_planes(res.preprocessed, ransac_params(cfg), exec); });
  stage("clean", [&] {
    CleanResult cr = clean(res.preprocessed, res.detected, clean_params(cfg), exec);
    res.removed_per_iteration = cr.removed_per_iteration;
    res.rec.cloud = std::move(cr.cloud);
    res.rec.planes = std::move(cr.planes);
    res.kept = std::move(cr.kept);
  });
  stage("roomlabel", [&] { res.rec.room_labels = label_rooms(res.rec.cloud, res.rec.planes, cfg, exec); });
  stage("candidates", [&] {
    res.rec.pairs = make_candidates(res.rec.cloud, res.rec.planes, res.rec.room_labels, cfg);
  });
  stage("complex", [&] {
    res.rec.complex = build_complex(complex_input(res.rec.pairs, complex_params(cfg)), complex_params(cfg));
  });
  stage("priors", [&] {
    res.rec.priors = compute_priors(res.rec.complex, res.rec.pairs.surfaces, res.rec.room_labels,
                                    prior_params(cfg), exec);
  });
  auto& out = res.outcome;
  stage("model", [&] { out.model = build_model(res.rec.complex, res.rec.priors, cfg.alpha, {}, model_options(cfg)); });
  stage("solve", [&] {
    out.labeling = solve(out.model, solve_params(cfg));
    if (out.labeling.status == Labeling::Status::infeasible)
      throw StageError("solve", "model is infeasible", kExitInfeasible);
  });
  stage("validate", [&] {
    out.violations = validate(out.labeling, out.model, res.rec.complex);
    out.recomputed_objective = recompute_objective(out.labeling, out.model, res.rec.complex, res.rec.priors);
  });
  stage("extract", [&] { out.building = extract(out.model, out.labeling, res.rec.complex, &res.rec.pairs, exec); });
  return res;
}

std::string timing_json(const std::vector<StageTiming>& timings) {
  using nlohmann::json;
  static const std::map<std::string, std::string> group = {
      {"load", "preprocessing"}, {"preprocess", "preprocessing"},  {"planes", "plane_detection"},   {"clean", "cleaning"},
      {"roomlabel", "auto_labeling"},   {"candidates", "arrangement_priors"},
      {"complex", "arrangement_priors"}, {"priors", "arrangement_priors"}, {"model", "optimization"},
      {"solve", "optimization"},        {"validate", "export"},          {"extract", "export"},
      {"export", "export"}};
  json j;
  j["stages"] = json::array();
  json rows = json::object();
  double total = 0;
  for (const auto& t : timings) {
    j["stages"].push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    auto it = group.find(t.stage);
    const std::string g = it == group.end() ? "other" : it->second;
    rows[g] = rows.value(g, 0.0) + t.seconds;
    total += t.seconds;
  }
  j["table"] = rows;
  j["total_seconds"] = total;
  return j.dump(2);
}

int exit_code_for(const std::exception& e) {
  if (auto* s = dynamic_cast<const StageError*>(&e)) return s->exit_code();
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const EmptyCloudError*>(&e)) return kExitInput;
  return kExitFailure;
}

}  // namespace recon
