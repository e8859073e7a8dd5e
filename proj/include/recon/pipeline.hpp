#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "recon/candidates.hpp"
#include "recon/cleaning.hpp"
#include "recon/complex.hpp"
#include "recon/ilp.hpp"
#include "recon/model.hpp"
#include "recon/planes.hpp"
#include "recon/pointcloud.hpp"
#include "recon/priors.hpp"
#include "recon/roomlabel.hpp"

namespace recon {

/// Every tunable of the pipeline. Key names in the config file equal the field names.
struct Config {
  double subsample_distance = 0.02;
  int normal_k = 16;

  double ransac_distance = 0.01;
  double ransac_cluster_epsilon = 0.20;
  double ransac_normal_deg = 6.0;
  int ransac_min_points = 1000;
  double ransac_miss_probability = 0.001;
  double occupancy_pixel = 0.20;

  double clean_threshold = 0.5;
  int clean_iterations = 3;
  int clean_rays = 64;

  double patch_size = 0.40;
  double visibility_epsilon = 0.10;
  double mcl_inflation = 2.0;
  int mcl_max_iterations = 100;

  double support_pixel = 0.10;
  int dilation_radius = 2;
  double min_wall_area = 2.0;
  double min_slab_area = 5.0;
  double vertical_tolerance_deg = 10.0;
  double horizontal_tolerance_deg = 10.0;
  double max_thickness = 0.6;
  double pair_angle_deg = 5.0;
  double virtual_thickness = 0.3;

  double merge_distance = 0.005;
  double merge_angle_deg = 0.5;
  double bbox_margin = 1.0;

  double prior_k_base = 100.0;
  int prior_min_samples = 32;
  int prior_directions = 64;

  double alpha = 0.04;
  bool prune_room_variables = true;
  bool redundant_constraint = true;
  bool boundary_outside = true;
  double gap_tolerance = 1e-6;
  double time_limit = 600.0;

  std::uint64_t seed = 0;
};

/// Flat "key = value" lines; '#' starts a comment. Unknown keys, malformed
/// values and out-of-range settings throw ConfigError naming the line.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);
/// Every key with its current value, parseable by parse_config.
std::string config_to_text(const Config& cfg);
void validate_config(const Config& cfg);

RansacParams ransac_params(const Config& cfg);
CleanParams clean_params(const Config& cfg);
ClassifyParams classify_params(const Config& cfg);
PairParams pair_params(const Config& cfg);
ComplexParams complex_params(const Config& cfg);
PriorParams prior_params(const Config& cfg);
ModelOptions model_options(const Config& cfg);
SolveParams solve_params(const Config& cfg);

struct StageTiming {
  std::string stage;
  double seconds = 0;
};

/// Geometry shared by the optimization: everything up to the priors.
struct Reconstruction {
  PointCloud cloud;  // cleaned, labeled
  std::vector<DetectedPlane> planes;
  int room_labels = 0;
  PairResult pairs;
  CellComplex complex;
  Priors priors;
};

struct SolveOutcome {
  IlpModel model;
  Labeling labeling;
  std::vector<Violation> violations;
  double recomputed_objective = 0;
  BuildingModel building;
};

struct RunResult {
  Reconstruction rec;
  PointCloud preprocessed;                 // subsampled, with normals
  std::vector<DetectedPlane> detected;     // before cleaning
  std::vector<int> kept;                   // survivors of cleaning, indices into `preprocessed`
  std::vector<std::size_t> removed_per_iteration;
  SolveOutcome outcome;
  std::vector<StageTiming> timings;
};

/// Subsample, then estimate normals when the cloud has none.
PointCloud preprocess(const PointCloud& cloud, const Config& cfg, Exec exec = Exec::parallel);

/// Labels per point from the visibility graph and Markov clustering; sets cloud.labels.
int label_rooms(PointCloud& cloud, const std::vector<DetectedPlane>& planes, const Config& cfg,
                Exec exec = Exec::parallel);

/// Rectified surfaces with dilated multi-label supports, paired into wall candidates.
PairResult make_candidates(const PointCloud& cloud, const std::vector<DetectedPlane>& planes,
                           int room_labels, const Config& cfg);

/// Complex from the candidates, then priors.
void build_geometry(Reconstruction& rec, const Config& cfg, Exec exec = Exec::parallel);

SolveOutcome optimize(const Reconstruction& rec, const Config& cfg,
                      const std::vector<UserConstraint>& forced = {}, Exec exec = Exec::parallel);

using StageObserver = std::function<void(const StageTiming&)>;

/// load -> subsample -> normals -> planes -> clean -> room labels -> candidates
/// -> complex -> priors -> model -> solve -> validate -> extract. Errors carry the stage name.
RunResult run_pipeline(const PointCloud& input, const Config& cfg, Exec exec = Exec::parallel,
                       const StageObserver& observer = {});

/// Per-stage timings plus totals per group (preprocessing, plane detection, cleaning, labeling, arrangement and priors, optimization, export).
std::string timing_json(const std::vector<StageTiming>& timings);

/// Error raised by a pipeline stage; what() is "<stage>: <cause>".
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause, int exit_code)
      : Error(stage + ": " + cause), stage_(std::move(stage)), exit_code_(exit_code) {}
  const std::string& stage() const { return stage_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

/// Process exit codes.
enum ExitCode { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitConfig = 3, kExitIo = 4,
                kExitInput = 5, kExitInfeasible = 6 };
int exit_code_for(const std::exception& e);

}  // namespace recon
