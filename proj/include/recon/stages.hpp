#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "recon/pipeline.hpp"

namespace recon {

/// Stage names in pipeline order. Each stage reads the dumps of the previous
/// ones from the work directory and writes its own:
///   load       -> cloud.ply (subsampled, with normals)
///   planes     -> planes.json
///   clean      -> clean_cloud.ply, clean_planes.json, clean.json (reads its own dump when present)
///   roomlabel  -> labels.json
///   candidates -> candidates.json
///   complex    -> complex.json
///   priors     -> priors.json
///   solve      -> labeling.json, model.lp, validation.json, model.json, rooms.obj, walls.obj, building.obj
const std::vector<std::string>& stage_names();

/// Runs one stage in `dir`. `input` is required by the load stage only.
/// Throws StageError naming the stage and, for a missing dump, the file.
StageTiming run_stage(const std::string& stage, const std::filesystem::path& dir, const Config& cfg,
                      const std::optional<std::filesystem::path>& input = std::nullopt,
                      Exec exec = Exec::parallel);

/// Full run writing every stage dump, config.txt and timing.json into `dir`.
RunResult run_to_dir(const std::filesystem::path& input, const Config& cfg, const std::filesystem::path& dir,
                     Exec exec = Exec::parallel, const StageObserver& observer = {});

/// Writes model.json, the meshes and the solution dumps of one solve.
void write_solution(const std::filesystem::path& dir, const SolveOutcome& outcome);

/// Cleaned cloud, labels and candidates from the dumps, then the complex and
/// priors (priors.json when present, otherwise recomputed).
Reconstruction load_reconstruction(const std::filesystem::path& dir, const Config& cfg, Exec exec = Exec::parallel);

std::string planes_to_json(const std::vector<DetectedPlane>& planes);
std::vector<DetectedPlane> planes_from_json(const std::string& text);
std::string candidates_to_json(const PairResult& pairs);
PairResult candidates_from_json(const std::string& text);
std::string priors_to_json(const Priors& priors);
Priors priors_from_json(const std::string& text);
std::string complex_to_json(const CellComplex& cx);
/// Variable name -> 0/1 plus objective, status and gap.
std::string labeling_to_json(const IlpModel& model, const Labeling& lab);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace recon
