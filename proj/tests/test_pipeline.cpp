#include <doctest.h>

#include <filesystem>

#include "recon/stages.hpp"
#include "recon/synthgen.hpp"

using namespace recon;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "recon_test_pipeline" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// S1 at half density, written once.
const fs::path& s1_cloud() {
  static const fs::path path = [] {
    SceneSpec s = scene_s1();
    s.density = 200;
    fs::path d = fresh_dir("input");
    save(generate(s).cloud, d / "cloud.ply", CloudFormat::ply_binary);
    return d / "cloud.ply";
  }();
  return path;
}

}  // namespace

TEST_CASE("config parsing, validation and round trip") {
  Config c = parse_config("# comment\nalpha = 0.08\nclean_rays=32  # trailing\n\nprune_room_variables = false\nseed = 7\n");
  CHECK(c.alpha == 0.08);
  CHECK(c.clean_rays == 32);
  CHECK_FALSE(c.prune_room_variables);
  CHECK(c.seed == 7);
  CHECK(c.subsample_distance == 0.02);

  Config back = parse_config(config_to_text(c));
  CHECK(config_to_text(back) == config_to_text(c));

  try {
    parse_config("alpha = 0.04\nbogus = 1\n");
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("alpha = -0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("alpha = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("clean_rays = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("ransac_normal_deg = 95\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("alpha\n"), ConfigError);

  // Paper defaults.
  Config d;
  CHECK(d.subsample_distance == 0.02);
  CHECK(d.ransac_distance == 0.01);
  CHECK(d.ransac_cluster_epsilon == 0.20);
  CHECK(d.ransac_normal_deg == 6.0);
  CHECK(d.ransac_min_points == 1000);
  CHECK(d.ransac_miss_probability == 0.001);
  CHECK(d.clean_threshold == 0.5);
  CHECK(d.clean_iterations == 3);
  CHECK(d.visibility_epsilon == 0.10);
  CHECK(d.mcl_inflation == 2.0);
  CHECK(d.min_wall_area == 2.0);
  CHECK(d.min_slab_area == 5.0);
}

TEST_CASE("exit codes follow the error type") {
  CHECK(exit_code_for(ConfigError("x")) == kExitConfig);
  CHECK(exit_code_for(IoError("x")) == kExitIo);
  CHECK(exit_code_for(ParseError("x", 1)) == kExitInput);
  CHECK(exit_code_for(EmptyCloudError("x")) == kExitInput);
  CHECK(exit_code_for(StageError("solve", "infeasible", kExitInfeasible)) == kExitInfeasible);
}

TEST_CASE("pipeline on one room: staged run equals the batch run") {
  Config cfg;
  const fs::path batch = fresh_dir("batch");
  const fs::path staged = fresh_dir("staged");
  RunResult r = run_to_dir(s1_cloud(), cfg, batch, Exec::parallel);
  CHECK(r.outcome.violations.empty());
  REQUIRE(r.outcome.building.rooms.size() == 1);
  CHECK(r.outcome.building.rooms[0].volume == doctest::Approx(4 * 5 * 2.6).epsilon(0.05));
  CHECK(std::abs(r.outcome.recomputed_objective - r.outcome.labeling.objective) <= 1e-9);
  for (const char* f : {"cloud.ply", "planes.json", "clean.json", "labels.json", "candidates.json", "complex.json",
                        "priors.json", "labeling.json", "model.lp", "validation.json", "model.json", "building.obj",
                        "timing.json", "config.txt"})
    CHECK_MESSAGE(fs::exists(batch / f), f);

  CHECK_THROWS_AS(run_stage("planes", staged, cfg), StageError);
  for (const auto& s : stage_names()) {
    std::optional<fs::path> in;
    if (s == "load") in = s1_cloud();
    run_stage(s, staged, cfg, in, Exec::serial);
  }
  CHECK(read_text(staged / "model.json") == read_text(batch / "model.json"));
  CHECK(read_text(staged / "labeling.json") == read_text(batch / "labeling.json"));

  try {
    run_stage("bogus", staged, cfg);
    FAIL("unknown stage accepted");
  } catch (const StageError& e) {
    CHECK(e.exit_code() == kExitUsage);
  }
}

TEST_CASE("stage dumps round trip") {
  Config cfg;
  PointCloud cloud = load(s1_cloud());
  RunResult r = run_pipeline(cloud, cfg);
  auto planes = planes_from_json(planes_to_json(r.rec.planes));
  REQUIRE(planes.size() == r.rec.planes.size());
  for (std::size_t i = 0; i < planes.size(); ++i) {
    CHECK(planes[i].inliers == r.rec.planes[i].inliers);
    CHECK(planes[i].occupancy == r.rec.planes[i].occupancy);
    CHECK(planes[i].frame.normal == r.rec.planes[i].frame.normal);
  }
  CHECK(candidates_to_json(candidates_from_json(candidates_to_json(r.rec.pairs))) == candidates_to_json(r.rec.pairs));
  CHECK(priors_to_json(priors_from_json(priors_to_json(r.rec.priors))) == priors_to_json(r.rec.priors));

  // Same input, same bytes.
  RunResult again = run_pipeline(cloud, cfg);
  CHECK(export_model_json(again.outcome.building) == export_model_json(r.outcome.building));
}

TEST_CASE("an empty cloud fails in the first stage") {
  try {
    run_pipeline(PointCloud{}, Config{});
    FAIL("empty cloud accepted");
  } catch (const StageError& e) {
    CHECK(e.exit_code() == kExitInput);
  }
}
