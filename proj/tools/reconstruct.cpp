#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "recon/service.hpp"
#include "recon/stages.hpp"
#include "recon/synthgen.hpp"

using namespace recon;
namespace fs = std::filesystem;

namespace {

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha, clean_threshold;
  std::optional<int> clean_iterations, clean_rays;
};

Config make_config(const std::string& path, const Overrides& o) {
  Config cfg = path.empty() ? Config{} : load_config(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.clean_threshold) cfg.clean_threshold = *o.clean_threshold;
  if (o.clean_iterations) cfg.clean_iterations = *o.clean_iterations;
  if (o.clean_rays) cfg.clean_rays = *o.clean_rays;
  validate_config(cfg);
  return cfg;
}

void print_timing(const StageTiming& t) { std::fprintf(stderr, "%-12s %8.3f s\n", t.stage.c_str(), t.seconds); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volumetric indoor building reconstruction from point clouds"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  bool serial = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", ov.seed, "override the configured seed");
    sub->add_option("--alpha", ov.alpha, "override the surface-cost weight");
    sub->add_option("--clean-threshold", ov.clean_threshold, "inside score at which a point is removed");
    sub->add_option("--clean-iterations", ov.clean_iterations, "cleaning rounds");
    sub->add_option("--clean-rays", ov.clean_rays, "rays per point when scoring");
    sub->add_flag("--serial", serial, "use the serial reference kernels");
  };

  std::string input, out_dir;
  auto* run = app.add_subcommand("run", "full pipeline, writing every stage dump");
  run->add_option("input", input, "point cloud (.xyz, .txt or .ply)")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  common(run);

  std::string stage_name, work_dir, stage_input;
  auto* stage = app.add_subcommand("stage", "run one stage on the dumps in a work directory");
  std::string stage_help = "stage name:";
  for (const auto& s : stage_names()) stage_help += " " + s;
  stage->add_option("name", stage_name, stage_help)->required();
  stage->add_option("--dir", work_dir, "work directory holding the stage dumps")->required();
  stage->add_option("--input", stage_input, "input cloud for the load stage");
  common(stage);

  std::string spec, synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene (S1..S4, S2-hallway, +clutter, or a JSON spec)");
  synth->add_option("spec", spec, "scene name or JSON spec file")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");

  int port = 8080;
  std::string host = "127.0.0.1", session_dir;
  auto* serve = app.add_subcommand("serve", "HTTP service over a finished run directory");
  serve->add_option("--port", port, "port (0 picks a free one)");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--session", session_dir, "run directory with the stage dumps")->required();
  common(serve);

  app.add_subcommand("config", "print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const Exec exec = serial ? Exec::serial : Exec::parallel;
  try {
    if (app.got_subcommand("config")) {
      std::cout << config_to_text(Config{});
    } else if (run->parsed()) {
      const Config cfg = make_config(config_path, ov);
      const RunResult res = run_to_dir(input, cfg, out_dir, exec, print_timing);
      const auto& o = res.outcome;
      std::cout << "rooms " << o.building.rooms.size() << ", walls " << o.building.walls.size() << ", objective "
                << o.labeling.objective << " (" << status_name(o.labeling.status) << "), violations "
                << o.violations.size() << "\n";
      if (!o.violations.empty()) return kExitFailure;
    } else if (stage->parsed()) {
      const Config cfg = make_config(config_path, ov);
      std::optional<fs::path> in;
      if (!stage_input.empty()) in = stage_input;
      print_timing(run_stage(stage_name, work_dir, cfg, in, exec));
    } else if (synth->parsed()) {
      SceneSpec s = fs::exists(spec) ? scene_from_json(read_text(spec)) : scene_by_name(spec, synth_seed);
      if (fs::exists(spec) && synth->count("--seed")) s.seed = synth_seed;
      const Scene scene = generate(s);
      fs::create_directories(synth_out);
      save(scene.cloud, fs::path(synth_out) / "cloud.ply", CloudFormat::ply_binary);
      write_text(fs::path(synth_out) / "scene.json", scene_to_json(s));
      write_text(fs::path(synth_out) / "truth.json", truth_to_json(scene.truth));
      std::cout << scene.cloud.size() << " points written to " << (fs::path(synth_out) / "cloud.ply").string() << "\n";
    } else if (serve->parsed()) {
      const Config cfg = make_config(config_path, ov);
      auto session = Session::open(session_dir, cfg);
      session->start_solve();
      Service service(*session);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::fprintf(stderr, "serving %s on %s:%d\n", session_dir.c_str(), host.c_str(), port);
      service.listen(host, port);
      g_service = nullptr;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  }
  return kExitOk;
}
