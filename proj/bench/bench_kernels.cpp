// Serial vs OpenMP kernels on a two-room scene. Argument 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include <algorithm>

#include "recon/cleaning.hpp"
#include "recon/pipeline.hpp"
#include "recon/roomlabel.hpp"
#include "recon/synthgen.hpp"

using namespace recon;

namespace {

struct Fixture {
  Config cfg;
  PointCloud cloud;
  std::vector<DetectedPlane> planes;
  PatchSet patches;
  VisibilityGraph graph;
  SparseColumns markov;
  Reconstruction rec;
  IlpModel model;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture f;
    SceneSpec spec = scene_s2();
    spec.density = 200;
    f.cloud = preprocess(generate(spec).cloud, f.cfg);
    f.planes = detect_planes(f.cloud, ransac_params(f.cfg));
    f.patches = build_patches(f.planes, f.cloud, f.cfg.patch_size);
    f.graph = visibility_graph(f.patches, f.planes, f.cfg.visibility_epsilon);
    // Column-stochastic start matrix with self loops.
    f.markov.n = f.graph.node_count();
    f.markov.cols.resize(f.markov.n);
    for (std::size_t j = 0; j < f.markov.n; ++j) {
      auto& col = f.markov.cols[j];
      std::vector<int> rows = f.graph.adj[j];
      rows.push_back(static_cast<int>(j));
      std::sort(rows.begin(), rows.end());
      for (int r : rows) col.emplace_back(r, 1.0 / rows.size());
    }
    RunResult res = run_pipeline(generate(spec).cloud, f.cfg);
    f.rec = std::move(res.rec);
    f.model = res.outcome.model;
    return f;
  }();
  return f;
}

Exec exec_of(const benchmark::State& s) { return s.range(0) ? Exec::parallel : Exec::serial; }

void BM_Normals(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(estimate_normals(f.cloud, f.cfg.normal_k, exec_of(state)));
}

void BM_Ransac(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(detect_planes(f.cloud, ransac_params(f.cfg), exec_of(state)));
}

void BM_CleanScores(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(score_points(f.cloud, f.planes, clean_params(f.cfg), 0, exec_of(state)));
}

void BM_Visibility(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(visibility_graph(f.patches, f.planes, f.cfg.visibility_epsilon, exec_of(state)));
}

void BM_MclStep(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(mcl_step(f.markov, MclParams{}, exec_of(state)));
}

void BM_Priors(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(compute_priors(f.rec.complex, f.rec.pairs.surfaces, f.rec.room_labels,
                                            prior_params(f.cfg), exec_of(state)));
}

void BM_Solve(benchmark::State& state) {
  const auto& f = fixture();
  SolveParams p = solve_params(f.cfg);
  p.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(solve(f.model, p));
}

}  // namespace

BENCHMARK(BM_Normals)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ransac)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CleanScores)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Visibility)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MclStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Priors)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Solve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
