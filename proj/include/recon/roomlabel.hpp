#pragma once

#include <vector>

#include "recon/planes.hpp"
#include "recon/pointcloud.hpp"
#include "recon/raycast.hpp"

namespace recon {

/// One occupied pixel of a plane's coarse bitmap.
struct Patch {
  int plane_index = -1;
  int ix = 0;
  int iy = 0;
  Vec3 center;
  Vec3 normal;
};

struct PatchSet {
  double patch_size = 0.4;
  std::vector<Patch> patches;
  std::vector<OccupancyBitmap> coarse;        // per plane, patch_size pixels
  std::vector<std::vector<int>> pixel_patch;  // per plane, row-major pixel -> patch id or -1
};

PatchSet build_patches(const std::vector<DetectedPlane>& planes, const PointCloud& cloud,
                       double patch_size);

/// Symmetric 0/1 visibility between patches; adjacency lists are sorted, no self-edges.
struct VisibilityGraph {
  std::vector<std::vector<int>> adj;

  std::size_t node_count() const { return adj.size(); }
  std::size_t edge_count() const;
  bool has_edge(int i, int j) const;
};

/// True when the open segment a-b crosses an occupied pixel. Hits on plane
/// `own_a` (`own_b`) closer than `eps` to a (b) are ignored.
bool segment_blocked(const Vec3& a, const Vec3& b, const std::vector<Occluder>& occluders,
                     int own_a, int own_b, double eps);

/// Edge (i, j) iff the segment between c_i + eps n_i and c_j + eps n_j is unobstructed.
VisibilityGraph visibility_graph(const PatchSet& patches, const std::vector<DetectedPlane>& planes,
                                 double eps, Exec exec = Exec::parallel);

struct MclParams {
  double inflation = 2.0;
  int max_iterations = 100;
  double prune_epsilon = 1e-5;
  std::size_t keep_top = 1000;
  double chaos_tolerance = 1e-8;
};

/// Column-sparse matrix; each column holds (row, value) sorted by row.
struct SparseColumns {
  std::size_t n = 0;
  std::vector<std::vector<std::pair<int, double>>> cols;
};

/// One expansion step (M * M), pruned and re-normalized per column, then
/// inflated. Exposed for the serial/parallel kernel comparison.
SparseColumns mcl_step(const SparseColumns& m, const MclParams& params, Exec exec);

/// Maximum over columns of (max entry - sum of squared entries).
double mcl_chaos(const SparseColumns& m);

struct Clustering {
  int count = 0;
  std::vector<int> label;  // per node, in [0, count)
  int iterations = 0;
};

/// Markov clustering; clusters are the weakly connected components of the
/// limit matrix, numbered by their smallest node. Empty graph -> count 0.
Clustering markov_cluster(const VisibilityGraph& graph, const MclParams& params,
                          Exec exec = Exec::parallel);

/// Per-point room labels: n labels, assignment -1 for unlabeled points.
struct RoomLabelSet {
  int n = 0;
  std::vector<int> assignment;
};

/// Each plane inlier takes the cluster of the coarse patch its projection falls in.
RoomLabelSet label_points(const PointCloud& cloud, const std::vector<DetectedPlane>& planes,
                          const PatchSet& patches, const Clustering& patch_labels);

}  // namespace recon
