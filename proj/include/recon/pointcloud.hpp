#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "recon/common.hpp"

namespace recon {

struct Point {
  Vec3 position;
  Vec3 normal;
  std::optional<int> room_label;
};

/// Structure-of-arrays point cloud. `normals` is empty when absent; `labels`
/// is empty before room labeling and holds -1 for unlabeled points after.
/// The up axis is always +z.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<int> labels;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_normals() const { return !normals.empty() && normals.size() == positions.size(); }
  bool has_labels() const { return !labels.empty() && labels.size() == positions.size(); }

  Point point(std::size_t i) const;
  void push_back(const Point& p);

  /// Cloud holding only the given indices, in the given order.
  PointCloud select(const std::vector<int>& indices) const;
};

enum class CloudFormat { xyz_text, ply_ascii, ply_binary };

/// Guesses the format from the extension (.xyz/.txt -> text, .ply -> sniff header).
CloudFormat detect_format(const std::filesystem::path& path);

PointCloud load(const std::filesystem::path& path, CloudFormat format);
PointCloud load(const std::filesystem::path& path);

/// Writes positions (and normals when present) at full double precision.
void save(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

struct NormalEstimate {
  PointCloud cloud;
  std::vector<int> degenerate;  // points whose neighborhood had no spread; normal set to +z
};

/// PCA normals over k nearest neighbours, oriented by propagation along a
/// minimum spanning tree of the k-NN graph, then flipped per component so
/// that the low near-horizontal points face +z.
NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k = 16,
                                Exec exec = Exec::parallel);

/// Voxel-grid thinning: one point per occupied voxel of edge `min_dist`, the
/// one nearest the centroid of the voxel's points. Output keeps first-seen voxel order.
PointCloud subsample(const PointCloud& cloud, double min_dist);

}  // namespace recon
