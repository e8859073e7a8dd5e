#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <span>
#include <vector>

#include "recon/common.hpp"

namespace recon {

/// Static 3D kd-tree over an external point array. The array must outlive the tree.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points) : points_(points) {
    order_.resize(points.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    if (!order_.empty()) build(0, static_cast<int>(order_.size()));
  }

  /// Indices of the k nearest points to `q` (including q itself if present), nearest first.
  std::vector<int> knn(const Vec3& q, std::size_t k) const {
    std::priority_queue<std::pair<double, int>> heap;
    if (!order_.empty() && k > 0) knn_rec(0, static_cast<int>(order_.size()), q, k, heap);
    std::vector<int> out(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
      out[i] = heap.top().second;
      heap.pop();
    }
    return out;
  }

  /// Indices of all points within distance r of q, in unspecified order.
  std::vector<int> radius(const Vec3& q, double r) const {
    std::vector<int> out;
    if (!order_.empty()) radius_rec(0, static_cast<int>(order_.size()), q, r * r, out);
    return out;
  }

  std::size_t size() const { return order_.size(); }

 private:
  void build(int lo, int hi) {
    if (hi - lo <= kLeaf) return;
    Vec3 mn = points_[order_[lo]], mx = mn;
    for (int i = lo + 1; i < hi; ++i) {
      mn = mn.cwiseMin(points_[order_[i]]);
      mx = mx.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    Vec3 ext = mx - mn;
    if (ext.y() > ext[axis]) axis = 1;
    if (ext.z() > ext[axis]) axis = 2;
    int mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
    axes_.resize(order_.size());
    axes_[mid] = static_cast<std::int8_t>(axis);
    build(lo, mid);
    build(mid + 1, hi);
  }

  void knn_rec(int lo, int hi, const Vec3& q, std::size_t k,
               std::priority_queue<std::pair<double, int>>& heap) const {
    if (hi - lo <= kLeaf) {
      for (int i = lo; i < hi; ++i) offer(order_[i], q, k, heap);
      return;
    }
    int mid = (lo + hi) / 2;
    int axis = axes_[mid];
    double diff = q[axis] - points_[order_[mid]][axis];
    offer(order_[mid], q, k, heap);
    int near_lo = diff < 0 ? lo : mid + 1, near_hi = diff < 0 ? mid : hi;
    int far_lo = diff < 0 ? mid + 1 : lo, far_hi = diff < 0 ? hi : mid;
    knn_rec(near_lo, near_hi, q, k, heap);
    if (heap.size() < k || diff * diff < heap.top().first) knn_rec(far_lo, far_hi, q, k, heap);
  }

  void offer(int idx, const Vec3& q, std::size_t k,
             std::priority_queue<std::pair<double, int>>& heap) const {
    double d2 = (points_[idx] - q).squaredNorm();
    if (heap.size() < k) {
      heap.emplace(d2, idx);
    } else if (d2 < heap.top().first) {
      heap.pop();
      heap.emplace(d2, idx);
    }
  }

  void radius_rec(int lo, int hi, const Vec3& q, double r2, std::vector<int>& out) const {
    if (hi - lo <= kLeaf) {
      for (int i = lo; i < hi; ++i)
        if ((points_[order_[i]] - q).squaredNorm() <= r2) out.push_back(order_[i]);
      return;
    }
    int mid = (lo + hi) / 2;
    int axis = axes_[mid];
    double diff = q[axis] - points_[order_[mid]][axis];
    if ((points_[order_[mid]] - q).squaredNorm() <= r2) out.push_back(order_[mid]);
    if (diff < 0 || diff * diff <= r2) radius_rec(lo, mid, q, r2, out);
    if (diff >= 0 || diff * diff <= r2) radius_rec(mid + 1, hi, q, r2, out);
  }

  static constexpr int kLeaf = 8;
  std::span<const Vec3> points_;
  std::vector<int> order_;
  std::vector<std::int8_t> axes_;
};

}  // namespace recon
