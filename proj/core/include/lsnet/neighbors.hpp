#pragma once
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lsnet/point_cloud.hpp"

namespace lsnet {

// Metric used for neighbor search. The 2D variants zero one coordinate before
// distance computation; positions themselves are left untouched.
enum class Projection { Full3D, XY, XZ, YZ };

const char* projection_name(Projection p);
Projection projection_from_name(const std::string& name);  // "3d", "xy", "xz", "yz"

// index of the coordinate zeroed by the projection, -1 for Full3D
int projection_dropped_axis(Projection p);

// Per-point sorted neighbor index matrix. Row i is ordered by ascending
// projected distance from point i, ties broken by ascending point index.
struct NeighborTable {
  int rows = 0;
  int k = 0;
  Projection projection = Projection::Full3D;
  std::vector<int32_t> indices;  // row-major rows x k

  int32_t at(int i, int j) const { return indices[static_cast<size_t>(i) * k + j]; }
  const int32_t* row(int i) const { return indices.data() + static_cast<size_t>(i) * k; }
};

// Exact nearest-neighbor index over (projected) positions. Immutable and
// concurrently queryable once built.
class SpatialIndex {
 public:
  SpatialIndex(const std::vector<Point3>& positions, Projection projection);
  ~SpatialIndex();
  SpatialIndex(SpatialIndex&&) noexcept;
  SpatialIndex& operator=(SpatialIndex&&) noexcept;
  SpatialIndex(const SpatialIndex&) = delete;
  SpatialIndex& operator=(const SpatialIndex&) = delete;

  int size() const;
  Projection projection() const;

  // k nearest data points to `query` (projected), (squared distance, index)
  // pairs in ascending order with the index tie rule. k > size() pads by
  // repeating the last valid neighbor.
  void query(const Point3& query, int k, std::vector<std::pair<double, int32_t>>& out) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SpatialIndex build_index(const std::vector<Point3>& positions, Projection projection);

NeighborTable knn(const SpatialIndex& index, const std::vector<Point3>& queries, int k);

// First split: the s1 nearest neighbors (columns [0, s1)).
NeighborTable split_first(const NeighborTable& table, int s1);

// Second split: every s2-th neighbor of the sorted row (columns {0, s2, 2*s2, ...}).
NeighborTable split_stride(const NeighborTable& table, int s2);

struct SplitSpec {
  int s1 = 1;
  int s2 = 1;
};

// s1 = max(1, floor(k/4)), s2 = 4 clamped to k.
SplitSpec default_split(int k);

inline int stride_count(int k, int s2) { return (k + s2 - 1) / s2; }

}  // namespace lsnet
