#pragma once
#include <array>
#include <cstdint>
#include <vector>

namespace lsnet {

using Point3 = std::array<float, 3>;

// Positions in meters, optional per-point colors in [0,1], optional integer
// class labels. Invariants: finite positions; colors/labels, when present,
// have exactly one row per point.
struct PointCloud {
  std::vector<Point3> positions;
  std::vector<float> colors;  // row-major N x color_channels, empty when none
  int color_channels = 0;
  std::vector<int32_t> labels;  // empty when unlabeled

  int size() const { return static_cast<int>(positions.size()); }
  bool has_colors() const { return color_channels > 0; }
  bool has_labels() const { return !labels.empty(); }

  const float* color_row(int i) const { return colors.data() + static_cast<size_t>(i) * color_channels; }
  float* color_row(int i) { return colors.data() + static_cast<size_t>(i) * color_channels; }
};

// throws std::invalid_argument when an invariant is violated
void validate(const PointCloud& cloud);

// Fixed-size training block cut from a source cloud. origin_indices maps each
// block point back to the source cloud; padding shows up as repeated indices.
struct PointBlock {
  PointCloud cloud;
  std::vector<int32_t> origin_indices;
  int block_size = 0;
};

// Voxel-grid downsampling anchored at the cloud's minimum corner. Each
// occupied cell yields one point: position = centroid, color = mean, label =
// majority vote with ties broken toward the smallest class id.
PointCloud grid_sample(const PointCloud& cloud, double cell);

// The n points nearest to cloud.positions[center_index] (3D Euclidean). When
// the cloud holds fewer than n points the block is padded by resampling
// uniformly at random from the available points.
PointBlock sample_block(const PointCloud& cloud, int center_index, int n);

}  // namespace lsnet
