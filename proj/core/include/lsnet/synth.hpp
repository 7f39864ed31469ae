#pragma once
#include <array>
#include <cstdint>

#include "lsnet/point_cloud.hpp"

namespace lsnet {

// Synthetic urban-style scene: a ground plane with vertical structures so
// that 2D-projected neighbor search is meaningfully different from 3D.
// Classes: 0 ground, 1 building, 2 tree, 3 pole. Tree stems share the tree
// label, which makes them locally confusable with poles on purpose.
namespace synth_class {
inline constexpr int32_t kGround = 0;
inline constexpr int32_t kBuilding = 1;
inline constexpr int32_t kTree = 2;
inline constexpr int32_t kPole = 3;
inline constexpr int kCount = 4;
}  // namespace synth_class

struct SynthSpec {
  uint64_t seed = 1;
  int n_points = 4096;
  double extent = 20.0;  // meters, square footprint
  std::array<double, 4> proportions = {0.45, 0.25, 0.20, 0.10};
};

struct SyntheticScene {
  PointCloud cloud;
  uint64_t seed = 0;
};

SyntheticScene synth_scene(const SynthSpec& spec);

inline SyntheticScene synth_scene(uint64_t seed, int n_points, double extent) {
  SynthSpec spec;
  spec.seed = seed;
  spec.n_points = n_points;
  spec.extent = extent;
  return synth_scene(spec);
}

}  // namespace lsnet
