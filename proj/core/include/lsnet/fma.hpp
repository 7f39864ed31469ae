#pragma once
#include "lsnet/autodiff.hpp"
#include "lsnet/neighbors.hpp"

namespace lsnet {

enum class PoolMode { Max, Mean, None };

inline const char* pool_mode_name(PoolMode m) {
  switch (m) {
    case PoolMode::Max: return "max";
    case PoolMode::Mean: return "mean";
    case PoolMode::None: return "none";
  }
  return "?";
}

inline PoolMode pool_mode_from_name(const std::string& name) {
  if (name == "max") return PoolMode::Max;
  if (name == "mean") return PoolMode::Mean;
  if (name == "none") return PoolMode::None;
  throw std::invalid_argument("unknown pool mode '" + name + "'");
}

// Decoder-side wiring between one high-resolution level and the next coarser
// one: a 1-NN feature copy map for upsampling plus the high-resolution
// neighbor table used for the aggregation step.
struct LevelLink {
  std::vector<int32_t> up_map;  // per high-res point, nearest low-res point
  NeighborTable high_table;     // Full3D table over the high-res positions
};

inline LevelLink build_level_link(const std::vector<Point3>& p_high, const std::vector<Point3>& p_low, int k) {
  if (p_high.empty() || p_low.empty()) throw std::invalid_argument("build_level_link: empty cloud");
  LevelLink link;
  SpatialIndex low_index(p_low, Projection::Full3D);
  link.up_map.resize(p_high.size());
  std::vector<std::pair<double, int32_t>> nn;
  for (size_t i = 0; i < p_high.size(); ++i) {
    low_index.query(p_high[i], 1, nn);
    link.up_map[i] = nn[0].second;
  }
  SpatialIndex high_index(p_high, Projection::Full3D);
  link.high_table = knn(high_index, p_high, k);
  return link;
}

// out[j, :] = f_low[up_map[j], :]; backward scatter-adds
template <typename T>
Var<T> upsample_nearest(Tape<T>& tape, const Var<T>& f_low, const std::vector<int32_t>& up_map) {
  return select_rows(tape, f_low, up_map);
}

template <typename T>
struct FmaParams {
  MlpParams<T> fuse;  // (d_decode + d_encode) -> d_encode
};

template <typename T>
FmaParams<T> make_fma_params(int d_decode, int d_encode, RandomStream& rng) {
  return FmaParams<T>{make_mlp<T>(d_decode + d_encode, d_encode, Activation::LeakyRelu, rng)};
}

template <typename T>
void collect_params(FmaParams<T>& p, std::vector<Tensor<T>*>& out) {
  out.push_back(&p.fuse.weight);
  out.push_back(&p.fuse.bias);
}

// Feature max aggregation: upsample the coarser decoder features, gather them
// over the high-resolution neighborhood, pool, fuse with the skip features
// and keep the skip as a residual. PoolMode::None bypasses the gather/pool
// and feeds the upsampled features straight to the fusion MLP.
template <typename T>
Var<T> fma_forward(Tape<T>& tape, ParamMap<T>& pm, const Var<T>& f_decode_next, const Var<T>& f_encode,
                   const LevelLink& link, FmaParams<T>& params, PoolMode pool) {
  detail::require(f_encode->val.rank() == 2 && f_decode_next->val.rank() == 2, "fma_forward: expected [N,d] inputs");
  detail::require(f_encode->val.dim(0) == static_cast<int>(link.up_map.size()),
                  "fma_forward: link does not match encode level");

  Var<T> up = upsample_nearest(tape, f_decode_next, link.up_map);
  Var<T> pooled;
  switch (pool) {
    case PoolMode::Max:
      pooled = reduce_max_neighbor(tape, gather_rows(tape, up, link.high_table));
      break;
    case PoolMode::Mean: {
      Var<T> sum = reduce_sum_neighbor(tape, gather_rows(tape, up, link.high_table));
      pooled = scale(tape, sum, T(1) / static_cast<T>(link.high_table.k));
      break;
    }
    case PoolMode::None:
      pooled = up;
      break;
  }
  Var<T> fused = apply_mlp(tape, pm, concat_channels(tape, pooled, f_encode), params.fuse);
  return add_residual(tape, fused, f_encode);
}

}  // namespace lsnet
