#pragma once
#include <map>

#include "lsnet/lsap.hpp"

namespace lsnet {

// Encoder block configuration. With two branches each LSAP runs at half the
// output width; the general rule is d_out / |branches| rounded down, with the
// fusion MLP mapping the concatenated branch outputs back to d_out.
struct PaeConfig {
  int d_in = 0;
  int d_out = 0;
  std::vector<Projection> branches;
  int k = 16;
  SplitSpec split;

  int branch_width() const { return d_out / static_cast<int>(branches.size()); }
};

template <typename T>
struct PaeParams {
  MlpParams<T> expand;  // d_in -> d_out
  std::vector<LsapParams<T>> branch;
  MlpParams<T> fuse;  // |branches| * branch_width -> d_out
};

template <typename T>
PaeParams<T> make_pae_params(const PaeConfig& cfg, RandomStream& rng) {
  if (cfg.branches.empty()) throw std::invalid_argument("pae: branch list must be nonempty");
  if (cfg.branches.size() == 2 && cfg.d_out % 2 != 0)
    throw std::invalid_argument("pae: d_out must be even with two branches");
  const int bw = cfg.branch_width();
  if (bw < 1) throw std::invalid_argument("pae: width not divisible by branch count");
  PaeParams<T> p;
  p.expand = make_mlp<T>(cfg.d_in, cfg.d_out, Activation::LeakyRelu, rng);
  for (size_t b = 0; b < cfg.branches.size(); ++b)
    p.branch.push_back(make_lsap_params<T>(cfg.d_out, bw, rng));
  p.fuse = make_mlp<T>(static_cast<int>(cfg.branches.size()) * bw, cfg.d_out, Activation::LeakyRelu, rng);
  return p;
}

template <typename T>
void collect_params(PaeParams<T>& p, std::vector<Tensor<T>*>& out) {
  out.push_back(&p.expand.weight);
  out.push_back(&p.expand.bias);
  for (auto& b : p.branch) collect_params(b, out);
  out.push_back(&p.fuse.weight);
  out.push_back(&p.fuse.bias);
}

// One exact KNN table per configured projection, all over the same points.
inline std::map<Projection, NeighborTable> build_branch_tables(const std::vector<Point3>& positions,
                                                               const std::vector<Projection>& branches, int k) {
  std::map<Projection, NeighborTable> tables;
  for (Projection b : branches) {
    if (tables.count(b)) continue;
    SpatialIndex index(positions, b);
    tables.emplace(b, knn(index, positions, k));
  }
  return tables;
}

// Parallel aggregation enhancement: expand channels, run one LSAP per branch
// on that branch's neighbor table, fuse the concatenated branch outputs and
// add the expanded input back as a residual. RPPE always sees the original
// 3D coordinates; projections only steer the neighbor search.
template <typename T>
Var<T> pae_forward(Tape<T>& tape, ParamMap<T>& pm, const Var<T>& f, std::span<const Point3> positions,
                   const std::map<Projection, NeighborTable>& tables, const PaeConfig& cfg, PaeParams<T>& params) {
  if (params.branch.size() != cfg.branches.size())
    throw std::invalid_argument("pae_forward: branch parameter count mismatch");
  Var<T> expanded = apply_mlp(tape, pm, f, params.expand);

  Var<T> cat;
  for (size_t b = 0; b < cfg.branches.size(); ++b) {
    auto it = tables.find(cfg.branches[b]);
    if (it == tables.end()) throw std::invalid_argument("pae_forward: missing branch table");
    Var<T> branch_out = lsap_block(tape, pm, expanded, positions, it->second, cfg.split, params.branch[b]);
    cat = b == 0 ? branch_out : concat_channels(tape, cat, branch_out);
  }
  Var<T> fused = apply_mlp(tape, pm, cat, params.fuse);
  return add_residual(tape, fused, expanded);
}

}  // namespace lsnet
