#pragma once
#include <string>
#include <vector>

#include "lsnet/fma.hpp"
#include "lsnet/network.hpp"
#include "lsnet/pae.hpp"

namespace lsnet {

// Finite-difference verification of every differentiable primitive and of the
// composed blocks, always in 64-bit. Each item reports the max relative error
// over `instances` random instances, checking the gradient with respect to
// the inputs and every parameter tensor.
struct GradCheckItem {
  std::string name;
  double max_err = 0;
};

inline constexpr double kGradCheckTol = 1e-4;

namespace gradcheck_detail {

using D = double;

inline Tensor<D> random_tensor(std::vector<int> shape, RandomStream& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<D> t(std::move(shape));
  for (auto& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

inline std::vector<Point3> random_positions(int n, RandomStream& rng, double side = 4.0) {
  std::vector<Point3> p(static_cast<size_t>(n));
  for (auto& q : p)
    for (int d = 0; d < 3; ++d) q[static_cast<size_t>(d)] = static_cast<float>(rng.uniform(0, side));
  return p;
}

inline NeighborTable random_table(int rows, int k, int n, RandomStream& rng) {
  NeighborTable t;
  t.rows = rows;
  t.k = k;
  t.indices.resize(static_cast<size_t>(rows) * k);
  for (auto& i : t.indices) i = static_cast<int32_t>(rng.uniform_int(0, n - 1));
  return t;
}

// scalar readout: sum(y * r) with a fixed random probe r
inline Var<D> probe_loss(Tape<D>& tape, const Var<D>& y, const Tensor<D>& r) {
  Var<D> rv = tape.leaf(r, false);
  return reduce_sum_all(tape, multiply(tape, y, rv));
}

// check d(loss)/d(target) where `target` is one tensor of a multi-input
// computation; `build` must rebuild the whole computation from scratch with
// the supplied replacement for the target tensor.
using BuildFn = std::function<Var<D>(Tape<D>&, const Var<D>&)>;

inline double check_target(const BuildFn& build, const Tensor<D>& x0) {
  return grad_check<D>(build, x0, 1e-5);
}

}  // namespace gradcheck_detail

std::vector<GradCheckItem> gradcheck_primitives(int instances, uint64_t seed);
std::vector<GradCheckItem> gradcheck_lsap(int instances, uint64_t seed);
std::vector<GradCheckItem> gradcheck_pae(int instances, uint64_t seed);
std::vector<GradCheckItem> gradcheck_fma(int instances, uint64_t seed);
std::vector<GradCheckItem> gradcheck_loss(int instances, uint64_t seed);

// module: all | primitives | lsap | pae | fma | loss
std::vector<GradCheckItem> gradcheck_module(const std::string& module, int instances, uint64_t seed);

}  // namespace lsnet
