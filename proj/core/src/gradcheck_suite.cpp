#include "lsnet/gradcheck_suite.hpp"

#include <algorithm>
#include <stdexcept>

#include "lsnet/lsap.hpp"

namespace lsnet {

namespace {

using namespace gradcheck_detail;

void merge(std::vector<GradCheckItem>& items, const std::string& name, double err) {
  for (auto& it : items)
    if (it.name == name) {
      it.max_err = std::max(it.max_err, err);
      return;
    }
  items.push_back({name, err});
}

// checks the gradient w.r.t. each parameter tensor of a parameterized forward
template <typename Params>
void check_params(std::vector<GradCheckItem>& items, const std::string& name, Params& params,
                  const std::function<Var<D>(Tape<D>&, ParamMap<D>&)>& forward, const Tensor<D>& probe) {
  std::vector<Tensor<D>*> tensors;
  collect_params(params, tensors);
  for (Tensor<D>* t : tensors) {
    BuildFn build = [&, t](Tape<D>& tape, const Var<D>& pv) {
      ParamMap<D> pm;
      pm.bind(*t, pv);
      return probe_loss(tape, forward(tape, pm), probe);
    };
    merge(items, name + "/params", check_target(build, *t));
  }
}

}  // namespace

std::vector<GradCheckItem> gradcheck_primitives(int instances, uint64_t seed) {
  std::vector<GradCheckItem> items;
  for (int inst = 0; inst < instances; ++inst) {
    RandomStream rng(RandomStream::mix(seed, 0x9001 + static_cast<uint64_t>(inst)));
    const int n = rng.uniform_int(3, 6);
    const int m = rng.uniform_int(2, 4);
    const int d = rng.uniform_int(2, 4);
    const int d_out = rng.uniform_int(2, 4);

    // linear, both activations, 2D and 3D inputs
    for (Activation act : {Activation::None, Activation::LeakyRelu}) {
      const std::string name = act == Activation::None ? "linear_none" : "linear_leaky";
      Tensor<D> x = random_tensor({n, d}, rng);
      Tensor<D> x3 = random_tensor({n, m, d}, rng);
      Tensor<D> w = random_tensor({d, d_out}, rng);
      Tensor<D> b = random_tensor({d_out}, rng);
      Tensor<D> r = random_tensor({n, d_out}, rng);
      Tensor<D> r3 = random_tensor({n, m, d_out}, rng);
      merge(items, name + "/x", check_target(
          [&](Tape<D>& t, const Var<D>& xv) {
            return probe_loss(t, linear_pointwise(t, xv, t.leaf(w, false), t.leaf(b, false), act), r);
          }, x));
      merge(items, name + "/x3", check_target(
          [&](Tape<D>& t, const Var<D>& xv) {
            return probe_loss(t, linear_pointwise(t, xv, t.leaf(w, false), t.leaf(b, false), act), r3);
          }, x3));
      merge(items, name + "/w", check_target(
          [&](Tape<D>& t, const Var<D>& wv) {
            return probe_loss(t, linear_pointwise(t, t.leaf(x, false), wv, t.leaf(b, false), act), r);
          }, w));
      merge(items, name + "/b", check_target(
          [&](Tape<D>& t, const Var<D>& bv) {
            return probe_loss(t, linear_pointwise(t, t.leaf(x, false), t.leaf(w, false), bv, act), r);
          }, b));
    }

    {
      Tensor<D> x = random_tensor({n, m, d}, rng);
      Tensor<D> r = random_tensor({n, m, d}, rng);
      merge(items, "softmax_neighbor_axis", check_target(
          [&](Tape<D>& t, const Var<D>& xv) { return probe_loss(t, softmax_neighbor_axis(t, xv), r); }, x));
    }
    {
      Tensor<D> f = random_tensor({n, d}, rng);
      NeighborTable table = random_table(n, m, n, rng);  // repeats exercise the scatter-add
      Tensor<D> r = random_tensor({n, m, d}, rng);
      merge(items, "gather_rows", check_target(
          [&](Tape<D>& t, const Var<D>& fv) { return probe_loss(t, gather_rows(t, fv, table), r); }, f));
    }
    {
      Tensor<D> f = random_tensor({n, d}, rng);
      std::vector<int32_t> rows(static_cast<size_t>(n + 2));
      for (auto& x : rows) x = static_cast<int32_t>(rng.uniform_int(0, n - 1));
      Tensor<D> r = random_tensor({n + 2, d}, rng);
      merge(items, "upsample_nearest", check_target(
          [&](Tape<D>& t, const Var<D>& fv) { return probe_loss(t, select_rows(t, fv, rows), r); }, f));
    }
    {
      Tensor<D> x = random_tensor({n, m, d}, rng);
      Tensor<D> r = random_tensor({n, d}, rng);
      merge(items, "reduce_sum_neighbor", check_target(
          [&](Tape<D>& t, const Var<D>& xv) { return probe_loss(t, reduce_sum_neighbor(t, xv), r); }, x));
      merge(items, "reduce_max_neighbor", check_target(
          [&](Tape<D>& t, const Var<D>& xv) { return probe_loss(t, reduce_max_neighbor(t, xv), r); }, x));
    }
    {
      Tensor<D> a = random_tensor({n, m, d}, rng);
      Tensor<D> b2 = random_tensor({n, m, d_out}, rng);
      Tensor<D> r = random_tensor({n, m, d + d_out}, rng);
      merge(items, "concat_channels/a", check_target(
          [&](Tape<D>& t, const Var<D>& av) {
            return probe_loss(t, concat_channels(t, av, t.leaf(b2, false)), r);
          }, a));
      merge(items, "concat_channels/b", check_target(
          [&](Tape<D>& t, const Var<D>& bv) {
            return probe_loss(t, concat_channels(t, t.leaf(a, false), bv), r);
          }, b2));
    }
    {
      Tensor<D> a = random_tensor({n, d}, rng);
      Tensor<D> b2 = random_tensor({n, d}, rng);
      Tensor<D> r = random_tensor({n, d}, rng);
      merge(items, "add_residual", check_target(
          [&](Tape<D>& t, const Var<D>& av) {
            return probe_loss(t, add_residual(t, av, t.leaf(b2, false)), r);
          }, a));
      merge(items, "multiply", check_target(
          [&](Tape<D>& t, const Var<D>& av) {
            return probe_loss(t, multiply(t, av, t.leaf(b2, false)), r);
          }, a));
      merge(items, "scale", check_target(
          [&](Tape<D>& t, const Var<D>& av) { return probe_loss(t, scale(t, av, D(0.7)), r); }, a));
      merge(items, "reduce_sum_all", check_target(
          [&](Tape<D>& t, const Var<D>& av) { return reduce_sum_all(t, av); }, a));
    }
  }
  return items;
}

std::vector<GradCheckItem> gradcheck_lsap(int instances, uint64_t seed) {
  std::vector<GradCheckItem> items;
  for (int inst = 0; inst < instances; ++inst) {
    RandomStream rng(RandomStream::mix(seed, 0x15A9 + static_cast<uint64_t>(inst)));
    const int n = rng.uniform_int(6, 10);
    const int k = rng.uniform_int(4, std::min(6, n));
    const int d_in = rng.uniform_int(2, 4);
    const int d_out = rng.uniform_int(2, 4);
    const SplitSpec spec = default_split(k);

    auto positions = random_positions(n, rng);
    SpatialIndex index(positions, Projection::Full3D);
    NeighborTable table = knn(index, positions, k);
    LsapParams<D> params = make_lsap_params<D>(d_in, d_out, rng);
    Tensor<D> f = random_tensor({n, d_in}, rng);
    Tensor<D> probe = random_tensor({n, d_out}, rng);

    merge(items, "lsap_block/input", check_target(
        [&](Tape<D>& t, const Var<D>& fv) {
          ParamMap<D> pm;
          return probe_loss(t, lsap_block(t, pm, fv, std::span<const Point3>(positions), table, spec, params), probe);
        }, f));
    check_params<LsapParams<D>>(items, "lsap_block", params,
        [&](Tape<D>& t, ParamMap<D>& pm) {
          return lsap_block(t, pm, t.leaf(f, false), std::span<const Point3>(positions), table, spec, params);
        }, probe);
  }
  return items;
}

std::vector<GradCheckItem> gradcheck_pae(int instances, uint64_t seed) {
  std::vector<GradCheckItem> items;
  for (int inst = 0; inst < instances; ++inst) {
    RandomStream rng(RandomStream::mix(seed, 0x9AE0 + static_cast<uint64_t>(inst)));
    const int n = rng.uniform_int(6, 9);
    PaeConfig cfg;
    cfg.d_in = rng.uniform_int(2, 3);
    cfg.d_out = 4;
    cfg.branches = {Projection::XY, Projection::Full3D};
    cfg.k = rng.uniform_int(3, std::min(5, n));
    cfg.split = default_split(cfg.k);

    auto positions = random_positions(n, rng);
    auto tables = build_branch_tables(positions, cfg.branches, cfg.k);
    PaeParams<D> params = make_pae_params<D>(cfg, rng);
    Tensor<D> f = random_tensor({n, cfg.d_in}, rng);
    Tensor<D> probe = random_tensor({n, cfg.d_out}, rng);

    merge(items, "pae_forward/input", check_target(
        [&](Tape<D>& t, const Var<D>& fv) {
          ParamMap<D> pm;
          return probe_loss(t, pae_forward(t, pm, fv, std::span<const Point3>(positions), tables, cfg, params), probe);
        }, f));
    check_params<PaeParams<D>>(items, "pae_forward", params,
        [&](Tape<D>& t, ParamMap<D>& pm) {
          return pae_forward(t, pm, t.leaf(f, false), std::span<const Point3>(positions), tables, cfg, params);
        }, probe);
  }
  return items;
}

std::vector<GradCheckItem> gradcheck_fma(int instances, uint64_t seed) {
  std::vector<GradCheckItem> items;
  for (int inst = 0; inst < instances; ++inst) {
    RandomStream rng(RandomStream::mix(seed, 0xF3A0 + static_cast<uint64_t>(inst)));
    const int n_high = rng.uniform_int(6, 10);
    const int n_low = rng.uniform_int(2, 4);
    const int d_dec = rng.uniform_int(2, 3);
    const int d_enc = rng.uniform_int(2, 4);
    const int k = rng.uniform_int(2, 4);

    auto p_high = random_positions(n_high, rng);
    auto p_low = random_positions(n_low, rng);
    LevelLink link = build_level_link(p_high, p_low, k);
    Tensor<D> f_dec = random_tensor({n_low, d_dec}, rng);
    Tensor<D> f_enc = random_tensor({n_high, d_enc}, rng);
    Tensor<D> probe = random_tensor({n_high, d_enc}, rng);

    for (PoolMode pool : {PoolMode::Max, PoolMode::Mean, PoolMode::None}) {
      const std::string name = std::string("fma_forward_") + pool_mode_name(pool);
      FmaParams<D> params = make_fma_params<D>(d_dec, d_enc, rng);
      merge(items, name + "/decode", check_target(
          [&](Tape<D>& t, const Var<D>& dv) {
            ParamMap<D> pm;
            return probe_loss(t, fma_forward(t, pm, dv, t.leaf(f_enc, false), link, params, pool), probe);
          }, f_dec));
      merge(items, name + "/encode", check_target(
          [&](Tape<D>& t, const Var<D>& ev) {
            ParamMap<D> pm;
            return probe_loss(t, fma_forward(t, pm, t.leaf(f_dec, false), ev, link, params, pool), probe);
          }, f_enc));
      check_params<FmaParams<D>>(items, name, params,
          [&](Tape<D>& t, ParamMap<D>& pm) {
            return fma_forward(t, pm, t.leaf(f_dec, false), t.leaf(f_enc, false), link, params, pool);
          }, probe);
    }
  }
  return items;
}

std::vector<GradCheckItem> gradcheck_loss(int instances, uint64_t seed) {
  std::vector<GradCheckItem> items;
  for (int inst = 0; inst < instances; ++inst) {
    RandomStream rng(RandomStream::mix(seed, 0x70CE + static_cast<uint64_t>(inst)));
    const int n = rng.uniform_int(4, 9);
    const int c = rng.uniform_int(2, 5);
    Tensor<D> logits = random_tensor({n, c}, rng, -2.0, 2.0);
    std::vector<int32_t> labels(static_cast<size_t>(n));
    for (auto& y : labels) y = static_cast<int32_t>(rng.uniform_int(0, c - 1));
    std::vector<D> weights(static_cast<size_t>(c));
    for (auto& w : weights) w = rng.uniform(0.2, 3.0);
    merge(items, "weighted_cross_entropy", check_target(
        [&](Tape<D>& t, const Var<D>& lv) { return weighted_cross_entropy(t, lv, labels, weights); }, logits));
  }
  return items;
}

std::vector<GradCheckItem> gradcheck_module(const std::string& module, int instances, uint64_t seed) {
  std::vector<GradCheckItem> items;
  auto append = [&](std::vector<GradCheckItem> more) {
    for (auto& it : more) items.push_back(std::move(it));
  };
  if (module == "all" || module == "primitives") append(gradcheck_primitives(instances, seed));
  if (module == "all" || module == "lsap") append(gradcheck_lsap(instances, seed));
  if (module == "all" || module == "pae") append(gradcheck_pae(instances, seed));
  if (module == "all" || module == "fma") append(gradcheck_fma(instances, seed));
  if (module == "all" || module == "loss") append(gradcheck_loss(instances, seed));
  if (items.empty()) throw std::invalid_argument("gradcheck: unknown module '" + module + "'");
  return items;
}

}  // namespace lsnet
