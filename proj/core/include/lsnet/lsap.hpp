#pragma once
#include <optional>
#include <span>

#include "lsnet/autodiff.hpp"
#include "lsnet/neighbors.hpp"

namespace lsnet {

// MLPs of one attention-pooling round. The shortcut projection is present
// only when the round's input and output widths differ.
template <typename T>
struct LsapRoundParams {
  MlpParams<T> rppe_mlp;    // 10 -> d_pe
  MlpParams<T> score_mlp;   // (d_ne + d_pe) -> d_out
  MlpParams<T> value_mlp;   // (d_ne + d_pe) -> d_out
  MlpParams<T> out_mlp;     // d_out -> d_out
  std::optional<MlpParams<T>> shortcut;  // d_in -> d_out projection
};

// Two-round block mapping d_in-wide features to d_out. The positional
// encoding width of each round equals the width of the features gathered in
// that round.
template <typename T>
struct LsapParams {
  LsapRoundParams<T> round1;
  LsapRoundParams<T> round2;

  int d_in() const { return round1.rppe_mlp.d_out(); }
  int d_out() const { return round1.out_mlp.d_out(); }
};

template <typename T>
LsapRoundParams<T> make_lsap_round(int d_in, int d_out, RandomStream& rng) {
  LsapRoundParams<T> p;
  p.rppe_mlp = make_mlp<T>(10, d_in, Activation::LeakyRelu, rng);
  p.score_mlp = make_mlp<T>(2 * d_in, d_out, Activation::LeakyRelu, rng);
  p.value_mlp = make_mlp<T>(2 * d_in, d_out, Activation::LeakyRelu, rng);
  p.out_mlp = make_mlp<T>(d_out, d_out, Activation::LeakyRelu, rng);
  if (d_in != d_out) p.shortcut = make_mlp<T>(d_in, d_out, Activation::None, rng);
  return p;
}

template <typename T>
LsapParams<T> make_lsap_params(int d_in, int d_out, RandomStream& rng) {
  LsapParams<T> p;
  p.round1 = make_lsap_round<T>(d_in, d_out, rng);
  p.round2 = make_lsap_round<T>(d_out, d_out, rng);
  return p;
}

template <typename T>
void collect_params(LsapRoundParams<T>& p, std::vector<Tensor<T>*>& out) {
  out.push_back(&p.rppe_mlp.weight);
  out.push_back(&p.rppe_mlp.bias);
  out.push_back(&p.score_mlp.weight);
  out.push_back(&p.score_mlp.bias);
  out.push_back(&p.value_mlp.weight);
  out.push_back(&p.value_mlp.bias);
  out.push_back(&p.out_mlp.weight);
  out.push_back(&p.out_mlp.bias);
  if (p.shortcut) {
    out.push_back(&p.shortcut->weight);
    out.push_back(&p.shortcut->bias);
  }
}

template <typename T>
void collect_params(LsapParams<T>& p, std::vector<Tensor<T>*>& out) {
  collect_params(p.round1, out);
  collect_params(p.round2, out);
}

// Raw relative position encoding for one (point, neighbor) pair:
//   p_i (3) | p_i^k (3) | p_i - p_i^k (3) | ||p_i - p_i^k|| (1)
template <typename T>
Tensor<T> rppe_raw(std::span<const Point3> positions, const NeighborTable& table) {
  Tensor<T> raw({table.rows, table.k, 10});
  T* out = raw.data();
  for (int i = 0; i < table.rows; ++i) {
    const Point3& p = positions[static_cast<size_t>(i)];
    const int32_t* row = table.row(i);
    for (int j = 0; j < table.k; ++j) {
      const Point3& q = positions[static_cast<size_t>(row[j])];
      T* r = out + (static_cast<size_t>(i) * table.k + j) * 10;
      T norm2 = T(0);
      for (int d = 0; d < 3; ++d) {
        const T pd = static_cast<T>(p[static_cast<size_t>(d)]);
        const T qd = static_cast<T>(q[static_cast<size_t>(d)]);
        r[d] = pd;
        r[3 + d] = qd;
        r[6 + d] = pd - qd;
        norm2 += r[6 + d] * r[6 + d];
      }
      r[9] = std::sqrt(norm2);
    }
  }
  work::add_gathers(static_cast<int64_t>(table.rows) * table.k * 3);
  return raw;
}

// Relative point position encoding: builds the raw 10-vector per neighbor and
// applies the shared MLP.
template <typename T>
Var<T> rppe(Tape<T>& tape, ParamMap<T>& pm, std::span<const Point3> positions, const NeighborTable& table,
            MlpParams<T>& mlp) {
  if (static_cast<int>(positions.size()) < table.rows)
    throw std::invalid_argument("rppe: positions shorter than table");
  Var<T> raw = tape.leaf(rppe_raw<T>(positions, table), false);
  return apply_mlp(tape, pm, raw, mlp);
}

// Attention pooling over the neighbor axis:
//   K = softmax(score_mlp(F_con), neighbor axis), V = value_mlp(F_con),
//   out = out_mlp(sum_m K*V) + shortcut(F)
// The shortcut is the identity when widths already match.
template <typename T>
Var<T> attention_pool(Tape<T>& tape, ParamMap<T>& pm, const Var<T>& f, const Var<T>& f_con,
                      LsapRoundParams<T>& params) {
  detail::require(f_con->val.rank() == 3, "attention_pool: F_con must be [N,m,d]");
  detail::require(f->val.rank() == 2 && f->val.dim(0) == f_con->val.dim(0),
                  "attention_pool: F and F_con disagree on N");
  work::add_slots(static_cast<int64_t>(f_con->val.dim(0)) * f_con->val.dim(1));

  Var<T> k = softmax_neighbor_axis(tape, apply_mlp(tape, pm, f_con, params.score_mlp));
  Var<T> v = apply_mlp(tape, pm, f_con, params.value_mlp);
  Var<T> pooled = reduce_sum_neighbor(tape, multiply(tape, k, v));
  Var<T> out = apply_mlp(tape, pm, pooled, params.out_mlp);
  Var<T> shortcut = params.shortcut ? apply_mlp(tape, pm, f, *params.shortcut) : f;
  return add_residual(tape, out, shortcut);
}

// One round: slice the table, gather features, concat with the positional
// encoding, attention-pool.
template <typename T>
Var<T> lsap_round(Tape<T>& tape, ParamMap<T>& pm, const Var<T>& f, std::span<const Point3> positions,
                  const NeighborTable& split_table, LsapRoundParams<T>& params) {
  Var<T> pe = rppe(tape, pm, positions, split_table, params.rppe_mlp);
  Var<T> f_ne = gather_rows(tape, f, split_table);
  Var<T> f_con = concat_channels(tape, f_ne, pe);
  return attention_pool(tape, pm, f, f_con, params);
}

// Local split attention pooling. Round 1 pools over the s1 nearest
// neighbors; round 2 pools the round-1 features over every s2-th neighbor of
// the same sorted table, which restores the full-k spatial reach at a
// fraction of the attention work.
template <typename T>
Var<T> lsap_block(Tape<T>& tape, ParamMap<T>& pm, const Var<T>& f, std::span<const Point3> positions,
                  const NeighborTable& table, const SplitSpec& spec, LsapParams<T>& params) {
  NeighborTable first = split_first(table, spec.s1);
  Var<T> att1 = lsap_round(tape, pm, f, positions, first, params.round1);
  NeighborTable second = split_stride(table, spec.s2);
  return lsap_round(tape, pm, att1, positions, second, params.round2);
}

}  // namespace lsnet
