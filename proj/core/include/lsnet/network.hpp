#pragma once
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "lsnet/config.hpp"
#include "lsnet/fma.hpp"
#include "lsnet/pae.hpp"
#include "lsnet/point_cloud.hpp"

namespace lsnet {

// ---------------------------------------------------------------------------
// Loss-side helpers.

// Inverse-frequency class weights with an epsilon floor, normalized to mean 1.
// Classes absent from the histogram get the maximum weight.
template <typename T>
std::vector<T> class_weights(const std::vector<int64_t>& histogram, double eps = 0.02) {
  int64_t total = 0;
  for (int64_t c : histogram) total += c;
  if (total <= 0) throw std::invalid_argument("class_weights: all-zero histogram");
  std::vector<double> w(histogram.size());
  double sum = 0;
  for (size_t c = 0; c < histogram.size(); ++c) {
    const double freq = static_cast<double>(histogram[c]) / static_cast<double>(total);
    w[c] = 1.0 / (freq + eps);
    sum += w[c];
  }
  const double norm = static_cast<double>(w.size()) / sum;
  std::vector<T> out(w.size());
  for (size_t c = 0; c < w.size(); ++c) out[c] = static_cast<T>(w[c] * norm);
  return out;
}

// Mean over points of w_{y_i} * (-log softmax(logits_i)[y_i]), computed with
// log-sum-exp for stability.
template <typename T>
Var<T> weighted_cross_entropy(Tape<T>& tape, const Var<T>& logits, const std::vector<int32_t>& labels,
                              const std::vector<T>& weights) {
  detail::require(logits->val.rank() == 2, "weighted_cross_entropy: logits must be [N,C]");
  const int n = logits->val.dim(0), c = logits->val.dim(1);
  detail::require(static_cast<int>(labels.size()) == n, "weighted_cross_entropy: label count mismatch");
  detail::require(static_cast<int>(weights.size()) == c, "weighted_cross_entropy: weight count mismatch");
  for (int32_t y : labels)
    if (y < 0 || y >= c) throw std::invalid_argument("weighted_cross_entropy: invalid label");

  const T* lv = logits->val.data();
  Tensor<T> loss({1});
  T acc = T(0);
  for (int i = 0; i < n; ++i) {
    const T* row = lv + static_cast<size_t>(i) * c;
    T mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
    const T lse = mx + std::log(sum);
    acc += weights[static_cast<size_t>(labels[static_cast<size_t>(i)])] * (lse - row[labels[static_cast<size_t>(i)]]);
  }
  loss.v[0] = acc / static_cast<T>(n);

  auto labs = std::make_shared<std::vector<int32_t>>(labels);
  auto ws = std::make_shared<std::vector<T>>(weights);
  return tape.make(std::move(loss), {logits}, [labs, ws, n, c](Node<T>& self) {
    Node<T>& nl = *self.parents[0];
    if (!nl.needs_grad) return;
    const T g = self.grad.v[0] / static_cast<T>(n);
    const T* lv2 = nl.val.data();
    T* gl = grad_of(nl).data();
    for (int i = 0; i < n; ++i) {
      const T* row = lv2 + static_cast<size_t>(i) * c;
      T* grow = gl + static_cast<size_t>(i) * c;
      T mx = row[0];
      for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
      T sum = T(0);
      for (int j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
      const int32_t y = (*labs)[static_cast<size_t>(i)];
      const T wy = (*ws)[static_cast<size_t>(y)];
      for (int j = 0; j < c; ++j) {
        const T soft = std::exp(row[j] - mx) / sum;
        grow[j] += g * wy * (soft - (j == y ? T(1) : T(0)));
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Random downsampling: keeps floor(n/ratio) distinct points, uniformly via a
// shuffle prefix, returned in ascending order. ratio 1 is the identity.
inline std::vector<int32_t> random_downsample_indices(int n, int ratio, RandomStream& rng) {
  if (ratio < 1) throw std::invalid_argument("random_downsample: ratio must be >= 1");
  const int keep = n / ratio;
  if (keep < 1) throw std::invalid_argument("random_downsample: ratio leaves no points");
  std::vector<int32_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (ratio == 1) return idx;
  rng.shuffle(idx);
  idx.resize(static_cast<size_t>(keep));
  std::sort(idx.begin(), idx.end());
  return idx;
}

// ---------------------------------------------------------------------------
// Full network parameters.
template <typename T>
struct LsnetParams {
  std::vector<PaeParams<T>> encoder;
  std::vector<FmaParams<T>> decoder;
  MlpParams<T> head1;
  MlpParams<T> head2;
};

inline PaeConfig pae_config_for_level(const NetworkConfig& cfg, int level) {
  const auto& l = cfg.levels[static_cast<size_t>(level)];
  PaeConfig pc;
  pc.d_in = level == 0 ? cfg.input_channels : cfg.levels[static_cast<size_t>(level - 1)].d_out;
  pc.d_out = l.d_out;
  pc.branches = cfg.branches;
  pc.k = l.k;
  pc.split = default_split(l.k);
  return pc;
}

template <typename T>
LsnetParams<T> make_lsnet_params(const NetworkConfig& cfg, uint64_t seed) {
  cfg.validate();
  RandomStream rng(RandomStream::mix(seed, 0x11A9));
  LsnetParams<T> p;
  const int levels = static_cast<int>(cfg.levels.size());
  for (int i = 0; i < levels; ++i) p.encoder.push_back(make_pae_params<T>(pae_config_for_level(cfg, i), rng));
  for (int i = 0; i < levels; ++i) {
    const int d_enc = cfg.levels[static_cast<size_t>(i)].d_out;
    const int d_dec = cfg.levels[static_cast<size_t>(std::min(i + 1, levels - 1))].d_out;
    p.decoder.push_back(make_fma_params<T>(d_dec, d_enc, rng));
  }
  p.head1 = make_mlp<T>(cfg.levels[0].d_out, cfg.head_hidden, Activation::LeakyRelu, rng);
  p.head2 = make_mlp<T>(cfg.head_hidden, cfg.num_classes, Activation::None, rng);
  return p;
}

template <typename T>
void collect_params(LsnetParams<T>& p, std::vector<Tensor<T>*>& out) {
  for (auto& e : p.encoder) collect_params(e, out);
  for (auto& d : p.decoder) collect_params(d, out);
  out.push_back(&p.head1.weight);
  out.push_back(&p.head1.bias);
  out.push_back(&p.head2.weight);
  out.push_back(&p.head2.bias);
}

// ---------------------------------------------------------------------------
// Encoder-decoder forward pass. Per level the encoder builds the branch
// tables, runs the PAE block and randomly downsamples; the decoder walks back
// up through FMA blocks against the stored skip features, and two fully
// connected layers produce the per-point logits.
template <typename T>
Var<T> lsnet_forward(Tape<T>& tape, ParamMap<T>& pm, const PointBlock& block, const NetworkConfig& cfg,
                     LsnetParams<T>& params, uint64_t downsample_seed) {
  const int n = block.cloud.size();
  if (n != block.block_size) throw std::invalid_argument("forward: block size mismatch");
  if (cfg.input_channels != 3 + block.cloud.color_channels)
    throw std::invalid_argument("forward: input channel count does not match block features");
  const int levels = static_cast<int>(cfg.levels.size());
  if (static_cast<int>(params.encoder.size()) != levels) throw std::invalid_argument("forward: parameter level mismatch");

  Tensor<T> x0({n, cfg.input_channels});
  for (int i = 0; i < n; ++i) {
    T* row = x0.data() + static_cast<size_t>(i) * cfg.input_channels;
    for (int d = 0; d < 3; ++d) row[d] = static_cast<T>(block.cloud.positions[static_cast<size_t>(i)][static_cast<size_t>(d)]);
    for (int j = 0; j < block.cloud.color_channels; ++j) row[3 + j] = static_cast<T>(block.cloud.color_row(i)[j]);
  }

  Var<T> x = tape.leaf(std::move(x0), false);
  std::vector<Point3> positions = block.cloud.positions;
  std::vector<Var<T>> skips;
  std::vector<std::vector<Point3>> skip_positions;

  for (int level = 0; level < levels; ++level) {
    const PaeConfig pc = pae_config_for_level(cfg, level);
    auto tables = build_branch_tables(positions, pc.branches, pc.k);
    Var<T> f = pae_forward(tape, pm, x, std::span<const Point3>(positions), tables, pc,
                           params.encoder[static_cast<size_t>(level)]);
    skips.push_back(f);
    skip_positions.push_back(positions);

    const int ratio = cfg.levels[static_cast<size_t>(level)].ratio;
    if (ratio > 1) {
      RandomStream rng(RandomStream::mix(downsample_seed, static_cast<uint64_t>(level)));
      std::vector<int32_t> kept = random_downsample_indices(static_cast<int>(positions.size()), ratio, rng);
      x = select_rows(tape, f, kept);
      std::vector<Point3> sub;
      sub.reserve(kept.size());
      for (int32_t i : kept) sub.push_back(positions[static_cast<size_t>(i)]);
      positions = std::move(sub);
    } else {
      x = f;
    }
  }

  Var<T> decode = x;  // deepest resolution
  for (int level = levels - 1; level >= 0; --level) {
    LevelLink link = build_level_link(skip_positions[static_cast<size_t>(level)], positions,
                                      cfg.levels[static_cast<size_t>(level)].k);
    decode = fma_forward(tape, pm, decode, skips[static_cast<size_t>(level)], link,
                         params.decoder[static_cast<size_t>(level)], cfg.fma_pool);
    positions = skip_positions[static_cast<size_t>(level)];
  }

  Var<T> hidden = apply_mlp(tape, pm, decode, params.head1);
  return apply_mlp(tape, pm, hidden, params.head2);
}

// argmax per row, ties toward the smaller class id
template <typename T>
std::vector<int32_t> argmax_rows(const Tensor<T>& logits) {
  const int n = logits.dim(0), c = logits.dim(1);
  std::vector<int32_t> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const T* row = logits.data() + static_cast<size_t>(i) * c;
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (row[j] > row[best]) best = j;
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

}  // namespace lsnet
