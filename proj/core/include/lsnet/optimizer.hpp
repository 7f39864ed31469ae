#pragma once
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lsnet/tensor.hpp"

namespace lsnet {

// Adaptive-moment optimizer state: first/second moments per parameter tensor
// plus the shared step count used for bias correction.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  int64_t step = 0;

  static AdamState init(const std::vector<Tensor<T>*>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor<T>* p : params) {
      s.m.emplace_back(p->shape);
      s.v.emplace_back(p->shape);
    }
    return s;
  }
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               double lr, const AdamHyper& hp = {}) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient/state size mismatch");
  ++state.step;
  const double b1 = hp.beta1, b2 = hp.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t t = 0; t < params.size(); ++t) {
    Tensor<T>& p = *params[t];
    const Tensor<T>& g = grads[t];
    if (!p.same_shape(g)) throw std::invalid_argument("adam_step: gradient shape mismatch");
    Tensor<T>& m = state.m[t];
    Tensor<T>& v = state.v[t];
    for (size_t i = 0; i < p.numel(); ++i) {
      const double gi = static_cast<double>(g.v[i]);
      const double mi = b1 * static_cast<double>(m.v[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v.v[i]) + (1.0 - b2) * gi * gi;
      m.v[i] = static_cast<T>(mi);
      v.v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p.v[i] = static_cast<T>(static_cast<double>(p.v[i]) - lr * mhat / (std::sqrt(vhat) + hp.eps));
    }
  }
}

}  // namespace lsnet
