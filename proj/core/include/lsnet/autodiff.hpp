#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "lsnet/neighbors.hpp"
#include "lsnet/rng.hpp"
#include "lsnet/tensor.hpp"
#include "lsnet/workcount.hpp"

namespace lsnet {

enum class Activation { None, LeakyRelu };

inline constexpr double kLeakySlope = 0.2;

// One recorded value in the computation graph. Gradients are allocated lazily
// during the backward sweep; an untouched grad marks the node unreachable
// from the loss.
template <typename T>
struct Node {
  Tensor<T> val;
  Tensor<T> grad;
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> pull;  // accumulates this->grad into parents
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Tensor<T>& grad_of(Node<T>& n) {
  if (n.grad.v.empty() && n.val.numel() > 0) n.grad = Tensor<T>(n.val.shape);
  return n.grad;
}

// Records primitive applications in execution order; backward traverses the
// record in exact reverse order and accumulates gradients additively at
// fan-out. One tape is single-owner during forward/backward.
template <typename T>
class Tape {
 public:
  bool recording = true;

  Var<T> leaf(Tensor<T> value, bool needs_grad) {
    auto n = std::make_shared<Node<T>>();
    n->val = std::move(value);
    n->needs_grad = needs_grad && recording;
    return n;
  }

  Var<T> make(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> pull) {
    auto n = std::make_shared<Node<T>>();
    n->val = std::move(value);
    if (recording) {
      for (const auto& p : parents)
        if (p->needs_grad) n->needs_grad = true;
      if (n->needs_grad) {
        n->parents = std::move(parents);
        n->pull = std::move(pull);
        order_.push_back(n);
      }
    }
    return n;
  }

  void backward(const Var<T>& loss) {
    if (loss->val.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad_of(*loss).v[0] = T(1);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      Node<T>& n = **it;
      if (!n.grad.v.empty() && n.pull) n.pull(n);
    }
  }

  size_t recorded() const { return order_.size(); }

 private:
  std::vector<Var<T>> order_;
};

namespace detail {

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  for (T x : t.v)
    if (!std::isfinite(static_cast<double>(x)))
      throw std::runtime_error(std::string(op) + ": non-finite value produced");
}

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shared per-point transform: y[..., j] = act(sum_i x[..., i] w[i, j] + b[j]).
// Gradients are defined w.r.t. x, w and b.
template <typename T>
Var<T> linear_pointwise(Tape<T>& tape, const Var<T>& x, const Var<T>& w, const Var<T>& b, Activation act) {
  detail::require(w->val.rank() == 2, "linear_pointwise: weight must be rank 2");
  const int d_in = w->val.dim(0);
  const int d_out = w->val.dim(1);
  detail::require(b->val.rank() == 1 && b->val.dim(0) == d_out, "linear_pointwise: bias shape mismatch");
  detail::require(x->val.rank() >= 1 && x->val.shape.back() == d_in, "linear_pointwise: input width mismatch");

  const size_t rows = d_in > 0 ? x->val.numel() / static_cast<size_t>(d_in)
                               : Tensor<T>::numel_of(std::vector<int>(x->val.shape.begin(), x->val.shape.end() - 1));
  std::vector<int> out_shape = x->val.shape;
  out_shape.back() = d_out;
  Tensor<T> y(out_shape);

  const T* xv = x->val.data();
  const T* wv = w->val.data();
  const T* bv = b->val.data();
  T* yv = y.data();
  const T slope = static_cast<T>(kLeakySlope);
  for (size_t r = 0; r < rows; ++r) {
    T* yr = yv + r * static_cast<size_t>(d_out);
    const T* xr = xv + r * static_cast<size_t>(d_in);
    for (int j = 0; j < d_out; ++j) yr[j] = bv[j];
    for (int i = 0; i < d_in; ++i) {
      const T xi = xr[i];
      const T* wr = wv + static_cast<size_t>(i) * d_out;
      for (int j = 0; j < d_out; ++j) yr[j] += xi * wr[j];
    }
    if (act == Activation::LeakyRelu)
      for (int j = 0; j < d_out; ++j)
        if (yr[j] < T(0)) yr[j] *= slope;
  }
  work::add_macs(static_cast<int64_t>(rows) * d_in * d_out);

  return tape.make(std::move(y), {x, w, b}, [d_in, d_out, rows, act, slope](Node<T>& self) {
    Node<T>& nx = *self.parents[0];
    Node<T>& nw = *self.parents[1];
    Node<T>& nb = *self.parents[2];
    const T* gy = self.grad.data();
    const T* yv2 = self.val.data();
    const T* xv2 = nx.val.data();
    const T* wv2 = nw.val.data();
    T* gx = nx.needs_grad ? grad_of(nx).data() : nullptr;
    T* gw = nw.needs_grad ? grad_of(nw).data() : nullptr;
    T* gb = nb.needs_grad ? grad_of(nb).data() : nullptr;
    std::vector<T> grow(static_cast<size_t>(d_out));
    for (size_t r = 0; r < rows; ++r) {
      const T* gyr = gy + r * static_cast<size_t>(d_out);
      const T* yr = yv2 + r * static_cast<size_t>(d_out);
      const T* xr = xv2 + r * static_cast<size_t>(d_in);
      for (int j = 0; j < d_out; ++j) {
        T g = gyr[j];
        if (act == Activation::LeakyRelu && yr[j] < T(0)) g *= slope;
        grow[static_cast<size_t>(j)] = g;
        if (gb) gb[j] += g;
      }
      if (gx) {
        T* gxr = gx + r * static_cast<size_t>(d_in);
        for (int i = 0; i < d_in; ++i) {
          const T* wr = wv2 + static_cast<size_t>(i) * d_out;
          T acc = T(0);
          for (int j = 0; j < d_out; ++j) acc += grow[static_cast<size_t>(j)] * wr[j];
          gxr[i] += acc;
        }
      }
      if (gw) {
        for (int i = 0; i < d_in; ++i) {
          const T xi = xr[i];
          T* gwr = gw + static_cast<size_t>(i) * d_out;
          for (int j = 0; j < d_out; ++j) gwr[j] += xi * grow[static_cast<size_t>(j)];
        }
      }
    }
  });
}

// Softmax over the neighbor axis of an [N, m, d] tensor, computed with
// max-subtraction. Every (point, channel) column becomes a probability vector.
template <typename T>
Var<T> softmax_neighbor_axis(Tape<T>& tape, const Var<T>& x) {
  detail::require(x->val.rank() == 3, "softmax_neighbor_axis: expected [N,m,d]");
  const int n = x->val.dim(0), m = x->val.dim(1), d = x->val.dim(2);
  detail::require(m >= 1, "softmax_neighbor_axis: m must be >= 1");
  Tensor<T> y(x->val.shape);
  const T* xv = x->val.data();
  T* yv = y.data();
  for (int i = 0; i < n; ++i) {
    const size_t base = static_cast<size_t>(i) * m * d;
    for (int c = 0; c < d; ++c) {
      T mx = xv[base + static_cast<size_t>(c)];
      for (int j = 1; j < m; ++j) mx = std::max(mx, xv[base + static_cast<size_t>(j) * d + c]);
      T sum = T(0);
      for (int j = 0; j < m; ++j) {
        T e = std::exp(xv[base + static_cast<size_t>(j) * d + c] - mx);
        yv[base + static_cast<size_t>(j) * d + c] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (int j = 0; j < m; ++j) yv[base + static_cast<size_t>(j) * d + c] *= inv;
    }
  }
  return tape.make(std::move(y), {x}, [n, m, d](Node<T>& self) {
    Node<T>& nx = *self.parents[0];
    if (!nx.needs_grad) return;
    const T* gy = self.grad.data();
    const T* yv2 = self.val.data();
    T* gx = grad_of(nx).data();
    for (int i = 0; i < n; ++i) {
      const size_t base = static_cast<size_t>(i) * m * d;
      for (int c = 0; c < d; ++c) {
        T dot = T(0);
        for (int j = 0; j < m; ++j) {
          const size_t at = base + static_cast<size_t>(j) * d + c;
          dot += gy[at] * yv2[at];
        }
        for (int j = 0; j < m; ++j) {
          const size_t at = base + static_cast<size_t>(j) * d + c;
          gx[at] += yv2[at] * (gy[at] - dot);
        }
      }
    }
  });
}

// out[i, j, :] = features[table[i][j], :]; backward scatter-adds.
template <typename T>
Var<T> gather_rows(Tape<T>& tape, const Var<T>& features, const NeighborTable& table) {
  detail::require(features->val.rank() == 2, "gather_rows: features must be [N,d]");
  const int n = features->val.dim(0), d = features->val.dim(1);
  for (int32_t idx : table.indices)
    if (idx < 0 || idx >= n) throw std::out_of_range("gather_rows: table index out of range");

  Tensor<T> y({table.rows, table.k, d});
  const T* fv = features->val.data();
  T* yv = y.data();
  for (int i = 0; i < table.rows; ++i) {
    const int32_t* row = table.row(i);
    for (int j = 0; j < table.k; ++j) {
      const T* src = fv + static_cast<size_t>(row[j]) * d;
      T* dst = yv + (static_cast<size_t>(i) * table.k + j) * d;
      std::copy_n(src, d, dst);
    }
  }
  work::add_gathers(static_cast<int64_t>(table.rows) * table.k * d);

  auto idx = std::make_shared<std::vector<int32_t>>(table.indices);
  const int rows = table.rows, k = table.k;
  return tape.make(std::move(y), {features}, [idx, rows, k, d](Node<T>& self) {
    Node<T>& nf = *self.parents[0];
    if (!nf.needs_grad) return;
    const T* gy = self.grad.data();
    T* gf = grad_of(nf).data();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < k; ++j) {
        const T* src = gy + (static_cast<size_t>(i) * k + j) * d;
        T* dst = gf + static_cast<size_t>((*idx)[static_cast<size_t>(i) * k + j]) * d;
        for (int c = 0; c < d; ++c) dst[c] += src[c];
      }
  });
}

// out[r, :] = features[rows[r], :]; backward scatter-adds. Also serves as
// nearest-neighbor upsampling when `rows` is an up_map.
template <typename T>
Var<T> select_rows(Tape<T>& tape, const Var<T>& features, const std::vector<int32_t>& rows) {
  detail::require(features->val.rank() == 2, "select_rows: features must be [N,d]");
  const int n = features->val.dim(0), d = features->val.dim(1);
  for (int32_t r : rows)
    if (r < 0 || r >= n) throw std::out_of_range("select_rows: index out of range");
  Tensor<T> y({static_cast<int>(rows.size()), d});
  const T* fv = features->val.data();
  T* yv = y.data();
  for (size_t r = 0; r < rows.size(); ++r)
    std::copy_n(fv + static_cast<size_t>(rows[r]) * d, d, yv + r * static_cast<size_t>(d));

  auto idx = std::make_shared<std::vector<int32_t>>(rows);
  return tape.make(std::move(y), {features}, [idx, d](Node<T>& self) {
    Node<T>& nf = *self.parents[0];
    if (!nf.needs_grad) return;
    const T* gy = self.grad.data();
    T* gf = grad_of(nf).data();
    for (size_t r = 0; r < idx->size(); ++r) {
      T* dst = gf + static_cast<size_t>((*idx)[r]) * d;
      const T* src = gy + r * static_cast<size_t>(d);
      for (int c = 0; c < d; ++c) dst[c] += src[c];
    }
  });
}

// elementwise sum over the neighbor axis: [N, m, d] -> [N, d]
template <typename T>
Var<T> reduce_sum_neighbor(Tape<T>& tape, const Var<T>& x) {
  detail::require(x->val.rank() == 3, "reduce_sum_neighbor: expected [N,m,d]");
  const int n = x->val.dim(0), m = x->val.dim(1), d = x->val.dim(2);
  Tensor<T> y({n, d});
  const T* xv = x->val.data();
  T* yv = y.data();
  for (int i = 0; i < n; ++i) {
    T* yr = yv + static_cast<size_t>(i) * d;
    for (int j = 0; j < m; ++j) {
      const T* xr = xv + (static_cast<size_t>(i) * m + j) * d;
      for (int c = 0; c < d; ++c) yr[c] += xr[c];
    }
  }
  return tape.make(std::move(y), {x}, [n, m, d](Node<T>& self) {
    Node<T>& nx = *self.parents[0];
    if (!nx.needs_grad) return;
    const T* gy = self.grad.data();
    T* gx = grad_of(nx).data();
    for (int i = 0; i < n; ++i) {
      const T* gr = gy + static_cast<size_t>(i) * d;
      for (int j = 0; j < m; ++j) {
        T* xr = gx + (static_cast<size_t>(i) * m + j) * d;
        for (int c = 0; c < d; ++c) xr[c] += gr[c];
      }
    }
  });
}

// elementwise max over the neighbor axis; the gradient routes to the first
// slot attaining the maximum
template <typename T>
Var<T> reduce_max_neighbor(Tape<T>& tape, const Var<T>& x) {
  detail::require(x->val.rank() == 3, "reduce_max_neighbor: expected [N,m,d]");
  const int n = x->val.dim(0), m = x->val.dim(1), d = x->val.dim(2);
  detail::require(m >= 1, "reduce_max_neighbor: m must be >= 1");
  Tensor<T> y({n, d});
  auto argmax = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(n) * d, 0);
  const T* xv = x->val.data();
  T* yv = y.data();
  for (int i = 0; i < n; ++i) {
    T* yr = yv + static_cast<size_t>(i) * d;
    const size_t base = static_cast<size_t>(i) * m * d;
    for (int c = 0; c < d; ++c) yr[c] = xv[base + static_cast<size_t>(c)];
    for (int j = 1; j < m; ++j) {
      const T* xr = xv + base + static_cast<size_t>(j) * d;
      for (int c = 0; c < d; ++c)
        if (xr[c] > yr[c]) {
          yr[c] = xr[c];
          (*argmax)[static_cast<size_t>(i) * d + c] = static_cast<int32_t>(j);
        }
    }
  }
  return tape.make(std::move(y), {x}, [argmax, n, m, d](Node<T>& self) {
    Node<T>& nx = *self.parents[0];
    if (!nx.needs_grad) return;
    const T* gy = self.grad.data();
    T* gx = grad_of(nx).data();
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c) {
        const int j = (*argmax)[static_cast<size_t>(i) * d + c];
        gx[(static_cast<size_t>(i) * m + j) * d + c] += gy[static_cast<size_t>(i) * d + c];
      }
  });
}

// channel-axis concatenation; leading shapes must match (d1 or d2 may be 0)
template <typename T>
Var<T> concat_channels(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require(a->val.rank() == b->val.rank() && a->val.rank() >= 1, "concat_channels: rank mismatch");
  for (int i = 0; i + 1 < a->val.rank(); ++i)
    detail::require(a->val.dim(i) == b->val.dim(i), "concat_channels: leading shape mismatch");
  const int d1 = a->val.shape.back(), d2 = b->val.shape.back();
  std::vector<int> out_shape = a->val.shape;
  out_shape.back() = d1 + d2;
  const size_t rows = d1 + d2 > 0 ? Tensor<T>::numel_of(out_shape) / static_cast<size_t>(d1 + d2)
                                  : Tensor<T>::numel_of(std::vector<int>(out_shape.begin(), out_shape.end() - 1));
  Tensor<T> y(out_shape);
  const T* av = a->val.data();
  const T* bv = b->val.data();
  T* yv = y.data();
  for (size_t r = 0; r < rows; ++r) {
    std::copy_n(av + r * static_cast<size_t>(d1), d1, yv + r * static_cast<size_t>(d1 + d2));
    std::copy_n(bv + r * static_cast<size_t>(d2), d2, yv + r * static_cast<size_t>(d1 + d2) + d1);
  }
  return tape.make(std::move(y), {a, b}, [rows, d1, d2](Node<T>& self) {
    Node<T>& na = *self.parents[0];
    Node<T>& nb = *self.parents[1];
    const T* gy = self.grad.data();
    T* ga = na.needs_grad ? grad_of(na).data() : nullptr;
    T* gb = nb.needs_grad ? grad_of(nb).data() : nullptr;
    for (size_t r = 0; r < rows; ++r) {
      const T* gr = gy + r * static_cast<size_t>(d1 + d2);
      if (ga)
        for (int c = 0; c < d1; ++c) ga[r * static_cast<size_t>(d1) + c] += gr[c];
      if (gb)
        for (int c = 0; c < d2; ++c) gb[r * static_cast<size_t>(d2) + c] += gr[d1 + c];
    }
  });
}

template <typename T>
Var<T> add_residual(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require(a->val.same_shape(b->val), "add_residual: shape mismatch");
  Tensor<T> y(a->val.shape);
  for (size_t i = 0; i < y.numel(); ++i) y.v[i] = a->val.v[i] + b->val.v[i];
  return tape.make(std::move(y), {a, b}, [](Node<T>& self) {
    for (int p = 0; p < 2; ++p) {
      Node<T>& np = *self.parents[static_cast<size_t>(p)];
      if (!np.needs_grad) continue;
      T* g = grad_of(np).data();
      for (size_t i = 0; i < self.grad.numel(); ++i) g[i] += self.grad.v[i];
    }
  });
}

template <typename T>
Var<T> multiply(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require(a->val.same_shape(b->val), "multiply: shape mismatch");
  Tensor<T> y(a->val.shape);
  for (size_t i = 0; i < y.numel(); ++i) y.v[i] = a->val.v[i] * b->val.v[i];
  return tape.make(std::move(y), {a, b}, [](Node<T>& self) {
    Node<T>& na = *self.parents[0];
    Node<T>& nb = *self.parents[1];
    if (na.needs_grad) {
      T* g = grad_of(na).data();
      for (size_t i = 0; i < self.grad.numel(); ++i) g[i] += self.grad.v[i] * nb.val.v[i];
    }
    if (nb.needs_grad) {
      T* g = grad_of(nb).data();
      for (size_t i = 0; i < self.grad.numel(); ++i) g[i] += self.grad.v[i] * na.val.v[i];
    }
  });
}

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& x, T factor) {
  Tensor<T> y(x->val.shape);
  for (size_t i = 0; i < y.numel(); ++i) y.v[i] = factor * x->val.v[i];
  return tape.make(std::move(y), {x}, [factor](Node<T>& self) {
    Node<T>& nx = *self.parents[0];
    if (!nx.needs_grad) return;
    T* g = grad_of(nx).data();
    for (size_t i = 0; i < self.grad.numel(); ++i) g[i] += factor * self.grad.v[i];
  });
}

template <typename T>
Var<T> reduce_sum_all(Tape<T>& tape, const Var<T>& x) {
  Tensor<T> y({1});
  T acc = T(0);
  for (T v : x->val.v) acc += v;
  y.v[0] = acc;
  return tape.make(std::move(y), {x}, [](Node<T>& self) {
    Node<T>& nx = *self.parents[0];
    if (!nx.needs_grad) return;
    T* g = grad_of(nx).data();
    const T gy = self.grad.v[0];
    for (size_t i = 0; i < nx.val.numel(); ++i) g[i] += gy;
  });
}

// ---------------------------------------------------------------------------
// Shared per-point MLP parameters. Normalization is deliberately absent; the
// activation hook covers what the blocks need.
template <typename T>
struct MlpParams {
  Tensor<T> weight;  // [d_in, d_out]
  Tensor<T> bias;    // [d_out]
  Activation act = Activation::LeakyRelu;

  int d_in() const { return weight.dim(0); }
  int d_out() const { return weight.dim(1); }
};

template <typename T>
MlpParams<T> make_mlp(int d_in, int d_out, Activation act, RandomStream& rng) {
  MlpParams<T> p;
  p.weight = Tensor<T>({d_in, d_out});
  p.bias = Tensor<T>({d_out});
  p.act = act;
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max(1, d_in + d_out)));
  for (auto& w : p.weight.v) w = static_cast<T>(rng.uniform(-bound, bound));
  return p;
}

// Binds parameter tensors to tape leaves for one forward/backward pass.
// Binding the same tensor twice yields the same leaf, so gradients of shared
// parameters accumulate.
template <typename T>
class ParamMap {
 public:
  Var<T> var(Tape<T>& tape, Tensor<T>& t) {
    auto it = bound_.find(&t);
    if (it != bound_.end()) return it->second;
    Var<T> v = tape.leaf(t, true);
    bound_.emplace(&t, v);
    entries_.emplace_back(&t, v);
    return v;
  }

  // pre-register a substitute leaf for one parameter tensor (used by the
  // gradient checker to perturb a single tensor)
  void bind(const Tensor<T>& t, Var<T> v) {
    bound_.emplace(&t, v);
    entries_.emplace_back(const_cast<Tensor<T>*>(&t), std::move(v));
  }

  const std::vector<std::pair<Tensor<T>*, Var<T>>>& entries() const { return entries_; }

 private:
  std::unordered_map<const Tensor<T>*, Var<T>> bound_;
  std::vector<std::pair<Tensor<T>*, Var<T>>> entries_;
};

template <typename T>
Var<T> apply_mlp(Tape<T>& tape, ParamMap<T>& pm, const Var<T>& x, MlpParams<T>& p) {
  return linear_pointwise(tape, x, pm.var(tape, p.weight), pm.var(tape, p.bias), p.act);
}

// ---------------------------------------------------------------------------
// Central-difference gradient verification. Returns the max over coordinates
// of |analytic - fd| / max(1, |analytic|).
template <typename T>
T grad_check(const std::function<Var<T>(Tape<T>&, const Var<T>&)>& f, const Tensor<T>& x0, T eps = T(1e-5)) {
  Tape<T> tape;
  Var<T> x = tape.leaf(x0, true);
  Var<T> loss = f(tape, x);
  if (loss->val.numel() != 1) throw std::invalid_argument("grad_check: function must produce a scalar");
  tape.backward(loss);
  Tensor<T> analytic = x->grad.v.empty() ? Tensor<T>(x0.shape) : x->grad;

  auto eval = [&](const Tensor<T>& xt) {
    Tape<T> t;
    t.recording = false;
    Var<T> xv = t.leaf(xt, false);
    T out = f(t, xv)->val.v[0];
    if (!std::isfinite(static_cast<double>(out))) throw std::runtime_error("grad_check: NaN encountered");
    return out;
  };

  Tensor<T> xp = x0;
  T max_err = T(0);
  for (size_t i = 0; i < x0.numel(); ++i) {
    xp.v[i] = x0.v[i] + eps;
    const T fp = eval(xp);
    xp.v[i] = x0.v[i] - eps;
    const T fm = eval(xp);
    xp.v[i] = x0.v[i];
    const T fd = (fp - fm) / (2 * eps);
    const T denom = std::max(T(1), std::abs(analytic.v[i]));
    max_err = std::max(max_err, std::abs(analytic.v[i] - fd) / denom);
  }
  return max_err;
}

}  // namespace lsnet
