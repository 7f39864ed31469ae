#pragma once
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <unordered_map>

#include "lsnet/checkpoint.hpp"
#include "lsnet/metrics.hpp"
#include "lsnet/network.hpp"
#include "lsnet/optimizer.hpp"

namespace lsnet {

struct EpochRow {
  int epoch = 0;  // 1-based in the log
  double lr = 0;
  double loss = 0;
  double oa = 0;
  double miou = 0;
  std::vector<double> iou;
};

template <typename T>
struct TrainResult {
  LsnetParams<T> params;
  AdamState<T> adam;
  std::vector<EpochRow> history;
  int epochs_run = 0;
};

inline std::string format_metric(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

inline std::string metrics_csv_header(int num_classes) {
  std::string h = "epoch,lr,loss,oa,miou";
  for (int c = 0; c < num_classes; ++c) h += ",iou_" + std::to_string(c);
  return h + "\n";
}

inline std::string metrics_csv_row(const EpochRow& row) {
  std::string s = std::to_string(row.epoch) + "," + format_metric(row.lr) + "," + format_metric(row.loss) + "," +
                  format_metric(row.oa) + "," + format_metric(row.miou);
  for (double x : row.iou) s += "," + format_metric(x);
  return s + "\n";
}

namespace detail_train {

// rotation about the vertical axis plus coordinate jitter
inline void augment_block(PointBlock& block, const TrainConfig& cfg, RandomStream& rng) {
  if (!cfg.augment_rotation && cfg.augment_jitter <= 0) return;
  double c = 1, s = 0;
  if (cfg.augment_rotation) {
    const double a = rng.uniform(0, 6.283185307179586);
    c = std::cos(a);
    s = std::sin(a);
  }
  for (Point3& p : block.cloud.positions) {
    if (cfg.augment_rotation) {
      const double x = p[0], y = p[1];
      p[0] = static_cast<float>(c * x - s * y);
      p[1] = static_cast<float>(s * x + c * y);
    }
    if (cfg.augment_jitter > 0)
      for (int d = 0; d < 3; ++d)
        p[static_cast<size_t>(d)] += static_cast<float>(cfg.augment_jitter * rng.normal());
  }
}

}  // namespace detail_train

// One optimizer step per `batch_size` blocks, gradients averaged across the
// batch. Verification mode (T = double) is single-threaded and bit
// deterministic under a fixed seed; every random draw derives from
// (seed, epoch).
template <typename T>
TrainResult<T> train(const PointCloud& cloud, const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
                     const std::string& resume_state = "",
                     const std::function<void(const EpochRow&)>& on_epoch = nullptr) {
  if (cloud.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (!cloud.has_labels()) throw std::invalid_argument("train: dataset has no labels");
  net_cfg.validate();

  std::vector<int64_t> histogram(static_cast<size_t>(net_cfg.num_classes), 0);
  for (int32_t l : cloud.labels) {
    if (l < 0 || l >= net_cfg.num_classes) throw std::invalid_argument("train: label out of class range");
    ++histogram[static_cast<size_t>(l)];
  }
  const std::vector<T> weights = class_weights<T>(histogram);

  TrainResult<T> result;
  result.params = make_lsnet_params<T>(net_cfg, train_cfg.seed);
  std::vector<Tensor<T>*> params;
  collect_params(result.params, params);
  result.adam = AdamState<T>::init(params);
  std::unordered_map<const Tensor<T>*, size_t> param_slot;
  for (size_t t = 0; t < params.size(); ++t) param_slot.emplace(params[t], t);

  int start_epoch = 0;
  if (!resume_state.empty()) start_epoch = load_train_state(resume_state, params, result.adam);

  const AdamHyper hp{train_cfg.beta1, train_cfg.beta2, train_cfg.adam_eps};
  const int steps = train_cfg.steps_per_epoch > 0
                        ? train_cfg.steps_per_epoch
                        : std::max(1, cloud.size() / net_cfg.block_size);

  for (int epoch = start_epoch; epoch < train_cfg.epochs; ++epoch) {
    const double lr = train_cfg.lr_at(epoch);
    RandomStream rng(RandomStream::mix(train_cfg.seed, 0xE50C0000ULL + static_cast<uint64_t>(epoch)));
    ConfusionMatrix cm(net_cfg.num_classes);
    double loss_sum = 0;

    for (int step = 0; step < steps; ++step) {
      std::vector<Tensor<T>> grad_accum;
      grad_accum.reserve(params.size());
      for (Tensor<T>* p : params) grad_accum.emplace_back(p->shape);
      double step_loss = 0;

      for (int b = 0; b < train_cfg.batch_size; ++b) {
        const int center = rng.uniform_int(0, cloud.size() - 1);
        PointBlock block = sample_block(cloud, center, net_cfg.block_size);
        detail_train::augment_block(block, train_cfg, rng);
        const uint64_t ds_seed = rng.next_u64();

        Tape<T> tape;
        ParamMap<T> pm;
        Var<T> logits = lsnet_forward(tape, pm, block, net_cfg, result.params, ds_seed);
        Var<T> loss = weighted_cross_entropy(tape, logits, block.cloud.labels, weights);
        tape.backward(loss);

        const T inv_batch = T(1) / static_cast<T>(train_cfg.batch_size);
        for (const auto& [tensor, var] : pm.entries()) {
          if (var->grad.v.empty()) continue;
          const auto slot = param_slot.find(tensor);
          if (slot == param_slot.end()) continue;
          Tensor<T>& acc = grad_accum[slot->second];
          for (size_t i = 0; i < acc.numel(); ++i) acc.v[i] += inv_batch * var->grad.v[i];
        }
        step_loss += static_cast<double>(loss->val.v[0]) / train_cfg.batch_size;

        const std::vector<int32_t> preds = argmax_rows(logits->val);
        for (size_t i = 0; i < preds.size(); ++i)
          cm.add(block.cloud.labels[i], preds[i]);
      }

      adam_step(params, grad_accum, result.adam, lr, hp);
      loss_sum += step_loss;
    }

    const EvalResult ev = evaluate(cm);
    EpochRow row;
    row.epoch = epoch + 1;
    row.lr = lr;
    row.loss = loss_sum / steps;
    row.oa = ev.oa;
    row.miou = ev.miou;
    row.iou = ev.iou;
    result.history.push_back(row);
    result.epochs_run = epoch + 1;
    if (on_epoch) on_epoch(row);
    if (train_cfg.early_stop_miou > 0 && ev.miou >= train_cfg.early_stop_miou) break;
  }
  return result;
}

// Deterministic whole-cloud inference: greedily cover the cloud with blocks
// centered on the first not-yet-predicted point; each point takes the
// prediction from the first block that contains it.
template <typename T>
std::vector<int32_t> predict_cloud(const PointCloud& cloud, const NetworkConfig& cfg, LsnetParams<T>& params) {
  const int n = cloud.size();
  std::vector<int32_t> preds(static_cast<size_t>(n), -1);
  int cursor = 0;
  while (cursor < n) {
    if (preds[static_cast<size_t>(cursor)] >= 0) {
      ++cursor;
      continue;
    }
    PointBlock block = sample_block(cloud, cursor, cfg.block_size);
    Tape<T> tape;
    tape.recording = false;
    ParamMap<T> pm;
    Var<T> logits = lsnet_forward(tape, pm, block, cfg, params, /*downsample_seed=*/0);
    const std::vector<int32_t> block_preds = argmax_rows(logits->val);
    for (size_t i = 0; i < block.origin_indices.size(); ++i) {
      const int32_t src = block.origin_indices[i];
      if (preds[static_cast<size_t>(src)] < 0) preds[static_cast<size_t>(src)] = block_preds[i];
    }
  }
  return preds;
}

}  // namespace lsnet
