#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "lsnet/fma.hpp"
#include "lsnet/neighbors.hpp"

namespace lsnet {

// Encoder/decoder layout. Defaults are the desk-scale configuration; the
// widths double per level while the resolution drops by `ratio`.
struct NetworkConfig {
  int num_classes = 4;
  int input_channels = 3;  // xyz, plus color channels when present
  struct Level {
    int d_out = 32;
    int k = 16;
    int ratio = 4;
  };
  std::vector<Level> levels = {{32, 16, 4}, {64, 16, 4}, {128, 16, 4}, {256, 16, 4}};
  std::vector<Projection> branches = {Projection::XY, Projection::Full3D};
  PoolMode fma_pool = PoolMode::Max;
  int head_hidden = 64;
  int block_size = 4096;

  void validate() const;
};

enum class Precision { F32, F64 };

struct TrainConfig {
  int epochs = 100;
  int batch_size = 4;
  double lr0 = 0.01;
  double lr_decay = 0.95;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 1;
  Precision precision = Precision::F32;
  int steps_per_epoch = 0;      // 0: derived from cloud size / block size
  double early_stop_miou = 0;   // 0: disabled
  bool augment_rotation = false;
  double augment_jitter = 0;    // meters, 0 disables

  double lr_at(int epoch) const;  // lr0 * lr_decay^epoch
};

// File-level run description: data paths, outputs, network and training
// settings, parsed from line-oriented `key=value` text with dotted sections.
struct RunConfig {
  std::string data_path;
  std::string out_metrics;
  std::string out_checkpoint;
  std::string out_state;
  std::string out_preds;
  std::string out_labels;
  std::string resume_state;
  NetworkConfig net;
  TrainConfig train;
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text);
std::string serialize_run_config(const RunConfig& cfg);

}  // namespace lsnet
