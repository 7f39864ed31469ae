#pragma once
#include <cstdint>
#include <string>

#include "lsnet/neighbors.hpp"
#include "lsnet/workcount.hpp"

namespace lsnet {

// "full" is the no-split baseline: two consecutive full-k attention-pooling
// rounds with the same MLP widths, so the split schedule is the only thing
// the comparison varies.
enum class BenchMode { Full, Lsap };

const char* bench_mode_name(BenchMode m);
BenchMode bench_mode_from_name(const std::string& name);

// Closed-form work of one block forward at feature width d (equal input and
// output width, so no shortcut projection):
//   per round r with m_r neighbor slots:
//     slots   += N * m_r
//     macs    += N * m_r * (10d + 4d^2) + N * d^2
//     gathers += N * m_r * (d + 3)
// full mode uses m_r = k in both rounds; lsap uses s1 and ceil(k/s2).
WorkCounter count_work(BenchMode mode, int k, const SplitSpec& spec, int64_t n, int d);

struct BenchConfig {
  BenchMode mode = BenchMode::Lsap;
  int k = 25;
  int n = 16384;
  int d = 64;
  int reps = 5;
  uint64_t seed = 1;
  SplitSpec spec;        // ignored in full mode
  bool default_spec = true;  // derive spec from k
};

struct BenchReport {
  BenchMode mode = BenchMode::Lsap;
  int k = 0, n = 0, d = 0, reps = 0;
  int threads = 1;
  double median_ms = 0;
  double min_ms = 0;
  double index_build_ms = 0;
  WorkCounter work;
  std::string hardware;

  std::string to_text() const;  // stable `key=value` lines
};

// Seeded random cloud, one warm-up pass excluded from timing, median over
// reps. Instrumented counts are identical across reps and must equal
// count_work exactly.
BenchReport run_bench(const BenchConfig& cfg);

}  // namespace lsnet
