#include "lsnet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lsnet/lsap.hpp"
#include "lsnet/rng.hpp"

namespace lsnet {

const char* bench_mode_name(BenchMode m) { return m == BenchMode::Full ? "full" : "lsap"; }

BenchMode bench_mode_from_name(const std::string& name) {
  if (name == "full") return BenchMode::Full;
  if (name == "lsap") return BenchMode::Lsap;
  throw std::invalid_argument("unknown bench mode '" + name + "'");
}

WorkCounter count_work(BenchMode mode, int k, const SplitSpec& spec, int64_t n, int d) {
  if (k < 1 || n < 1 || d < 1) throw std::invalid_argument("count_work: invalid configuration");
  if (spec.s1 < 1 || spec.s1 > k || spec.s2 < 1 || spec.s2 > k)
    throw std::invalid_argument("count_work: split out of range");
  const int64_t m1 = mode == BenchMode::Full ? k : spec.s1;
  const int64_t m2 = mode == BenchMode::Full ? k : stride_count(k, spec.s2);
  WorkCounter w;
  const int64_t dd = static_cast<int64_t>(d);
  for (int64_t m : {m1, m2}) {
    w.neighbor_slots += n * m;
    w.mlp_macs += n * m * (10 * dd + 4 * dd * dd) + n * dd * dd;
    w.gathers += n * m * (dd + 3);
  }
  return w;
}

namespace {

std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    auto pos = line.find("model name");
    if (pos != std::string::npos) {
      auto colon = line.find(':');
      if (colon != std::string::npos && colon + 2 <= line.size()) return line.substr(colon + 2);
    }
  }
  return "unknown";
}

}  // namespace

std::string BenchReport::to_text() const {
  std::ostringstream out;
  out << "mode=" << bench_mode_name(mode) << "\n";
  out << "k=" << k << "\n";
  out << "n=" << n << "\n";
  out << "d=" << d << "\n";
  out << "reps=" << reps << "\n";
  out << "threads=" << threads << "\n";
  out << "median_ms=" << median_ms << "\n";
  out << "min_ms=" << min_ms << "\n";
  out << "neighbor_slots=" << work.neighbor_slots << "\n";
  out << "mlp_macs=" << work.mlp_macs << "\n";
  out << "gathers=" << work.gathers << "\n";
  out << "index_build_ms=" << index_build_ms << "\n";
  out << "hardware=" << hardware << "\n";
  return out.str();
}

BenchReport run_bench(const BenchConfig& cfg) {
  if (cfg.reps < 5) throw std::invalid_argument("run_bench: reps must be >= 5");
  if (cfg.k < 1 || cfg.n < 1 || cfg.d < 1) throw std::invalid_argument("run_bench: invalid configuration");

  SplitSpec spec = cfg.mode == BenchMode::Full ? SplitSpec{cfg.k, 1}
                   : cfg.default_spec          ? default_split(cfg.k)
                                               : cfg.spec;

  RandomStream rng(cfg.seed);
  std::vector<Point3> positions(static_cast<size_t>(cfg.n));
  const double side = std::cbrt(static_cast<double>(cfg.n)) * 0.25;
  for (auto& p : positions)
    for (int d = 0; d < 3; ++d) p[static_cast<size_t>(d)] = static_cast<float>(rng.uniform(0, side));

  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  SpatialIndex index(positions, Projection::Full3D);
  NeighborTable table = knn(index, positions, cfg.k);
  auto t1 = clock::now();

  Tensor<float> f({cfg.n, cfg.d});
  for (auto& x : f.v) x = static_cast<float>(rng.uniform(-1, 1));
  LsapParams<float> params = make_lsap_params<float>(cfg.d, cfg.d, rng);

  auto forward = [&](WorkCounter* wc) {
    Tape<float> tape;
    tape.recording = false;
    ParamMap<float> pm;
    work::Scope scope(wc);
    Var<float> fv = tape.leaf(f, false);
    Var<float> out = lsap_block(tape, pm, fv, std::span<const Point3>(positions), table, spec, params);
    return out->val.v[0];  // keep the pass observable
  };

  volatile float sink = forward(nullptr);  // warm-up, excluded from timing
  (void)sink;

  BenchReport report;
  report.mode = cfg.mode;
  report.k = cfg.k;
  report.n = cfg.n;
  report.d = cfg.d;
  report.reps = cfg.reps;
  report.threads = 1;
  report.index_build_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  report.hardware = cpu_model();

  std::vector<double> times;
  WorkCounter first;
  for (int r = 0; r < cfg.reps; ++r) {
    WorkCounter wc;
    auto a = clock::now();
    sink = forward(&wc);
    auto b = clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(b - a).count());
    if (r == 0)
      first = wc;
    else if (!(wc == first))
      throw std::runtime_error("run_bench: work counts varied across reps");
  }
  const WorkCounter expected = count_work(cfg.mode, cfg.k, spec, cfg.n, cfg.d);
  if (!(first == expected)) throw std::runtime_error("run_bench: instrumented counts disagree with closed form");
  report.work = first;

  std::sort(times.begin(), times.end());
  report.min_ms = times.front();
  report.median_ms = times[times.size() / 2];
  return report;
}

}  // namespace lsnet
