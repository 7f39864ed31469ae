#include "lsnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lsnet/rng.hpp"

namespace lsnet {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

struct Box {
  double cx, cy, hw, hl, h;  // center, half extents, height
};

struct Tree {
  double cx, cy, canopy_z, canopy_r, stem_r;
};

struct Pole {
  double cx, cy, h, r;
};

}  // namespace

SyntheticScene synth_scene(const SynthSpec& spec) {
  if (spec.n_points < 100) throw std::invalid_argument("synth_scene: need at least 100 points");
  if (!(spec.extent > 1.0)) throw std::invalid_argument("synth_scene: extent must exceed 1 m");
  double psum = 0;
  for (double p : spec.proportions) {
    if (p < 0) throw std::invalid_argument("synth_scene: negative class proportion");
    psum += p;
  }
  if (!(psum > 0)) throw std::invalid_argument("synth_scene: proportions sum to zero");

  RandomStream rng(spec.seed);
  const double e = spec.extent;

  // per-class point budgets: floor + largest-remainder, deterministic
  std::array<int, 4> count{};
  std::array<double, 4> frac{};
  int assigned = 0;
  for (int c = 0; c < 4; ++c) {
    double want = spec.n_points * spec.proportions[static_cast<size_t>(c)] / psum;
    count[static_cast<size_t>(c)] = static_cast<int>(std::floor(want));
    frac[static_cast<size_t>(c)] = want - count[static_cast<size_t>(c)];
    assigned += count[static_cast<size_t>(c)];
  }
  while (assigned < spec.n_points) {
    int best = 0;
    for (int c = 1; c < 4; ++c)
      if (frac[static_cast<size_t>(c)] > frac[static_cast<size_t>(best)]) best = c;
    ++count[static_cast<size_t>(best)];
    frac[static_cast<size_t>(best)] = -1;
    ++assigned;
  }

  const int n_boxes = std::max(1, static_cast<int>(std::lround(e * e / 150.0)));
  const int n_trees = std::max(2, static_cast<int>(std::lround(e * e / 70.0)));
  const int n_poles = std::max(2, static_cast<int>(std::lround(e * e / 90.0)));

  std::vector<Box> boxes;
  for (int i = 0; i < n_boxes; ++i)
    boxes.push_back({rng.uniform(0.15 * e, 0.85 * e), rng.uniform(0.15 * e, 0.85 * e),
                     rng.uniform(1.5, 3.0), rng.uniform(1.5, 3.0), rng.uniform(3.0, 8.0)});
  std::vector<Tree> trees;
  for (int i = 0; i < n_trees; ++i)
    trees.push_back({rng.uniform(0.05 * e, 0.95 * e), rng.uniform(0.05 * e, 0.95 * e),
                     rng.uniform(2.5, 4.5), rng.uniform(0.8, 1.6), rng.uniform(0.04, 0.08)});
  std::vector<Pole> poles;
  for (int i = 0; i < n_poles; ++i)
    poles.push_back({rng.uniform(0.05 * e, 0.95 * e), rng.uniform(0.05 * e, 0.95 * e),
                     rng.uniform(3.0, 6.0), rng.uniform(0.03, 0.06)});

  SyntheticScene scene;
  scene.seed = spec.seed;
  PointCloud& cloud = scene.cloud;
  cloud.positions.reserve(static_cast<size_t>(spec.n_points));
  cloud.labels.reserve(static_cast<size_t>(spec.n_points));

  auto push = [&](double x, double y, double z, int32_t label) {
    cloud.positions.push_back({static_cast<float>(x), static_cast<float>(y), static_cast<float>(z)});
    cloud.labels.push_back(label);
  };

  for (int i = 0; i < count[synth_class::kGround]; ++i)
    push(rng.uniform(0, e), rng.uniform(0, e), 0.02 * rng.normal(), synth_class::kGround);

  for (int i = 0; i < count[synth_class::kBuilding]; ++i) {
    const Box& b = boxes[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(boxes.size()) - 1))];
    // faces weighted by area: 4 walls then the roof
    const double wall_x = 2.0 * (2 * b.hl) * b.h;  // two walls normal to x
    const double wall_y = 2.0 * (2 * b.hw) * b.h;
    const double roof = (2 * b.hw) * (2 * b.hl);
    double pick = rng.uniform(0, wall_x + wall_y + roof);
    double x, y, z;
    if (pick < wall_x) {
      x = b.cx + (rng.uniform_int(0, 1) ? b.hw : -b.hw);
      y = b.cy + rng.uniform(-b.hl, b.hl);
      z = rng.uniform(0.0, b.h);
    } else if (pick < wall_x + wall_y) {
      x = b.cx + rng.uniform(-b.hw, b.hw);
      y = b.cy + (rng.uniform_int(0, 1) ? b.hl : -b.hl);
      z = rng.uniform(0.0, b.h);
    } else {
      x = b.cx + rng.uniform(-b.hw, b.hw);
      y = b.cy + rng.uniform(-b.hl, b.hl);
      z = b.h;
    }
    push(x, y, z, synth_class::kBuilding);
  }

  for (int i = 0; i < count[synth_class::kTree]; ++i) {
    const Tree& t = trees[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(trees.size()) - 1))];
    if (rng.uniform() < 0.85) {  // canopy shell
      double u = rng.uniform(), v = rng.uniform();
      double theta = kTau * u;
      double cosphi = 2 * v - 1;
      double sinphi = std::sqrt(std::max(0.0, 1 - cosphi * cosphi));
      double r = t.canopy_r * std::cbrt(rng.uniform(0.3, 1.0));
      push(t.cx + r * sinphi * std::cos(theta), t.cy + r * sinphi * std::sin(theta),
           t.canopy_z + r * cosphi, synth_class::kTree);
    } else {  // stem, locally pole-like
      double a = kTau * rng.uniform();
      double r = t.stem_r * std::sqrt(rng.uniform());
      push(t.cx + r * std::cos(a), t.cy + r * std::sin(a),
           rng.uniform(0.0, t.canopy_z - 0.5 * t.canopy_r), synth_class::kTree);
    }
  }

  for (int i = 0; i < count[synth_class::kPole]; ++i) {
    const Pole& p = poles[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(poles.size()) - 1))];
    double a = kTau * rng.uniform();
    double r = p.r * std::sqrt(rng.uniform());
    push(p.cx + r * std::cos(a), p.cy + r * std::sin(a), rng.uniform(0.0, p.h), synth_class::kPole);
  }

  return scene;
}

}  // namespace lsnet
