#include "lsnet/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lsnet {

const char* projection_name(Projection p) {
  switch (p) {
    case Projection::Full3D: return "3d";
    case Projection::XY: return "xy";
    case Projection::XZ: return "xz";
    case Projection::YZ: return "yz";
  }
  return "?";
}

Projection projection_from_name(const std::string& name) {
  if (name == "3d" || name == "xyz") return Projection::Full3D;
  if (name == "xy") return Projection::XY;
  if (name == "xz") return Projection::XZ;
  if (name == "yz") return Projection::YZ;
  throw std::invalid_argument("unknown projection '" + name + "'");
}

int projection_dropped_axis(Projection p) {
  switch (p) {
    case Projection::Full3D: return -1;
    case Projection::XY: return 2;
    case Projection::XZ: return 1;
    case Projection::YZ: return 0;
  }
  return -1;
}

namespace {

struct ProjPoint {
  double x[3];
  int32_t index;
};

double sqdist(const double a[3], const double b[3]) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// candidate ordering: ascending distance, ties by ascending index
bool better(double d1, int32_t i1, double d2, int32_t i2) {
  return d1 < d2 || (d1 == d2 && i1 < i2);
}

// bounded result set kept as a max-heap on (dist, index)
struct KnnHeap {
  struct Entry {
    double d;
    int32_t i;
  };
  std::vector<Entry> heap;
  int cap;

  explicit KnnHeap(int k) : cap(k) { heap.reserve(static_cast<size_t>(k)); }

  static bool worse(const Entry& a, const Entry& b) { return better(b.d, b.i, a.d, a.i); }

  bool full() const { return static_cast<int>(heap.size()) == cap; }
  double worst_dist() const { return heap.front().d; }

  void offer(double d, int32_t i) {
    if (!full()) {
      heap.push_back({d, i});
      std::push_heap(heap.begin(), heap.end(), worse);
    } else if (better(d, i, heap.front().d, heap.front().i)) {
      std::pop_heap(heap.begin(), heap.end(), worse);
      heap.back() = {d, i};
      std::push_heap(heap.begin(), heap.end(), worse);
    }
  }
};

}  // namespace

struct SpatialIndex::Impl {
  struct Node {
    int axis = -1;        // -1 marks a leaf
    double split = 0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into pts
  };

  std::vector<ProjPoint> pts;
  std::vector<Node> nodes;
  Projection projection;
  int root = -1;

  static constexpr int kLeafSize = 16;

  int build(int begin, int end) {
    Node node;
    node.begin = begin;
    node.end = end;
    if (end - begin <= kLeafSize) {
      nodes.push_back(node);
      return static_cast<int>(nodes.size()) - 1;
    }
    double lo[3] = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
                    std::numeric_limits<double>::max()};
    double hi[3] = {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
                    std::numeric_limits<double>::lowest()};
    for (int i = begin; i < end; ++i)
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], pts[static_cast<size_t>(i)].x[d]);
        hi[d] = std::max(hi[d], pts[static_cast<size_t>(i)].x[d]);
      }
    int axis = 0;
    for (int d = 1; d < 3; ++d)
      if (hi[d] - lo[d] > hi[axis] - lo[axis]) axis = d;
    if (hi[axis] - lo[axis] == 0.0) {  // all points coincide under the projection
      nodes.push_back(node);
      return static_cast<int>(nodes.size()) - 1;
    }
    int mid = (begin + end) / 2;
    std::nth_element(pts.begin() + begin, pts.begin() + mid, pts.begin() + end,
                     [axis](const ProjPoint& a, const ProjPoint& b) { return a.x[axis] < b.x[axis]; });
    node.axis = axis;
    node.split = pts[static_cast<size_t>(mid)].x[axis];
    int self = static_cast<int>(nodes.size());
    nodes.push_back(node);
    int l = build(begin, mid);
    int r = build(mid, end);
    nodes[static_cast<size_t>(self)].left = l;
    nodes[static_cast<size_t>(self)].right = r;
    return self;
  }

  void search(int node_id, const double q[3], KnnHeap& heap) const {
    const Node& node = nodes[static_cast<size_t>(node_id)];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const ProjPoint& p = pts[static_cast<size_t>(i)];
        heap.offer(sqdist(q, p.x), p.index);
      }
      return;
    }
    double diff = q[node.axis] - node.split;
    int near = diff < 0 ? node.left : node.right;
    int far = diff < 0 ? node.right : node.left;
    search(near, q, heap);
    // the far side may still hold equal-distance candidates with smaller
    // indices, so prune on strict inequality only
    if (!heap.full() || diff * diff <= heap.worst_dist()) search(far, q, heap);
  }
};

SpatialIndex::SpatialIndex(const std::vector<Point3>& positions, Projection projection)
    : impl_(std::make_unique<Impl>()) {
  if (positions.empty()) throw std::invalid_argument("build_index: empty input");
  impl_->projection = projection;
  impl_->pts.resize(positions.size());
  const int dropped = projection_dropped_axis(projection);
  for (size_t i = 0; i < positions.size(); ++i) {
    ProjPoint& p = impl_->pts[i];
    for (int d = 0; d < 3; ++d) p.x[d] = positions[i][static_cast<size_t>(d)];
    if (dropped >= 0) p.x[dropped] = 0.0;
    p.index = static_cast<int32_t>(i);
  }
  impl_->root = impl_->build(0, static_cast<int>(positions.size()));
}

SpatialIndex::~SpatialIndex() = default;
SpatialIndex::SpatialIndex(SpatialIndex&&) noexcept = default;
SpatialIndex& SpatialIndex::operator=(SpatialIndex&&) noexcept = default;

int SpatialIndex::size() const { return static_cast<int>(impl_->pts.size()); }
Projection SpatialIndex::projection() const { return impl_->projection; }

void SpatialIndex::query(const Point3& query, int k, std::vector<std::pair<double, int32_t>>& out) const {
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  double q[3] = {query[0], query[1], query[2]};
  const int dropped = projection_dropped_axis(impl_->projection);
  if (dropped >= 0) q[dropped] = 0.0;

  const int avail = std::min(k, size());
  KnnHeap heap(avail);
  impl_->search(impl_->root, q, heap);

  out.resize(static_cast<size_t>(k));
  std::sort(heap.heap.begin(), heap.heap.end(),
            [](const KnnHeap::Entry& a, const KnnHeap::Entry& b) { return better(a.d, a.i, b.d, b.i); });
  for (int j = 0; j < avail; ++j) out[static_cast<size_t>(j)] = {heap.heap[static_cast<size_t>(j)].d, heap.heap[static_cast<size_t>(j)].i};
  for (int j = avail; j < k; ++j) out[static_cast<size_t>(j)] = out[static_cast<size_t>(avail - 1)];
}

SpatialIndex build_index(const std::vector<Point3>& positions, Projection projection) {
  return SpatialIndex(positions, projection);
}

NeighborTable knn(const SpatialIndex& index, const std::vector<Point3>& queries, int k) {
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  NeighborTable table;
  table.rows = static_cast<int>(queries.size());
  table.k = k;
  table.projection = index.projection();
  table.indices.resize(static_cast<size_t>(table.rows) * k);
  std::vector<std::pair<double, int32_t>> nn;
  for (int i = 0; i < table.rows; ++i) {
    index.query(queries[static_cast<size_t>(i)], k, nn);
    int32_t* row = table.indices.data() + static_cast<size_t>(i) * k;
    for (int j = 0; j < k; ++j) row[j] = nn[static_cast<size_t>(j)].second;
  }
  return table;
}

NeighborTable split_first(const NeighborTable& table, int s1) {
  if (s1 < 1 || s1 > table.k) throw std::invalid_argument("split_first: s1 out of range");
  NeighborTable out;
  out.rows = table.rows;
  out.k = s1;
  out.projection = table.projection;
  out.indices.resize(static_cast<size_t>(out.rows) * s1);
  for (int i = 0; i < table.rows; ++i)
    std::copy_n(table.row(i), s1, out.indices.data() + static_cast<size_t>(i) * s1);
  return out;
}

NeighborTable split_stride(const NeighborTable& table, int s2) {
  if (s2 < 1 || s2 > table.k) throw std::invalid_argument("split_stride: s2 out of range");
  NeighborTable out;
  out.rows = table.rows;
  out.k = stride_count(table.k, s2);
  out.projection = table.projection;
  out.indices.resize(static_cast<size_t>(out.rows) * out.k);
  for (int i = 0; i < table.rows; ++i) {
    int32_t* dst = out.indices.data() + static_cast<size_t>(i) * out.k;
    const int32_t* src = table.row(i);
    for (int j = 0, rank = 0; rank < table.k; ++j, rank += s2) dst[j] = src[rank];
  }
  return out;
}

SplitSpec default_split(int k) {
  if (k < 1) throw std::invalid_argument("default_split: k must be >= 1");
  SplitSpec spec;
  spec.s1 = std::max(1, k / 4);
  spec.s2 = std::min(4, k);
  return spec;
}

}  // namespace lsnet
