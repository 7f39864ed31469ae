#include "lsnet/cloud_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "lsnet/rng.hpp"

namespace lsnet {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'P', 'C'};

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) fail("cloud file: truncated header");
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void write_u32_le(std::ostream& out, uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x & 0xff), static_cast<unsigned char>((x >> 8) & 0xff),
                        static_cast<unsigned char>((x >> 16) & 0xff), static_cast<unsigned char>((x >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32_le(std::istream& in) {
  uint32_t u = read_u32_le(in);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

void write_f32_le(std::ostream& out, float f) {
  uint32_t u;
  std::memcpy(&u, &f, 4);
  write_u32_le(out, u);
}

// locale-independent float/int parsing
double parse_double(const std::string& tok) {
  double x = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (ec != std::errc() || p != tok.data() + tok.size()) fail("cloud file: bad numeric field '" + tok + "'");
  return x;
}

long parse_long(const std::string& tok) {
  long x = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (ec != std::errc() || p != tok.data() + tok.size()) fail("cloud file: bad integer field '" + tok + "'");
  return x;
}

std::string format_float(float x) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), static_cast<double>(x), std::chars_format::general, 9);
  if (ec != std::errc()) fail("cloud file: float formatting failed");
  return std::string(buf, p);
}

PointCloud load_ascii(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail("cloud file: malformed header (empty file)");
  std::istringstream hs(line);
  std::string tn, tc, tl, extra;
  if (!(hs >> tn >> tc >> tl)) fail("cloud file: malformed header '" + line + "'");
  if (hs >> extra) fail("cloud file: malformed header (trailing fields)");
  long n = parse_long(tn), c = parse_long(tc), l = parse_long(tl);
  if (n < 0 || c < 0 || (l != 0 && l != 1)) fail("cloud file: malformed header values");

  PointCloud cloud;
  cloud.positions.reserve(static_cast<size_t>(n));
  cloud.color_channels = static_cast<int>(c);
  cloud.colors.reserve(static_cast<size_t>(n * c));
  if (l) cloud.labels.reserve(static_cast<size_t>(n));

  const long fields = 3 + c + l;
  for (long i = 0; i < n; ++i) {
    if (!std::getline(in, line)) fail("cloud file: row count mismatch (expected " + std::to_string(n) + " rows)");
    std::istringstream rs(line);
    std::vector<std::string> toks;
    std::string t;
    while (rs >> t) toks.push_back(t);
    if (static_cast<long>(toks.size()) != fields)
      fail("cloud file: field count mismatch at row " + std::to_string(i));
    Point3 p;
    for (int d = 0; d < 3; ++d) {
      double x = parse_double(toks[static_cast<size_t>(d)]);
      if (!std::isfinite(x)) fail("cloud file: non-finite coordinate at row " + std::to_string(i));
      p[static_cast<size_t>(d)] = static_cast<float>(x);
    }
    cloud.positions.push_back(p);
    for (long j = 0; j < c; ++j) cloud.colors.push_back(static_cast<float>(parse_double(toks[static_cast<size_t>(3 + j)])));
    if (l) {
      long lab = parse_long(toks[static_cast<size_t>(3 + c)]);
      if (lab < 0 || lab > std::numeric_limits<int32_t>::max())
        fail("cloud file: label out of range at row " + std::to_string(i));
      cloud.labels.push_back(static_cast<int32_t>(lab));
    }
  }
  return cloud;
}

PointCloud load_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) fail("cloud file: malformed header (bad magic)");
  uint32_t n = read_u32_le(in);
  uint32_t c = read_u32_le(in);
  uint32_t l = read_u32_le(in);
  if (l > 1) fail("cloud file: malformed header (labels flag)");

  PointCloud cloud;
  cloud.positions.resize(n);
  cloud.color_channels = static_cast<int>(c);
  cloud.colors.resize(static_cast<size_t>(n) * c);
  if (l) cloud.labels.resize(n);

  for (uint32_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      float x = read_f32_le(in);
      if (!std::isfinite(x)) fail("cloud file: non-finite coordinate at record " + std::to_string(i));
      cloud.positions[i][static_cast<size_t>(d)] = x;
    }
    for (uint32_t j = 0; j < c; ++j) cloud.colors[static_cast<size_t>(i) * c + j] = read_f32_le(in);
    if (l) cloud.labels[i] = static_cast<int32_t>(read_u32_le(in));
  }
  return cloud;
}

}  // namespace

void validate(const PointCloud& cloud) {
  const size_t n = cloud.positions.size();
  for (const auto& p : cloud.positions)
    for (float x : p)
      if (!std::isfinite(x)) throw std::invalid_argument("point cloud: non-finite coordinate");
  if (cloud.color_channels < 0) throw std::invalid_argument("point cloud: negative color channel count");
  if (cloud.colors.size() != n * static_cast<size_t>(cloud.color_channels))
    throw std::invalid_argument("point cloud: color row count mismatch");
  if (!cloud.labels.empty() && cloud.labels.size() != n)
    throw std::invalid_argument("point cloud: label row count mismatch");
  for (int32_t l : cloud.labels)
    if (l < 0) throw std::invalid_argument("point cloud: negative label");
}

PointCloud load_cloud(const std::string& path, CloudFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cloud file: cannot open '" + path + "'");
  PointCloud cloud = format == CloudFormat::Ascii ? load_ascii(in) : load_binary(in);
  validate(cloud);
  return cloud;
}

PointCloud load_cloud_auto(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cloud file: cannot open '" + path + "'");
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.close();
  return load_cloud(path, std::memcmp(magic, kMagic, 4) == 0 ? CloudFormat::Binary : CloudFormat::Ascii);
}

void write_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format) {
  validate(cloud);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cloud file: cannot open '" + path + "' for writing");
  const int n = cloud.size();
  const int c = cloud.color_channels;
  const int l = cloud.has_labels() ? 1 : 0;
  if (format == CloudFormat::Ascii) {
    out << n << ' ' << c << ' ' << l << '\n';
    for (int i = 0; i < n; ++i) {
      out << format_float(cloud.positions[static_cast<size_t>(i)][0]) << ' '
          << format_float(cloud.positions[static_cast<size_t>(i)][1]) << ' '
          << format_float(cloud.positions[static_cast<size_t>(i)][2]);
      for (int j = 0; j < c; ++j) out << ' ' << format_float(cloud.color_row(i)[j]);
      if (l) out << ' ' << cloud.labels[static_cast<size_t>(i)];
      out << '\n';
    }
  } else {
    out.write(kMagic, 4);
    write_u32_le(out, static_cast<uint32_t>(n));
    write_u32_le(out, static_cast<uint32_t>(c));
    write_u32_le(out, static_cast<uint32_t>(l));
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < 3; ++d) write_f32_le(out, cloud.positions[static_cast<size_t>(i)][static_cast<size_t>(d)]);
      for (int j = 0; j < c; ++j) write_f32_le(out, cloud.color_row(i)[j]);
      if (l) write_u32_le(out, static_cast<uint32_t>(cloud.labels[static_cast<size_t>(i)]));
    }
  }
  if (!out) fail("cloud file: write failed for '" + path + "'");
}

PointCloud grid_sample(const PointCloud& cloud, double cell) {
  if (!(cell > 0)) throw std::invalid_argument("grid_sample: cell must be positive");
  const int n = cloud.size();
  if (n == 0) return cloud;

  double minc[3] = {cloud.positions[0][0], cloud.positions[0][1], cloud.positions[0][2]};
  for (const auto& p : cloud.positions)
    for (int d = 0; d < 3; ++d) minc[d] = std::min(minc[d], static_cast<double>(p[static_cast<size_t>(d)]));

  struct Cell {
    double pos[3] = {0, 0, 0};
    std::vector<double> color;
    std::vector<std::pair<int32_t, int>> label_counts;
    int count = 0;
  };

  auto key_of = [&](const Point3& p) {
    int64_t ix = static_cast<int64_t>(std::floor((p[0] - minc[0]) / cell));
    int64_t iy = static_cast<int64_t>(std::floor((p[1] - minc[1]) / cell));
    int64_t iz = static_cast<int64_t>(std::floor((p[2] - minc[2]) / cell));
    return std::array<int64_t, 3>{ix, iy, iz};
  };

  std::map<std::array<int64_t, 3>, Cell> cells;  // ordered for deterministic output
  const int cc = cloud.color_channels;
  for (int i = 0; i < n; ++i) {
    Cell& c = cells[key_of(cloud.positions[static_cast<size_t>(i)])];
    for (int d = 0; d < 3; ++d) c.pos[d] += cloud.positions[static_cast<size_t>(i)][static_cast<size_t>(d)];
    if (cc) {
      c.color.resize(static_cast<size_t>(cc), 0.0);
      for (int j = 0; j < cc; ++j) c.color[static_cast<size_t>(j)] += cloud.color_row(i)[j];
    }
    if (cloud.has_labels()) {
      int32_t lab = cloud.labels[static_cast<size_t>(i)];
      auto it = std::find_if(c.label_counts.begin(), c.label_counts.end(),
                             [&](const auto& kv) { return kv.first == lab; });
      if (it == c.label_counts.end())
        c.label_counts.emplace_back(lab, 1);
      else
        ++it->second;
    }
    ++c.count;
  }

  PointCloud out;
  out.color_channels = cc;
  out.positions.reserve(cells.size());
  for (const auto& [key, c] : cells) {
    Point3 p;
    for (int d = 0; d < 3; ++d) p[static_cast<size_t>(d)] = static_cast<float>(c.pos[d] / c.count);
    out.positions.push_back(p);
    for (int j = 0; j < cc; ++j) out.colors.push_back(static_cast<float>(c.color[static_cast<size_t>(j)] / c.count));
    if (cloud.has_labels()) {
      int32_t best = 0;
      int best_count = -1;
      for (const auto& [lab, cnt] : c.label_counts)
        if (cnt > best_count || (cnt == best_count && lab < best)) {
          best = lab;
          best_count = cnt;
        }
      out.labels.push_back(best);
    }
  }
  return out;
}

PointBlock sample_block(const PointCloud& cloud, int center_index, int n) {
  const int total = cloud.size();
  if (center_index < 0 || center_index >= total) throw std::invalid_argument("sample_block: invalid center index");
  if (n < 1) throw std::invalid_argument("sample_block: block size must be >= 1");

  const Point3& c = cloud.positions[static_cast<size_t>(center_index)];
  std::vector<std::pair<double, int32_t>> order(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) {
    const Point3& p = cloud.positions[static_cast<size_t>(i)];
    double dx = static_cast<double>(p[0]) - c[0];
    double dy = static_cast<double>(p[1]) - c[1];
    double dz = static_cast<double>(p[2]) - c[2];
    order[static_cast<size_t>(i)] = {dx * dx + dy * dy + dz * dz, i};
  }
  const int take = std::min(n, total);
  std::partial_sort(order.begin(), order.begin() + take, order.end());

  std::vector<int32_t> idx(static_cast<size_t>(n));
  for (int i = 0; i < take; ++i) idx[static_cast<size_t>(i)] = order[static_cast<size_t>(i)].second;
  if (take < n) {
    // pad by resampling; seeded from the query so results are reproducible
    RandomStream rng(RandomStream::mix(static_cast<uint64_t>(center_index), static_cast<uint64_t>(n)));
    for (int i = take; i < n; ++i) idx[static_cast<size_t>(i)] = idx[static_cast<size_t>(rng.uniform_int(0, take - 1))];
  }

  PointBlock block;
  block.block_size = n;
  block.origin_indices = idx;
  block.cloud.color_channels = cloud.color_channels;
  block.cloud.positions.reserve(static_cast<size_t>(n));
  for (int32_t i : idx) {
    block.cloud.positions.push_back(cloud.positions[static_cast<size_t>(i)]);
    for (int j = 0; j < cloud.color_channels; ++j) block.cloud.colors.push_back(cloud.color_row(i)[j]);
    if (cloud.has_labels()) block.cloud.labels.push_back(cloud.labels[static_cast<size_t>(i)]);
  }
  return block;
}

}  // namespace lsnet
