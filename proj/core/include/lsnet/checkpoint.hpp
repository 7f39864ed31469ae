#pragma once
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsnet/optimizer.hpp"
#include "lsnet/tensor.hpp"

namespace lsnet {

// Parameter checkpoint, portable across implementations:
//   magic "LSWT", little-endian u32 tensor count, then per tensor a u32 rank,
//   `rank` u32 dims, and the raw little-endian f32 values.
namespace detail_io {

inline void put_u32(std::ostream& out, uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x & 0xff), static_cast<unsigned char>((x >> 8) & 0xff),
                        static_cast<unsigned char>((x >> 16) & 0xff), static_cast<unsigned char>((x >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 | static_cast<uint32_t>(b[2]) << 16 |
         static_cast<uint32_t>(b[3]) << 24;
}

inline void put_u64(std::ostream& out, uint64_t x) {
  put_u32(out, static_cast<uint32_t>(x & 0xffffffffULL));
  put_u32(out, static_cast<uint32_t>(x >> 32));
}

inline uint64_t get_u64(std::istream& in) {
  uint64_t lo = get_u32(in);
  uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

inline void put_f32(std::ostream& out, float f) {
  uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(out, u);
}

inline float get_f32(std::istream& in) {
  uint32_t u = get_u32(in);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

inline void put_f64(std::ostream& out, double d) {
  uint64_t u;
  std::memcpy(&u, &d, 8);
  put_u64(out, u);
}

inline double get_f64(std::istream& in) {
  uint64_t u = get_u64(in);
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}

template <typename T>
void put_values(std::ostream& out, const Tensor<T>& t, bool as_f64) {
  for (T x : t.v) {
    if (as_f64)
      put_f64(out, static_cast<double>(x));
    else
      put_f32(out, static_cast<float>(x));
  }
}

template <typename T>
void get_values(std::istream& in, Tensor<T>& t, bool as_f64) {
  for (T& x : t.v) x = as_f64 ? static_cast<T>(get_f64(in)) : static_cast<T>(get_f32(in));
}

}  // namespace detail_io

template <typename T>
void save_checkpoint(const std::string& path, const std::vector<Tensor<T>*>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out.write("LSWT", 4);
  detail_io::put_u32(out, static_cast<uint32_t>(params.size()));
  for (const Tensor<T>* t : params) {
    detail_io::put_u32(out, static_cast<uint32_t>(t->shape.size()));
    for (int d : t->shape) detail_io::put_u32(out, static_cast<uint32_t>(d));
    detail_io::put_values(out, *t, false);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

template <typename T>
void load_checkpoint(const std::string& path, const std::vector<Tensor<T>*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "LSWT", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  const uint32_t count = detail_io::get_u32(in);
  if (count != params.size()) throw std::runtime_error("checkpoint: tensor count mismatch");
  for (Tensor<T>* t : params) {
    const uint32_t rank = detail_io::get_u32(in);
    if (rank != t->shape.size()) throw std::runtime_error("checkpoint: tensor rank mismatch");
    for (int d : t->shape)
      if (detail_io::get_u32(in) != static_cast<uint32_t>(d))
        throw std::runtime_error("checkpoint: tensor shape mismatch");
    detail_io::get_values(in, *t, false);
  }
}

// Training resume state (internal format): native-precision parameters and
// optimizer moments, so an interrupted verification-mode run continues
// bit-exactly.
template <typename T>
void save_train_state(const std::string& path, const std::vector<Tensor<T>*>& params, const AdamState<T>& adam,
                      int next_epoch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("train state: cannot open '" + path + "' for writing");
  const bool wide = sizeof(T) == 8;
  out.write("LSTS", 4);
  detail_io::put_u32(out, 1);  // version
  detail_io::put_u32(out, wide ? 1 : 0);
  detail_io::put_u32(out, static_cast<uint32_t>(next_epoch));
  detail_io::put_u64(out, static_cast<uint64_t>(adam.step));
  detail_io::put_u32(out, static_cast<uint32_t>(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    detail_io::put_values(out, *params[i], wide);
    detail_io::put_values(out, adam.m[i], wide);
    detail_io::put_values(out, adam.v[i], wide);
  }
  if (!out) throw std::runtime_error("train state: write failed for '" + path + "'");
}

template <typename T>
int load_train_state(const std::string& path, const std::vector<Tensor<T>*>& params, AdamState<T>& adam) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("train state: cannot open '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "LSTS", 4) != 0)
    throw std::runtime_error("train state: bad magic in '" + path + "'");
  if (detail_io::get_u32(in) != 1) throw std::runtime_error("train state: unsupported version");
  const bool wide = detail_io::get_u32(in) == 1;
  if (wide != (sizeof(T) == 8)) throw std::runtime_error("train state: precision mismatch");
  const int next_epoch = static_cast<int>(detail_io::get_u32(in));
  adam.step = static_cast<int64_t>(detail_io::get_u64(in));
  if (detail_io::get_u32(in) != params.size()) throw std::runtime_error("train state: tensor count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    detail_io::get_values(in, *params[i], wide);
    detail_io::get_values(in, adam.m[i], wide);
    detail_io::get_values(in, adam.v[i], wide);
  }
  return next_epoch;
}

}  // namespace lsnet
