// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Dense row-major tensors (f64 in memory) and the JTNS tensor-file format:
//   magic "JTNS" | version u32 | dtype u8 (0=f32, 1=f64) | ndim u8 |
//   dims u64[ndim] | payload (row-major, little-endian)
// f32 is the interchange default; f64 is used where bit-exact round trips of
// training state matter (adapters, checkpoints).

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace jt {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts unsupported");

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> v;  // row-major, dims product elements

  std::uint64_t size() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  // Rank-4 accessors: dims = (d0,d1,d2,d3), index row-major.
  double& at4(std::uint64_t a, std::uint64_t b, std::uint64_t c,
              std::uint64_t d) {
    return v[((a * dims[1] + b) * dims[2] + c) * dims[3] + d];
  }
  double at4(std::uint64_t a, std::uint64_t b, std::uint64_t c,
             std::uint64_t d) const {
    return v[((a * dims[1] + b) * dims[2] + c) * dims[3] + d];
  }
};

inline Tensor make_tensor(std::vector<std::uint64_t> dims) {
  Tensor t;
  t.dims = std::move(dims);
  t.v.assign(static_cast<std::size_t>(t.size()), 0.0);
  return t;
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit. Used for content checksums and seed derivation; stability
// across builds matters more than collision resistance here.

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

// Checksum of the in-memory f64 payload (shape included so transposes differ).
inline std::uint64_t tensor_checksum(const Tensor& t) {
  std::uint64_t h = fnv1a64(t.dims.data(), t.dims.size() * sizeof(std::uint64_t));
  return fnv1a64(t.v.data(), t.v.size() * sizeof(double), h);
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Tensor file I/O.

namespace detail {

constexpr char kMagic[4] = {'J', 'T', 'N', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
  T x{};
  if (!is.read(reinterpret_cast<char*>(&x), sizeof(T)))
    throw std::runtime_error("tensor file truncated reading " + what);
  return x;
}

}  // namespace detail

inline void write_tensor(const std::filesystem::path& path, const Tensor& t,
                         DType dtype = DType::f32) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os.write(detail::kMagic, 4);
  detail::write_pod(os, detail::kVersion);
  detail::write_pod(os, static_cast<std::uint8_t>(dtype));
  if (t.dims.size() > 255)
    throw std::runtime_error("tensor rank exceeds format limit");
  detail::write_pod(os, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) detail::write_pod(os, d);
  if (dtype == DType::f32) {
    std::vector<float> buf(t.v.begin(), t.v.end());
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    os.write(reinterpret_cast<const char*>(t.v.data()),
             static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, detail::kMagic, 4) != 0)
    throw std::runtime_error("bad tensor magic in " + path.string());
  auto version = detail::read_pod<std::uint32_t>(is, "version");
  if (version != detail::kVersion)
    throw std::runtime_error("unsupported tensor version in " + path.string());
  auto dtype = detail::read_pod<std::uint8_t>(is, "dtype");
  if (dtype > 1)
    throw std::runtime_error("unsupported dtype in " + path.string());
  auto ndim = detail::read_pod<std::uint8_t>(is, "ndim");
  Tensor t;
  t.dims.resize(ndim);
  std::uint64_t n = 1;
  for (auto& d : t.dims) {
    d = detail::read_pod<std::uint64_t>(is, "dims");
    if (d != 0 && n > (std::uint64_t(1) << 40) / d)
      throw std::runtime_error("tensor too large in " + path.string());
    n *= d;
  }
  t.v.resize(static_cast<std::size_t>(n));
  if (dtype == 0) {
    std::vector<float> buf(static_cast<std::size_t>(n));
    if (n && !is.read(reinterpret_cast<char*>(buf.data()),
                      static_cast<std::streamsize>(n * sizeof(float))))
      throw std::runtime_error("tensor payload truncated in " + path.string());
    std::copy(buf.begin(), buf.end(), t.v.begin());
  } else {
    if (n && !is.read(reinterpret_cast<char*>(t.v.data()),
                      static_cast<std::streamsize>(n * sizeof(double))))
      throw std::runtime_error("tensor payload truncated in " + path.string());
  }
  // Trailing junk means the file is not what we think it is.
  char extra;
  if (is.read(&extra, 1))
    throw std::runtime_error("trailing bytes in tensor file " + path.string());
  return t;
}

}  // namespace jt
