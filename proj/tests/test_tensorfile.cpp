// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Tensor container, FNV-1a checksums, and the binary tensor file format.
// Checksum oracles are the published FNV-1a 64-bit test vectors; round-trip
// checks require bit-exact payloads.

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "jointtuner/rng.hpp"
#include "jointtuner/tensor.hpp"

using namespace jt;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path d = fs::temp_directory_path() / "jt-tensorfile-test";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("fnv1a64 matches published test vectors") {
  // Offset basis: hash of the empty string.
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);
  // Chaining: hashing "ab" equals hashing "b" seeded with hash("a").
  CHECK(fnv1a64("b", 1, fnv1a64("a", 1)) == fnv1a64("ab", 2));
}

TEST_CASE("tensor_checksum distinguishes payload and shape") {
  Tensor a = make_tensor({2, 3});
  for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] = double(i);
  Tensor b = a;
  CHECK(tensor_checksum(a) == tensor_checksum(b));
  b.v[4] = std::nextafter(b.v[4], 5.0);  // one-ulp nudge changes the hash
  CHECK(tensor_checksum(a) != tensor_checksum(b));

  Tensor c = a;
  c.dims = {3, 2};  // same payload, different shape
  CHECK(tensor_checksum(a) != tensor_checksum(c));
}

TEST_CASE("hex64 is fixed-width lowercase hex") {
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xcbf29ce484222325ull) == "cbf29ce484222325");
}

TEST_CASE("f64 tensor files round trip bit-exactly") {
  fs::path p = temp_dir() / "roundtrip.jtns";
  Tensor t = make_tensor({3, 2, 4, 5});
  Rng rng(7);
  rng.fill_normal(t.v);
  t.v[0] = 0.1 + 0.2;  // not representable exactly; must survive untouched
  write_tensor(p, t, DType::f64);
  Tensor u = read_tensor(p);
  REQUIRE(u.dims == t.dims);
  REQUIRE(u.v.size() == t.v.size());
  CHECK(std::memcmp(u.v.data(), t.v.data(), t.v.size() * sizeof(double)) == 0);
  CHECK(tensor_checksum(u) == tensor_checksum(t));
}

TEST_CASE("f32 tensor files round the payload to float") {
  fs::path p = temp_dir() / "f32.jtns";
  Tensor t = make_tensor({4});
  t.v = {1.0, 0.1, -2.5, 3.14159265358979};
  write_tensor(p, t, DType::f32);
  Tensor u = read_tensor(p);
  REQUIRE(u.dims == t.dims);
  for (std::size_t i = 0; i < t.v.size(); ++i)
    CHECK(u.v[i] == double(float(t.v[i])));
}

TEST_CASE("zero-dimensional and empty tensors round trip") {
  fs::path p = temp_dir() / "empty.jtns";
  Tensor t = make_tensor({0, 3});
  write_tensor(p, t, DType::f64);
  Tensor u = read_tensor(p);
  CHECK(u.dims == t.dims);
  CHECK(u.v.empty());
}

TEST_CASE("corrupt tensor files are rejected") {
  fs::path good = temp_dir() / "good.jtns";
  Tensor t = make_tensor({2, 2});
  t.v = {1, 2, 3, 4};
  write_tensor(good, t, DType::f64);

  SECTION("bad magic") {
    fs::path p = temp_dir() / "magic.jtns";
    std::ifstream is(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    bytes[0] = 'X';
    std::ofstream(p, std::ios::binary) << bytes;
    CHECK_THROWS(read_tensor(p));
  }
  SECTION("truncated payload") {
    fs::path p = temp_dir() / "trunc.jtns";
    std::ifstream is(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    bytes.resize(bytes.size() - 5);
    std::ofstream(p, std::ios::binary) << bytes;
    CHECK_THROWS(read_tensor(p));
  }
  SECTION("trailing garbage") {
    fs::path p = temp_dir() / "trail.jtns";
    std::ifstream is(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    bytes += "extra";
    std::ofstream(p, std::ios::binary) << bytes;
    CHECK_THROWS(read_tensor(p));
  }
  SECTION("missing file") { CHECK_THROWS(read_tensor(temp_dir() / "nope")); }
}

TEST_CASE("rng streams are deterministic and splittable") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.uniform() == b.uniform());

  Rng c(42);
  for (int i = 0; i < 100; ++i) c.uniform();
  Rng ca = c.split("alpha");
  Rng cb = c.split("beta");
  // Distinct labels give distinct streams; same label gives the same stream.
  CHECK(ca.uniform() != cb.uniform());
  Rng d(42);
  for (int i = 0; i < 100; ++i) d.uniform();
  Rng da = d.split("alpha");
  Rng ca2 = Rng(42).split("alpha");
  CHECK(da.uniform() == ca2.uniform());

  // Normals: sane first two moments over a modest sample.
  Rng e(7);
  double s = 0, ss = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = e.normal();
    s += x;
    ss += x * x;
  }
  CHECK(std::abs(s / n) < 0.03);
  CHECK(std::abs(ss / n - 1.0) < 0.05);

  // below(n) stays in range and hits every residue eventually.
  Rng f(9);
  std::vector<bool> seen(5, false);
  for (int i = 0; i < 200; ++i) {
    auto u = f.below(5);
    REQUIRE(u < 5);
    seen[std::size_t(u)] = true;
  }
  for (bool x : seen) CHECK(x);
}
