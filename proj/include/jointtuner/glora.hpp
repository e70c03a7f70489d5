// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Gated low-rank adaptation. An adapted linear computes
//
//   y = x W + b + g * (x A^T) B^T,   g = mean_i sigmoid(x_i . G)
//
// with A (r x in) Gaussian-initialized, B (out x r) zero, and gate weights
// G (1 x in) zero, so a fresh adapter leaves the base output untouched and
// the gate starts at exactly 0.5. The gate is one scalar per layer per
// forward pass: the mean runs over every token row in the batch. The plain
// low-rank rule (fixed scalar alpha) is kept alongside for comparisons.

#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointtuner/autodiff.hpp"
#include "jointtuner/rng.hpp"
#include "jointtuner/tensor.hpp"
#include "jointtuner/textio.hpp"

namespace jt::glora {

using ad::Mat;
using ad::Param;

// ---------------------------------------------------------------------------
// Matrix-level forward rules (reference semantics; the training path builds
// the same expressions on the autodiff tape).

inline double gate_value(const Mat& x, const Mat& G) {
  double acc = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double z = x.row(r).dot(G.row(0));
    acc += 1.0 / (1.0 + std::exp(-z));
  }
  double g = acc / static_cast<double>(x.rows());
  // The gate is a strictly interior blend weight, but a correctly rounded
  // sigmoid saturates to exactly 0 or 1 once |z| exceeds ~37. Pin saturated
  // pools one ulp inside the interval so the open-range guarantee holds for
  // every finite input.
  if (g <= 0.0) return std::nextafter(0.0, 1.0);
  if (g >= 1.0) return std::nextafter(1.0, 0.0);
  return g;
}

inline Mat glora_forward(const Mat& x, const Mat& W, const Mat& b,
                         const Mat& A, const Mat& B, const Mat& G,
                         double* gate_out = nullptr) {
  double g = gate_value(x, G);
  if (gate_out) *gate_out = g;
  Mat y = x * W;
  y.rowwise() += b.row(0);
  y += g * ((x * A.transpose()) * B.transpose());
  return y;
}

inline Mat lora_forward(const Mat& x, const Mat& W, const Mat& b,
                        const Mat& A, const Mat& B, double alpha) {
  Mat y = x * W;
  y.rowwise() += b.row(0);
  y += alpha * ((x * A.transpose()) * B.transpose());
  return y;
}

// ---------------------------------------------------------------------------
// Gate traces. One record per adapted layer per forward pass.

enum class Phase { image_train, video_train, inference };

inline std::string phase_name(Phase p) {
  switch (p) {
    case Phase::image_train: return "image-train";
    case Phase::video_train: return "video-train";
    case Phase::inference: return "inference";
  }
  throw std::runtime_error("bad phase");
}

inline Phase parse_phase(const std::string& s) {
  if (s == "image-train") return Phase::image_train;
  if (s == "video-train") return Phase::video_train;
  if (s == "inference") return Phase::inference;
  throw std::runtime_error("unknown phase: " + s);
}

struct GateRecord {
  std::string layer;       // adapter target, e.g. "block0.self.q"
  std::string block_kind;  // spatial | temporal | joint
  Phase phase = Phase::inference;
  long step = 0;
  double value = 0.5;
};

struct GateTrace {
  std::vector<GateRecord> records;
  Phase phase = Phase::inference;
  long step = 0;
};

// ---------------------------------------------------------------------------
// Adapter container.

struct AdapterEntry {
  std::string target;  // name of the adapted linear
  Param A, B, G;
};

struct Adapter {
  int rank = 4;
  double init_std = 0.02;
  std::vector<AdapterEntry> entries;
  bool trainable = true;
  GateTrace* trace = nullptr;  // optional; not serialized

  AdapterEntry* find(const std::string& target) {
    for (auto& e : entries)
      if (e.target == target) return &e;
    return nullptr;
  }
  const AdapterEntry* find(const std::string& target) const {
    for (const auto& e : entries)
      if (e.target == target) return &e;
    return nullptr;
  }

  std::vector<Param*> params() {
    std::vector<Param*> ps;
    for (auto& e : entries) {
      ps.push_back(&e.A);
      ps.push_back(&e.B);
      ps.push_back(&e.G);
    }
    return ps;
  }

  void zero_grads() {
    for (Param* p : params()) p->zero_grad();
  }

  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& e : entries) {
      h = fnv1a64(e.target, h);
      for (const Param* p : {&e.A, &e.B, &e.G})
        h = fnv1a64(p->w.data(), sizeof(double) * p->w.size(), h);
    }
    return h;
  }
};

struct TargetShape {
  std::string name;
  int in = 0, out = 0;
};

inline Adapter make_adapter(int rank, double init_std,
                            const std::vector<TargetShape>& targets,
                            Rng& rng) {
  if (rank < 1) throw std::runtime_error("adapter rank must be >= 1");
  Adapter a;
  a.rank = rank;
  a.init_std = init_std;
  for (const auto& t : targets) {
    AdapterEntry e;
    e.target = t.name;
    e.A.name = t.name + ".A";
    e.A.w = Mat::Zero(rank, t.in);
    for (Eigen::Index i = 0; i < e.A.w.rows(); ++i)
      for (Eigen::Index j = 0; j < e.A.w.cols(); ++j)
        e.A.w(i, j) = rng.normal(init_std);
    e.B.name = t.name + ".B";
    e.B.w = Mat::Zero(t.out, rank);
    e.G.name = t.name + ".G";
    e.G.w = Mat::Zero(1, t.in);
    a.entries.push_back(std::move(e));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Serialization: one f64 tensor file per matrix plus a manifest. Extra
// manifest entries (base checksum, seeds, step counts) come from the caller.

inline Tensor mat_to_tensor(const Mat& m) {
  Tensor t = make_tensor({std::uint64_t(m.rows()), std::uint64_t(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.v[r * m.cols() + c] = m(r, c);
  return t;
}

inline Mat tensor_to_mat(const Tensor& t) {
  if (t.dims.size() != 2) throw std::runtime_error("expected rank-2 tensor");
  Mat m(t.dims[0], t.dims[1]);
  for (std::uint64_t r = 0; r < t.dims[0]; ++r)
    for (std::uint64_t c = 0; c < t.dims[1]; ++c)
      m(r, c) = t.v[r * t.dims[1] + c];
  return m;
}

inline void save_adapter(const std::filesystem::path& dir, const Adapter& a,
                         const KvList& extra = {}) {
  std::filesystem::create_directories(dir);
  KvList kv;
  kv.emplace_back("format", "jt-adapter-v1");
  kv.emplace_back("rank", std::to_string(a.rank));
  kv.emplace_back("init_std", format_double(a.init_std));
  kv.emplace_back("targets", std::to_string(a.entries.size()));
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& e = a.entries[i];
    std::string p = "target." + std::to_string(i);
    kv.emplace_back(p + ".name", e.target);
    kv.emplace_back(p + ".in", std::to_string(e.A.w.cols()));
    kv.emplace_back(p + ".out", std::to_string(e.B.w.rows()));
    for (const Param* m : {&e.A, &e.B, &e.G}) {
      std::string suffix = m == &e.A ? "A" : m == &e.B ? "B" : "G";
      write_tensor(dir / (e.target + "." + suffix + ".jtns"),
                   mat_to_tensor(m->w), DType::f64);
    }
  }
  kv.emplace_back("checksum", hex64(a.checksum()));
  for (const auto& [k, v] : extra) kv.emplace_back(k, v);
  write_kv_file(dir / "manifest", kv);
}

inline Adapter load_adapter(const std::filesystem::path& dir) {
  KvList kv = read_kv_file(dir / "manifest");
  if (kv_get(kv, "format") != "jt-adapter-v1")
    throw std::runtime_error("not an adapter directory: " + dir.string());
  Adapter a;
  a.rank = std::stoi(kv_get(kv, "rank"));
  a.init_std = std::stod(kv_get(kv, "init_std"));
  int n = std::stoi(kv_get(kv, "targets"));
  for (int i = 0; i < n; ++i) {
    std::string p = "target." + std::to_string(i);
    AdapterEntry e;
    e.target = kv_get(kv, p + ".name");
    e.A.name = e.target + ".A";
    e.B.name = e.target + ".B";
    e.G.name = e.target + ".G";
    e.A.w = tensor_to_mat(read_tensor(dir / (e.target + ".A.jtns")));
    e.B.w = tensor_to_mat(read_tensor(dir / (e.target + ".B.jtns")));
    e.G.w = tensor_to_mat(read_tensor(dir / (e.target + ".G.jtns")));
    if (e.A.w.rows() != a.rank || e.B.w.cols() != a.rank ||
        e.G.w.rows() != 1 || e.G.w.cols() != e.A.w.cols())
      throw std::runtime_error("adapter tensor shape mismatch: " + e.target);
    a.entries.push_back(std::move(e));
  }
  std::uint64_t want = std::stoull(kv_get(kv, "checksum"), nullptr, 16);
  if (a.checksum() != want)
    throw std::runtime_error("adapter checksum mismatch in " + dir.string());
  return a;
}

inline const std::string* adapter_manifest_value(
    const std::filesystem::path& dir, const std::string& key) {
  static thread_local std::string held;
  KvList kv = read_kv_file(dir / "manifest");
  if (const std::string* v = kv_find(kv, key)) {
    held = *v;
    return &held;
  }
  return nullptr;
}

}  // namespace jt::glora
