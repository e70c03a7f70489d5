// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Toy text-conditioned video diffusion backbone: a patch-token transformer
// denoiser predicting noise for latents (F,3,H,W). Two variants share all
// machinery and differ only in self-attention grouping:
//   factorized — blocks alternate spatial (per-frame) and temporal (per-site)
//   joint      — every block attends over all F*S tokens
// Each block is pre-LN: self-attention, cross-attention to the prompt token
// embeddings, and a feed-forward. Prompt conditioning and the token-embedding
// table are part of the base model and are frozen together with it.
//
// Token layout: for sample b, frame f, site s (s = py*(W/p)+px), the row
// index is b*F*S + f*S + s. Patch columns are (c*p+dy)*p+dx.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointtuner/autodiff.hpp"
#include "jointtuner/diffusion.hpp"
#include "jointtuner/glora.hpp"
#include "jointtuner/optimizer.hpp"
#include "jointtuner/rng.hpp"
#include "jointtuner/tensor.hpp"
#include "jointtuner/textio.hpp"

namespace jt::model {

using ad::Mat;
using ad::NodeP;
using ad::Param;
using ad::Tape;

struct DenoiserConfig {
  std::string variant = "factorized";  // factorized | joint
  int width = 48;                      // token embedding width
  int blocks = 4;
  int heads = 4;
  int patch = 4;
  int mlp_ratio = 2;
  int height = 32, width_px = 32;
  int timesteps = 1000;
  int vocab = 0;

  int sites() const { return (height / patch) * (width_px / patch); }
  int patch_dim() const { return 3 * patch * patch; }

  void validate() const {
    if (variant != "factorized" && variant != "joint")
      throw std::runtime_error("unknown variant: " + variant);
    if (height % patch != 0 || width_px % patch != 0)
      throw std::runtime_error("patch size must divide frame size");
    if (width % heads != 0)
      throw std::runtime_error("width must be divisible by heads");
    if (blocks < 1 || vocab < 1 || timesteps < 2)
      throw std::runtime_error("bad denoiser config");
  }
};

struct Linear {
  Param w, b;  // w: (in x out), b: (1 x out)
};

struct Block {
  std::string kind;  // spatial | temporal | joint
  Param ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
  Linear self_q, self_k, self_v, self_o;
  Linear cross_q, cross_k, cross_v, cross_o;
  Linear fc1, fc2;
};

struct Denoiser {
  DenoiserConfig cfg;
  Linear patch_in;      // patch_dim -> d
  Param pos_spatial;    // sites x d
  Param embed;          // vocab x d
  Linear temb1, temb2;  // timestep embedding MLP
  std::vector<Block> blocks;
  Param lnf_g, lnf_b;
  Linear out;  // d -> patch_dim
  bool frozen = false;
  std::vector<glora::Adapter*> adapters;

  // Registry in construction order; names are stable across builds.
  std::vector<Param*> base_params() {
    std::vector<Param*> ps = {&patch_in.w, &patch_in.b, &pos_spatial, &embed,
                              &temb1.w,    &temb1.b,    &temb2.w,     &temb2.b};
    for (auto& b : blocks) {
      for (Param* p :
           {&b.ln1_g, &b.ln1_b, &b.self_q.w, &b.self_q.b, &b.self_k.w,
            &b.self_k.b, &b.self_v.w, &b.self_v.b, &b.self_o.w, &b.self_o.b,
            &b.ln2_g, &b.ln2_b, &b.cross_q.w, &b.cross_q.b, &b.cross_k.w,
            &b.cross_k.b, &b.cross_v.w, &b.cross_v.b, &b.cross_o.w,
            &b.cross_o.b, &b.ln3_g, &b.ln3_b, &b.fc1.w, &b.fc1.b, &b.fc2.w,
            &b.fc2.b})
        ps.push_back(p);
    }
    for (Param* p : {&lnf_g, &lnf_b, &out.w, &out.b}) ps.push_back(p);
    return ps;
  }

  std::vector<Param*> base_params() const {
    return const_cast<Denoiser*>(this)->base_params();
  }
};

// ---------------------------------------------------------------------------
// Construction.

namespace detail {

inline Mat randn(int r, int c, double std, Rng& rng) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal(std);
  return m;
}

inline void init_linear(Linear& l, const std::string& name, int in, int out,
                        Rng& rng, double std = 0.02, bool zero = false) {
  l.w.name = name + ".w";
  l.w.w = zero ? Mat::Zero(in, out) : randn(in, out, std, rng);
  l.b.name = name + ".b";
  l.b.w = Mat::Zero(1, out);
}

inline void init_ln(Param& g, Param& b, const std::string& name) {
  g.name = name + ".g";
  b.name = name + ".b";
}

}  // namespace detail

inline Denoiser build_denoiser(const DenoiserConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Denoiser m;
  m.cfg = cfg;
  Rng rng = Rng(seed).split("init");
  int d = cfg.width, P = cfg.patch_dim(), dm = cfg.mlp_ratio * d;
  detail::init_linear(m.patch_in, "patch", P, d, rng);
  m.pos_spatial.name = "pos.spatial";
  m.pos_spatial.w = detail::randn(cfg.sites(), d, 0.02, rng);
  m.embed.name = "embed";
  m.embed.w = detail::randn(cfg.vocab, d, 0.02, rng);
  detail::init_linear(m.temb1, "temb.fc1", d, d, rng);
  detail::init_linear(m.temb2, "temb.fc2", d, d, rng);
  for (int i = 0; i < cfg.blocks; ++i) {
    Block b;
    if (cfg.variant == "joint") b.kind = "joint";
    else b.kind = (i % 2 == 0) ? "spatial" : "temporal";
    std::string base = "block" + std::to_string(i);
    detail::init_ln(b.ln1_g, b.ln1_b, base + ".ln1");
    detail::init_ln(b.ln2_g, b.ln2_b, base + ".ln2");
    detail::init_ln(b.ln3_g, b.ln3_b, base + ".ln3");
    detail::init_linear(b.self_q, base + ".self.q", d, d, rng);
    detail::init_linear(b.self_k, base + ".self.k", d, d, rng);
    detail::init_linear(b.self_v, base + ".self.v", d, d, rng);
    detail::init_linear(b.self_o, base + ".self.o", d, d, rng);
    detail::init_linear(b.cross_q, base + ".cross.q", d, d, rng);
    detail::init_linear(b.cross_k, base + ".cross.k", d, d, rng);
    detail::init_linear(b.cross_v, base + ".cross.v", d, d, rng);
    detail::init_linear(b.cross_o, base + ".cross.o", d, d, rng);
    detail::init_linear(b.fc1, base + ".mlp.fc1", d, dm, rng);
    detail::init_linear(b.fc2, base + ".mlp.fc2", dm, d, rng);
    m.blocks.push_back(std::move(b));
  }
  detail::init_ln(m.lnf_g, m.lnf_b, "final.ln");
  // Zero-initialized head: the fresh model predicts exactly zero noise.
  detail::init_linear(m.out, "final.out", d, P, rng, 0.02, /*zero=*/true);
  for (Param* p : m.base_params()) {
    if (p->w.size() == 0) {  // layernorm params
      bool is_gain = p->name.size() >= 2 &&
                     p->name.compare(p->name.size() - 2, 2, ".g") == 0;
      p->w = is_gain ? Mat::Ones(1, d) : Mat::Zero(1, d);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Patchify / unpatchify.

inline Mat patchify(const Tensor& z, int p) {
  if (z.dims.size() != 4 || z.dims[1] != 3)
    throw std::runtime_error("patchify expects (F,3,H,W)");
  int F = int(z.dims[0]), H = int(z.dims[2]), W = int(z.dims[3]);
  int gy = H / p, gx = W / p, S = gy * gx, P = 3 * p * p;
  Mat m(F * S, P);
  for (int f = 0; f < F; ++f)
    for (int py = 0; py < gy; ++py)
      for (int px = 0; px < gx; ++px) {
        int row = f * S + py * gx + px;
        for (int c = 0; c < 3; ++c)
          for (int dy = 0; dy < p; ++dy)
            for (int dx = 0; dx < p; ++dx)
              m(row, (c * p + dy) * p + dx) =
                  z.at4(f, c, py * p + dy, px * p + dx);
      }
  return m;
}

inline Tensor unpatchify(const Mat& m, int F, int H, int W, int p) {
  int gy = H / p, gx = W / p, S = gy * gx;
  if (m.rows() != F * S || m.cols() != 3 * p * p)
    throw std::runtime_error("unpatchify shape mismatch");
  Tensor z = make_tensor({std::uint64_t(F), 3, std::uint64_t(H),
                          std::uint64_t(W)});
  for (int f = 0; f < F; ++f)
    for (int py = 0; py < gy; ++py)
      for (int px = 0; px < gx; ++px) {
        int row = f * S + py * gx + px;
        for (int c = 0; c < 3; ++c)
          for (int dy = 0; dy < p; ++dy)
            for (int dx = 0; dx < p; ++dx)
              z.at4(f, c, py * p + dy, px * p + dx) =
                  m(row, (c * p + dy) * p + dx);
      }
  return z;
}

// Sinusoidal embedding row (half sine, half cosine, standard log frequencies).
inline Eigen::RowVectorXd sinusoid(double pos, int d) {
  Eigen::RowVectorXd v(d);
  int half = d / 2;
  for (int i = 0; i < half; ++i) {
    double w = std::exp(-std::log(10000.0) * double(i) / double(half));
    v(i) = std::sin(pos * w);
    v(half + i) = std::cos(pos * w);
  }
  if (d % 2) v(d - 1) = 0.0;
  return v;
}

// ---------------------------------------------------------------------------
// Forward.

struct Sample {
  Tensor z;                 // (F,3,H,W) latent
  int t = 0;                // diffusion timestep, [0, T)
  std::vector<int> prompt;  // token ids
};

namespace detail {

struct AttnGroups {
  std::vector<ad::Span> spans;          // contiguous after permutation
  std::vector<Eigen::Index> perm;       // new row -> old row (empty if id)
  std::vector<Eigen::Index> iperm;      // old row -> new row
};

inline AttnGroups make_groups(const std::string& kind, int B, int F, int S) {
  AttnGroups g;
  if (kind == "spatial") {
    for (int b = 0; b < B; ++b)
      for (int f = 0; f < F; ++f)
        g.spans.push_back({Eigen::Index(b) * F * S + Eigen::Index(f) * S, S});
  } else if (kind == "temporal") {
    g.perm.resize(std::size_t(B) * F * S);
    g.iperm.resize(g.perm.size());
    Eigen::Index n = 0;
    for (int b = 0; b < B; ++b)
      for (int s = 0; s < S; ++s) {
        g.spans.push_back({n, F});
        for (int f = 0; f < F; ++f) {
          Eigen::Index old = Eigen::Index(b) * F * S + Eigen::Index(f) * S + s;
          g.perm[n] = old;
          g.iperm[old] = n;
          ++n;
        }
      }
  } else if (kind == "joint") {
    for (int b = 0; b < B; ++b)
      g.spans.push_back({Eigen::Index(b) * F * S, Eigen::Index(F) * S});
  } else {
    throw std::runtime_error("unknown block kind: " + kind);
  }
  return g;
}

}  // namespace detail

// Applies a (possibly adapted) linear. The gate is one scalar per layer per
// forward pass, pooled over every token row of the batch.
inline NodeP apply_linear(Tape& tp, Denoiser& m, Linear& lin,
                          const std::string& name, const std::string& kind,
                          NodeP x) {
  NodeP y = ad::add_rowvec(ad::matmul(x, tp.leaf(lin.w)), tp.leaf(lin.b));
  for (glora::Adapter* a : m.adapters) {
    glora::AdapterEntry* e = a->find(name);
    if (!e) continue;
    NodeP gate = ad::mean_all(ad::sigmoid(ad::matmul_nt(x, tp.leaf(e->G))));
    NodeP low = ad::matmul_nt(ad::matmul_nt(x, tp.leaf(e->A)), tp.leaf(e->B));
    y = ad::add(y, ad::mul_scalar(low, gate));
    if (a->trace)
      a->trace->records.push_back({name, kind, a->trace->phase,
                                   a->trace->step, gate->val(0, 0)});
  }
  return y;
}

struct ForwardOut {
  NodeP out;  // (B*F*S) x patch_dim
  int B = 0, F = 0, S = 0;
};

// All samples in a batch share F and prompt length.
inline ForwardOut denoiser_forward(Tape& tp, Denoiser& m,
                                   const std::vector<Sample>& batch) {
  const auto& cfg = m.cfg;
  if (batch.empty()) throw std::runtime_error("empty batch");
  int B = int(batch.size());
  int F = int(batch[0].z.dims[0]);
  int S = cfg.sites(), d = cfg.width, np = int(batch[0].prompt.size());
  if (np < 1) throw std::runtime_error("empty prompt");
  for (const auto& s : batch) {
    if (s.z.dims.size() != 4 || int(s.z.dims[0]) != F || s.z.dims[1] != 3 ||
        int(s.z.dims[2]) != cfg.height || int(s.z.dims[3]) != cfg.width_px)
      throw std::runtime_error("latent shape mismatch");
    if (s.t < 0 || s.t >= cfg.timesteps)
      throw std::runtime_error("timestep out of range [0,T)");
    if (int(s.prompt.size()) != np)
      throw std::runtime_error("prompt length mismatch in batch");
    for (int id : s.prompt)
      if (id < 0 || id >= cfg.vocab)
        throw std::runtime_error("prompt token id out of range");
  }

  int rows = F * S;
  Mat x0(B * rows, cfg.patch_dim());
  for (int b = 0; b < B; ++b)
    x0.middleRows(Eigen::Index(b) * rows, rows) = patchify(batch[b].z, cfg.patch);

  NodeP x = ad::add_rowvec(ad::matmul(tp.constant(std::move(x0)),
                                      tp.leaf(m.patch_in.w)),
                           tp.leaf(m.patch_in.b));

  // Positional terms: learned spatial site table, fixed temporal sinusoid.
  std::vector<Eigen::Index> site_idx(std::size_t(B) * rows);
  Mat tpos = Mat::Zero(Eigen::Index(B) * rows, d);
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f)
      for (int s = 0; s < S; ++s) {
        Eigen::Index r = Eigen::Index(b) * rows + Eigen::Index(f) * S + s;
        site_idx[std::size_t(r)] = s;
        tpos.row(r) = sinusoid(double(f), d);
      }
  x = ad::add(x, ad::gather_rows(tp.leaf(m.pos_spatial), std::move(site_idx)));
  x = ad::add(x, tp.constant(std::move(tpos)));

  // Per-sample timestep embedding, broadcast to the sample's token rows.
  Mat tsin(B, d);
  for (int b = 0; b < B; ++b) tsin.row(b) = sinusoid(double(batch[b].t), d);
  NodeP temb = ad::add_rowvec(
      ad::matmul(ad::gelu(ad::add_rowvec(
                     ad::matmul(tp.constant(std::move(tsin)),
                                tp.leaf(m.temb1.w)),
                     tp.leaf(m.temb1.b))),
                 tp.leaf(m.temb2.w)),
      tp.leaf(m.temb2.b));
  std::vector<Eigen::Index> tok2sample(std::size_t(B) * rows);
  for (int b = 0; b < B; ++b)
    for (int r = 0; r < rows; ++r)
      tok2sample[std::size_t(b) * rows + r] = b;
  x = ad::add(x, ad::gather_rows(temb, std::move(tok2sample)));

  // Prompt token embeddings, one span of np rows per sample.
  std::vector<Eigen::Index> prompt_idx;
  prompt_idx.reserve(std::size_t(B) * np);
  for (const auto& s : batch)
    for (int id : s.prompt) prompt_idx.push_back(id);
  NodeP eprompt = ad::gather_rows(tp.leaf(m.embed), std::move(prompt_idx));

  std::vector<ad::Span> cross_q, cross_kv;
  for (int b = 0; b < B; ++b) {
    cross_q.push_back({Eigen::Index(b) * rows, rows});
    cross_kv.push_back({Eigen::Index(b) * np, np});
  }

  for (std::size_t bi = 0; bi < m.blocks.size(); ++bi) {
    Block& blk = m.blocks[bi];
    std::string base = "block" + std::to_string(bi);
    auto groups = detail::make_groups(blk.kind, B, F, S);

    // Self-attention (pre-LN).
    NodeP h = ad::layernorm_rows(x, tp.leaf(blk.ln1_g), tp.leaf(blk.ln1_b));
    bool permuted = !groups.perm.empty();
    if (permuted) h = ad::gather_rows(h, groups.perm);
    NodeP q = apply_linear(tp, m, blk.self_q, base + ".self.q", blk.kind, h);
    NodeP k = apply_linear(tp, m, blk.self_k, base + ".self.k", blk.kind, h);
    NodeP v = apply_linear(tp, m, blk.self_v, base + ".self.v", blk.kind, h);
    NodeP attn = ad::attention_core(q, k, v, groups.spans, groups.spans,
                                    cfg.heads);
    if (permuted) attn = ad::gather_rows(attn, groups.iperm);
    NodeP o = apply_linear(tp, m, blk.self_o, base + ".self.o", blk.kind, attn);
    x = ad::add(x, o);

    // Cross-attention to the prompt.
    NodeP h2 = ad::layernorm_rows(x, tp.leaf(blk.ln2_g), tp.leaf(blk.ln2_b));
    NodeP cq = apply_linear(tp, m, blk.cross_q, base + ".cross.q", blk.kind, h2);
    NodeP ck =
        apply_linear(tp, m, blk.cross_k, base + ".cross.k", blk.kind, eprompt);
    NodeP cv =
        apply_linear(tp, m, blk.cross_v, base + ".cross.v", blk.kind, eprompt);
    NodeP cattn = ad::attention_core(cq, ck, cv, cross_q, cross_kv, cfg.heads);
    NodeP co =
        apply_linear(tp, m, blk.cross_o, base + ".cross.o", blk.kind, cattn);
    x = ad::add(x, co);

    // Feed-forward.
    NodeP h3 = ad::layernorm_rows(x, tp.leaf(blk.ln3_g), tp.leaf(blk.ln3_b));
    NodeP f1 = apply_linear(tp, m, blk.fc1, base + ".mlp.fc1", blk.kind, h3);
    NodeP f2 =
        apply_linear(tp, m, blk.fc2, base + ".mlp.fc2", blk.kind, ad::gelu(f1));
    x = ad::add(x, f2);
  }

  NodeP hf = ad::layernorm_rows(x, tp.leaf(m.lnf_g), tp.leaf(m.lnf_b));
  NodeP out = ad::add_rowvec(ad::matmul(hf, tp.leaf(m.out.w)),
                             tp.leaf(m.out.b));
  return {out, B, F, S};
}

// Single-sample prediction: eps_hat(z_t, t, prompt) as a tensor.
inline Tensor predict_noise(Denoiser& m, const Tensor& z, int t,
                            const std::vector<int>& prompt) {
  Tape tp;
  auto fo = denoiser_forward(tp, m, {Sample{z, t, prompt}});
  return unpatchify(fo.out->val, int(z.dims[0]), m.cfg.height, m.cfg.width_px,
                    m.cfg.patch);
}

// ---------------------------------------------------------------------------
// Adapter injection.

inline std::vector<glora::TargetShape> adapter_targets(
    const Denoiser& m, const std::string& which,
    const std::string& block_filter = "all") {
  if (which != "attention" && which != "attention+mlp")
    throw std::runtime_error("unknown adapter target set: " + which);
  std::vector<glora::TargetShape> out;
  int d = m.cfg.width, dm = m.cfg.mlp_ratio * d;
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    const Block& b = m.blocks[i];
    if (block_filter != "all" && b.kind != block_filter) continue;
    std::string base = "block" + std::to_string(i);
    for (const char* nm : {".self.q", ".self.k", ".self.v", ".self.o",
                           ".cross.q", ".cross.k", ".cross.v", ".cross.o"})
      out.push_back({base + nm, d, d});
    if (which == "attention+mlp") {
      out.push_back({base + ".mlp.fc1", d, dm});
      out.push_back({base + ".mlp.fc2", dm, d});
    }
  }
  return out;
}

inline void inject(Denoiser& m, glora::Adapter& a) {
  for (glora::Adapter* prev : m.adapters) {
    if (prev == &a) throw std::runtime_error("adapter already injected");
    for (const auto& e : a.entries)
      if (prev->find(e.target))
        throw std::runtime_error("adapter target already covered: " + e.target);
  }
  // Validate every target against the model's linears.
  auto all = adapter_targets(m, "attention+mlp", "all");
  for (const auto& e : a.entries) {
    bool ok = false;
    for (const auto& t : all)
      if (t.name == e.target && t.in == e.A.w.cols() && t.out == e.B.w.rows()) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::runtime_error("adapter target does not fit this model: " +
                               e.target);
  }
  m.adapters.push_back(&a);
}

inline void clear_adapters(Denoiser& m) { m.adapters.clear(); }

// ---------------------------------------------------------------------------
// Freeze + checksums.

inline std::uint64_t base_checksum(const Denoiser& m) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const Param* p : m.base_params()) {
    h = fnv1a64(p->name, h);
    h = fnv1a64(p->w.data(), sizeof(double) * p->w.size(), h);
  }
  return h;
}

inline void freeze(Denoiser& m) {
  for (Param* p : m.base_params()) p->trainable = false;
  m.frozen = true;
}

// ---------------------------------------------------------------------------
// Pretraining on (latent, prompt) pairs with plain noise-prediction loss.

struct PretrainConfig {
  long steps = 3000;
  double lr = 1e-3;
  int batch = 4;
  std::string optimizer = "adam";
  long log_every = 100;
  std::uint64_t seed = 1;
  std::string schedule = "linear";
};

using StepLogger = std::function<void(long step, double loss)>;

inline void pretrain(Denoiser& m,
                     const std::vector<std::pair<Tensor, std::vector<int>>>& data,
                     const PretrainConfig& pc, const StepLogger& log = {}) {
  if (m.frozen)
    throw std::runtime_error("cannot pretrain a frozen model");
  if (data.empty()) throw std::runtime_error("pretrain: no data");
  if (pc.steps == 0) return;  // explicit no-op: model must stay untouched
  auto sched = diffusion::make_schedule(pc.schedule, m.cfg.timesteps);
  ad::Optimizer opt(pc.optimizer, pc.lr);
  Rng root(pc.seed);
  Rng order_rng = root.split("order");
  Rng t_rng = root.split("t");
  Rng noise_rng = root.split("noise");
  auto params = m.base_params();

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  order_rng.shuffle(order);
  std::size_t cursor = 0;

  for (long step = 0; step < pc.steps; ++step) {
    std::vector<Sample> batch;
    std::vector<Tensor> targets;
    for (int b = 0; b < pc.batch; ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      const auto& [z0, prompt] = data[order[cursor++]];
      int t = 1 + int(t_rng.below(std::uint64_t(m.cfg.timesteps - 1)));
      Tensor eps = diffusion::gaussian_like(z0.dims, noise_rng);
      batch.push_back({diffusion::q_sample(sched, z0, t, eps), t, prompt});
      targets.push_back(std::move(eps));
    }
    Tape tp;
    auto fo = denoiser_forward(tp, m, batch);
    Mat target(fo.out->val.rows(), fo.out->val.cols());
    Eigen::Index rows = Eigen::Index(fo.F) * fo.S;
    for (int b = 0; b < fo.B; ++b)
      target.middleRows(b * rows, rows) = patchify(targets[b], m.cfg.patch);
    NodeP loss = ad::mse(fo.out, tp.constant(std::move(target)));
    if (!std::isfinite(loss->val(0, 0)))
      throw std::runtime_error("pretrain diverged: non-finite loss at step " +
                               std::to_string(step));
    for (Param* p : params) p->zero_grad();
    tp.backward(loss);
    opt.step(params);
    if (log && (step % pc.log_every == 0 || step + 1 == pc.steps))
      log(step, loss->val(0, 0));
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: one f64 tensor per parameter plus a manifest.

inline void save_checkpoint(const std::filesystem::path& dir,
                            const Denoiser& m, const KvList& extra = {}) {
  std::filesystem::create_directories(dir);
  KvList kv;
  kv.emplace_back("format", "jt-model-v1");
  kv.emplace_back("variant", m.cfg.variant);
  kv.emplace_back("width", std::to_string(m.cfg.width));
  kv.emplace_back("blocks", std::to_string(m.cfg.blocks));
  kv.emplace_back("heads", std::to_string(m.cfg.heads));
  kv.emplace_back("patch", std::to_string(m.cfg.patch));
  kv.emplace_back("mlp_ratio", std::to_string(m.cfg.mlp_ratio));
  kv.emplace_back("height", std::to_string(m.cfg.height));
  kv.emplace_back("width_px", std::to_string(m.cfg.width_px));
  kv.emplace_back("timesteps", std::to_string(m.cfg.timesteps));
  kv.emplace_back("vocab", std::to_string(m.cfg.vocab));
  kv.emplace_back("frozen", m.frozen ? "true" : "false");
  kv.emplace_back("checksum", hex64(base_checksum(m)));
  for (const Param* p : m.base_params())
    write_tensor(dir / (p->name + ".jtns"), glora::mat_to_tensor(p->w),
                 DType::f64);
  for (const auto& [k, v] : extra) kv.emplace_back(k, v);
  write_kv_file(dir / "manifest", kv);
}

inline Denoiser load_checkpoint(const std::filesystem::path& dir) {
  KvList kv = read_kv_file(dir / "manifest");
  if (kv_get(kv, "format") != "jt-model-v1")
    throw std::runtime_error("not a model checkpoint: " + dir.string());
  DenoiserConfig cfg;
  cfg.variant = kv_get(kv, "variant");
  cfg.width = std::stoi(kv_get(kv, "width"));
  cfg.blocks = std::stoi(kv_get(kv, "blocks"));
  cfg.heads = std::stoi(kv_get(kv, "heads"));
  cfg.patch = std::stoi(kv_get(kv, "patch"));
  cfg.mlp_ratio = std::stoi(kv_get(kv, "mlp_ratio"));
  cfg.height = std::stoi(kv_get(kv, "height"));
  cfg.width_px = std::stoi(kv_get(kv, "width_px"));
  cfg.timesteps = std::stoi(kv_get(kv, "timesteps"));
  cfg.vocab = std::stoi(kv_get(kv, "vocab"));
  Denoiser m = build_denoiser(cfg, /*seed=*/0);
  for (Param* p : m.base_params()) {
    Mat w = glora::tensor_to_mat(read_tensor(dir / (p->name + ".jtns")));
    if (w.rows() != p->w.rows() || w.cols() != p->w.cols())
      throw std::runtime_error("checkpoint shape mismatch: " + p->name);
    p->w = std::move(w);
  }
  std::uint64_t want = std::stoull(kv_get(kv, "checksum"), nullptr, 16);
  if (base_checksum(m) != want)
    throw std::runtime_error("checkpoint checksum mismatch in " + dir.string());
  if (kv_get(kv, "frozen") == "true") freeze(m);
  return m;
}

}  // namespace jt::model
