// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Acceptance gate. Eight go/no-go checks, one verdict line each:
//
//   1  composite-metric reproduction from the shipped benchmark fixtures
//   2  gated low-rank adapter arithmetic (exact reductions, gate range)
//   3  adapter gradients vs central finite differences on a small denoiser
//   4  loss identities and shift-layout broadcast structure
//   5  spectral transform oracle + the appearance-shift high-band property
//   6  end-to-end method property at default scale, 3 seeds
//   7  gate specialization across phases (spatial vs temporal blocks)
//   8  determinism and base-weight hygiene
//
// Criteria 6-8 share one workspace: a generated task, one pretrained base,
// and nine fine-tuning runs (joint / stage-wise / no-shift x 3 seeds).
// Informational lines are indented; verdict lines start with [PASS]/[FAIL].
// Exit code 0 only if every criterion passes.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jointtuner/analysis.hpp"
#include "jointtuner/backbone.hpp"
#include "jointtuner/config.hpp"
#include "jointtuner/diffusion.hpp"
#include "jointtuner/evalkit.hpp"
#include "jointtuner/glora.hpp"
#include "jointtuner/rng.hpp"
#include "jointtuner/synthio.hpp"
#include "jointtuner/tensor.hpp"
#include "jointtuner/textio.hpp"
#include "jointtuner/trainer.hpp"

namespace fs = std::filesystem;
using namespace jt;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;   // appended to the verdict line
  std::string warning;  // non-fatal caveat
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path fixture_dir() {
  if (const char* src = std::getenv("JT_SOURCE_DIR"))
    return fs::path(src) / "data" / "fixtures";
  return fs::path("data") / "fixtures";
}

// ---------------------------------------------------------------------------
// 1. Composite-metric reproduction. Every composite cell of the three
// published-benchmark fixtures must match within +-0.01, including the
// spotlight rows checked explicitly below. Budget: 1 s.

Verdict criterion1() {
  Clock::time_point t0 = Clock::now();
  Verdict v;
  fs::path dir = fixture_dir();
  if (!fs::exists(dir)) {
    v.detail = "fixture directory missing: " + dir.string();
    return v;
  }
  double max_dev = 0.0;
  for (const std::string name :
       {"bench_cogvideox", "bench_zeroscope", "ablation_shift"}) {
    auto chk = evalkit::check_table(name, dir / (name + ".csv"),
                                    dir / (name + "_expected.csv"));
    max_dev = std::max(max_dev, chk.max_dev());
    if (!chk.ok()) {
      v.detail = name + " deviates by " + fmt("%.4f", chk.max_dev());
      return v;
    }
  }

  // Spotlight cells, straight from the raw columns.
  struct Spot {
    const char* table;
    const char* model;
    double ars, nas, aas;
  };
  for (const Spot s : {Spot{"bench_cogvideox", "CogVideoX-5B", 3.10, 91.82, 65.70},
                       Spot{"bench_zeroscope", "JointTuner-ZS", 1.50, 96.14, 64.15}}) {
    auto table = evalkit::metric_table_from_csv(
        read_csv(dir / (std::string(s.table) + ".csv")));
    for (const auto& row : evalkit::composite_scores(table)) {
      if (row.model != s.model) continue;
      if (std::abs(row.ars - s.ars) > 0.01 || std::abs(row.nas - s.nas) > 0.01 ||
          std::abs(row.aas - s.aas) > 0.01) {
        v.detail = std::string(s.model) + " composites off: " +
                   fmt("%.2f/", row.ars) + fmt("%.2f/", row.nas) +
                   fmt("%.2f", row.aas);
        return v;
      }
    }
  }
  double dt = seconds_since(t0);
  v.pass = dt < 1.0;
  v.detail = "3 tables within \xc2\xb1""0.01 (max dev " + fmt("%.4f", max_dev) +
             "), spotlight cells match; " + fmt("%.2f", dt) + "s < 1s";
  if (!v.pass) v.detail = "over budget: " + fmt("%.2f", dt) + "s >= 1s";
  return v;
}

// ---------------------------------------------------------------------------
// 2. Adapter arithmetic. Budget: 10 s.

Verdict criterion2() {
  Clock::time_point t0 = Clock::now();
  Verdict v;
  Rng rng = Rng(2024).split("glora-acceptance");
  auto randn = [&rng](Eigen::Index r, Eigen::Index c, double s) {
    glora::Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal(s);
    return m;
  };

  // (a) B = 0 collapses to the base layer with zero deviation.
  for (int trial = 0; trial < 50; ++trial) {
    glora::Mat W = randn(6, 5, 1.0), b = randn(1, 5, 1.0);
    glora::Mat A = randn(2, 6, 0.02), G = randn(1, 6, 0.5);
    glora::Mat B = glora::Mat::Zero(5, 2);
    glora::Mat x = randn(3, 6, 1.0);
    glora::Mat base = x * W;
    base.rowwise() += b.row(0);
    glora::Mat got = glora::glora_forward(x, W, b, A, B, G);
    if ((got - base).cwiseAbs().maxCoeff() != 0.0) {
      v.detail = "B=0 did not reduce to the base layer exactly";
      return v;
    }
  }

  // (b) G = 0 pins the gate at exactly 1/2.
  for (int trial = 0; trial < 50; ++trial) {
    glora::Mat x = randn(4, 6, 2.0);
    if (glora::gate_value(x, glora::Mat::Zero(1, 6)) != 0.5) {
      v.detail = "G=0 gate is not exactly 0.5";
      return v;
    }
  }

  // (c) A constant gate makes the adapter a plain low-rank update.
  for (int trial = 0; trial < 50; ++trial) {
    glora::Mat W = randn(6, 5, 1.0), b = randn(1, 5, 1.0);
    glora::Mat A = randn(2, 6, 0.1), B = randn(5, 2, 0.1);
    glora::Mat x = randn(3, 6, 1.0);
    glora::Mat zero_g = glora::Mat::Zero(1, 6);
    double dev = (glora::glora_forward(x, W, b, A, B, zero_g) -
                  glora::lora_forward(x, W, b, A, B, 0.5))
                     .cwiseAbs()
                     .maxCoeff();
    glora::Mat x1 = randn(1, 6, 1.0);  // one row: any G yields a constant gate
    glora::Mat G = randn(1, 6, 0.5);
    double alpha = glora::gate_value(x1, G);
    dev = std::max(dev, (glora::glora_forward(x1, W, b, A, B, G) -
                         glora::lora_forward(x1, W, b, A, B, alpha))
                            .cwiseAbs()
                            .maxCoeff());
    if (dev > 1e-6) {
      v.detail = "constant-gate deviation " + fmt("%.2e", dev) + " > 1e-6";
      return v;
    }
  }

  // (d) The pooled gate stays strictly inside (0,1), saturating draws
  // included.
  for (int trial = 0; trial < 1000; ++trial) {
    double scale = (trial % 10 == 9) ? 1e6 : 4.0;  // every tenth trial extreme
    glora::Mat x = randn(1 + trial % 5, 8, scale);
    glora::Mat G = randn(1, 8, 2.0);
    double g = glora::gate_value(x, G);
    if (!(g > 0.0 && g < 1.0)) {
      v.detail = "gate left (0,1): " + fmt("%.17g", g);
      return v;
    }
  }

  double dt = seconds_since(t0);
  v.pass = dt < 10.0;
  v.detail = "exact reductions hold; gate interior over 1000 trials; " +
             fmt("%.2f", dt) + "s < 10s";
  if (!v.pass) v.detail = "over budget: " + fmt("%.2f", dt) + "s >= 10s";
  return v;
}

// ---------------------------------------------------------------------------
// 3. Gradient check on a 2-block denoiser. Every adapter matrix's analytic
// gradient must match central finite differences to < 1e-4 relative error
// (vector norm). Budget: 60 s.

Verdict criterion3() {
  Clock::time_point t0 = Clock::now();
  Verdict v;

  model::DenoiserConfig mc;
  mc.variant = "factorized";
  mc.width = 16;
  mc.blocks = 2;
  mc.heads = 2;
  mc.patch = 4;
  mc.mlp_ratio = 2;
  mc.height = 8;
  mc.width_px = 8;
  mc.timesteps = 50;
  mc.vocab = int(synthio::vocab().tokens.size());
  model::Denoiser m = model::build_denoiser(mc, 7);
  // The fresh head is zero-initialized, which would zero every upstream
  // gradient and make this check vacuous; give it random weights first.
  Rng head_rng = Rng(10).split("grad-head");
  for (Eigen::Index i = 0; i < m.out.w.w.size(); ++i)
    m.out.w.w.data()[i] = head_rng.normal(0.1);
  model::freeze(m);

  Rng init = Rng(11).split("grad-adapter");
  glora::Adapter adapter =
      glora::make_adapter(2, 0.02, model::adapter_targets(m, "attention"), init);
  // Fresh adapters have B = G = 0, which zeroes most gradient paths; move
  // every matrix off its init point so all three gradients are live.
  Rng wiggle = Rng(12).split("grad-wiggle");
  for (auto& e : adapter.entries) {
    for (Eigen::Index i = 0; i < e.B.w.size(); ++i)
      e.B.w.data()[i] = wiggle.normal(0.05);
    for (Eigen::Index i = 0; i < e.G.w.size(); ++i)
      e.G.w.data()[i] = wiggle.normal(0.5);
  }
  model::inject(m, adapter);

  Rng data_rng = Rng(13).split("grad-data");
  model::Sample s;
  s.z = diffusion::gaussian_like({2, 3, 8, 8}, data_rng);
  s.t = 17;
  s.prompt = {1, 5, 9};
  std::vector<model::Sample> batch = {s};
  Tensor target_t = diffusion::gaussian_like({2, 3, 8, 8}, data_rng);
  ad::Mat target = model::patchify(target_t, mc.patch);

  auto loss_value = [&]() {
    ad::Tape tp;
    auto fo = model::denoiser_forward(tp, m, batch);
    return ad::mse(fo.out, tp.constant(target))->val(0, 0);
  };

  // Analytic pass.
  {
    ad::Tape tp;
    auto fo = model::denoiser_forward(tp, m, batch);
    ad::NodeP loss = ad::mse(fo.out, tp.constant(target));
    adapter.zero_grads();
    tp.backward(loss);
  }

  const double h = 1e-5;
  double worst = 0.0;
  std::string worst_name = "-";
  for (auto& e : adapter.entries) {
    for (ad::Param* p : {&e.A, &e.B, &e.G}) {
      double num2 = 0.0, an2 = 0.0, fd2 = 0.0;
      for (Eigen::Index i = 0; i < p->w.size(); ++i) {
        double keep = p->w.data()[i];
        p->w.data()[i] = keep + h;
        double up = loss_value();
        p->w.data()[i] = keep - h;
        double dn = loss_value();
        p->w.data()[i] = keep;
        double fd = (up - dn) / (2.0 * h);
        double an = p->g.data()[i];
        num2 += (an - fd) * (an - fd);
        an2 += an * an;
        fd2 += fd * fd;
      }
      double rel = std::sqrt(num2) /
                   std::max({std::sqrt(an2), std::sqrt(fd2), 1e-12});
      if (rel > worst) {
        worst = rel;
        worst_name = p->name;
      }
    }
  }
  if (worst >= 1e-4) {
    v.detail = "gradient mismatch at " + worst_name + ": rel err " +
               fmt("%.2e", worst);
    return v;
  }
  double dt = seconds_since(t0);
  v.pass = dt < 60.0;
  v.detail = "all adapter matrices match finite differences (worst rel err " +
             fmt("%.1e", worst) + " at " + worst_name + "); " +
             fmt("%.1f", dt) + "s < 60s";
  if (!v.pass) v.detail = "over budget: " + fmt("%.1f", dt) + "s >= 60s";
  return v;
}

// ---------------------------------------------------------------------------
// 4. Loss identities and shift-layout structure. Budget: 10 s.

Verdict criterion4() {
  Clock::time_point t0 = Clock::now();
  Verdict v;
  Rng rng = Rng(404).split("ait");
  const std::vector<std::uint64_t> dims = {4, 3, 8, 8};
  const std::uint64_t F = dims[0], C = dims[1], H = dims[2], W = dims[3];

  for (int draw = 0; draw < 100; ++draw) {
    Tensor eps = diffusion::gaussian_like(dims, rng);
    Tensor eps_hat = diffusion::gaussian_like(dims, rng);
    Tensor zero = make_tensor(dims);

    // Zero shift: exactly the plain diffusion loss.
    if (diffusion::ait_loss(eps, eps_hat, zero) !=
        diffusion::diffusion_loss(eps, eps_hat)) {
      v.detail = "ait_loss with zero shift != diffusion_loss";
      return v;
    }

    for (auto layout :
         {diffusion::ShiftLayout::channel_temporal,
          diffusion::ShiftLayout::spatial, diffusion::ShiftLayout::full,
          diffusion::ShiftLayout::channel, diffusion::ShiftLayout::temporal}) {
      Tensor delta = diffusion::sample_shift(layout, F, C, H, W, 1.0, rng);

      // A prediction of eps - delta is a perfect shift-aware prediction.
      Tensor perfect = eps;
      for (std::size_t i = 0; i < perfect.v.size(); ++i)
        perfect.v[i] -= delta.v[i];
      if (diffusion::ait_loss(eps, perfect, delta) != 0.0) {
        v.detail = "ait_loss(eps, eps-delta, delta) != 0 for layout " +
                   diffusion::shift_layout_name(layout);
        return v;
      }

      // Broadcast axes carry zero variance: every pair of positions that a
      // layout ties together must hold the identical value.
      bool tie_fc = layout == diffusion::ShiftLayout::channel_temporal;
      bool tie_c = tie_fc || layout == diffusion::ShiftLayout::channel;
      bool tie_f = tie_fc || layout == diffusion::ShiftLayout::temporal;
      bool tie_hw = layout == diffusion::ShiftLayout::spatial;
      for (std::uint64_t f = 0; f < F; ++f)
        for (std::uint64_t c = 0; c < C; ++c)
          for (std::uint64_t y = 0; y < H; ++y)
            for (std::uint64_t x = 0; x < W; ++x) {
              double want = delta.at4(f, c, y, x);
              bool ok = true;
              if (tie_c) ok &= want == delta.at4(f, 0, y, x);
              if (tie_f) ok &= want == delta.at4(0, c, y, x);
              if (tie_hw) ok &= want == delta.at4(f, c, 0, 0);
              if (!ok) {
                v.detail = "layout " + diffusion::shift_layout_name(layout) +
                           " varies along a broadcast axis";
                return v;
              }
            }
    }
  }
  double dt = seconds_since(t0);
  v.pass = dt < 10.0;
  v.detail =
      "zero-shift and perfect-prediction identities exact; 5 layouts "
      "broadcast-constant over 100 draws; " +
      fmt("%.2f", dt) + "s < 10s";
  if (!v.pass) v.detail = "over budget: " + fmt("%.2f", dt) + "s >= 10s";
  return v;
}

// ---------------------------------------------------------------------------
// 5. Spectral suite. Budget: 120 s.

std::vector<std::complex<double>> dft3_bruteforce(const std::vector<double>& v,
                                                  std::size_t F, std::size_t H,
                                                  std::size_t W) {
  std::vector<std::complex<double>> out(F * H * W);
  for (std::size_t kf = 0; kf < F; ++kf)
    for (std::size_t ky = 0; ky < H; ++ky)
      for (std::size_t kx = 0; kx < W; ++kx) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
              double ang = -2.0 * M_PI *
                           (double(kf * f) / double(F) +
                            double(ky * y) / double(H) +
                            double(kx * x) / double(W));
              acc += v[(f * H + y) * W + x] *
                     std::complex<double>(std::cos(ang), std::sin(ang));
            }
        out[(kf * H + ky) * W + kx] = acc;
      }
  return out;
}

Verdict criterion5() {
  Clock::time_point t0 = Clock::now();
  Verdict v;
  Rng rng = Rng(505).split("spectrum");

  // (a) Fast transform vs the definition on FFT, naive, and mixed axes.
  struct Shape {
    std::size_t F, H, W;
  };
  for (Shape s : {Shape{4, 8, 8}, Shape{3, 6, 5}, Shape{2, 8, 7}}) {
    std::vector<double> data(s.F * s.H * s.W);
    for (double& x : data) x = rng.normal(1.0);
    std::vector<std::complex<double>> fast(data.begin(), data.end());
    analysis::dft3(fast, s.F, s.H, s.W);
    auto slow = dft3_bruteforce(data, s.F, s.H, s.W);
    double ref = 0.0;
    for (const auto& c : slow) ref = std::max(ref, std::abs(c));
    for (std::size_t i = 0; i < fast.size(); ++i)
      if (std::abs(fast[i] - slow[i]) / ref > 1e-6) {
        v.detail = "transform deviates from the brute-force definition";
        return v;
      }
  }

  // (b) Constant input: all energy in the DC band.
  Tensor flat = make_tensor({4, 3, 8, 8});
  for (double& x : flat.v) x = 2.5;
  auto prof = analysis::spectrum_profile(flat, 10);
  double tail = 0.0;
  for (std::size_t b = 1; b < prof.fractions.size(); ++b)
    tail += prof.fractions[b];
  if (!(prof.fractions[0] > 1.0 - 1e-9 && tail < 1e-9)) {
    v.detail = "constant input is not pure DC";
    return v;
  }

  // (c) Appearance (channel-temporal) shifts raise the high-band share of
  // noised smooth latents at every probe timestep.
  Rng lat_rng = Rng(1).split("latent");
  Tensor z0 = analysis::make_smooth_latent(8, 3, 32, 32, 32.0, 0.15, lat_rng);
  Config defaults;  // probe under the shipped schedule defaults
  auto sched = diffusion::make_schedule(defaults.str("diffusion.schedule"),
                                        defaults.integer("diffusion.timesteps"));
  analysis::ShiftSpectraParams prm;  // channel-temporal, t={200,400,600,800}
  Csv spectra = analysis::compare_shift_spectra(z0, sched, prm);
  auto highs = analysis::high_band_summary(spectra, prm.bands);
  std::string deltas;
  for (int t : prm.timesteps) {
    double base = highs.at({t, "base"});
    double shifted = highs.at({t, "channel-temporal"});
    deltas += " t" + std::to_string(t) + ":" + fmt("%+.4f", shifted - base);
    if (!(shifted > base)) {
      v.detail = "shift failed to raise the high-band share at t=" +
                 std::to_string(t);
      return v;
    }
  }

  double dt = seconds_since(t0);
  v.pass = dt < 120.0;
  v.detail = "oracle match, pure-DC check, high-band raised:" + deltas + "; " +
             fmt("%.1f", dt) + "s < 120s";
  if (!v.pass) v.detail = "over budget: " + fmt("%.1f", dt) + "s >= 120s";
  return v;
}

// ---------------------------------------------------------------------------
// Shared end-to-end workspace for criteria 6-8.

struct RunScores {
  double app = 0.0;   // appearance score of the customized subject
  double mot = 0.0;   // motion score against the target trajectory
  double leak = 0.0;  // appearance score of the motion-reference subject
};

// Normalized per-run summary: appearance is already in [0,1]; the motion
// cosine is mapped from [-1,1] onto [0,1] before averaging the two.
double normalized_mean(const RunScores& s) {
  return 0.5 * (s.app + 0.5 * (s.mot + 1.0));
}

struct EndToEnd {
  fs::path work;
  Config cfg;
  std::optional<synthio::Task> task;
  std::optional<model::Denoiser> base;
  std::uint64_t base_ck = 0;
  bool base_ck_stable = true;
  double pretrain_secs = 0.0;
  std::vector<double> finetune_secs;

  std::vector<long> seeds = {1, 2, 3};
  std::vector<glora::GateTrace> joint_traces;
  std::vector<RunScores> joint, staged, plain, frozen;

  // Seed-1 artifacts for the determinism criterion.
  std::uint64_t joint1_ck = 0;
  std::vector<std::string> joint1_runlog;
};

RunScores score_videos(const std::vector<Tensor>& vids,
                       const evalkit::SubjectDescriptor& subject,
                       const evalkit::SubjectDescriptor& motion_subject,
                       const synthio::Trajectory& traj) {
  RunScores s;
  for (const Tensor& v : vids) {
    auto disp = evalkit::trajectory_displacements(traj, int(v.dims[0]));
    s.app += evalkit::appearance_score(v, subject).value;
    s.mot += evalkit::motion_score(v, disp).value;
    s.leak += evalkit::appearance_score(v, motion_subject).value;
  }
  double n = double(vids.size());
  s.app /= n;
  s.mot /= n;
  s.leak /= n;
  return s;
}

RunScores mean_scores(const std::vector<RunScores>& per_seed) {
  RunScores m;
  for (const RunScores& s : per_seed) {
    m.app += s.app;
    m.mot += s.mot;
    m.leak += s.leak;
  }
  double n = double(per_seed.size());
  m.app /= n;
  m.mot /= n;
  m.leak /= n;
  return m;
}

// ---------------------------------------------------------------------------
// 6. End-to-end method property at default scale, 3 seeds. Budgets: pretrain
// <= 30 min, each fine-tune <= 10 min.

Verdict criterion6(EndToEnd& e) {
  Verdict v;
  e.work = fs::temp_directory_path() / "jt-acceptance";
  fs::remove_all(e.work);
  fs::create_directories(e.work);

  // Task + corpus at the documented defaults.
  e.task = synthio::make_task(e.cfg, e.work / "task");
  const synthio::Task& task = *e.task;
  std::vector<std::pair<Tensor, std::vector<int>>> corpus;
  for (const auto& r : task.corpus)
    corpus.emplace_back(diffusion::video_to_latent(synthio::load_video(task, r)),
                        r.prompt_id_list());

  // One pretrained, frozen base shared by every run.
  model::DenoiserConfig mc;
  mc.variant = e.cfg.str("model.variant");
  mc.width = int(e.cfg.integer("model.width"));
  mc.blocks = int(e.cfg.integer("model.blocks"));
  mc.heads = int(e.cfg.integer("model.heads"));
  mc.patch = int(e.cfg.integer("model.patch"));
  mc.mlp_ratio = int(e.cfg.integer("model.mlp_ratio"));
  mc.height = int(e.cfg.integer("data.height"));
  mc.width_px = int(e.cfg.integer("data.width"));
  mc.timesteps = int(e.cfg.integer("diffusion.timesteps"));
  mc.vocab = int(synthio::vocab().tokens.size());
  e.base.emplace(model::build_denoiser(mc, e.cfg.integer("model.seed")));
  model::Denoiser& base = *e.base;

  model::PretrainConfig pc;
  pc.steps = e.cfg.integer("pretrain.steps");
  pc.lr = e.cfg.number("pretrain.lr");
  pc.batch = int(e.cfg.integer("pretrain.batch"));
  pc.optimizer = e.cfg.str("pretrain.optimizer");
  pc.log_every = e.cfg.integer("pretrain.log_every");
  pc.seed = e.cfg.integer("pretrain.seed");
  pc.schedule = e.cfg.str("diffusion.schedule");
  Clock::time_point t0 = Clock::now();
  double first = 0.0, last = 0.0;
  model::pretrain(base, corpus, pc, [&](long step, double loss) {
    if (step == 0) first = loss;
    last = loss;
  });
  model::freeze(base);
  e.pretrain_secs = seconds_since(t0);
  e.base_ck = model::base_checksum(base);
  std::printf("       pretrain: %ld steps in %.0fs, loss %.3f -> %.4f\n",
              pc.steps, e.pretrain_secs, first, last);
  if (e.pretrain_secs > 1800.0) {
    v.detail = "pretrain exceeded 30 min: " + fmt("%.0f", e.pretrain_secs) + "s";
    return v;
  }

  // Scoring references.
  std::vector<Tensor> app_refs, mot_refs;
  for (const auto& r : task.appearance)
    app_refs.push_back(synthio::load_video(task, r));
  for (const auto& r : task.motion)
    mot_refs.push_back(synthio::load_video(task, r));
  auto subject = evalkit::reference_descriptor(app_refs);
  auto motion_subject = evalkit::reference_descriptor(mot_refs);
  auto prompt = synthio::prompt_ids(task.infer_prompt());
  int frames = int(e.cfg.integer("sampler.frames"));

  auto timed_check = [&](Clock::time_point start, const char* what) {
    double dt = seconds_since(start);
    e.finetune_secs.push_back(dt);
    if (dt > 600.0)
      throw std::runtime_error(std::string(what) + " exceeded 10 min: " +
                               fmt("%.0f", dt) + "s");
    if (model::base_checksum(base) != e.base_ck) e.base_ck_stable = false;
  };
  auto sample_with = [&](std::vector<glora::Adapter*> ads, std::uint64_t seed) {
    train::detail::InjectScope scope(base);
    for (glora::Adapter* a : ads) model::inject(base, *a);
    return train::sample_videos(base, e.cfg, prompt, frames, seed);
  };

  for (long seed : e.seeds) {
    Config cs = e.cfg;
    cs.set_override("trainer.seed=" + std::to_string(seed));

    Clock::time_point tj = Clock::now();
    train::JointResult jr = train::train_joint(base, task, cs);
    timed_check(tj, "joint fine-tune");
    e.joint_traces.push_back(jr.trace);
    if (seed == 1) {
      e.joint1_ck = jr.adapter.checksum();
      e.joint1_runlog = jr.runlog;
    }

    Clock::time_point ts = Clock::now();
    train::StagewiseResult sr = train::train_stagewise(base, task, cs);
    timed_check(ts, "stage-wise fine-tune");

    Config cp = cs;
    cp.set_override("trainer.ait=false");
    Clock::time_point tp = Clock::now();
    train::JointResult pr = train::train_joint(base, task, cp);
    timed_check(tp, "no-shift fine-tune");

    std::uint64_t sseed = std::uint64_t(seed);
    e.frozen.push_back(score_videos(sample_with({}, sseed), subject,
                                    motion_subject, task.target_traj));
    e.joint.push_back(score_videos(sample_with({&jr.adapter}, sseed), subject,
                                   motion_subject, task.target_traj));
    e.staged.push_back(score_videos(
        sample_with({&sr.spatial, &sr.temporal}, sseed), subject,
        motion_subject, task.target_traj));
    e.plain.push_back(score_videos(sample_with({&pr.adapter}, sseed), subject,
                                   motion_subject, task.target_traj));

    const RunScores &b = e.frozen.back(), &j = e.joint.back(),
                    &st = e.staged.back(), &pl = e.plain.back();
    std::printf(
        "       seed %ld: app base %.3f joint %.3f staged %.3f | mot base "
        "%+.3f joint %+.3f staged %+.3f | leak shift %.3f plain %.3f\n",
        seed, b.app, j.app, st.app, b.mot, j.mot, st.mot, j.leak, pl.leak);
    std::fflush(stdout);
  }

  RunScores mb = mean_scores(e.frozen), mj = mean_scores(e.joint),
            ms = mean_scores(e.staged), mp = mean_scores(e.plain);
  double nj = 0.0, ns = 0.0;
  for (std::size_t i = 0; i < e.joint.size(); ++i) {
    nj += normalized_mean(e.joint[i]) / double(e.joint.size());
    ns += normalized_mean(e.staged[i]) / double(e.staged.size());
  }

  if (!(mj.app > mb.app && mj.mot > mb.mot)) {
    v.detail = "joint does not beat the frozen base (app " +
               fmt("%.3f", mj.app) + " vs " + fmt("%.3f", mb.app) + ", mot " +
               fmt("%+.3f", mj.mot) + " vs " + fmt("%+.3f", mb.mot) + ")";
    return v;
  }
  if (!(nj > ns)) {
    v.detail = "joint does not beat stage-wise on the normalized mean (" +
               fmt("%.4f", nj) + " vs " + fmt("%.4f", ns) + ")";
    return v;
  }
  if (!(mj.leak <= mp.leak)) {
    v.detail = "shift-trained leakage " + fmt("%.4f", mj.leak) +
               " exceeds plain-loss leakage " + fmt("%.4f", mp.leak);
    return v;
  }

  double worst_ft = 0.0;
  for (double s : e.finetune_secs) worst_ft = std::max(worst_ft, s);
  v.pass = true;
  v.detail = "joint > base (app " + fmt("%.3f", mj.app) + ">" +
             fmt("%.3f", mb.app) + ", mot " + fmt("%+.3f", mj.mot) + ">" +
             fmt("%+.3f", mb.mot) + "); joint " + fmt("%.4f", nj) +
             " > staged " + fmt("%.4f", ns) + " normalized; leakage " +
             fmt("%.4f", mj.leak) + " <= " + fmt("%.4f", mp.leak) +
             "; pretrain " + fmt("%.0f", e.pretrain_secs) +
             "s, slowest fine-tune " + fmt("%.0f", worst_ft) + "s";
  return v;
}

// ---------------------------------------------------------------------------
// 7. Gate specialization: spatial-block gates prefer image batches, temporal
// gates prefer video batches. One inverted seed downgrades to a warning.

Verdict criterion7(const EndToEnd& e) {
  Verdict v;
  if (e.joint_traces.size() != e.seeds.size()) {
    v.detail = "end-to-end prerequisite failed";
    return v;
  }
  int failures = 0;
  std::string per_seed;
  for (std::size_t i = 0; i < e.joint_traces.size(); ++i) {
    const auto& rec = e.joint_traces[i].records;
    double si = analysis::mean_gate(rec, "spatial", glora::Phase::image_train);
    double sv = analysis::mean_gate(rec, "spatial", glora::Phase::video_train);
    double ti = analysis::mean_gate(rec, "temporal", glora::Phase::image_train);
    double tv = analysis::mean_gate(rec, "temporal", glora::Phase::video_train);
    bool ok = si > sv && tv > ti;
    failures += ok ? 0 : 1;
    per_seed += " seed" + std::to_string(e.seeds[i]) + (ok ? " ok" : " INV") +
                " (spatial " + fmt("%.4f", si) + "/" + fmt("%.4f", sv) +
                ", temporal " + fmt("%.4f", ti) + "/" + fmt("%.4f", tv) + ")";
    std::printf(
        "       seed %ld gates: spatial image %.4f video %.4f | temporal "
        "image %.4f video %.4f%s\n",
        e.seeds[i], si, sv, ti, tv, ok ? "" : "  [inverted]");
  }
  if (failures >= 2) {
    v.detail = std::to_string(failures) + " of 3 seeds inverted:" + per_seed;
    return v;
  }
  v.pass = true;
  if (failures == 1) v.warning = "1 of 3 seeds inverted";
  v.detail = "spatial gates favor image phases, temporal gates favor video "
             "phases:" + per_seed;
  return v;
}

// ---------------------------------------------------------------------------
// 8. Determinism and hygiene.

Verdict criterion8(EndToEnd& e) {
  Verdict v;

  // Tensor files round-trip bit exactly.
  Rng rng = Rng(808).split("roundtrip");
  Tensor t = diffusion::gaussian_like({3, 2, 5, 4}, rng);
  fs::path file = e.work.empty() ? fs::temp_directory_path() / "jt-roundtrip.jtns"
                                 : e.work / "roundtrip.jtns";
  write_tensor(file, t, DType::f64);
  Tensor back = read_tensor(file);
  if (back.dims != t.dims ||
      std::memcmp(back.v.data(), t.v.data(), sizeof(double) * t.v.size()) != 0) {
    v.detail = "tensor file round trip is not bit-exact";
    return v;
  }

  if (!e.base || e.joint1_runlog.empty()) {
    v.detail = "end-to-end prerequisite failed";
    return v;
  }

  // Identical (config, seed) reproduce the seed-1 joint run bit for bit.
  Config c1 = e.cfg;
  c1.set_override("trainer.seed=1");
  train::JointResult again = train::train_joint(*e.base, *e.task, c1);
  if (again.adapter.checksum() != e.joint1_ck) {
    v.detail = "repeated (config, seed) produced a different adapter";
    return v;
  }
  if (again.runlog != e.joint1_runlog) {
    v.detail = "repeated (config, seed) produced a different run log";
    return v;
  }

  // Base weights never moved across the ten fine-tuning runs.
  if (!e.base_ck_stable || model::base_checksum(*e.base) != e.base_ck) {
    v.detail = "base-weight checksum drifted across fine-tuning runs";
    return v;
  }

  v.pass = true;
  v.detail = "adapter checksum " + hex64(e.joint1_ck) +
             " and run log reproduce bit-identically; base checksum " +
             hex64(e.base_ck) + " invariant; tensor round trip exact";
  return v;
}

}  // namespace

int main() {
  struct Row {
    const char* name;
    Verdict verdict;
  };
  EndToEnd shared;
  std::vector<Row> rows;
  auto run = [&rows](const char* name, auto&& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& ex) {
      v.pass = false;
      v.detail = std::string("exception: ") + ex.what();
    }
    std::printf("[%s] %s: %s%s\n", v.pass ? "PASS" : "FAIL", name,
                v.detail.c_str(),
                v.warning.empty() ? "" : (" (warning: " + v.warning + ")").c_str());
    std::fflush(stdout);
    rows.push_back({name, v});
  };

  run("1 composite reproduction", criterion1);
  run("2 adapter arithmetic", criterion2);
  run("3 gradient check", criterion3);
  run("4 loss identities", criterion4);
  run("5 spectral suite", criterion5);
  run("6 end-to-end property", [&shared] { return criterion6(shared); });
  run("7 gate specialization", [&shared] { return criterion7(shared); });
  run("8 determinism & hygiene", [&shared] { return criterion8(shared); });

  int failed = 0;
  for (const Row& r : rows) failed += r.verdict.pass ? 0 : 1;
  if (failed) {
    std::printf("acceptance: %d of %zu criteria failed\n", failed, rows.size());
    return 1;
  }
  std::printf("acceptance: all %zu criteria passed\n", rows.size());
  return 0;
}
