// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Diffusion machinery over rank-4 latents (F,C,H,W): beta schedules, forward
// noising, structured shift noise, the training losses, and a deterministic
// DDIM-style sampler plus its inversion.
//
// Index convention: alpha_bar[t] = prod_{j=1..t}(1 - beta_j) for t in [0..T]
// with alpha_bar[0] = 1, so q_sample(z0, 0) is exactly z0 and the network
// itself only ever sees t in [0, T).

#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointtuner/rng.hpp"
#include "jointtuner/tensor.hpp"

namespace jt::diffusion {

struct NoiseSchedule {
  int T = 0;
  std::string kind;
  std::vector<double> beta;       // beta[t], t in [1..T]; beta[0] = 0
  std::vector<double> alpha_bar;  // alpha_bar[t], t in [0..T]
  std::vector<double> sqrt_ab, sqrt_1mab;
};

inline NoiseSchedule make_schedule(const std::string& kind, int T) {
  if (T < 2) throw std::runtime_error("schedule needs T >= 2");
  NoiseSchedule s;
  s.T = T;
  s.kind = kind;
  s.beta.assign(T + 1, 0.0);
  s.alpha_bar.assign(T + 1, 1.0);
  if (kind == "linear") {
    for (int t = 1; t <= T; ++t)
      s.beta[t] = 1e-4 + (0.02 - 1e-4) * double(t - 1) / double(T - 1);
    for (int t = 1; t <= T; ++t)
      s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.beta[t]);
  } else if (kind == "cosine") {
    // Squared-cosine profile; betas are clipped to [0, 0.999] and alpha_bar
    // stays the running product of (1 - beta) so the single convention
    // alpha_bar(t) = prod_{j<=t} (1 - beta_j) holds for every schedule kind.
    auto f = [T](double t) {
      double v = std::cos((t / T + 0.008) / 1.008 * 1.5707963267948966192);
      return v * v;
    };
    for (int t = 1; t <= T; ++t) {
      double b = 1.0 - f(double(t)) / f(double(t - 1));
      s.beta[t] = std::min(std::max(b, 0.0), 0.999);
      s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.beta[t]);
    }
  } else {
    throw std::runtime_error("unknown schedule kind: " + kind);
  }
  s.sqrt_ab.resize(T + 1);
  s.sqrt_1mab.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    s.sqrt_ab[t] = std::sqrt(s.alpha_bar[t]);
    s.sqrt_1mab[t] = std::sqrt(1.0 - s.alpha_bar[t]);
  }
  return s;
}

// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps
inline Tensor q_sample(const NoiseSchedule& s, const Tensor& z0, int t,
                       const Tensor& eps) {
  if (t < 0 || t > s.T) throw std::runtime_error("q_sample: t out of range");
  if (z0.dims != eps.dims) throw std::runtime_error("q_sample: shape mismatch");
  Tensor zt = z0;
  double a = s.sqrt_ab[t], b = s.sqrt_1mab[t];
  for (std::size_t i = 0; i < zt.v.size(); ++i)
    zt.v[i] = a * z0.v[i] + b * eps.v[i];
  return zt;
}

inline Tensor gaussian_like(const std::vector<std::uint64_t>& dims, Rng& rng,
                            double sigma = 1.0) {
  Tensor t = make_tensor(dims);
  rng.fill_normal(t.v, sigma);
  return t;
}

// ---------------------------------------------------------------------------
// Shift noise: i.i.d. Gaussian on the layout's free axes, exactly constant
// along the broadcast axes. Materialized at full (F,C,H,W).

enum class ShiftLayout {
  channel_temporal,  // free (H,W); constant across frames and channels
  spatial,           // free (F,C); constant within each frame-channel plane
  full,              // free everywhere
  channel,           // free (F,H,W); constant across channels
  temporal,          // free (C,H,W); constant across frames
};

inline ShiftLayout parse_shift_layout(const std::string& s) {
  if (s == "channel-temporal") return ShiftLayout::channel_temporal;
  if (s == "spatial") return ShiftLayout::spatial;
  if (s == "full") return ShiftLayout::full;
  if (s == "channel") return ShiftLayout::channel;
  if (s == "temporal") return ShiftLayout::temporal;
  throw std::runtime_error("unknown shift layout: " + s);
}

inline std::string shift_layout_name(ShiftLayout l) {
  switch (l) {
    case ShiftLayout::channel_temporal: return "channel-temporal";
    case ShiftLayout::spatial: return "spatial";
    case ShiftLayout::full: return "full";
    case ShiftLayout::channel: return "channel";
    case ShiftLayout::temporal: return "temporal";
  }
  throw std::runtime_error("bad shift layout");
}

inline Tensor sample_shift(ShiftLayout layout, std::uint64_t F,
                           std::uint64_t C, std::uint64_t H, std::uint64_t W,
                           double scale, Rng& rng) {
  Tensor out = make_tensor({F, C, H, W});
  switch (layout) {
    case ShiftLayout::channel_temporal: {
      Tensor plane = make_tensor({H, W, 1, 1});
      rng.fill_normal(plane.v, scale);
      for (std::uint64_t f = 0; f < F; ++f)
        for (std::uint64_t c = 0; c < C; ++c)
          for (std::uint64_t y = 0; y < H; ++y)
            for (std::uint64_t x = 0; x < W; ++x)
              out.at4(f, c, y, x) = plane.v[y * W + x];
      break;
    }
    case ShiftLayout::spatial: {
      std::vector<double> v(F * C);
      rng.fill_normal(v, scale);
      for (std::uint64_t f = 0; f < F; ++f)
        for (std::uint64_t c = 0; c < C; ++c)
          for (std::uint64_t y = 0; y < H; ++y)
            for (std::uint64_t x = 0; x < W; ++x)
              out.at4(f, c, y, x) = v[f * C + c];
      break;
    }
    case ShiftLayout::full:
      rng.fill_normal(out.v, scale);
      break;
    case ShiftLayout::channel: {
      std::vector<double> v(F * H * W);
      rng.fill_normal(v, scale);
      for (std::uint64_t f = 0; f < F; ++f)
        for (std::uint64_t c = 0; c < C; ++c)
          for (std::uint64_t y = 0; y < H; ++y)
            for (std::uint64_t x = 0; x < W; ++x)
              out.at4(f, c, y, x) = v[(f * H + y) * W + x];
      break;
    }
    case ShiftLayout::temporal: {
      std::vector<double> v(C * H * W);
      rng.fill_normal(v, scale);
      for (std::uint64_t f = 0; f < F; ++f)
        for (std::uint64_t c = 0; c < C; ++c)
          for (std::uint64_t y = 0; y < H; ++y)
            for (std::uint64_t x = 0; x < W; ++x)
              out.at4(f, c, y, x) = v[(c * H + y) * W + x];
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses (tensor forms; the trainer composes the same math on the autodiff
// graph). The shift is added to the prediction, never to the target: the
// model is free to drop appearance detail the shift can explain.

inline double diffusion_loss(const Tensor& eps, const Tensor& eps_hat) {
  if (eps.dims != eps_hat.dims)
    throw std::runtime_error("diffusion_loss: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < eps.v.size(); ++i) {
    double d = eps.v[i] - eps_hat.v[i];
    acc += d * d;
  }
  return acc / static_cast<double>(eps.v.size());
}

// MSE between the true noise and the shift-augmented prediction eps_hat +
// delta.  The residual is evaluated as (eps - delta) - eps_hat — algebraically
// the same thing, but with the property that a prediction constructed as
// eps - delta cancels exactly in floating point (the literal (eps_hat +
// delta) grouping would reintroduce a rounding step and break that identity).
// This is also precisely the quantity the trainer optimizes when it shifts
// the regression target instead of the prediction.
inline double ait_loss(const Tensor& eps, const Tensor& eps_hat,
                       const Tensor& delta) {
  if (eps.dims != eps_hat.dims || eps.dims != delta.dims)
    throw std::runtime_error("ait_loss: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < eps.v.size(); ++i) {
    double d = (eps.v[i] - delta.v[i]) - eps_hat.v[i];
    acc += d * d;
  }
  return acc / static_cast<double>(eps.v.size());
}

// ---------------------------------------------------------------------------
// Deterministic (eta = 0) DDIM sampling and inversion. The model callback
// returns the predicted noise for (z_t, t); prompts and adapters are bound
// by the caller. Time grid: grid[k] = round(k (T-1) / steps), k = 0..steps.

using ModelFn = std::function<Tensor(const Tensor& z, int t)>;

inline std::vector<int> ddim_grid(int T, int steps) {
  if (steps < 1) throw std::runtime_error("ddim: steps must be >= 1");
  std::vector<int> g(steps + 1);
  for (int k = 0; k <= steps; ++k)
    g[k] = static_cast<int>(std::lround(double(k) * (T - 1) / steps));
  return g;
}

// Runs the deterministic sampler map backwards from a given terminal latent.
inline Tensor ddim_sample_from(const ModelFn& model, const NoiseSchedule& s,
                               int steps, const Tensor& z_terminal,
                               bool clip_x0 = true) {
  auto grid = ddim_grid(s.T, steps);
  Tensor z = z_terminal;
  for (int k = steps; k >= 1; --k) {
    int thi = grid[k], tlo = grid[k - 1];
    Tensor eh = model(z, thi);
    double a = s.sqrt_ab[thi], b = s.sqrt_1mab[thi];
    for (std::size_t i = 0; i < z.v.size(); ++i) {
      double x0 = (z.v[i] - b * eh.v[i]) / a;
      if (clip_x0) x0 = std::min(1.0, std::max(-1.0, x0));
      z.v[i] = s.sqrt_ab[tlo] * x0 + s.sqrt_1mab[tlo] * eh.v[i];
    }
  }
  return z;
}

// Draws terminal noise and samples down to a clean latent.
inline Tensor ddim_sample(const ModelFn& model, const NoiseSchedule& s,
                          int steps, const std::vector<std::uint64_t>& dims,
                          Rng& rng, bool clip_x0 = true) {
  return ddim_sample_from(model, s, steps, gaussian_like(dims, rng), clip_x0);
}

// Runs the sampler map forwards from z0; steps = 0 returns z0 unchanged.
inline Tensor ddim_invert(const ModelFn& model, const NoiseSchedule& s,
                          int steps, const Tensor& z0) {
  if (steps == 0) return z0;
  auto grid = ddim_grid(s.T, steps);
  Tensor z = z0;
  for (int k = 0; k < steps; ++k) {
    int tlo = grid[k], thi = grid[k + 1];
    Tensor eh = model(z, tlo);
    double a = s.sqrt_ab[tlo], b = s.sqrt_1mab[tlo];
    for (std::size_t i = 0; i < z.v.size(); ++i) {
      double x0 = (z.v[i] - b * eh.v[i]) / a;
      z.v[i] = s.sqrt_ab[thi] * x0 + s.sqrt_1mab[thi] * eh.v[i];
    }
  }
  return z;
}

// Pixel [0,1] <-> latent [-1,1]: the fixed affine map between rendered
// videos and the diffusion state space.
inline Tensor video_to_latent(const Tensor& video) {
  Tensor z = video;
  for (auto& x : z.v) x = 2.0 * x - 1.0;
  return z;
}

inline Tensor latent_to_video(const Tensor& z) {
  Tensor v = z;
  for (auto& x : v.v)
    x = std::min(1.0, std::max(0.0, 0.5 * (x + 1.0)));
  return v;
}

}  // namespace jt::diffusion
