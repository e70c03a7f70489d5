// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Spectral and diagnostic analysis.
//
// The central question: where does an appearance shift put its energy?  We
// answer it with a 3D (frames x height x width) power spectrum per channel,
// folded into radial bands of normalized frequency.  A channel-temporal shift
// is constant across space, so its energy lands on the spatially-DC plane --
// which still spans the full temporal axis -- and noticeably raises the
// high-band share of smooth (low-frequency) latents once diffusion noise is
// added on top.
//
// Also here: the inversion demo (invert a clip, add a shift, re-sample, and
// measure what survived) and gate-trace aggregation.

#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointtuner/diffusion.hpp"
#include "jointtuner/evalkit.hpp"
#include "jointtuner/glora.hpp"
#include "jointtuner/rng.hpp"
#include "jointtuner/tensor.hpp"
#include "jointtuner/textio.hpp"

namespace jt::analysis {

// ---------------------------------------------------------------------------
// 1D DFT along a strided axis: iterative radix-2 when the length is a power
// of two, direct O(n^2) evaluation otherwise.  Forward transform, no
// normalization (scaling cancels in band fractions).

namespace detail {

inline bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

inline void fft_pow2(std::complex<double>* a, std::size_t n, std::size_t stride) {
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i * stride], a[j * stride]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / double(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[(i + k) * stride];
        std::complex<double> v = a[(i + k + len / 2) * stride] * w;
        a[(i + k) * stride] = u + v;
        a[(i + k + len / 2) * stride] = u - v;
        w *= wl;
      }
    }
  }
}

inline void dft_naive(std::complex<double>* a, std::size_t n, std::size_t stride) {
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double ang = -2.0 * M_PI * double(k) * double(j) / double(n);
      acc += a[j * stride] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  for (std::size_t k = 0; k < n; ++k) a[k * stride] = out[k];
}

inline void dft_axis(std::complex<double>* a, std::size_t n, std::size_t stride) {
  if (n == 1) return;
  if (is_pow2(n))
    fft_pow2(a, n, stride);
  else
    dft_naive(a, n, stride);
}

}  // namespace detail

// In-place 3D DFT of an F x H x W complex volume (row-major, W fastest).
inline void dft3(std::vector<std::complex<double>>& a, std::size_t F,
                 std::size_t H, std::size_t W) {
  if (a.size() != F * H * W) throw std::runtime_error("dft3: size mismatch");
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t y = 0; y < H; ++y)
      detail::dft_axis(a.data() + (f * H + y) * W, W, 1);
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t x = 0; x < W; ++x)
      detail::dft_axis(a.data() + f * H * W + x, H, W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      detail::dft_axis(a.data() + y * W + x, F, H * W);
}

// ---------------------------------------------------------------------------
// Radial band profile.

// Normalized frequency of index i on an axis of length n, in [0, 1]:
// distance to the nearest alias divided by the Nyquist index.
inline double axis_freq(std::size_t i, std::size_t n) {
  std::size_t half = n / 2;
  if (half == 0) return 0.0;
  double f = double(std::min(i, n - i));
  return f / double(half);
}

// Overall normalized radius in [0, 1] for a 3D lattice point.
inline double lattice_radius(std::size_t f, std::size_t y, std::size_t x,
                             std::size_t F, std::size_t H, std::size_t W) {
  double ft = axis_freq(f, F), fy = axis_freq(y, H), fx = axis_freq(x, W);
  return std::sqrt(ft * ft + fy * fy + fx * fx) / std::sqrt(3.0);
}

inline int band_of(double radius, int bands) {
  int b = int(radius * bands);
  return std::min(b, bands - 1);
}

struct SpectrumProfile {
  std::vector<double> fractions;  // per band, sums to 1

  // Share of energy in the upper half of the bands.
  double high_fraction() const {
    double s = 0.0;
    for (std::size_t b = fractions.size() / 2; b < fractions.size(); ++b)
      s += fractions[b];
    return s;
  }
};

// Band-energy fractions of an (F, C, H, W) tensor: per-channel 3D power
// spectra over (frames, height, width), band sums averaged across channels.
// A channel with zero total power counts as pure DC (band 0).
inline SpectrumProfile spectrum_profile(const Tensor& z, int bands = 10) {
  if (z.dims.size() != 4) throw std::runtime_error("spectrum_profile: want 4D");
  std::size_t F = z.dims[0], C = z.dims[1], H = z.dims[2], W = z.dims[3];
  SpectrumProfile p;
  p.fractions.assign(std::size_t(bands), 0.0);
  std::vector<std::complex<double>> buf(F * H * W);
  std::vector<double> band_sum(std::size_t(bands), 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          buf[(f * H + y) * W + x] =
              std::complex<double>(z.at4(int(f), int(c), int(y), int(x)), 0.0);
    dft3(buf, F, H, W);
    std::fill(band_sum.begin(), band_sum.end(), 0.0);
    double total = 0.0;
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          double pw = std::norm(buf[(f * H + y) * W + x]);
          band_sum[std::size_t(band_of(lattice_radius(f, y, x, F, H, W),
                                       bands))] += pw;
          total += pw;
        }
    if (total <= 0.0) {
      p.fractions[0] += 1.0;  // silent channel: all energy at DC by convention
    } else {
      for (int b = 0; b < bands; ++b) p.fractions[std::size_t(b)] += band_sum[std::size_t(b)] / total;
    }
  }
  for (int b = 0; b < bands; ++b) p.fractions[std::size_t(b)] /= double(C);
  return p;
}

// ---------------------------------------------------------------------------
// Smooth synthetic latents: random low-frequency cosine fields, rescaled to
// an exact RMS.  Only lattice frequencies with radius < cutoff contribute,
// so the clean signal has no high-band energy at all.

inline Tensor make_smooth_latent(int F, int C, int H, int W, double rms,
                                 double cutoff, Rng& rng) {
  Tensor z = make_tensor({std::uint64_t(F), std::uint64_t(C), std::uint64_t(H),
                          std::uint64_t(W)});
  struct Mode {
    double kf, ky, kx, amp, phase;
  };
  for (int c = 0; c < C; ++c) {
    std::vector<Mode> modes;
    for (int f = 0; f < F; ++f)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          if (lattice_radius(std::size_t(f), std::size_t(y), std::size_t(x),
                             std::size_t(F), std::size_t(H),
                             std::size_t(W)) >= cutoff)
            continue;
          modes.push_back({double(f) / F, double(y) / H, double(x) / W,
                           rng.normal(), rng.uniform() * 2.0 * M_PI});
        }
    double ssq = 0.0;
    for (int f = 0; f < F; ++f)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double v = 0.0;
          for (const Mode& m : modes)
            v += m.amp * std::cos(2.0 * M_PI *
                                      (m.kf * f + m.ky * y + m.kx * x) +
                                  m.phase);
          z.at4(f, c, y, x) = v;
          ssq += v * v;
        }
    double have = std::sqrt(ssq / (double(F) * H * W));
    double scale = have > 0.0 ? rms / have : 0.0;
    for (int f = 0; f < F; ++f)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) z.at4(f, c, y, x) *= scale;
  }
  return z;
}

// ---------------------------------------------------------------------------
// Shift spectrum comparison.

struct ShiftSpectraParams {
  std::vector<int> timesteps = {200, 400, 600, 800};
  std::vector<diffusion::ShiftLayout> layouts = {
      diffusion::ShiftLayout::channel_temporal};
  double shift_scale = 1.0;
  int bands = 10;
  std::uint64_t seed = 1;
};

// For each probe timestep: noise the clean latent, then for each layout add
// a freshly-sampled shift and compare band fractions with the base latent.
// Rows: t, layout, variant (base|shifted), band, fraction.
inline Csv compare_shift_spectra(const Tensor& z0,
                                 const diffusion::NoiseSchedule& sched,
                                 const ShiftSpectraParams& prm) {
  Csv csv;
  csv.header = {"t", "layout", "variant", "band", "fraction"};
  Rng rng(prm.seed);
  Rng noise_rng = rng.split("noise");
  Rng shift_rng = rng.split("shift");
  int F = int(z0.dims[0]), C = int(z0.dims[1]), H = int(z0.dims[2]),
      W = int(z0.dims[3]);
  for (int t : prm.timesteps) {
    Tensor eps = diffusion::gaussian_like(z0.dims, noise_rng);
    Tensor zt = diffusion::q_sample(sched, z0, t, eps);
    SpectrumProfile base = spectrum_profile(zt, prm.bands);
    for (int b = 0; b < prm.bands; ++b)
      csv.rows.push_back({std::to_string(t), "base", "base", std::to_string(b),
                          format_double(base.fractions[std::size_t(b)])});
    for (auto layout : prm.layouts) {
      Tensor delta = diffusion::sample_shift(
          layout, std::uint64_t(F), std::uint64_t(C), std::uint64_t(H),
          std::uint64_t(W), prm.shift_scale, shift_rng);
      Tensor zs = zt;
      for (std::size_t i = 0; i < zs.v.size(); ++i) zs.v[i] += delta.v[i];
      SpectrumProfile shifted = spectrum_profile(zs, prm.bands);
      for (int b = 0; b < prm.bands; ++b)
        csv.rows.push_back({std::to_string(t),
                            diffusion::shift_layout_name(layout), "shifted",
                            std::to_string(b),
                            format_double(shifted.fractions[std::size_t(b)])});
    }
  }
  return csv;
}

// High-band fractions extracted from a compare_shift_spectra table:
// map (t, layout-or-"base") -> sum of upper-half band fractions.
inline std::map<std::pair<int, std::string>, double> high_band_summary(
    const Csv& csv, int bands = 10) {
  std::map<std::pair<int, std::string>, double> acc;
  int ct = csv.col("t"), cl = csv.col("layout"), cb = csv.col("band"),
      cf = csv.col("fraction");
  for (const auto& row : csv.rows) {
    int b = std::stoi(row[std::size_t(cb)]);
    if (b < bands / 2) continue;
    acc[{std::stoi(row[std::size_t(ct)]), row[std::size_t(cl)]}] +=
        std::stod(row[std::size_t(cf)]);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Inversion demo: invert a clip to noise with the base model, optionally add
// an appearance shift, sample back, and measure what survived.  Appearance
// damage shows up as per-frame reconstruction error; motion survival shows
// up as correlation between tracked centroid trajectories.

struct InversionDemoResult {
  Tensor recon;          // plain invert -> sample round trip (latent space)
  Tensor shifted_recon;  // invert -> +shift -> sample
  std::vector<double> recon_mse;    // per frame vs original latent
  std::vector<double> shifted_mse;  // per frame vs original latent
  double traj_correlation = 0.0;    // shifted recon vs original video motion
  bool traj_valid = false;
};

inline std::vector<double> per_frame_mse(const Tensor& a, const Tensor& b) {
  std::size_t F = a.dims[0];
  std::uint64_t plane = a.dims[1] * a.dims[2] * a.dims[3];
  std::vector<double> out(F);
  for (std::size_t f = 0; f < F; ++f) {
    double s = 0.0;
    for (std::uint64_t i = 0; i < plane; ++i) {
      double d = a.v[f * plane + i] - b.v[f * plane + i];
      s += d * d;
    }
    out[f] = s / double(plane);
  }
  return out;
}

// Pearson correlation between two centroid tracks (x and y series jointly).
inline double track_correlation(const evalkit::Track& a,
                                const evalkit::Track& b) {
  std::size_t n = std::min(a.centroids.size(), b.centroids.size());
  std::vector<double> u, v;
  for (std::size_t f = 0; f < n; ++f) {
    u.push_back(a.centroids[f][0]);
    u.push_back(a.centroids[f][1]);
    v.push_back(b.centroids[f][0]);
    v.push_back(b.centroids[f][1]);
  }
  double mu = 0, mv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= double(u.size());
  mv /= double(v.size());
  double suv = 0, suu = 0, svv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suv += (u[i] - mu) * (v[i] - mv);
    suu += (u[i] - mu) * (u[i] - mu);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  if (suu < 1e-12 || svv < 1e-12) return 0.0;
  return suv / std::sqrt(suu * svv);
}

inline InversionDemoResult shift_inversion_demo(
    const diffusion::ModelFn& model, const diffusion::NoiseSchedule& sched,
    const Tensor& z0, diffusion::ShiftLayout layout, int steps,
    double shift_scale, bool clip_x0, std::uint64_t seed) {
  InversionDemoResult res;
  Tensor zT = diffusion::ddim_invert(model, sched, steps, z0);
  res.recon = diffusion::ddim_sample_from(model, sched, steps, zT, clip_x0);
  Rng rng(seed);
  Rng shift_rng = rng.split("shift");
  Tensor delta = diffusion::sample_shift(layout, z0.dims[0], z0.dims[1],
                                         z0.dims[2], z0.dims[3], shift_scale,
                                         shift_rng);
  Tensor zTs = zT;
  for (std::size_t i = 0; i < zTs.v.size(); ++i) zTs.v[i] += delta.v[i];
  res.shifted_recon =
      diffusion::ddim_sample_from(model, sched, steps, zTs, clip_x0);
  res.recon_mse = per_frame_mse(res.recon, z0);
  res.shifted_mse = per_frame_mse(res.shifted_recon, z0);

  evalkit::Track orig = evalkit::track_centroids(diffusion::latent_to_video(z0));
  evalkit::Track shif =
      evalkit::track_centroids(diffusion::latent_to_video(res.shifted_recon));
  if (!orig.failed && !shif.failed) {
    res.traj_correlation = track_correlation(orig, shif);
    res.traj_valid = true;
  }
  return res;
}

inline Csv inversion_demo_to_csv(const InversionDemoResult& r) {
  Csv csv;
  csv.header = {"frame", "recon_mse", "shifted_mse"};
  for (std::size_t f = 0; f < r.recon_mse.size(); ++f)
    csv.rows.push_back({std::to_string(f), format_double(r.recon_mse[f]),
                        format_double(r.shifted_mse[f])});
  return csv;
}

// ---------------------------------------------------------------------------
// Gate trace aggregation: per (layer, phase) mean/std/count of gate values.

struct GateStat {
  std::string layer, block_kind, phase;
  double mean = 0, stddev = 0;
  int count = 0;
};

inline std::vector<GateStat> gate_report(
    const std::vector<glora::GateRecord>& records) {
  // Keyed by (layer, phase); block_kind rides along (constant per layer).
  std::map<std::pair<std::string, std::string>,
           std::tuple<double, double, int, std::string>>
      acc;
  for (const auto& r : records) {
    auto& [s, ss, n, kind] = acc[{r.layer, glora::phase_name(r.phase)}];
    s += r.value;
    ss += r.value * r.value;
    n += 1;
    kind = r.block_kind;
  }
  std::vector<GateStat> out;
  for (const auto& [key, val] : acc) {
    const auto& [s, ss, n, kind] = val;
    GateStat g;
    g.layer = key.first;
    g.phase = key.second;
    g.block_kind = kind;
    g.count = n;
    g.mean = s / n;
    g.stddev = std::sqrt(std::max(0.0, ss / n - g.mean * g.mean));
    out.push_back(g);
  }
  return out;
}

inline std::vector<glora::GateRecord> gate_records_from_csv(const Csv& csv) {
  std::vector<glora::GateRecord> out;
  int cl = csv.col("layer"), ck = csv.col("block_kind"), cp = csv.col("phase"),
      cs = csv.col("step"), cv = csv.col("value");
  for (const auto& row : csv.rows) {
    glora::GateRecord r;
    r.layer = row[std::size_t(cl)];
    r.block_kind = row[std::size_t(ck)];
    r.phase = glora::parse_phase(row[std::size_t(cp)]);
    r.step = std::stoi(row[std::size_t(cs)]);
    r.value = std::stod(row[std::size_t(cv)]);
    out.push_back(r);
  }
  return out;
}

inline Csv gate_report_to_csv(const std::vector<GateStat>& stats) {
  Csv csv;
  csv.header = {"layer", "block_kind", "phase", "mean", "stddev", "count"};
  for (const auto& g : stats)
    csv.rows.push_back({g.layer, g.block_kind, g.phase, format_double(g.mean),
                        format_double(g.stddev), std::to_string(g.count)});
  return csv;
}

// Mean gate value over records matching a block kind and phase.
inline double mean_gate(const std::vector<glora::GateRecord>& records,
                        const std::string& block_kind, glora::Phase phase) {
  double s = 0.0;
  int n = 0;
  for (const auto& r : records)
    if (r.block_kind == block_kind && r.phase == phase) {
      s += r.value;
      ++n;
    }
  if (n == 0) throw std::runtime_error("mean_gate: no matching records");
  return s / n;
}

}  // namespace jt::analysis
