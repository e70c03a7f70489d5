// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Spectral analysis: the 3D transform against a brute-force oracle, radial
// band bookkeeping, smooth synthetic latents, the shift-spectrum comparison
// (appearance shifts must raise the high-band share), and gate-trace
// aggregation.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "jointtuner/analysis.hpp"
#include "jointtuner/diffusion.hpp"
#include "jointtuner/rng.hpp"

using namespace jt;
using namespace jt::analysis;

namespace {

// Brute-force 3D DFT straight from the definition, O((FHW)^2). The library
// transform must agree on every lattice point.
std::vector<std::complex<double>> dft3_bruteforce(
    const std::vector<double>& v, std::size_t F, std::size_t H,
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

Tensor random_tensor(std::vector<std::uint64_t> dims, Rng& rng) {
  Tensor z = make_tensor(std::move(dims));
  for (double& v : z.v) v = rng.normal(1.0);
  return z;
}

}  // namespace

TEST_CASE("fast 3D transform equals the brute-force definition") {
  Rng rng = Rng(31).split("dft");
  // Cover power-of-two axes (FFT path), general axes (naive path), and a
  // mixed shape, all within the 4x8x8 spatial budget.
  struct Shape {
    std::size_t F, H, W;
  };
  for (Shape s : {Shape{4, 8, 8}, Shape{3, 6, 5}, Shape{1, 8, 7},
                  Shape{4, 5, 8}, Shape{2, 1, 6}}) {
    std::vector<double> v(s.F * s.H * s.W);
    for (double& x : v) x = rng.normal(1.0);

    std::vector<std::complex<double>> fast(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) fast[i] = v[i];
    dft3(fast, s.F, s.H, s.W);

    auto slow = dft3_bruteforce(v, s.F, s.H, s.W);
    double ref = 0.0;
    for (const auto& c : slow) ref = std::max(ref, std::abs(c));
    REQUIRE(ref > 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
      REQUIRE(std::abs(fast[i] - slow[i]) / ref <= 1e-6);
  }
}

TEST_CASE("axis frequencies and band assignment follow the alias distance") {
  CHECK(axis_freq(0, 8) == 0.0);
  CHECK(axis_freq(4, 8) == 1.0);  // Nyquist
  CHECK(axis_freq(5, 8) == 0.75);  // alias of 3
  CHECK(axis_freq(7, 8) == 0.25);
  CHECK(axis_freq(0, 1) == 0.0);  // singleton axis carries no frequency

  CHECK(band_of(0.0, 10) == 0);
  CHECK(band_of(0.05, 10) == 0);
  CHECK(band_of(0.1, 10) == 1);
  CHECK(band_of(0.999, 10) == 9);
  CHECK(band_of(1.0, 10) == 9);  // clamped into the top band

  // Radius normalization: the all-Nyquist corner sits at radius exactly 1.
  CHECK(lattice_radius(4, 4, 4, 8, 8, 8) == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(lattice_radius(0, 0, 0, 8, 8, 8) == 0.0);
}

TEST_CASE("a constant tensor is pure DC") {
  Tensor z = make_tensor({2, 3, 8, 8});
  for (double& v : z.v) v = 4.2;
  SpectrumProfile p = spectrum_profile(z, 10);
  CHECK(p.fractions[0] == Catch::Approx(1.0).epsilon(1e-12));
  for (std::size_t b = 1; b < p.fractions.size(); ++b)
    CHECK(p.fractions[b] <= 1e-12);
  CHECK(p.high_fraction() <= 1e-12);

  // All-zero input has no energy at all; by convention that counts as DC.
  Tensor zero = make_tensor({2, 3, 8, 8});
  CHECK(spectrum_profile(zero, 10).fractions[0] == 1.0);
}

TEST_CASE("a pure sinusoid lands in its predicted band") {
  // cos over the height axis at index k: both the +k and -k lattice points
  // share the same alias distance, hence the same band.
  const std::size_t H = 16, W = 16;
  Tensor z = make_tensor({1, 1, H, W});
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      z.at4(0, 0, int(y), int(x)) = std::cos(2.0 * M_PI * 2.0 * double(y) /
                                             double(H));
  double radius = lattice_radius(0, 2, 0, 1, H, W);
  int expect = band_of(radius, 10);
  CHECK(expect == 1);
  SpectrumProfile p = spectrum_profile(z, 10);
  CHECK(p.fractions[std::size_t(expect)] == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("white noise spreads energy like the lattice band census") {
  const std::size_t F = 4, H = 12, W = 12;
  const int bands = 10;
  // Expected fraction per band = share of lattice points in that band
  // (i.i.d. noise puts equal expected power on every lattice point).
  std::vector<double> census(bands, 0.0);
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        census[std::size_t(band_of(lattice_radius(f, y, x, F, H, W),
                                   bands))] += 1.0;
  for (double& c : census) c /= double(F * H * W);

  Rng rng = Rng(32).split("white");
  std::vector<double> mean(bands, 0.0);
  const int trials = 24;
  for (int trial = 0; trial < trials; ++trial) {
    Tensor z = random_tensor({F, 2, H, W}, rng);
    SpectrumProfile p = spectrum_profile(z, bands);
    for (int b = 0; b < bands; ++b) mean[std::size_t(b)] += p.fractions[std::size_t(b)];
  }
  for (int b = 0; b < bands; ++b) {
    mean[std::size_t(b)] /= double(trials);
    CHECK(mean[std::size_t(b)] == Catch::Approx(census[std::size_t(b)]).margin(0.01));
  }

  // White noise is high-band-heavy: most lattice points live at large radius.
  double census_high = 0.0;
  for (int b = bands / 2; b < bands; ++b) census_high += census[std::size_t(b)];
  CHECK(census_high > 0.5);
}

TEST_CASE("smooth latents have exact RMS and no high-band energy") {
  Rng rng = Rng(33).split("smooth");
  const int F = 8, C = 3, H = 16, W = 16;
  Tensor z = make_smooth_latent(F, C, H, W, 32.0, 0.15, rng);

  for (int c = 0; c < C; ++c) {
    double ssq = 0.0;
    for (int f = 0; f < F; ++f)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) ssq += z.at4(f, c, y, x) * z.at4(f, c, y, x);
    double rms = std::sqrt(ssq / double(F * H * W));
    CHECK(rms == Catch::Approx(32.0).epsilon(1e-12));
  }

  // Synthesis only uses lattice modes below the cutoff radius, so bands
  // beyond the cutoff hold nothing but rounding dust.
  SpectrumProfile p = spectrum_profile(z, 10);
  CHECK(p.high_fraction() < 1e-20);
  for (std::size_t b = 2; b < p.fractions.size(); ++b)
    CHECK(p.fractions[b] < 1e-20);
  CHECK(p.fractions[0] + p.fractions[1] == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("appearance shifts raise the high-band share of noised latents") {
  Rng rng = Rng(1).split("latent");
  Tensor z0 = make_smooth_latent(8, 3, 16, 16, 32.0, 0.15, rng);
  auto sched = diffusion::make_schedule("linear", 1000);

  ShiftSpectraParams prm;  // defaults: t in {200,400,600,800}, 10 bands
  prm.layouts = {diffusion::ShiftLayout::channel_temporal,
                 diffusion::ShiftLayout::spatial};
  Csv csv = compare_shift_spectra(z0, sched, prm);

  CHECK(csv.header == std::vector<std::string>{"t", "layout", "variant",
                                               "band", "fraction"});
  // Per timestep: one base profile plus one per layout.
  CHECK(csv.rows.size() == 4 * (1 + 2) * 10);

  auto high = high_band_summary(csv, prm.bands);
  for (int t : prm.timesteps) {
    double base = high.at({t, "base"});
    CHECK(base > 0.0);
    CHECK(base < 1.0);
    // The directional claim driving the appearance-shift design: adding a
    // channel-temporal shift pushes relative energy into the high bands.
    CHECK(high.at({t, "channel-temporal"}) > base);
  }
}

TEST_CASE("late-timestep latents look like noise, early ones stay smooth") {
  // Sanity anchor for the comparison above: at t=800 the noised latent's
  // high-band share approaches the white-noise census share, while at t=200
  // the smooth signal still dominates and keeps it low.
  Rng rng = Rng(2).split("anchor");
  Tensor z0 = make_smooth_latent(8, 3, 16, 16, 32.0, 0.15, rng);
  auto sched = diffusion::make_schedule("linear", 1000);
  Rng n1 = Rng(3).split("n1");
  Tensor early = diffusion::q_sample(sched, z0, 200,
                                     diffusion::gaussian_like(z0.dims, n1));
  Tensor late = diffusion::q_sample(sched, z0, 800,
                                    diffusion::gaussian_like(z0.dims, n1));
  double h_early = spectrum_profile(early).high_fraction();
  double h_late = spectrum_profile(late).high_fraction();
  // With RMS-32 latents the smooth signal dominates even at t=800, but the
  // noise share (and with it the high-band share) must grow by orders of
  // magnitude between the two probes.
  CHECK(h_early < 0.01);
  CHECK(h_late > 0.1);
  CHECK(h_early < h_late);
}

TEST_CASE("gate reports aggregate by layer and phase") {
  using glora::GateRecord;
  using glora::Phase;
  std::vector<GateRecord> records = {
      {"block0.self.q", "spatial", Phase::image_train, 0, 0.6},
      {"block0.self.q", "spatial", Phase::image_train, 1, 0.8},
      {"block0.self.q", "spatial", Phase::video_train, 0, 0.4},
      {"block1.self.q", "temporal", Phase::video_train, 0, 0.9},
  };

  auto stats = gate_report(records);
  REQUIRE(stats.size() == 3);  // (layer, phase) pairs
  bool found = false;
  for (const auto& g : stats)
    if (g.layer == "block0.self.q" && g.phase == "image-train") {
      found = true;
      CHECK(g.count == 2);
      CHECK(g.mean == Catch::Approx(0.7).epsilon(1e-12));
      CHECK(g.stddev == Catch::Approx(0.1).epsilon(1e-9));
      CHECK(g.block_kind == "spatial");
    }
  CHECK(found);

  CHECK(mean_gate(records, "spatial", Phase::image_train) ==
        Catch::Approx(0.7).epsilon(1e-12));
  CHECK(mean_gate(records, "temporal", Phase::video_train) ==
        Catch::Approx(0.9).epsilon(1e-12));
  CHECK_THROWS(mean_gate(records, "joint", Phase::image_train));

  // CSV round trip: records -> csv -> records preserves everything.
  Csv csv;
  csv.header = {"layer", "block_kind", "phase", "step", "value"};
  for (const auto& r : records)
    csv.rows.push_back({r.layer, r.block_kind, glora::phase_name(r.phase),
                        std::to_string(r.step), format_double(r.value)});
  auto back = gate_records_from_csv(csv);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].layer == records[i].layer);
    CHECK(back[i].phase == records[i].phase);
    CHECK(back[i].value == records[i].value);
  }

  auto report_csv = gate_report_to_csv(stats);
  CHECK(report_csv.header.size() == 6);
  CHECK(report_csv.rows.size() == stats.size());
}

TEST_CASE("per-frame error and trajectory correlation behave as oracles") {
  Tensor a = make_tensor({2, 1, 1, 2});
  a.v = {1.0, 2.0, 3.0, 4.0};
  Tensor b = make_tensor({2, 1, 1, 2});
  b.v = {1.0, 4.0, 3.0, 1.0};  // frame 0 off by (0,2), frame 1 by (0,-3)
  auto mse = per_frame_mse(a, b);
  REQUIRE(mse.size() == 2);
  CHECK(mse[0] == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(mse[1] == Catch::Approx(4.5).epsilon(1e-12));

  // Correlation runs over the joint (x, y) series, so only a shared affine
  // map (same scale and offset on both coordinates) preserves corr = 1.
  evalkit::Track ta, tb, tc;
  for (int i = 0; i < 4; ++i) {
    ta.centroids.push_back({double(i), double(2 * i)});
    tb.centroids.push_back({3.0 * i + 1.0, 6.0 * i + 1.0});
    tc.centroids.push_back({double(-i), double(-2 * i)});
  }
  CHECK(track_correlation(ta, tb) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(track_correlation(ta, tc) == Catch::Approx(-1.0).epsilon(1e-12));
}
