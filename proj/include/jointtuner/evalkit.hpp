// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Evaluation toolkit.
//
// Desk-scale analogs of the customization metrics: subjects are segmented by
// subtracting the best-matching known procedural background, then scored by
// a color/texture/shape descriptor (appearance), tracked centroids against a
// reference trajectory (motion), mean inter-frame change (dynamic degree),
// and adjacent-frame correlation (temporal consistency).
//
// Composite leaderboard scores over a metric table:
//   ARS — mean rank across metrics (ties get the average of tied ranks)
//   NAS — mean of per-metric scores normalized to 100 * value / best
//         (lower-is-better metrics use 100 * best / value)
//   AAS — mean of raw values

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointtuner/synthio.hpp"
#include "jointtuner/tensor.hpp"
#include "jointtuner/textio.hpp"

namespace jt::evalkit {

// ---------------------------------------------------------------------------
// Subject segmentation against known backgrounds.

struct EvalOptions {
  double mask_threshold = 0.15;  // max-channel |frame - background|
  int min_mask_pixels = 3;
  double motion_eps = 0.1;  // px; smaller displacements count as no motion
};

inline double pixel_bg_diff(const Tensor& video, int f, int y, int x,
                            const Tensor& bg) {
  double d = 0.0;
  for (int c = 0; c < 3; ++c)
    d = std::max(d, std::abs(video.at4(f, c, y, x) - bg.at4(0, c, y, x)));
  return d;
}

// Picks the known background minimizing total deviation over the video.
inline int best_background(const Tensor& video) {
  int F = int(video.dims[0]), H = int(video.dims[2]), W = int(video.dims[3]);
  int best = 0;
  double best_cost = std::numeric_limits<double>::max();
  for (std::size_t b = 0; b < synthio::background_names().size(); ++b) {
    Tensor bg = synthio::render_background(int(b), H, W);
    double cost = 0.0;
    for (int f = 0; f < F; ++f)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          // Robust cost: saturating per-pixel deviation so the subject
          // region doesn't dominate background choice.
          cost += std::min(0.25, pixel_bg_diff(video, f, y, x, bg));
        }
    if (cost < best_cost) {
      best_cost = cost;
      best = int(b);
    }
  }
  return best;
}

struct FrameMask {
  std::vector<bool> on;  // H*W
  int count = 0;
  double cx = 0.0, cy = 0.0;  // centroid of mask pixels
};

inline FrameMask subject_mask(const Tensor& video, int f, const Tensor& bg,
                              const EvalOptions& opt) {
  int H = int(video.dims[2]), W = int(video.dims[3]);
  FrameMask m;
  m.on.assign(std::size_t(H) * W, false);
  double sx = 0, sy = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (pixel_bg_diff(video, f, y, x, bg) > opt.mask_threshold) {
        m.on[std::size_t(y) * W + x] = true;
        ++m.count;
        sx += x;
        sy += y;
      }
  if (m.count > 0) {
    m.cx = sx / m.count;
    m.cy = sy / m.count;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Appearance descriptor and score.

struct SubjectDescriptor {
  std::array<double, 3> mean_rgb = {0, 0, 0};
  double contrast = 0.0;   // mean within-subject channel stddev (texture)
  double radial_std = 0.0; // std(r)/mean(r) of mask pixels (shape)
  bool valid = false;
};

inline SubjectDescriptor describe_subject(const Tensor& video, int f,
                                          const FrameMask& m,
                                          const EvalOptions& opt) {
  SubjectDescriptor d;
  if (m.count < opt.min_mask_pixels) return d;
  int W = int(video.dims[3]), H = int(video.dims[2]);
  std::array<double, 3> sum = {0, 0, 0}, sumsq = {0, 0, 0};
  double rsum = 0, rsumsq = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!m.on[std::size_t(y) * W + x]) continue;
      for (int c = 0; c < 3; ++c) {
        double v = video.at4(f, c, y, x);
        sum[c] += v;
        sumsq[c] += v * v;
      }
      double r = std::hypot(x - m.cx, y - m.cy);
      rsum += r;
      rsumsq += r * r;
    }
  double n = double(m.count);
  double cacc = 0.0;
  for (int c = 0; c < 3; ++c) {
    d.mean_rgb[c] = sum[c] / n;
    double var = std::max(0.0, sumsq[c] / n - d.mean_rgb[c] * d.mean_rgb[c]);
    cacc += std::sqrt(var);
  }
  d.contrast = cacc / 3.0;
  double rmean = rsum / n;
  double rvar = std::max(0.0, rsumsq / n - rmean * rmean);
  d.radial_std = rmean > 1e-9 ? std::sqrt(rvar) / rmean : 0.0;
  d.valid = true;
  return d;
}

inline double descriptor_similarity(const SubjectDescriptor& a,
                                    const SubjectDescriptor& b) {
  if (!a.valid || !b.valid) return 0.0;
  double color2 = 0.0;
  for (int c = 0; c < 3; ++c) {
    double d = a.mean_rgb[c] - b.mean_rgb[c];
    color2 += d * d;
  }
  double dt = a.contrast - b.contrast;
  double ds = a.radial_std - b.radial_std;
  return std::exp(-(6.0 * color2 + 20.0 * dt * dt + 4.0 * ds * ds));
}

// Mean descriptor over reference frames (all frames of all reference videos).
inline SubjectDescriptor reference_descriptor(
    const std::vector<Tensor>& refs, const EvalOptions& opt = {}) {
  SubjectDescriptor acc;
  int n = 0;
  for (const Tensor& v : refs) {
    Tensor bg = synthio::render_background(best_background(v),
                                           int(v.dims[2]), int(v.dims[3]));
    for (int f = 0; f < int(v.dims[0]); ++f) {
      FrameMask m = subject_mask(v, f, bg, opt);
      SubjectDescriptor d = describe_subject(v, f, m, opt);
      if (!d.valid) continue;
      for (int c = 0; c < 3; ++c) acc.mean_rgb[c] += d.mean_rgb[c];
      acc.contrast += d.contrast;
      acc.radial_std += d.radial_std;
      ++n;
    }
  }
  if (n == 0) throw std::runtime_error("no subject found in reference frames");
  for (int c = 0; c < 3; ++c) acc.mean_rgb[c] /= n;
  acc.contrast /= n;
  acc.radial_std /= n;
  acc.valid = true;
  return acc;
}

struct ScoreResult {
  double value = 0.0;
  bool warning = false;  // subject missing / tracking failure
};

// Mean per-frame descriptor similarity against a reference descriptor.
// Frames without a detectable subject score 0 and raise the warning flag.
inline ScoreResult appearance_score(const Tensor& video,
                                    const SubjectDescriptor& ref,
                                    const EvalOptions& opt = {}) {
  int F = int(video.dims[0]);
  Tensor bg = synthio::render_background(best_background(video),
                                         int(video.dims[2]),
                                         int(video.dims[3]));
  ScoreResult r;
  double acc = 0.0;
  for (int f = 0; f < F; ++f) {
    FrameMask m = subject_mask(video, f, bg, opt);
    SubjectDescriptor d = describe_subject(video, f, m, opt);
    if (!d.valid) {
      r.warning = true;
      continue;  // contributes 0
    }
    acc += descriptor_similarity(d, ref);
  }
  r.value = acc / double(F);
  return r;
}

// ---------------------------------------------------------------------------
// Motion score: cosine agreement of tracked vs reference displacements.

struct Track {
  std::vector<std::array<double, 2>> centroids;  // per frame
  bool failed = false;
};

inline Track track_centroids(const Tensor& video, const EvalOptions& opt = {}) {
  Track t;
  Tensor bg = synthio::render_background(best_background(video),
                                         int(video.dims[2]),
                                         int(video.dims[3]));
  for (int f = 0; f < int(video.dims[0]); ++f) {
    FrameMask m = subject_mask(video, f, bg, opt);
    if (m.count < opt.min_mask_pixels) {
      t.failed = true;
      t.centroids.push_back({0, 0});
    } else {
      t.centroids.push_back({m.cx, m.cy});
    }
  }
  return t;
}

// Reference displacements from a trajectory, one per frame transition.
inline std::vector<std::array<double, 2>> trajectory_displacements(
    const synthio::Trajectory& traj, int frames) {
  std::vector<std::array<double, 2>> d;
  for (int f = 0; f + 1 < frames; ++f) {
    auto a = traj.position(f), b = traj.position(f + 1);
    d.push_back({b[0] - a[0], b[1] - a[1]});
  }
  return d;
}

// Mean cosine similarity between tracked and reference displacements.
// Transitions where either side moves less than motion_eps contribute 0.
// Tracking failure returns -1 with the warning flag set.
inline ScoreResult motion_score(
    const Tensor& video, const std::vector<std::array<double, 2>>& ref_disp,
    const EvalOptions& opt = {}) {
  Track t = track_centroids(video, opt);
  if (t.failed) return {-1.0, true};
  int n = int(video.dims[0]) - 1;
  if (n < 1 || ref_disp.size() < std::size_t(n))
    throw std::runtime_error("motion_score needs >= 2 frames and reference "
                             "displacements for each transition");
  double acc = 0.0;
  for (int f = 0; f < n; ++f) {
    double dx = t.centroids[f + 1][0] - t.centroids[f][0];
    double dy = t.centroids[f + 1][1] - t.centroids[f][1];
    double rx = ref_disp[f][0], ry = ref_disp[f][1];
    double dn = std::hypot(dx, dy), rn = std::hypot(rx, ry);
    if (dn < opt.motion_eps || rn < opt.motion_eps) continue;  // contributes 0
    acc += (dx * rx + dy * ry) / (dn * rn);
  }
  return {acc / double(n), false};
}

// ---------------------------------------------------------------------------
// Dynamic degree and temporal consistency.

inline double dynamic_degree(const Tensor& video) {
  int F = int(video.dims[0]);
  if (F < 2) return 0.0;
  std::uint64_t plane = video.dims[1] * video.dims[2] * video.dims[3];
  double acc = 0.0;
  for (int f = 0; f + 1 < F; ++f) {
    double s = 0.0;
    for (std::uint64_t i = 0; i < plane; ++i)
      s += std::abs(video.v[(f + 1) * plane + i] - video.v[f * plane + i]);
    acc += s / double(plane);
  }
  return acc / double(F - 1);
}

inline double temporal_consistency(const Tensor& video) {
  int F = int(video.dims[0]);
  if (F < 2) return 1.0;
  std::uint64_t plane = video.dims[1] * video.dims[2] * video.dims[3];
  double acc = 0.0;
  for (int f = 0; f + 1 < F; ++f) {
    const double* a = video.v.data() + f * plane;
    const double* b = video.v.data() + (f + 1) * plane;
    double ma = 0, mb = 0;
    for (std::uint64_t i = 0; i < plane; ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= double(plane);
    mb /= double(plane);
    double sab = 0, saa = 0, sbb = 0;
    for (std::uint64_t i = 0; i < plane; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa < 1e-12 || sbb < 1e-12) {
      // Degenerate (constant) frames: identical -> 1, different -> 0.
      bool same = true;
      for (std::uint64_t i = 0; i < plane && same; ++i)
        same = a[i] == b[i];
      acc += same ? 1.0 : 0.0;
    } else {
      acc += sab / std::sqrt(saa * sbb);
    }
  }
  return acc / double(F - 1);
}

// ---------------------------------------------------------------------------
// Metric tables and composite scores.

struct MetricTable {
  std::vector<std::string> models;   // row order
  std::vector<std::string> metrics;  // column order
  std::map<std::string, bool> higher_better;        // per metric
  std::map<std::pair<std::string, std::string>, double> value;

  double at(const std::string& model, const std::string& metric) const {
    auto it = value.find({model, metric});
    if (it == value.end())
      throw std::runtime_error("metric table missing " + model + "/" + metric);
    return it->second;
  }

  void set(const std::string& model, const std::string& metric,
           bool higher_is_better, double v) {
    if (std::find(models.begin(), models.end(), model) == models.end())
      models.push_back(model);
    if (std::find(metrics.begin(), metrics.end(), metric) == metrics.end())
      metrics.push_back(metric);
    auto it = higher_better.find(metric);
    if (it != higher_better.end() && it->second != higher_is_better)
      throw std::runtime_error("conflicting direction for metric " + metric);
    higher_better[metric] = higher_is_better;
    value[{model, metric}] = v;
  }
};

inline MetricTable metric_table_from_csv(const Csv& csv) {
  MetricTable t;
  int cm = csv.col("model"), cmet = csv.col("metric"), cd = csv.col("direction"),
      cv = csv.col("value");
  for (const auto& row : csv.rows) {
    const std::string& dir = row[std::size_t(cd)];
    if (dir != "higher" && dir != "lower")
      throw std::runtime_error("metric direction must be higher|lower: " + dir);
    t.set(row[std::size_t(cm)], row[std::size_t(cmet)], dir == "higher",
          std::stod(row[std::size_t(cv)]));
  }
  return t;
}

inline Csv metric_table_to_csv(const MetricTable& t) {
  Csv csv;
  csv.header = {"model", "metric", "direction", "value"};
  for (const auto& m : t.models)
    for (const auto& met : t.metrics)
      csv.rows.push_back({m, met, t.higher_better.at(met) ? "higher" : "lower",
                          format_double(t.at(m, met))});
  return csv;
}

struct CompositeRow {
  std::string model;
  double ars = 0, nas = 0, aas = 0;
};

// ARS/NAS/AAS for every model. Requires a complete table.
inline std::vector<CompositeRow> composite_scores(const MetricTable& t) {
  if (t.models.empty() || t.metrics.empty())
    throw std::runtime_error("composite_scores: empty table");
  std::size_t M = t.models.size();
  std::vector<CompositeRow> out(M);
  for (std::size_t i = 0; i < M; ++i) out[i].model = t.models[i];

  for (const auto& metric : t.metrics) {
    bool hb = t.higher_better.at(metric);
    std::vector<double> vals(M);
    for (std::size_t i = 0; i < M; ++i) vals[i] = t.at(t.models[i], metric);

    // Ranks (1 = best); ties get the mean of the tied rank positions.
    std::vector<std::size_t> idx(M);
    for (std::size_t i = 0; i < M; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return hb ? vals[a] > vals[b] : vals[a] < vals[b];
    });
    std::vector<double> rank(M, 0.0);
    std::size_t i = 0;
    while (i < M) {
      std::size_t j = i;
      while (j + 1 < M && vals[idx[j + 1]] == vals[idx[i]]) ++j;
      double avg = 0.5 * double(i + j) + 1.0;  // mean of positions i..j, 1-based
      for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
      i = j + 1;
    }

    double best = hb ? *std::max_element(vals.begin(), vals.end())
                     : *std::min_element(vals.begin(), vals.end());
    for (std::size_t k = 0; k < M; ++k) {
      out[k].ars += rank[k];
      double norm;
      if (hb)
        norm = best == 0.0 ? (vals[k] == 0.0 ? 100.0 : 0.0)
                           : 100.0 * vals[k] / best;
      else
        norm = vals[k] == 0.0 ? (best == 0.0 ? 100.0 : 0.0)
                              : 100.0 * best / vals[k];
      out[k].nas += norm;
      out[k].aas += vals[k];
    }
  }
  double nm = double(t.metrics.size());
  for (auto& r : out) {
    r.ars /= nm;
    r.nas /= nm;
    r.aas /= nm;
  }
  return out;
}

inline Csv composites_to_csv(const std::vector<CompositeRow>& rows) {
  Csv csv;
  csv.header = {"model", "ARS", "NAS", "AAS"};
  for (const auto& r : rows)
    csv.rows.push_back({r.model, format_double(r.ars), format_double(r.nas),
                        format_double(r.aas)});
  return csv;
}

// ---------------------------------------------------------------------------
// Fixture reproduction: recompute composites from a raw metric table and
// compare against published expected values.

struct CellDeviation {
  std::string model, column;
  double expected = 0, computed = 0;

  double abs_dev() const { return std::abs(expected - computed); }
};

struct TableCheck {
  std::string name;
  std::vector<CellDeviation> cells;  // all cells, in table order
  double tolerance = 0.01;

  bool ok() const {
    for (const auto& c : cells)
      if (c.abs_dev() > tolerance) return false;
    return true;
  }
  double max_dev() const {
    double m = 0;
    for (const auto& c : cells) m = std::max(m, c.abs_dev());
    return m;
  }
};

inline TableCheck check_table(const std::string& name,
                              const std::filesystem::path& metrics_csv,
                              const std::filesystem::path& expected_csv,
                              double tolerance = 0.01) {
  TableCheck chk;
  chk.name = name;
  chk.tolerance = tolerance;
  MetricTable t = metric_table_from_csv(read_csv(metrics_csv));
  auto rows = composite_scores(t);
  std::map<std::string, CompositeRow> by_model;
  for (const auto& r : rows) by_model[r.model] = r;
  Csv exp = read_csv(expected_csv);
  int cm = exp.col("model");
  for (const auto& row : exp.rows) {
    const std::string& model = row[std::size_t(cm)];
    auto it = by_model.find(model);
    if (it == by_model.end())
      throw std::runtime_error("expected model missing from fixtures: " + model);
    for (const char* col : {"ARS", "NAS", "AAS"}) {
      double want = std::stod(row[std::size_t(exp.col(col))]);
      double got = col == std::string("ARS") ? it->second.ars
                   : col == std::string("NAS") ? it->second.nas
                                               : it->second.aas;
      chk.cells.push_back({model, col, want, got});
    }
  }
  return chk;
}

}  // namespace jt::evalkit
