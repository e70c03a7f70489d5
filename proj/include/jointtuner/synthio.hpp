// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Synthetic video world: textured sprites moving over procedural backgrounds.
// Videos are rank-4 tensors (F, C=3, H, W) with values in [0,1]. Rendering is
// a pure function of (scene, seed): the seed only feeds optional background
// dither. A "task" bundles a pretraining corpus, static appearance references
// of a held-out subject, and motion references of a held-out trajectory
// parameterization, plus a plain-text metadata file describing all of it.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointtuner/config.hpp"
#include "jointtuner/rng.hpp"
#include "jointtuner/tensor.hpp"
#include "jointtuner/textio.hpp"

namespace jt::synthio {

// ---------------------------------------------------------------------------
// Vocabulary. Prompts are triples [subject, motion, background]. Subject
// tokens enumerate color-texture-shape combos; two placeholder tokens stand
// for the customized subject and motion during fine-tuning and inference.

inline const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> v = {"circle", "square", "triangle",
                                             "star"};
  return v;
}
inline const std::vector<std::string>& color_names() {
  static const std::vector<std::string> v = {"red",    "green",   "blue",
                                             "yellow", "magenta", "cyan"};
  return v;
}
inline const std::vector<std::string>& texture_names() {
  static const std::vector<std::string> v = {"flat", "stripes", "dots"};
  return v;
}
inline const std::vector<std::string>& motion_names() {
  static const std::vector<std::string> v = {"static", "linear", "circular",
                                             "zigzag", "bounce"};
  return v;
}
inline const std::vector<std::string>& background_names() {
  static const std::vector<std::string> v = {
      "bg-gradient", "bg-checker", "bg-stripes", "bg-radial", "bg-plaid"};
  return v;
}
inline constexpr const char* kSubjectPlaceholder = "<subject>";
inline constexpr const char* kMotionPlaceholder = "<motion>";

struct Vocab {
  std::vector<std::string> tokens;
  std::map<std::string, int> index;

  int id(const std::string& tok) const {
    auto it = index.find(tok);
    if (it == index.end()) throw std::runtime_error("unknown token: " + tok);
    return it->second;
  }
  int size() const { return static_cast<int>(tokens.size()); }
};

inline std::string subject_token(const std::string& color,
                                 const std::string& texture,
                                 const std::string& shape) {
  return color + "-" + texture + "-" + shape;
}

inline const Vocab& vocab() {
  static const Vocab v = [] {
    Vocab vb;
    for (const auto& c : color_names())
      for (const auto& t : texture_names())
        for (const auto& s : shape_names())
          vb.tokens.push_back(subject_token(c, t, s));
    for (const auto& m : motion_names()) vb.tokens.push_back(m);
    for (const auto& b : background_names()) vb.tokens.push_back(b);
    vb.tokens.push_back(kSubjectPlaceholder);
    vb.tokens.push_back(kMotionPlaceholder);
    for (std::size_t i = 0; i < vb.tokens.size(); ++i)
      vb.index[vb.tokens[i]] = static_cast<int>(i);
    return vb;
  }();
  return v;
}

inline std::vector<int> prompt_ids(const std::string& space_separated) {
  std::vector<int> ids;
  for (const auto& tok : split(space_separated, ' '))
    if (!trim(tok).empty()) ids.push_back(vocab().id(trim(tok)));
  return ids;
}

// ---------------------------------------------------------------------------
// Trajectories. position(f) is the subject centroid at frame f, in pixels.

struct Trajectory {
  std::string kind;  // static | linear | circular | zigzag | bounce
  double x0 = 0, y0 = 0;
  double vx = 0, vy = 0;  // px/frame advance
  double amp = 0;         // circular radius / zigzag amplitude / bounce height
  double rate = 0;        // circular: rad/frame; zigzag+bounce: cycles/frame
  double phase = 0;       // circular start angle

  std::array<double, 2> position(int f) const {
    double t = static_cast<double>(f);
    if (kind == "static") return {x0, y0};
    if (kind == "linear") return {x0 + vx * t, y0 + vy * t};
    if (kind == "circular") {
      double cx = x0 - amp * std::cos(phase);
      double cy = y0 - amp * std::sin(phase);
      double a = phase + rate * t;
      return {cx + amp * std::cos(a), cy + amp * std::sin(a)};
    }
    if (kind == "zigzag") {
      // Triangle wave, zero at f=0, rising first; period 1/rate frames.
      double u = rate * t + 0.25;
      double tri = 4.0 * std::abs(u - std::floor(u + 0.5)) - 1.0;
      double nv = std::hypot(vx, vy);
      double px = nv > 0 ? -vy / nv : 0.0, py = nv > 0 ? vx / nv : 1.0;
      return {x0 + vx * t + px * amp * tri, y0 + vy * t + py * amp * tri};
    }
    if (kind == "bounce") {
      double h = amp * std::abs(std::sin(3.14159265358979323846 * rate * t));
      return {x0 + vx * t, y0 - h};
    }
    throw std::runtime_error("unknown trajectory kind: " + kind);
  }

  std::string serialize() const {
    std::string s = "kind=" + kind;
    auto put = [&s](const char* k, double v) {
      s += std::string(";") + k + "=" + format_double(v);
    };
    put("x0", x0), put("y0", y0), put("vx", vx), put("vy", vy);
    put("amp", amp), put("rate", rate), put("phase", phase);
    return s;
  }

  static Trajectory parse(const std::string& s) {
    Trajectory t;
    for (const auto& part : split(s, ';')) {
      auto kv = split(part, '=');
      if (kv.size() != 2) throw std::runtime_error("bad trajectory: " + s);
      const std::string& k = kv[0];
      if (k == "kind") {
        t.kind = kv[1];
        continue;
      }
      double v = std::stod(kv[1]);
      if (k == "x0") t.x0 = v;
      else if (k == "y0") t.y0 = v;
      else if (k == "vx") t.vx = v;
      else if (k == "vy") t.vy = v;
      else if (k == "amp") t.amp = v;
      else if (k == "rate") t.rate = v;
      else if (k == "phase") t.phase = v;
      else throw std::runtime_error("bad trajectory field: " + k);
    }
    if (t.kind != "static" && t.kind != "linear" && t.kind != "circular" &&
        t.kind != "zigzag" && t.kind != "bounce")
      throw std::runtime_error("unknown trajectory kind: " + t.kind);
    return t;
  }

  bool same_parameterization(const Trajectory& o) const {
    return kind == o.kind && vx == o.vx && vy == o.vy && amp == o.amp &&
           rate == o.rate && phase == o.phase;
  }
};

// ---------------------------------------------------------------------------
// Rendering.

struct Scene {
  int shape = 0, color = 0, texture = 0, background = 0;
  double size = 5.0;  // subject half-extent in pixels
  bool dither = false;
  Trajectory traj;

  std::string subject_tok() const {
    return subject_token(color_names()[color], texture_names()[texture],
                         shape_names()[shape]);
  }
};

inline std::array<double, 3> color_rgb(int color) {
  static const std::array<double, 3> table[6] = {
      {0.85, 0.15, 0.15}, {0.15, 0.75, 0.20}, {0.20, 0.30, 0.85},
      {0.90, 0.85, 0.15}, {0.85, 0.20, 0.80}, {0.15, 0.80, 0.80}};
  return table[color];
}

// Background pixel value; deterministic in (background id, x, y).
inline std::array<double, 3> background_rgb(int bg, int x, int y, int H,
                                            int W) {
  switch (bg) {
    case 0: {  // gradient: horizontal gray ramp
      double g = 0.25 + 0.20 * (W > 1 ? double(x) / (W - 1) : 0.0);
      return {g, g, g + 0.02};
    }
    case 1: {  // checker: 8 px blue-gray squares
      bool a = ((x / 8) + (y / 8)) % 2 == 0;
      return a ? std::array<double, 3>{0.30, 0.32, 0.36}
               : std::array<double, 3>{0.40, 0.42, 0.46};
    }
    case 2: {  // stripes: vertical 4 px warm bands
      bool a = (x / 4) % 2 == 0;
      return a ? std::array<double, 3>{0.38, 0.33, 0.27}
               : std::array<double, 3>{0.30, 0.26, 0.22};
    }
    case 3: {  // radial: bright center fading to dark edge
      double dx = x - 0.5 * (W - 1), dy = y - 0.5 * (H - 1);
      double r = std::sqrt(dx * dx + dy * dy) / (0.5 * std::hypot(H, W));
      double g = 0.42 - 0.20 * std::min(1.0, r);
      return {g + 0.02, g, g + 0.04};
    }
    case 4: {  // plaid: dark grid lines every 12 px
      bool line = (x % 12) < 2 || (y % 12) < 2;
      return line ? std::array<double, 3>{0.24, 0.27, 0.24}
                  : std::array<double, 3>{0.34, 0.38, 0.34};
    }
    default:
      throw std::runtime_error("unknown background id");
  }
}

inline Tensor render_background(int bg, int H, int W) {
  Tensor t = make_tensor({1, 3, std::uint64_t(H), std::uint64_t(W)});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      auto c = background_rgb(bg, x, y, H, W);
      for (int ch = 0; ch < 3; ++ch) t.at4(0, ch, y, x) = c[ch];
    }
  return t;
}

namespace detail {

// Point-in-shape test in subject-local coordinates (origin = area centroid).
inline bool inside_shape(int shape, double px, double py, double s) {
  switch (shape) {
    case 0:  // circle
      return px * px + py * py <= s * s;
    case 1:  // square (slightly shrunk for comparable area)
      return std::max(std::abs(px), std::abs(py)) <= 0.9 * s;
    case 2: {  // equilateral triangle, apex up, centroid at origin
      double R = 1.2 * s;
      double ax = 0, ay = -R;
      double bx = R * 0.86602540378443864676, by = R * 0.5;
      double cx = -bx, cy = by;
      auto side = [px, py](double x1, double y1, double x2, double y2) {
        return (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
      };
      double d1 = side(ax, ay, bx, by), d2 = side(bx, by, cx, cy),
             d3 = side(cx, cy, ax, ay);
      bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
      return !(neg && pos);
    }
    case 3: {  // five-point star (10-gon), apex up
      double r = std::hypot(px, py);
      if (r < 1e-12) return true;
      double Ro = 1.3 * s, Ri = 0.55 * s;
      // Angle measured from "up", folded into one of the 5 sectors.
      double a = std::atan2(px, -py);  // 0 at apex
      double sector = 2.0 * 3.14159265358979323846 / 5.0;
      double local = std::fmod(std::abs(a), sector);
      if (local > sector / 2) local = sector - local;
      // Star boundary radius interpolates outer->inner across half sector.
      double f = local / (sector / 2);
      double xo = Ro * std::sin(0.0), yo = Ro * std::cos(0.0);
      double xi = Ri * std::sin(sector / 2), yi = Ri * std::cos(sector / 2);
      // Edge from outer vertex (angle 0) to inner vertex (angle sector/2):
      // point (r, local) is inside if it is on the origin side of that edge.
      double ex = xi - xo, ey = yi - yo;
      double qx = r * std::sin(local), qy = r * std::cos(local);
      double cross = ex * (qy - yo) - ey * (qx - xo);
      (void)f;
      return cross <= 0;
    }
    default:
      throw std::runtime_error("unknown shape id");
  }
}

inline std::array<double, 3> texture_rgb(int texture,
                                         const std::array<double, 3>& base,
                                         double px, double py) {
  switch (texture) {
    case 0:  // flat
      return base;
    case 1: {  // stripes: 2 px vertical bands in subject-local coords
      long band = static_cast<long>(std::floor(px / 2.0));
      double k = (band % 2 + 2) % 2 == 0 ? 1.0 : 0.55;
      return {base[0] * k, base[1] * k, base[2] * k};
    }
    case 2: {  // dots: dark 1 px dots on a 3 px grid
      long gx = static_cast<long>(std::floor(px)) % 3;
      long gy = static_cast<long>(std::floor(py)) % 3;
      bool dot = ((gx + 3) % 3 == 1) && ((gy + 3) % 3 == 1);
      double k = dot ? 0.45 : 1.0;
      return {base[0] * k, base[1] * k, base[2] * k};
    }
    default:
      throw std::runtime_error("unknown texture id");
  }
}

inline double shape_extent(int shape, double size) {
  return (shape == 3 ? 1.3 : shape == 2 ? 1.2 : 1.0) * size;
}

}  // namespace detail

// True if the whole trajectory stays inside the frame (with an AA margin).
inline bool in_frame(const Scene& sc, int frames, int H, int W) {
  double m = detail::shape_extent(sc.shape, sc.size) + 1.0;
  for (int f = 0; f < frames; ++f) {
    auto [x, y] = sc.traj.position(f);
    if (x - m < 0 || x + m > W - 1 || y - m < 0 || y + m > H - 1) return false;
  }
  return true;
}

// Renders (F,3,H,W). 4x4 supersampled subject coverage; seed feeds only
// background dither (when enabled), so undithered renders ignore it.
inline Tensor render_video(const Scene& sc, int frames, int H, int W,
                           std::uint64_t seed) {
  if (!in_frame(sc, frames, H, W))
    throw std::runtime_error("scene leaves the frame: " + sc.traj.serialize());
  Tensor t = make_tensor({std::uint64_t(frames), 3, std::uint64_t(H),
                          std::uint64_t(W)});
  Rng rng(seed);
  auto base = color_rgb(sc.color);
  double ext = detail::shape_extent(sc.shape, sc.size);
  for (int f = 0; f < frames; ++f) {
    auto [cx, cy] = sc.traj.position(f);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        auto bg = background_rgb(sc.background, x, y, H, W);
        if (sc.dither) {
          double d = 0.02 * (rng.uniform() - 0.5);
          for (auto& c : bg) c = std::clamp(c + d, 0.0, 1.0);
        }
        std::array<double, 3> px = bg;
        // Subject bounding box test before supersampling.
        if (std::abs(x - cx) <= ext + 1 && std::abs(y - cy) <= ext + 1) {
          double cov = 0.0;
          std::array<double, 3> sub = {0, 0, 0};
          for (int sy = 0; sy < 4; ++sy) {
            for (int sx = 0; sx < 4; ++sx) {
              double ux = x + (sx + 0.5) / 4.0 - 0.5 - cx;
              double uy = y + (sy + 0.5) / 4.0 - 0.5 - cy;
              if (detail::inside_shape(sc.shape, ux, uy, sc.size)) {
                auto c = detail::texture_rgb(sc.texture, base, ux, uy);
                for (int ch = 0; ch < 3; ++ch) sub[ch] += c[ch];
                cov += 1.0;
              }
            }
          }
          if (cov > 0) {
            for (int ch = 0; ch < 3; ++ch)
              px[ch] = (sub[ch] + bg[ch] * (16.0 - cov)) / 16.0;
          }
        }
        for (int ch = 0; ch < 3; ++ch) t.at4(f, ch, y, x) = px[ch];
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Corpus composition and task building.

struct VideoRef {
  std::string file;             // path relative to the task dir
  std::string prompt;           // space-separated tokens
  Trajectory traj;
  std::string subject_tok, motion_tok, background_tok;

  std::vector<int> prompt_id_list() const { return prompt_ids(prompt); }
};

struct Task {
  std::filesystem::path dir;
  int height = 32, width = 32, frames = 8;
  double subject_size = 5.0;
  std::vector<VideoRef> corpus, appearance, motion;
  std::string target_subject, target_motion_kind, target_background;
  std::string motionref_subject, motionref_background;
  Trajectory target_traj;

  std::string infer_prompt() const {
    return std::string(kSubjectPlaceholder) + " " + kMotionPlaceholder + " " +
           target_background;
  }
};

namespace detail {

inline int index_of(const std::vector<std::string>& v, const std::string& s,
                    const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] == s) return static_cast<int>(i);
  throw std::runtime_error(std::string("unknown ") + what + ": " + s);
}

struct SubjectIds {
  int color, texture, shape;
};

inline SubjectIds parse_subject(const std::string& tok) {
  auto parts = split(tok, '-');
  if (parts.size() != 3)
    throw std::runtime_error("subject token must be color-texture-shape: " +
                             tok);
  return {index_of(color_names(), parts[0], "color"),
          index_of(texture_names(), parts[1], "texture"),
          index_of(shape_names(), parts[2], "shape")};
}

// Preset trajectory parameterizations used by the corpus. The customization
// target must not coincide with any of these.
inline Trajectory corpus_trajectory(const std::string& kind, Rng& rng, int H,
                                    int W) {
  Trajectory t;
  t.kind = kind;
  if (kind == "linear") {
    static const double vel[4][2] = {{1.5, 0}, {-1.5, 0}, {0, 1.5}, {0, -1.5}};
    auto& v = vel[rng.below(4)];
    t.vx = v[0], t.vy = v[1];
  } else if (kind == "circular") {
    t.amp = rng.below(2) ? 6.0 : 4.0;
    t.rate = (rng.below(2) ? 1.0 : -1.0) * 0.78539816339744830962;  // pi/4
    t.phase = static_cast<double>(rng.below(4)) * 1.5707963267948966192;
  } else if (kind == "zigzag") {
    t.vx = rng.below(2) ? 1.5 : -1.5;
    t.amp = rng.below(2) ? 4.0 : 3.0;
    t.rate = 0.25;
  } else if (kind != "static") {
    throw std::runtime_error("no corpus preset for kind: " + kind);
  }
  return t;
}

// Seeded start position keeping the whole trajectory in frame.
inline bool place(Scene& sc, int frames, int H, int W, Rng& rng) {
  double m = shape_extent(sc.shape, sc.size) + 1.5;
  for (int attempt = 0; attempt < 200; ++attempt) {
    sc.traj.x0 = rng.uniform(m, W - 1 - m);
    sc.traj.y0 = rng.uniform(m, H - 1 - m);
    if (in_frame(sc, frames, H, W)) return true;
  }
  return false;
}

}  // namespace detail

// Corpus kinds deliberately exclude "bounce" so a bounce target is always a
// held-out motion as well.
inline const std::vector<std::string>& corpus_motion_kinds() {
  static const std::vector<std::string> v = {"static", "linear", "circular",
                                             "zigzag"};
  return v;
}

// Raises if the customization target (subject or exact trajectory
// parameterization) appears in the corpus.
inline void check_no_leak(const std::vector<Scene>& corpus,
                          const std::string& target_subject,
                          const Trajectory& target_traj) {
  for (const auto& sc : corpus) {
    if (sc.subject_tok() == target_subject)
      throw std::runtime_error("target subject leaks into corpus: " +
                               target_subject);
    if (sc.traj.same_parameterization(target_traj))
      throw std::runtime_error(
          "target trajectory parameterization leaks into corpus: " +
          target_traj.serialize());
  }
}

inline std::vector<Scene> compose_corpus(const Config& cfg) {
  int H = static_cast<int>(cfg.integer("data.height"));
  int W = static_cast<int>(cfg.integer("data.width"));
  int F = static_cast<int>(cfg.integer("data.frames"));
  int n = static_cast<int>(cfg.integer("data.corpus_videos"));
  double size = cfg.number("data.subject_size");
  bool dither = cfg.boolean("data.background_dither");
  std::string target = cfg.str("data.target_subject");
  (void)detail::parse_subject(target);  // validate early
  Rng rng = Rng(static_cast<std::uint64_t>(cfg.integer("data.seed")))
                .split("corpus");

  // All subject combos except the customization target.
  std::vector<std::string> pool;
  for (const auto& c : color_names())
    for (const auto& t : texture_names())
      for (const auto& s : shape_names()) {
        std::string tok = subject_token(c, t, s);
        if (tok != target) pool.push_back(tok);
      }

  std::vector<Scene> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Scene sc;
    auto ids = detail::parse_subject(pool[rng.below(pool.size())]);
    sc.color = ids.color, sc.texture = ids.texture, sc.shape = ids.shape;
    sc.size = size;
    sc.dither = dither;
    sc.background = static_cast<int>(rng.below(background_names().size()));
    const auto& kinds = corpus_motion_kinds();
    std::string kind = kinds[rng.below(kinds.size())];
    sc.traj = detail::corpus_trajectory(kind, rng, H, W);
    if (!detail::place(sc, F, H, W, rng))
      throw std::runtime_error("could not place corpus scene " +
                               std::to_string(i));
    out.push_back(sc);
  }
  return out;
}

namespace detail {

inline void append_video_meta(KvList& kv, const std::string& section, int i,
                              const VideoRef& r) {
  std::string p = section + "." + std::to_string(i) + ".";
  kv.emplace_back(p + "file", r.file);
  kv.emplace_back(p + "prompt", r.prompt);
  kv.emplace_back(p + "traj", r.traj.serialize());
}

inline VideoRef read_video_meta(const KvList& kv, const std::string& section,
                                int i) {
  std::string p = section + "." + std::to_string(i) + ".";
  VideoRef r;
  r.file = kv_get(kv, p + "file");
  r.prompt = kv_get(kv, p + "prompt");
  r.traj = Trajectory::parse(kv_get(kv, p + "traj"));
  auto toks = split(r.prompt, ' ');
  if (toks.size() != 3) throw std::runtime_error("bad prompt: " + r.prompt);
  r.subject_tok = toks[0], r.motion_tok = toks[1], r.background_tok = toks[2];
  return r;
}

}  // namespace detail

// Generates and writes a full task directory: pretraining corpus, appearance
// references (F=1), motion references, and the metadata file.
inline Task make_task(const Config& cfg, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  Task task;
  task.dir = dir;
  task.height = static_cast<int>(cfg.integer("data.height"));
  task.width = static_cast<int>(cfg.integer("data.width"));
  task.frames = static_cast<int>(cfg.integer("data.frames"));
  task.subject_size = cfg.number("data.subject_size");
  task.target_subject = cfg.str("data.target_subject");
  task.target_motion_kind = cfg.str("data.target_motion");
  task.target_background = cfg.str("data.target_background");
  task.motionref_subject = cfg.str("data.motion_ref_subject");
  task.motionref_background = cfg.str("data.motion_ref_background");
  (void)vocab().id(task.target_background);
  (void)vocab().id(task.target_motion_kind);
  if (task.motionref_subject == task.target_subject)
    throw std::runtime_error("motion references must use a non-target subject");

  int H = task.height, W = task.width, F = task.frames;
  bool dither = cfg.boolean("data.background_dither");
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.integer("data.seed"));
  Rng root(seed);

  // Target trajectory: held-out parameterization of the target kind.
  auto vel = cfg.list("data.target_motion_vel");
  if (vel.size() != 2)
    throw std::runtime_error("data.target_motion_vel must be vx,vy");
  task.target_traj.kind = task.target_motion_kind;
  task.target_traj.vx = std::stod(vel[0]);
  task.target_traj.vy = std::stod(vel[1]);
  if (task.target_traj.kind == "circular" || task.target_traj.kind == "zigzag" ||
      task.target_traj.kind == "bounce") {
    task.target_traj.amp = 4.5;  // also off the preset grids
    task.target_traj.rate = task.target_traj.kind == "circular" ? 0.9 : 0.2;
  }

  auto corpus = compose_corpus(cfg);
  check_no_leak(corpus, task.target_subject, task.target_traj);

  fs::create_directories(dir / "pretrain");
  fs::create_directories(dir / "appearance");
  fs::create_directories(dir / "motion");

  char name[64];
  Rng render_rng = root.split("render");
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Scene& sc = corpus[i];
    std::snprintf(name, sizeof(name), "pretrain/v%04zu.jtns", i);
    Tensor t = render_video(sc, F, H, W, render_rng.u64());
    write_tensor(dir / name, t, DType::f32);
    VideoRef r;
    r.file = name;
    r.subject_tok = sc.subject_tok();
    r.motion_tok = sc.traj.kind;
    r.background_tok = background_names()[sc.background];
    r.prompt = r.subject_tok + " " + r.motion_tok + " " + r.background_tok;
    r.traj = sc.traj;
    task.corpus.push_back(std::move(r));
  }

  // Appearance references: target subject, static, varied position/background.
  int n_app = static_cast<int>(cfg.integer("data.appearance_refs"));
  auto tids = detail::parse_subject(task.target_subject);
  Rng app_rng = root.split("appearance");
  for (int i = 0; i < n_app; ++i) {
    Scene sc;
    sc.color = tids.color, sc.texture = tids.texture, sc.shape = tids.shape;
    sc.size = task.subject_size;
    sc.dither = dither;
    sc.background = i % static_cast<int>(background_names().size());
    sc.traj.kind = "static";
    if (!detail::place(sc, 1, H, W, app_rng))
      throw std::runtime_error("could not place appearance reference");
    std::snprintf(name, sizeof(name), "appearance/ref%d.jtns", i);
    write_tensor(dir / name, render_video(sc, 1, H, W, app_rng.u64()),
                 DType::f32);
    VideoRef r;
    r.file = name;
    r.subject_tok = kSubjectPlaceholder;
    r.motion_tok = "static";
    r.background_tok = background_names()[sc.background];
    r.prompt = r.subject_tok + " static " + r.background_tok;
    r.traj = sc.traj;
    task.appearance.push_back(std::move(r));
  }

  // Motion references: a different subject performing the target trajectory.
  int n_mot = static_cast<int>(cfg.integer("data.motion_refs"));
  auto mids = detail::parse_subject(task.motionref_subject);
  int mbg = detail::index_of(background_names(), task.motionref_background,
                             "background");
  Rng mot_rng = root.split("motion");
  for (int i = 0; i < n_mot; ++i) {
    Scene sc;
    sc.color = mids.color, sc.texture = mids.texture, sc.shape = mids.shape;
    sc.size = task.subject_size;
    sc.dither = dither;
    sc.background = mbg;
    sc.traj = task.target_traj;
    if (!detail::place(sc, F, H, W, mot_rng))
      throw std::runtime_error("could not place motion reference");
    std::snprintf(name, sizeof(name), "motion/clip%d.jtns", i);
    write_tensor(dir / name, render_video(sc, F, H, W, mot_rng.u64()),
                 DType::f32);
    VideoRef r;
    r.file = name;
    r.subject_tok = task.motionref_subject;
    r.motion_tok = kMotionPlaceholder;
    r.background_tok = task.motionref_background;
    r.prompt = r.subject_tok + " " + std::string(kMotionPlaceholder) + " " +
               r.background_tok;
    r.traj = sc.traj;
    task.motion.push_back(std::move(r));
  }

  // Metadata.
  KvList kv;
  kv.emplace_back("format", "jt-task-v1");
  kv.emplace_back("height", std::to_string(H));
  kv.emplace_back("width", std::to_string(W));
  kv.emplace_back("frames", std::to_string(F));
  kv.emplace_back("subject_size", format_double(task.subject_size));
  kv.emplace_back("target.subject", task.target_subject);
  kv.emplace_back("target.motion", task.target_motion_kind);
  kv.emplace_back("target.background", task.target_background);
  kv.emplace_back("target.traj", task.target_traj.serialize());
  kv.emplace_back("motionref.subject", task.motionref_subject);
  kv.emplace_back("motionref.background", task.motionref_background);
  kv.emplace_back("corpus.count", std::to_string(task.corpus.size()));
  for (std::size_t i = 0; i < task.corpus.size(); ++i)
    detail::append_video_meta(kv, "corpus", static_cast<int>(i),
                              task.corpus[i]);
  kv.emplace_back("appearance.count", std::to_string(task.appearance.size()));
  for (std::size_t i = 0; i < task.appearance.size(); ++i)
    detail::append_video_meta(kv, "appearance", static_cast<int>(i),
                              task.appearance[i]);
  kv.emplace_back("motion.count", std::to_string(task.motion.size()));
  for (std::size_t i = 0; i < task.motion.size(); ++i)
    detail::append_video_meta(kv, "motion", static_cast<int>(i),
                              task.motion[i]);
  write_kv_file(dir / "meta", kv);
  return task;
}

inline Task load_task(const std::filesystem::path& dir) {
  KvList kv = read_kv_file(dir / "meta");
  if (kv_get(kv, "format") != "jt-task-v1")
    throw std::runtime_error("not a task directory: " + dir.string());
  Task task;
  task.dir = dir;
  task.height = std::stoi(kv_get(kv, "height"));
  task.width = std::stoi(kv_get(kv, "width"));
  task.frames = std::stoi(kv_get(kv, "frames"));
  task.subject_size = std::stod(kv_get(kv, "subject_size"));
  task.target_subject = kv_get(kv, "target.subject");
  task.target_motion_kind = kv_get(kv, "target.motion");
  task.target_background = kv_get(kv, "target.background");
  task.target_traj = Trajectory::parse(kv_get(kv, "target.traj"));
  task.motionref_subject = kv_get(kv, "motionref.subject");
  task.motionref_background = kv_get(kv, "motionref.background");
  for (const char* sec : {"corpus", "appearance", "motion"}) {
    int n = std::stoi(kv_get(kv, std::string(sec) + ".count"));
    for (int i = 0; i < n; ++i) {
      VideoRef r = detail::read_video_meta(kv, sec, i);
      if (sec == std::string("corpus")) task.corpus.push_back(r);
      else if (sec == std::string("appearance")) task.appearance.push_back(r);
      else task.motion.push_back(r);
    }
  }
  return task;
}

inline Tensor load_video(const Task& task, const VideoRef& ref) {
  return read_tensor(task.dir / ref.file);
}

}  // namespace jt::synthio
