// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Adapter fine-tuning on a frozen base model.
//
// Joint training alternates image batches (static references of the new
// subject, placeholder subject token) with video batches (motion references
// performed by a different subject, placeholder motion token). Image batches
// use the plain noise-prediction loss; video batches add structured shift
// noise to the *prediction* — never the target — so appearance detail the
// shift can explain carries no gradient, and scale the result by lambda.
// One adapter covers all blocks.
//
// Stage-wise training is the decoupled baseline: a spatial-block adapter
// trained on images, then a temporal-block adapter trained on videos (both
// plain loss), combined at inference. Requires the factorized variant.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointtuner/backbone.hpp"
#include "jointtuner/config.hpp"
#include "jointtuner/diffusion.hpp"
#include "jointtuner/glora.hpp"
#include "jointtuner/optimizer.hpp"
#include "jointtuner/synthio.hpp"
#include "jointtuner/textio.hpp"

namespace jt::train {

using glora::Adapter;
using glora::GateTrace;
using glora::Phase;
using model::Denoiser;

// ---------------------------------------------------------------------------
// Run directories: runs/<name>/{config, runlog, gates.csv, adapter*/,
// samples/}. Existing runs are never touched without an explicit overwrite.

inline std::filesystem::path run_root(const Config& cfg) {
  if (const char* env = std::getenv("JT_RUN_ROOT"))
    if (*env) return env;
  return cfg.str("run.root");
}

inline std::filesystem::path create_run_dir(const std::filesystem::path& root,
                                            const std::string& name,
                                            const Config& cfg,
                                            bool overwrite) {
  std::filesystem::path dir = root / name;
  if (std::filesystem::exists(dir)) {
    if (!overwrite)
      throw std::runtime_error("run already exists (pass --overwrite): " +
                               dir.string());
    std::filesystem::remove_all(dir);
  }
  std::filesystem::create_directories(dir);
  write_kv_file(dir / "config", cfg.snapshot());
  return dir;
}

inline void write_runlog(const std::filesystem::path& dir,
                         const std::vector<std::string>& lines) {
  std::ofstream os(dir / "runlog", std::ios::trunc);
  for (const auto& l : lines) os << l << "\n";
  if (!os) throw std::runtime_error("cannot write runlog");
}

inline void write_gates_csv(const std::filesystem::path& path,
                            const GateTrace& trace) {
  Csv csv;
  csv.header = {"layer", "block_kind", "phase", "step", "value"};
  for (const auto& r : trace.records)
    csv.rows.push_back({r.layer, r.block_kind, glora::phase_name(r.phase),
                        std::to_string(r.step), format_double(r.value)});
  write_csv(path, csv);
}

// ---------------------------------------------------------------------------
// Data preparation.

// Uniform frame subsampling (endpoints included for N>1).
inline Tensor sample_frames(const Tensor& clip, int n) {
  int F = int(clip.dims[0]);
  if (n < 1) throw std::runtime_error("frame count must be >= 1");
  if (n == F) return clip;
  Tensor out = make_tensor({std::uint64_t(n), clip.dims[1], clip.dims[2],
                            clip.dims[3]});
  std::uint64_t plane = clip.dims[1] * clip.dims[2] * clip.dims[3];
  for (int i = 0; i < n; ++i) {
    int src = n == 1 ? 0
                     : int(std::lround(double(i) * (F - 1) / double(n - 1)));
    std::copy(clip.v.begin() + src * plane, clip.v.begin() + (src + 1) * plane,
              out.v.begin() + i * plane);
  }
  return out;
}

struct RefSet {
  std::vector<model::Sample> items;  // t unset; z is a clean latent
};

inline RefSet load_image_refs(const synthio::Task& task) {
  RefSet r;
  for (const auto& ref : task.appearance) {
    model::Sample s;
    s.z = diffusion::video_to_latent(synthio::load_video(task, ref));
    s.prompt = ref.prompt_id_list();
    r.items.push_back(std::move(s));
  }
  if (r.items.empty()) throw std::runtime_error("task has no appearance refs");
  return r;
}

inline RefSet load_video_refs(const synthio::Task& task, int frames) {
  RefSet r;
  for (const auto& ref : task.motion) {
    model::Sample s;
    s.z = diffusion::video_to_latent(
        sample_frames(synthio::load_video(task, ref), frames));
    s.prompt = ref.prompt_id_list();
    r.items.push_back(std::move(s));
  }
  if (r.items.empty()) throw std::runtime_error("task has no motion refs");
  return r;
}

// ---------------------------------------------------------------------------
// Training loop internals.

namespace detail {

// Endless shuffled cursor over [0, n).
struct Cycle {
  std::vector<std::size_t> order;
  std::size_t pos = 0;
  Rng rng;

  Cycle(std::size_t n, Rng r) : rng(std::move(r)) {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
  }
  std::size_t next() {
    if (pos == order.size()) {
      rng.shuffle(order);
      pos = 0;
    }
    return order[pos++];
  }
};

// Temporarily injects adapters; restores the previous set on destruction.
struct InjectScope {
  Denoiser& m;
  std::size_t base_count;
  InjectScope(Denoiser& model) : m(model), base_count(m.adapters.size()) {}
  ~InjectScope() { m.adapters.resize(base_count); }
};

struct StepResult {
  double loss = 0.0;
  double gate_mean = 0.5;
};

// One optimizer step on a batch drawn from `refs`. When `shift` is non-null,
// the per-sample shift tensor is added to the prediction inside the loss.
inline StepResult train_step(Denoiser& m, Adapter& adapter,
                             const diffusion::NoiseSchedule& sched,
                             const RefSet& refs, Cycle& cycle, int batch_size,
                             double lambda, bool use_shift,
                             diffusion::ShiftLayout layout, double shift_scale,
                             Rng& t_rng, Rng& noise_rng, Rng& shift_rng,
                             ad::Optimizer& opt) {
  std::vector<model::Sample> batch;
  std::vector<Tensor> targets;
  for (int b = 0; b < batch_size; ++b) {
    const model::Sample& ref = refs.items[cycle.next()];
    int t = 1 + int(t_rng.below(std::uint64_t(m.cfg.timesteps - 1)));
    Tensor eps = diffusion::gaussian_like(ref.z.dims, noise_rng);
    Tensor target = eps;
    if (use_shift) {
      // Resampled every step; enters the loss on the prediction side, which
      // is the same as subtracting it from the target.
      Tensor delta = diffusion::sample_shift(
          layout, ref.z.dims[0], ref.z.dims[1], ref.z.dims[2], ref.z.dims[3],
          shift_scale, shift_rng);
      for (std::size_t i = 0; i < target.v.size(); ++i)
        target.v[i] = eps.v[i] - delta.v[i];
    }
    model::Sample s;
    s.z = diffusion::q_sample(sched, ref.z, t, eps);
    s.t = t;
    s.prompt = ref.prompt;
    batch.push_back(std::move(s));
    targets.push_back(std::move(target));
  }

  std::size_t trace_before =
      adapter.trace ? adapter.trace->records.size() : 0;
  ad::Tape tp;
  auto fo = model::denoiser_forward(tp, m, batch);
  ad::Mat target(fo.out->val.rows(), fo.out->val.cols());
  Eigen::Index rows = Eigen::Index(fo.F) * fo.S;
  for (int b = 0; b < fo.B; ++b)
    target.middleRows(b * rows, rows) =
        model::patchify(targets[std::size_t(b)], m.cfg.patch);
  ad::NodeP loss = ad::mse(fo.out, tp.constant(std::move(target)));
  if (lambda != 1.0) loss = ad::scale(loss, lambda);
  if (!std::isfinite(loss->val(0, 0))) {
    std::string at = adapter.trace
                         ? " at step " + std::to_string(adapter.trace->step)
                         : "";
    throw std::runtime_error("training diverged: non-finite loss" + at);
  }
  auto params = adapter.params();
  for (ad::Param* p : params) p->zero_grad();
  tp.backward(loss);
  opt.step(params);

  StepResult out;
  out.loss = loss->val(0, 0);
  if (adapter.trace) {
    double acc = 0.0;
    std::size_t n = adapter.trace->records.size() - trace_before;
    for (std::size_t i = trace_before; i < adapter.trace->records.size(); ++i)
      acc += adapter.trace->records[i].value;
    out.gate_mean = n ? acc / double(n) : 0.5;
  }
  return out;
}

inline std::string runlog_line(long step, Phase phase, const StepResult& r) {
  return "step=" + std::to_string(step) + " phase=" + glora::phase_name(phase) +
         " loss=" + format_double(r.loss) +
         " gate_mean=" + format_double(r.gate_mean);
}

inline long resolve_iterations(const Config& cfg, const std::string& variant) {
  const std::string& v = cfg.str("trainer.iterations");
  if (v == "auto") return variant == "joint" ? 1000 : 2000;
  return cfg.integer("trainer.iterations");
}

inline double resolve_lr(const Config& cfg, const std::string& variant) {
  const std::string& v = cfg.str("trainer.lr");
  if (v == "auto") return variant == "joint" ? 1e-4 : 5e-4;
  return cfg.number("trainer.lr");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Joint training.

struct JointResult {
  Adapter adapter;
  GateTrace trace;
  std::vector<std::string> runlog;
};

inline JointResult train_joint(Denoiser& base, const synthio::Task& task,
                               const Config& cfg) {
  if (!base.frozen)
    throw std::runtime_error("joint training requires a frozen base model");
  long iters = detail::resolve_iterations(cfg, base.cfg.variant);
  double lr = detail::resolve_lr(cfg, base.cfg.variant);
  double lambda = cfg.number("trainer.lambda");
  bool ait = cfg.boolean("trainer.ait");
  auto layout = diffusion::parse_shift_layout(cfg.str("trainer.shift_layout"));
  double shift_scale = cfg.number("trainer.shift_scale");
  int image_batch = int(cfg.integer("trainer.image_batch"));
  int video_batch = int(cfg.integer("trainer.video_batch"));
  long ratio_image = cfg.integer("trainer.ratio_image");
  long ratio_video = cfg.integer("trainer.ratio_video");
  if (ratio_image < 1 || ratio_video < 1)
    throw std::runtime_error("alternation ratio components must be >= 1");
  auto sched = diffusion::make_schedule(cfg.str("diffusion.schedule"),
                                        base.cfg.timesteps);

  RefSet images = load_image_refs(task);
  RefSet videos =
      load_video_refs(task, int(cfg.integer("trainer.video_frames")));

  Rng root(std::uint64_t(cfg.integer("trainer.seed")));
  Rng init_rng = root.split("adapter-init");
  JointResult res;
  res.adapter = glora::make_adapter(
      int(cfg.integer("trainer.rank")), cfg.number("trainer.init_std"),
      model::adapter_targets(base, cfg.str("trainer.targets")), init_rng);
  res.adapter.trainable = true;
  res.adapter.trace = &res.trace;

  detail::InjectScope scope(base);
  model::inject(base, res.adapter);

  ad::Optimizer opt(cfg.str("trainer.optimizer"), lr);
  detail::Cycle img_cycle(images.items.size(), root.split("order-image"));
  detail::Cycle vid_cycle(videos.items.size(), root.split("order-video"));
  Rng t_rng = root.split("t");
  Rng noise_rng = root.split("noise");
  Rng shift_rng = root.split("shift");

  long cycle_len = ratio_image + ratio_video;
  for (long it = 0; it < iters; ++it) {
    bool image_phase = (it % cycle_len) < ratio_image;
    res.trace.phase = image_phase ? Phase::image_train : Phase::video_train;
    res.trace.step = it;
    detail::StepResult r =
        image_phase
            ? detail::train_step(base, res.adapter, sched, images, img_cycle,
                                 image_batch, 1.0, false, layout, shift_scale,
                                 t_rng, noise_rng, shift_rng, opt)
            : detail::train_step(base, res.adapter, sched, videos, vid_cycle,
                                 video_batch, lambda, ait, layout, shift_scale,
                                 t_rng, noise_rng, shift_rng, opt);
    res.runlog.push_back(detail::runlog_line(it, res.trace.phase, r));
  }
  res.adapter.trace = nullptr;
  return res;
}

// ---------------------------------------------------------------------------
// Stage-wise training.

struct StagewiseResult {
  Adapter spatial, temporal;
  GateTrace trace;
  std::vector<std::string> runlog;
};

inline StagewiseResult train_stagewise(Denoiser& base,
                                       const synthio::Task& task,
                                       const Config& cfg) {
  if (!base.frozen)
    throw std::runtime_error("stage-wise training requires a frozen base model");
  if (base.cfg.variant != "factorized")
    throw std::runtime_error(
        "stage-wise training needs the factorized variant (joint attention "
        "has no spatial/temporal block split)");
  long iters = detail::resolve_iterations(cfg, base.cfg.variant);
  double lr = detail::resolve_lr(cfg, base.cfg.variant);
  double split = cfg.number("trainer.stage_split");
  if (split <= 0.0 || split >= 1.0)
    throw std::runtime_error("trainer.stage_split must be in (0,1)");
  long stage1 = std::max<long>(1, long(split * double(iters)));
  long stage2 = std::max<long>(1, iters - stage1);
  auto sched = diffusion::make_schedule(cfg.str("diffusion.schedule"),
                                        base.cfg.timesteps);
  auto layout = diffusion::parse_shift_layout(cfg.str("trainer.shift_layout"));

  RefSet images = load_image_refs(task);
  RefSet videos =
      load_video_refs(task, int(cfg.integer("trainer.video_frames")));

  Rng root(std::uint64_t(cfg.integer("trainer.seed")));
  Rng init_s = root.split("adapter-init-spatial");
  Rng init_t = root.split("adapter-init-temporal");
  StagewiseResult res;
  int rank = int(cfg.integer("trainer.rank"));
  double std0 = cfg.number("trainer.init_std");
  const std::string& targets = cfg.str("trainer.targets");
  res.spatial = glora::make_adapter(
      rank, std0, model::adapter_targets(base, targets, "spatial"), init_s);
  res.temporal = glora::make_adapter(
      rank, std0, model::adapter_targets(base, targets, "temporal"), init_t);
  res.spatial.trace = &res.trace;
  res.temporal.trace = &res.trace;

  Rng t_rng = root.split("t");
  Rng noise_rng = root.split("noise");
  Rng shift_rng = root.split("shift");
  int image_batch = int(cfg.integer("trainer.image_batch"));
  int video_batch = int(cfg.integer("trainer.video_batch"));

  {  // Stage one: spatial adapter on image batches.
    detail::InjectScope scope(base);
    model::inject(base, res.spatial);
    res.spatial.trainable = true;
    ad::Optimizer opt(cfg.str("trainer.optimizer"), lr);
    detail::Cycle cycle(images.items.size(), root.split("order-image"));
    for (long it = 0; it < stage1; ++it) {
      res.trace.phase = Phase::image_train;
      res.trace.step = it;
      auto r = detail::train_step(base, res.spatial, sched, images, cycle,
                                  image_batch, 1.0, false, layout, 0.0, t_rng,
                                  noise_rng, shift_rng, opt);
      res.runlog.push_back(detail::runlog_line(it, Phase::image_train, r));
    }
  }
  {  // Stage two: temporal adapter on video batches; spatial frozen but live.
    detail::InjectScope scope(base);
    res.spatial.trainable = false;
    for (ad::Param* p : res.spatial.params()) p->trainable = false;
    model::inject(base, res.spatial);
    model::inject(base, res.temporal);
    res.temporal.trainable = true;
    ad::Optimizer opt(cfg.str("trainer.optimizer"), lr);
    detail::Cycle cycle(videos.items.size(), root.split("order-video"));
    for (long it = 0; it < stage2; ++it) {
      res.trace.phase = Phase::video_train;
      res.trace.step = stage1 + it;
      auto r = detail::train_step(base, res.temporal, sched, videos, cycle,
                                  video_batch, 1.0, false, layout, 0.0, t_rng,
                                  noise_rng, shift_rng, opt);
      res.runlog.push_back(
          detail::runlog_line(stage1 + it, Phase::video_train, r));
    }
  }
  res.spatial.trace = nullptr;
  res.temporal.trace = nullptr;
  return res;
}

// ---------------------------------------------------------------------------
// Sampling. Adapters to apply must already be injected by the caller.

inline std::vector<Tensor> sample_videos(Denoiser& m, const Config& cfg,
                                         const std::vector<int>& prompt,
                                         int frames, std::uint64_t seed,
                                         int count = -1) {
  auto sched = diffusion::make_schedule(cfg.str("diffusion.schedule"),
                                        m.cfg.timesteps);
  int steps = int(cfg.integer("sampler.steps"));
  if (count < 0) count = int(cfg.integer("sampler.count"));
  bool clip = cfg.boolean("sampler.clip_x0");
  diffusion::ModelFn fn = [&m, &prompt](const Tensor& z, int t) {
    return model::predict_noise(m, z, t, prompt);
  };
  std::vector<Tensor> out;
  Rng root(seed);
  for (int i = 0; i < count; ++i) {
    Rng stream = root.split("sample-" + std::to_string(i));
    Tensor z = diffusion::ddim_sample(
        fn, sched, steps,
        {std::uint64_t(frames), 3, std::uint64_t(m.cfg.height),
         std::uint64_t(m.cfg.width_px)},
        stream, clip);
    out.push_back(diffusion::latent_to_video(z));
  }
  return out;
}

}  // namespace jt::train
