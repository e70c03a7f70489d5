// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Layered configuration: compiled-in defaults < config file < command-line
// overrides. Every key lives in one registry with a default and a docstring;
// unknown keys are rejected everywhere so typos fail loudly. Config files are
// plain text, either flat ("trainer.lr: 5e-4") or nested via 2+ space
// indentation:
//   trainer:
//     lr: 5e-4

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointtuner/textio.hpp"

namespace jt {

struct KeySpec {
  std::string key;
  std::string def;
  std::string doc;
};

// Single source of truth for every configuration key.
inline const std::vector<KeySpec>& config_registry() {
  static const std::vector<KeySpec> reg = {
      // --- data generation ---
      {"data.height", "32", "frame height in pixels"},
      {"data.width", "32", "frame width in pixels"},
      {"data.frames", "8", "frames per corpus/reference video"},
      {"data.subject_size", "5", "subject half-extent in pixels"},
      {"data.corpus_videos", "512", "number of pretraining corpus videos"},
      {"data.appearance_refs", "4", "static subject reference images (F=1)"},
      {"data.motion_refs", "2", "motion reference clips"},
      {"data.seed", "1", "seed for corpus composition and rendering"},
      {"data.background_dither", "false",
       "add seeded per-pixel dither to backgrounds"},
      {"data.target_subject", "magenta-dots-star",
       "customization target subject (color-texture-shape)"},
      {"data.target_motion", "linear", "target trajectory kind"},
      {"data.target_motion_vel", "1.25,0.75",
       "target trajectory velocity (px/frame); must not be a corpus preset"},
      {"data.target_background", "bg-radial",
       "background token for inference"},
      {"data.motion_ref_subject", "green-flat-square",
       "subject performing the motion references"},
      {"data.motion_ref_background", "bg-checker",
       "background of the motion references"},
      // --- model ---
      {"model.variant", "factorized",
       "denoiser variant: factorized (alternating spatial/temporal blocks) "
       "or joint (full spatiotemporal attention)"},
      {"model.width", "48", "token embedding width"},
      {"model.blocks", "4", "transformer block count"},
      {"model.heads", "4", "attention heads"},
      {"model.patch", "4", "patch size in pixels"},
      {"model.mlp_ratio", "2", "feed-forward expansion factor"},
      {"model.seed", "1", "weight initialization seed"},
      // --- diffusion ---
      {"diffusion.timesteps", "1000", "diffusion step count T"},
      {"diffusion.schedule", "linear", "beta schedule: linear or cosine"},
      // --- pretraining ---
      {"pretrain.steps", "3000", "pretraining optimizer steps"},
      {"pretrain.lr", "1e-3", "pretraining learning rate"},
      {"pretrain.batch", "8", "videos per pretraining batch"},
      {"pretrain.optimizer", "adam", "optimizer: adam or sgdm"},
      {"pretrain.log_every", "100", "steps between run-log entries"},
      {"pretrain.seed", "1", "pretraining seed (batching, noise draws)"},
      // --- adapter fine-tuning ---
      {"trainer.iterations", "auto",
       "fine-tune iterations; auto = 2000 (factorized) / 1000 (joint)"},
      {"trainer.lr", "auto",
       "fine-tune learning rate; auto = 5e-4 (factorized) / 1e-4 (joint)"},
      {"trainer.lambda", "1", "weight on the video-batch loss"},
      {"trainer.ait", "true",
       "use appearance-independent loss on video batches (joint training)"},
      {"trainer.shift_layout", "channel-temporal",
       "shift-noise layout: channel-temporal, spatial, full, channel, "
       "temporal"},
      {"trainer.shift_scale", "1", "shift-noise standard deviation"},
      {"trainer.image_batch", "4", "reference images per image batch"},
      {"trainer.video_batch", "1", "reference clips per video batch"},
      {"trainer.ratio_image", "1", "image steps per alternation cycle"},
      {"trainer.ratio_video", "1", "video steps per alternation cycle"},
      {"trainer.video_frames", "8",
       "frames sampled uniformly from each reference clip"},
      {"trainer.rank", "4", "adapter rank r"},
      {"trainer.init_std", "0.02", "adapter A initialization stddev"},
      {"trainer.targets", "attention",
       "layers receiving adapters: attention or attention+mlp"},
      {"trainer.optimizer", "adam", "optimizer: adam or sgdm"},
      {"trainer.log_every", "50", "steps between run-log entries"},
      {"trainer.seed", "1", "fine-tuning seed"},
      {"trainer.stage_split", "0.5",
       "stage-wise training: fraction of iterations spent on stage one"},
      // --- sampling ---
      {"sampler.steps", "30", "deterministic sampler step count"},
      {"sampler.count", "4", "videos generated per sample invocation"},
      {"sampler.frames", "8", "frames per generated video"},
      {"sampler.clip_x0", "true", "clamp the x0 estimate to [-1,1] each step"},
      {"sampler.seed", "1", "sampling seed"},
      // --- spectrum / gate analysis ---
      {"analysis.bands", "10", "radial frequency bands"},
      {"analysis.timesteps", "200,400,600,800",
       "diffusion timesteps probed by the spectrum study"},
      {"analysis.layouts", "channel-temporal,spatial,full,channel,temporal",
       "shift layouts compared by the spectrum study"},
      {"analysis.shift_scale", "1", "shift-noise stddev for the study"},
      {"analysis.smooth_rms", "32",
       "RMS amplitude of the synthetic smooth latent"},
      {"analysis.smooth_cutoff", "0.15",
       "normalized radial frequency cutoff of the smooth latent"},
      {"analysis.invert_steps", "30", "sampler steps for inversion studies"},
      {"analysis.seed", "1", "analysis seed"},
      // --- evaluation ---
      {"eval.mask_threshold", "0.15",
       "per-pixel |frame-background| threshold for subject masks"},
      {"eval.min_mask_pixels", "3",
       "frames with fewer subject pixels count as tracking failures"},
      {"eval.motion_eps", "0.1",
       "displacements below this many pixels count as zero motion"},
      {"eval.samples", "4", "sampled videos scored per run"},
      // --- bookkeeping ---
      {"run.root", "runs",
       "directory holding run outputs (env JT_RUN_ROOT overrides)"},
  };
  return reg;
}

class Config {
 public:
  // Starts from registry defaults.
  Config() {
    for (const auto& ks : config_registry()) kv_[ks.key] = ks.def;
  }

  static bool known(const std::string& key) {
    for (const auto& ks : config_registry())
      if (ks.key == key) return true;
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw std::runtime_error("unknown config key: " + key);
    kv_[key] = value;
  }

  const std::string& str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end())
      throw std::runtime_error("unknown config key: " + key);
    return it->second;
  }

  long integer(const std::string& key) const {
    const std::string& s = str(key);
    try {
      std::size_t pos = 0;
      long v = std::stol(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error("config key " + key + " is not an integer: " + s);
    }
  }

  double number(const std::string& key) const {
    const std::string& s = str(key);
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error("config key " + key + " is not a number: " + s);
    }
  }

  bool boolean(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::runtime_error("config key " + key + " is not a boolean: " + s);
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    for (auto& part : split(str(key), ','))
      if (!trim(part).empty()) out.push_back(trim(part));
    return out;
  }

  // Load "key: value" / indented sections from a file over current values.
  void load_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read config: " + path.string());
    std::vector<std::pair<int, std::string>> stack;  // (indent, section)
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      if (line.find('\t') != std::string::npos)
        throw std::runtime_error("tabs not allowed in config (line " +
                                 std::to_string(lineno) + ")");
      int indent = 0;
      while (indent < static_cast<int>(line.size()) && line[indent] == ' ')
        ++indent;
      std::size_t c = stripped.find(':');
      if (c == std::string::npos)
        throw std::runtime_error("expected 'key: value' at line " +
                                 std::to_string(lineno));
      std::string key = trim(stripped.substr(0, c));
      std::string val = trim(stripped.substr(c + 1));
      while (!stack.empty() && stack.back().first >= indent) stack.pop_back();
      std::string full;
      for (const auto& [_, sec] : stack) full += sec + ".";
      full += key;
      if (val.empty()) {
        stack.emplace_back(indent, key);
      } else {
        set(full, val);
      }
    }
  }

  // "key=value" command-line override.
  void set_override(const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override must be key=value: " + assignment);
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  // Snapshot in file format (flat keys, sorted) — written into run dirs.
  KvList snapshot() const {
    KvList out;
    for (const auto& [k, v] : kv_) out.emplace_back(k, v);
    return out;
  }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace jt
