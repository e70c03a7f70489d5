// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Command line driver for the jointtuner library.
//
// The full workflow, end to end:
//
//   jointtuner-cli gen-data        --task task/demo
//   jointtuner-cli pretrain        --task task/demo --run base
//   jointtuner-cli train-joint     --task task/demo --model runs/base/checkpoint --run joint
//   jointtuner-cli train-stagewise --task task/demo --model runs/base/checkpoint --run staged
//   jointtuner-cli sample          --task task/demo --model runs/base/checkpoint \
//                                  --adapter runs/joint/adapter --out runs/joint/samples
//   jointtuner-cli evaluate        --task task/demo --videos joint=runs/joint/samples \
//                                  --videos base=runs/base/samples --out metrics.csv
//   jointtuner-cli report          --in metrics.csv --out composites.csv
//   jointtuner-cli analyze-spectrum --out runs/spectra
//   jointtuner-cli analyze-gates   --in runs/joint/gates.csv --out runs/joint/gate_report.csv
//   jointtuner-cli reproduce-tables [--fixtures data/fixtures]
//
// Exit codes: 0 success, 1 invariant failure, 2 missing prerequisite.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "jointtuner/analysis.hpp"
#include "jointtuner/backbone.hpp"
#include "jointtuner/config.hpp"
#include "jointtuner/diffusion.hpp"
#include "jointtuner/evalkit.hpp"
#include "jointtuner/glora.hpp"
#include "jointtuner/synthio.hpp"
#include "jointtuner/tensor.hpp"
#include "jointtuner/textio.hpp"
#include "jointtuner/trainer.hpp"

namespace fs = std::filesystem;
using namespace jt;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;        // invariant or validation failure
constexpr int kMissingInput = 2;   // prerequisite file/directory absent

struct Args {
  std::string command;
  std::map<std::string, std::string> flags;          // --task, --run, ...
  std::vector<std::string> sets;                     // --set key=value
  std::vector<std::string> adapters;                 // --adapter dir
  std::vector<std::pair<std::string, std::string>> videos;  // --videos l=d
  bool overwrite = false;
};

Args parse_args(int argc, char** argv) {
  Args a;
  if (argc < 2) throw std::runtime_error("missing command (try: help)");
  a.command = argv[1];
  for (int i = 2; i < argc; ++i) {
    std::string arg = argv[i];
    auto value = [&]() -> std::string {
      if (i + 1 >= argc) throw std::runtime_error("missing value for " + arg);
      return argv[++i];
    };
    if (arg == "--overwrite") {
      a.overwrite = true;
    } else if (arg == "--set") {
      a.sets.push_back(value());
    } else if (arg == "--adapter") {
      a.adapters.push_back(value());
    } else if (arg == "--videos") {
      std::string v = value();
      auto eq = v.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("--videos expects label=dir, got " + v);
      a.videos.emplace_back(v.substr(0, eq), v.substr(eq + 1));
    } else if (arg.rfind("--", 0) == 0) {
      a.flags[arg.substr(2)] = value();
    } else {
      throw std::runtime_error("unexpected argument: " + arg);
    }
  }
  return a;
}

Config make_config(const Args& a) {
  Config cfg;
  auto it = a.flags.find("config");
  if (it != a.flags.end()) {
    if (!fs::exists(it->second))
      throw std::runtime_error("config file not found: " + it->second);
    cfg.load_file(it->second);
  }
  for (const auto& s : a.sets) cfg.set_override(s);
  return cfg;
}

std::string need_flag(const Args& a, const std::string& name) {
  auto it = a.flags.find(name);
  if (it == a.flags.end())
    throw std::runtime_error("missing required flag --" + name);
  return it->second;
}

fs::path require_dir(const std::string& p, const std::string& what) {
  if (!fs::exists(p)) {
    std::fprintf(stderr, "error: %s not found: %s\n", what.c_str(), p.c_str());
    std::exit(kMissingInput);
  }
  return p;
}

model::DenoiserConfig denoiser_config(const Config& cfg) {
  model::DenoiserConfig mc;
  mc.variant = cfg.str("model.variant");
  mc.width = int(cfg.integer("model.width"));
  mc.blocks = int(cfg.integer("model.blocks"));
  mc.heads = int(cfg.integer("model.heads"));
  mc.patch = int(cfg.integer("model.patch"));
  mc.mlp_ratio = int(cfg.integer("model.mlp_ratio"));
  mc.height = int(cfg.integer("data.height"));
  mc.width_px = int(cfg.integer("data.width"));
  mc.timesteps = int(cfg.integer("diffusion.timesteps"));
  mc.vocab = int(synthio::vocab().tokens.size());
  return mc;
}

// Corpus clips as (latent, prompt ids) pairs for pretraining.
std::vector<std::pair<Tensor, std::vector<int>>> load_corpus(
    const synthio::Task& task) {
  std::vector<std::pair<Tensor, std::vector<int>>> data;
  for (const auto& r : task.corpus)
    data.emplace_back(diffusion::video_to_latent(synthio::load_video(task, r)),
                      r.prompt_id_list());
  return data;
}

int cmd_help() {
  std::printf(
      "usage: jointtuner-cli <command> [flags]\n\n"
      "commands:\n"
      "  gen-data         build a task directory (corpus + references)\n"
      "  pretrain         train the base denoiser on the task corpus\n"
      "  train-joint      joint adapter training (single phase-alternating run)\n"
      "  train-stagewise  two-stage baseline (spatial first, then temporal)\n"
      "  sample           generate videos from a checkpoint (+ adapters)\n"
      "  evaluate         score sampled videos against the task references\n"
      "  report           composite scores (ARS/NAS/AAS) from a metric table\n"
      "  analyze-spectrum band-energy analysis of shift layouts (+ inversion\n"
      "                   demo when --task and --model are given)\n"
      "  analyze-gates    aggregate a gate trace csv per layer and phase\n"
      "  reproduce-tables recompute published composite tables from fixtures\n"
      "  help             this text\n\n"
      "common flags:\n"
      "  --config FILE    load configuration from FILE\n"
      "  --set KEY=VALUE  override one configuration key (repeatable)\n"
      "  --task DIR       task directory (gen-data writes it, others read)\n"
      "  --model DIR      model checkpoint directory\n"
      "  --adapter DIR    adapter directory to inject (repeatable)\n"
      "  --run NAME       run name under the run root\n"
      "  --out PATH       output file or directory\n"
      "  --in PATH        input file\n"
      "  --videos L=DIR   labeled directory of sampled videos (repeatable)\n"
      "  --fixtures DIR   fixture directory for reproduce-tables\n"
      "  --overwrite      replace an existing run directory\n\n"
      "configuration keys (defaults in parentheses):\n");
  for (const auto& ks : config_registry())
    std::printf("  %-28s (%s)\n      %s\n", ks.key.c_str(), ks.def.c_str(),
                ks.doc.c_str());
  return kOk;
}

int cmd_gen_data(const Args& a) {
  Config cfg = make_config(a);
  fs::path dir = need_flag(a, "task");
  if (fs::exists(dir / "meta")) {
    if (!a.overwrite) {
      std::fprintf(stderr, "error: task already exists at %s (use --overwrite)\n",
                   dir.string().c_str());
      return kFailure;
    }
    fs::remove_all(dir);
  }
  synthio::Task task = synthio::make_task(cfg, dir);
  std::printf("task %s: %zu corpus clips, %zu appearance refs, %zu motion refs\n",
              dir.string().c_str(), task.corpus.size(), task.appearance.size(),
              task.motion.size());
  std::printf("target: %s doing %s on %s\n", task.target_subject.c_str(),
              task.target_traj.serialize().c_str(),
              task.target_background.c_str());
  return kOk;
}

int cmd_pretrain(const Args& a) {
  Config cfg = make_config(a);
  auto task = synthio::load_task(require_dir(need_flag(a, "task"), "task"));
  fs::path run =
      train::create_run_dir(train::run_root(cfg), need_flag(a, "run"), cfg,
                            a.overwrite);
  model::Denoiser m =
      model::build_denoiser(denoiser_config(cfg), cfg.integer("model.seed"));
  model::PretrainConfig pc;
  pc.steps = cfg.integer("pretrain.steps");
  pc.lr = cfg.number("pretrain.lr");
  pc.batch = int(cfg.integer("pretrain.batch"));
  pc.optimizer = cfg.str("pretrain.optimizer");
  pc.log_every = cfg.integer("pretrain.log_every");
  pc.seed = cfg.integer("pretrain.seed");
  pc.schedule = cfg.str("diffusion.schedule");
  auto data = load_corpus(task);
  std::vector<std::string> log;
  model::pretrain(m, data, pc, [&](long step, double loss) {
    log.push_back("step=" + std::to_string(step) +
                  " loss=" + format_double(loss));
    std::printf("pretrain %s\n", log.back().c_str());
    std::fflush(stdout);
  });
  model::freeze(m);
  model::save_checkpoint(run / "checkpoint", m);
  train::write_runlog(run, log);
  std::printf("checkpoint %s (base checksum %s)\n",
              (run / "checkpoint").string().c_str(),
              hex64(model::base_checksum(m)).c_str());
  return kOk;
}

int cmd_train(const Args& a, bool stagewise) {
  Config cfg = make_config(a);
  auto task = synthio::load_task(require_dir(need_flag(a, "task"), "task"));
  fs::path ckpt = require_dir(need_flag(a, "model"), "checkpoint");
  fs::path run =
      train::create_run_dir(train::run_root(cfg), need_flag(a, "run"), cfg,
                            a.overwrite);
  model::Denoiser m = model::load_checkpoint(ckpt);
  if (stagewise) {
    auto res = train::train_stagewise(m, task, cfg);
    glora::save_adapter(run / "adapter-spatial", res.spatial);
    glora::save_adapter(run / "adapter-temporal", res.temporal);
    train::write_runlog(run, res.runlog);
    train::write_gates_csv(run / "gates.csv", res.trace);
    std::printf("adapters %s %s\n", (run / "adapter-spatial").string().c_str(),
                (run / "adapter-temporal").string().c_str());
  } else {
    auto res = train::train_joint(m, task, cfg);
    glora::save_adapter(run / "adapter", res.adapter);
    train::write_runlog(run, res.runlog);
    train::write_gates_csv(run / "gates.csv", res.trace);
    std::printf("adapter %s (checksum %s)\n",
                (run / "adapter").string().c_str(),
                hex64(res.adapter.checksum()).c_str());
  }
  return kOk;
}

int cmd_sample(const Args& a) {
  Config cfg = make_config(a);
  auto task = synthio::load_task(require_dir(need_flag(a, "task"), "task"));
  fs::path ckpt = require_dir(need_flag(a, "model"), "checkpoint");
  fs::path out = need_flag(a, "out");
  model::Denoiser m = model::load_checkpoint(ckpt);
  std::vector<glora::Adapter> adapters;
  adapters.reserve(a.adapters.size());
  for (const auto& dir : a.adapters)
    adapters.push_back(glora::load_adapter(require_dir(dir, "adapter")));
  for (auto& ad : adapters) model::inject(m, ad);
  auto prompt = synthio::prompt_ids(task.infer_prompt());
  auto videos = train::sample_videos(m, cfg, prompt,
                                     int(cfg.integer("sampler.frames")),
                                     cfg.integer("sampler.seed"));
  fs::create_directories(out);
  for (std::size_t i = 0; i < videos.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%02zu.jtns", i);
    write_tensor(out / name, videos[i], DType::f64);
  }
  std::printf("wrote %zu videos to %s\n", videos.size(), out.string().c_str());
  return kOk;
}

int cmd_evaluate(const Args& a) {
  Config cfg = make_config(a);
  auto task = synthio::load_task(require_dir(need_flag(a, "task"), "task"));
  fs::path out = need_flag(a, "out");
  if (a.videos.empty())
    throw std::runtime_error("evaluate needs at least one --videos label=dir");

  evalkit::EvalOptions opt;
  opt.mask_threshold = cfg.number("eval.mask_threshold");
  opt.min_mask_pixels = int(cfg.integer("eval.min_mask_pixels"));
  opt.motion_eps = cfg.number("eval.motion_eps");

  std::vector<Tensor> appearance_refs, motion_refs;
  for (const auto& r : task.appearance)
    appearance_refs.push_back(synthio::load_video(task, r));
  for (const auto& r : task.motion)
    motion_refs.push_back(synthio::load_video(task, r));
  auto subject_desc = evalkit::reference_descriptor(appearance_refs, opt);
  auto motionref_desc = evalkit::reference_descriptor(motion_refs, opt);

  evalkit::MetricTable table;
  int max_samples = int(cfg.integer("eval.samples"));
  for (const auto& [label, dir] : a.videos) {
    require_dir(dir, "video directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".jtns") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw std::runtime_error("no .jtns videos in " + dir);
    if (int(files.size()) > max_samples) files.resize(std::size_t(max_samples));

    double app = 0, mot = 0, dyn = 0, cons = 0, cont = 0;
    int warn_app = 0, warn_mot = 0;
    for (const auto& f : files) {
      Tensor v = read_tensor(f);
      auto ref_disp =
          evalkit::trajectory_displacements(task.target_traj, int(v.dims[0]));
      auto asr = evalkit::appearance_score(v, subject_desc, opt);
      auto msr = evalkit::motion_score(v, ref_disp, opt);
      auto csr = evalkit::appearance_score(v, motionref_desc, opt);
      app += asr.value;
      mot += msr.value;
      cont += csr.value;
      dyn += evalkit::dynamic_degree(v);
      cons += evalkit::temporal_consistency(v);
      warn_app += asr.warning ? 1 : 0;
      warn_mot += msr.warning ? 1 : 0;
    }
    double n = double(files.size());
    table.set(label, "appearance", true, app / n);
    table.set(label, "motion", true, mot / n);
    table.set(label, "dynamic", true, dyn / n);
    table.set(label, "consistency", true, cons / n);
    table.set(label, "contamination", false, cont / n);
    if (warn_app || warn_mot)
      std::fprintf(stderr,
                   "warning: %s: subject missing in %d videos (appearance), "
                   "tracking failed in %d (motion)\n",
                   label.c_str(), warn_app, warn_mot);
  }
  write_csv(out, evalkit::metric_table_to_csv(table));
  std::printf("metrics written to %s\n", out.string().c_str());
  return kOk;
}

int cmd_report(const Args& a) {
  fs::path in = require_dir(need_flag(a, "in"), "metric table");
  fs::path out = need_flag(a, "out");
  auto table = evalkit::metric_table_from_csv(read_csv(in));
  auto rows = evalkit::composite_scores(table);
  write_csv(out, evalkit::composites_to_csv(rows));
  for (const auto& r : rows)
    std::printf("%-24s ARS %6.2f  NAS %7.2f  AAS %7.2f\n", r.model.c_str(),
                r.ars, r.nas, r.aas);
  return kOk;
}

int cmd_analyze_spectrum(const Args& a) {
  Config cfg = make_config(a);
  fs::path out = need_flag(a, "out");
  fs::create_directories(out);

  analysis::ShiftSpectraParams prm;
  prm.bands = int(cfg.integer("analysis.bands"));
  prm.shift_scale = cfg.number("analysis.shift_scale");
  prm.seed = cfg.integer("analysis.seed");
  prm.timesteps.clear();
  for (const auto& s : cfg.list("analysis.timesteps"))
    prm.timesteps.push_back(std::stoi(s));
  prm.layouts.clear();
  for (const auto& s : cfg.list("analysis.layouts"))
    prm.layouts.push_back(diffusion::parse_shift_layout(s));

  int F = int(cfg.integer("sampler.frames"));
  int H = int(cfg.integer("data.height"));
  int W = int(cfg.integer("data.width"));
  Rng rng(prm.seed);
  Rng latent_rng = rng.split("latent");
  Tensor z0 = analysis::make_smooth_latent(F, 3, H, W,
                                           cfg.number("analysis.smooth_rms"),
                                           cfg.number("analysis.smooth_cutoff"),
                                           latent_rng);
  auto sched = diffusion::make_schedule(cfg.str("diffusion.schedule"),
                                        int(cfg.integer("diffusion.timesteps")));
  Csv spectra = analysis::compare_shift_spectra(z0, sched, prm);
  write_csv(out / "spectra.csv", spectra);

  auto highs = analysis::high_band_summary(spectra, prm.bands);
  for (int t : prm.timesteps) {
    std::printf("t=%4d  base high-band %.4f", t, highs.at({t, "base"}));
    for (auto l : prm.layouts) {
      std::string name = diffusion::shift_layout_name(l);
      std::printf("  %s %+0.4f", name.c_str(),
                  highs.at({t, name}) - highs.at({t, "base"}));
    }
    std::printf("\n");
  }

  // Optional: inversion round trip on the first motion reference.
  if (a.flags.count("model") && a.flags.count("task")) {
    auto task = synthio::load_task(require_dir(a.flags.at("task"), "task"));
    model::Denoiser m =
        model::load_checkpoint(require_dir(a.flags.at("model"), "checkpoint"));
    std::vector<glora::Adapter> adapters;
    adapters.reserve(a.adapters.size());
    for (const auto& dir : a.adapters)
      adapters.push_back(glora::load_adapter(require_dir(dir, "adapter")));
    for (auto& ad : adapters) model::inject(m, ad);
    if (task.motion.empty()) throw std::runtime_error("task has no motion refs");
    Tensor clip = train::sample_frames(synthio::load_video(task, task.motion[0]),
                                       F);
    Tensor z = diffusion::video_to_latent(clip);
    auto prompt = task.motion[0].prompt_id_list();
    diffusion::ModelFn fn = [&m, &prompt](const Tensor& zz, int t) {
      return model::predict_noise(m, zz, t, prompt);
    };
    auto layout = diffusion::parse_shift_layout(cfg.str("trainer.shift_layout"));
    auto demo = analysis::shift_inversion_demo(
        fn, sched, z, layout, int(cfg.integer("analysis.invert_steps")),
        prm.shift_scale, cfg.boolean("sampler.clip_x0"), prm.seed);
    write_csv(out / "inversion.csv", analysis::inversion_demo_to_csv(demo));
    std::printf("inversion demo: trajectory correlation %s\n",
                demo.traj_valid ? format_double(demo.traj_correlation).c_str()
                                : "n/a (tracking failed)");
  }
  return kOk;
}

int cmd_analyze_gates(const Args& a) {
  fs::path in = require_dir(need_flag(a, "in"), "gate trace");
  fs::path out = need_flag(a, "out");
  auto records = analysis::gate_records_from_csv(read_csv(in));
  auto stats = analysis::gate_report(records);
  write_csv(out, analysis::gate_report_to_csv(stats));
  for (const auto& g : stats)
    std::printf("%-40s %-9s %-12s mean %.4f  std %.4f  n %d\n", g.layer.c_str(),
                g.block_kind.c_str(), g.phase.c_str(), g.mean, g.stddev,
                g.count);
  return kOk;
}

int cmd_reproduce_tables(const Args& a) {
  fs::path fixtures;
  if (a.flags.count("fixtures")) {
    fixtures = a.flags.at("fixtures");
  } else if (const char* src = std::getenv("JT_SOURCE_DIR")) {
    fixtures = fs::path(src) / "data" / "fixtures";
  } else {
    fixtures = fs::path("data") / "fixtures";
  }
  require_dir(fixtures.string(), "fixture directory");

  struct Entry {
    const char* name;
    bool gated;
    const char* note;
  };
  // The components ablation contains a two-way tie; published ranks there
  // follow a min-rank convention while we average tied ranks, so that table
  // is reported for information only.
  const Entry entries[] = {
      {"bench_cogvideox", true, ""},
      {"bench_zeroscope", true, ""},
      {"ablation_shift", true, ""},
      {"bench_modelscope", false, ""},
      {"ablation_components", false,
       " (informational: tied metric breaks rank convention)"},
  };
  bool all_ok = true;
  for (const auto& e : entries) {
    auto chk = evalkit::check_table(e.name, fixtures / (std::string(e.name) + ".csv"),
                                    fixtures / (std::string(e.name) + "_expected.csv"));
    bool ok = chk.ok();
    if (e.gated && !ok) all_ok = false;
    std::printf("%s %-22s max deviation %.4f%s\n", ok ? "OK  " : "DIFF",
                e.name, chk.max_dev(), e.note);
    for (const auto& c : chk.cells)
      if (c.abs_dev() > chk.tolerance)
        std::printf("     %-26s %-4s computed %7.2f  published %7.2f\n",
                    c.model.c_str(), c.column.c_str(), c.computed, c.expected);
  }
  return all_ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    Args a = parse_args(argc, argv);
    if (a.command == "help" || a.command == "--help" || a.command == "-h")
      return cmd_help();
    if (a.command == "gen-data") return cmd_gen_data(a);
    if (a.command == "pretrain") return cmd_pretrain(a);
    if (a.command == "train-joint") return cmd_train(a, false);
    if (a.command == "train-stagewise") return cmd_train(a, true);
    if (a.command == "sample") return cmd_sample(a);
    if (a.command == "evaluate") return cmd_evaluate(a);
    if (a.command == "report") return cmd_report(a);
    if (a.command == "analyze-spectrum") return cmd_analyze_spectrum(a);
    if (a.command == "analyze-gates") return cmd_analyze_gates(a);
    if (a.command == "reproduce-tables") return cmd_reproduce_tables(a);
    std::fprintf(stderr, "error: unknown command %s (try: help)\n",
                 a.command.c_str());
    return kFailure;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kFailure;
  }
}
