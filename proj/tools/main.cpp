// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
//
// Single command-line entry point: dataset generation, the three training
// stages, inference, evaluation, ablations and benchmarks.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "rerender/config.hpp"
#include "rerender/evalharness.hpp"
#include "rerender/gradcheck.hpp"
#include "rerender/trainer.hpp"

namespace fs = std::filesystem;
using namespace rerender;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t next = s.find(',', pos);
    const std::string item = s.substr(pos, next == std::string::npos ? next : next - pos);
    if (!item.empty()) out.push_back(item);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_csv(s)) out.push_back(std::stod(item));
  return out;
}

// Tracks declared options so file values and explicit flags merge in the
// documented order: defaults < config file < passed flags.
struct OptionSet {
  CLI::App* cmd;
  RunConfig rc;
  std::string config_path;
  std::vector<std::function<void()>> apply_flags;

  explicit OptionSet(CLI::App* c) : cmd(c) {
    cmd->add_option("--config", config_path, "JSON config file (flat key-value)");
  }

  template <typename T>
  void add(const std::string& flag, const std::string& key, T default_value,
           const std::string& help) {
    rc.set_default(key, default_value);
    auto holder = std::make_shared<T>(default_value);
    CLI::Option* opt = cmd->add_option(flag, *holder, help);
    apply_flags.push_back([this, key, holder, opt] {
      if (opt->count() > 0) rc.override_value(key, *holder);
    });
  }

  void add_flag(const std::string& flag, const std::string& key, bool default_value,
                const std::string& help) {
    rc.set_default(key, default_value);
    auto holder = std::make_shared<bool>(default_value);
    CLI::Option* opt = cmd->add_flag(flag, *holder, help);
    apply_flags.push_back([this, key, holder, opt] {
      if (opt->count() > 0) rc.override_value(key, *holder);
    });
  }

  // Resolve order: file first, then explicit flags.
  RunConfig resolve() {
    if (!config_path.empty()) rc.merge_file(config_path);
    for (auto& f : apply_flags) f();
    return rc;
  }
};

void add_train_options(OptionSet& os, int default_epochs) {
  os.add<std::string>("--data", "data", "", "dataset root directory");
  os.add<std::string>("--out", "out", "", "output directory");
  os.add<std::string>("--ckpt", "ckpt", "", "input checkpoint");
  os.add<std::string>("--ckpt-out", "ckpt_out", "", "output checkpoint path");
  os.add<std::string>("--metrics", "metrics_csv", "", "per-step metrics CSV path");
  os.add<std::string>("--subjects", "subjects", "", "comma-separated subject filter");
  os.add<int>("--epochs", "epochs", default_epochs, "training epochs");
  os.add<int>("--steps", "max_steps", -1, "cap on optimizer steps (-1 = none)");
  os.add<int>("--batch", "batch_size", kDefaultBatchSize, "batch size");
  os.add<double>("--lr", "lr", kDefaultLearningRate, "learning rate");
  os.add<double>("--wd", "weight_decay", kDefaultWeightDecay, "weight decay");
  os.add<uint64_t>("--seed", "seed", 1, "training seed");
  os.add<double>("--alpha", "alpha", kDefaultBlendAlpha, "feature blend ratio");
  os.add<int>("--n-refs", "n_refs", kReferenceCountDesk, "reference candidates per subject");
  os.add<int>("--height", "height", 128, "working resolution height");
  os.add<int>("--width", "width", 64, "working resolution width");
  os.add<uint64_t>("--model-seed", "model_seed", 1, "weight init seed");
  os.add<uint64_t>("--extractor-seed", "extractor_seed", 77, "perceptual extractor seed");
  os.add_flag("--no-augment", "no_augment", false, "disable data augmentation");
  os.add<double>("--grad-clip", "grad_clip", 10.0, "global gradient-norm clip");
  os.add_flag("--resume", "resume", false, "resume the stage from --ckpt");
}

TrainConfig train_config_from(RunConfig& rc, TrainConfig::Stage stage) {
  TrainConfig cfg;
  cfg.stage = stage;
  cfg.dataset_dir = rc.get<std::string>("data");
  cfg.subjects = split_csv(rc.get<std::string>("subjects"));
  cfg.checkpoint_in = rc.get<std::string>("ckpt");
  cfg.checkpoint_out = rc.get<std::string>("ckpt_out");
  cfg.metrics_csv = rc.get<std::string>("metrics_csv");
  cfg.epochs = rc.get<int>("epochs");
  cfg.max_steps = rc.get<int>("max_steps");
  cfg.batch_size = rc.get<int>("batch_size");
  cfg.lr = rc.get<double>("lr");
  cfg.weight_decay = rc.get<double>("weight_decay");
  cfg.seed = rc.get<uint64_t>("seed");
  cfg.alpha = rc.get<double>("alpha");
  cfg.n_refs = rc.get<int>("n_refs");
  cfg.height = rc.get<int>("height");
  cfg.width = rc.get<int>("width");
  cfg.model_seed = rc.get<uint64_t>("model_seed");
  cfg.extractor_seed = rc.get<uint64_t>("extractor_seed");
  cfg.augment = !rc.get<bool>("no_augment");
  cfg.grad_clip = rc.get<double>("grad_clip");
  cfg.resume = rc.get<bool>("resume");

  const std::string out = rc.get<std::string>("out");
  const char* stage_tag = stage == TrainConfig::Stage::Coarse     ? "coarse"
                          : stage == TrainConfig::Stage::Detail   ? "detail"
                                                                  : "finetune";
  if (cfg.checkpoint_out.empty() && !out.empty())
    cfg.checkpoint_out = (fs::path(out) / (std::string(stage_tag) + ".ckpt")).string();
  if (cfg.metrics_csv.empty() && !out.empty())
    cfg.metrics_csv = (fs::path(out) / ("metrics_" + std::string(stage_tag) + ".csv")).string();
  if (!out.empty()) fs::create_directories(out);
  return cfg;
}

void run_train(RunConfig& rc, TrainConfig::Stage stage) {
  TrainConfig cfg = train_config_from(rc, stage);
  rc.write_resolved(rc.get<std::string>("out"));
  TrainResult res = run_training(cfg);
  std::fprintf(stderr, "[train] %lld steps, loss %.6g -> %.6g, checkpoint %s\n",
               static_cast<long long>(res.steps), res.first_loss, res.final_loss,
               res.checkpoint_path.c_str());
}

Image normalize_residual(const Image& detail) {
  Image out = detail;
  for (auto& v : out.data) v = std::min(1.f, std::max(0.f, (v + 1.f) * 0.5f));
  return out;
}

void write_infer_outputs(const std::string& out_dir, const std::string& stem,
                         const InferenceEngine::Result& r) {
  fs::create_directories(out_dir);
  write_png((fs::path(out_dir) / (stem + "_ic.png")).string(), r.coarse_image);
  write_png((fs::path(out_dir) / (stem + "_id.png")).string(),
            normalize_residual(r.detail_image));
  write_png((fs::path(out_dir) / (stem + "_ie.png")).string(), r.composed);
  write_png((fs::path(out_dir) / (stem + "_mc.png")).string(), r.coarse_mask);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural re-rendering pipeline: two-branch repair + detail transfer"};
  app.require_subcommand(1);

  int exit_code = 0;
  auto guard = [&](const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      exit_code = 2;
    }
  };

  // gen-data
  {
    CLI::App* cmd = app.add_subcommand("gen-data", "generate a synthetic dataset");
    auto os = std::make_shared<OptionSet>(cmd);
    os->add<std::string>("--out", "out", "", "dataset output directory");
    os->add<int>("--subjects", "subjects", 4, "number of subjects");
    os->add<int>("--frames", "frames", 30, "frames per sequence");
    os->add<int>("--views", "views", 8, "camera views per frame");
    os->add<int>("--ref-poses", "ref_poses", 1, "reference poses per subject");
    os->add<int>("--height", "height", 128, "image height");
    os->add<int>("--width", "width", 64, "image width");
    os->add<uint64_t>("--seed", "seed", 1, "generator seed");
    os->add<int>("--holes", "hole_count", 3, "holes per frame");
    os->add<double>("--hole-rmin", "hole_radius_min", 2.0, "min hole radius (px)");
    os->add<double>("--hole-rmax", "hole_radius_max", 5.0, "max hole radius (px)");
    os->add<double>("--noise", "noise_sigma", 0.04, "additive noise sigma");
    os->add<double>("--blur", "blur_sigma", 1.0, "gaussian blur sigma");
    os->add<double>("--jitter", "jitter", 0.02, "affine jitter magnitude");
    os->add<double>("--color-shift", "color_shift", 0.06, "per-channel gain amplitude");
    cmd->callback([os, &guard] {
      guard([&] {
        RunConfig rc = os->resolve();
        GenConfig cfg;
        cfg.out_dir = rc.get<std::string>("out");
        cfg.n_subjects = rc.get<int>("subjects");
        cfg.frames_per_seq = rc.get<int>("frames");
        cfg.n_views = rc.get<int>("views");
        cfg.ref_poses = rc.get<int>("ref_poses");
        cfg.height = rc.get<int>("height");
        cfg.width = rc.get<int>("width");
        cfg.seed = rc.get<uint64_t>("seed");
        cfg.degrade.hole_count = rc.get<int>("hole_count");
        cfg.degrade.hole_radius_min = static_cast<float>(rc.get<double>("hole_radius_min"));
        cfg.degrade.hole_radius_max = static_cast<float>(rc.get<double>("hole_radius_max"));
        cfg.degrade.noise_sigma = static_cast<float>(rc.get<double>("noise_sigma"));
        cfg.degrade.blur_sigma = static_cast<float>(rc.get<double>("blur_sigma"));
        cfg.degrade.jitter = static_cast<float>(rc.get<double>("jitter"));
        cfg.degrade.color_shift = static_cast<float>(rc.get<double>("color_shift"));
        DatasetManifest m = generate_dataset(cfg);
        rc.write_resolved(cfg.out_dir);
        std::fprintf(stderr, "[gen-data] %zu subjects written to %s\n", m.subjects.size(),
                     cfg.out_dir.c_str());
      });
    });
  }

  // train-coarse / train-detail / finetune
  {
    CLI::App* cmd = app.add_subcommand("train-coarse", "train the repair branch");
    auto os = std::make_shared<OptionSet>(cmd);
    add_train_options(*os, /*default_epochs=*/60);
    cmd->callback([os, &guard] {
      guard([&] {
        RunConfig rc = os->resolve();
        run_train(rc, TrainConfig::Stage::Coarse);
      });
    });
  }
  {
    CLI::App* cmd = app.add_subcommand("train-detail",
                                       "train the detail branch (coarse frozen)");
    auto os = std::make_shared<OptionSet>(cmd);
    add_train_options(*os, /*default_epochs=*/WarpSchedule::kCurriculumEnd + 3);
    os->add_flag("--wo-coarse", "wo_coarse", false,
                 "train the guidance-free ablation variant from scratch");
    cmd->callback([os, &guard] {
      guard([&] {
        RunConfig rc = os->resolve();
        TrainConfig cfg = train_config_from(rc, TrainConfig::Stage::Detail);
        cfg.wo_coarse = rc.get<bool>("wo_coarse");
        rc.write_resolved(rc.get<std::string>("out"));
        TrainResult res = run_training(cfg);
        std::fprintf(stderr, "[train] %lld steps, loss %.6g -> %.6g, checkpoint %s\n",
                     static_cast<long long>(res.steps), res.first_loss, res.final_loss,
                     res.checkpoint_path.c_str());
      });
    });
  }
  {
    CLI::App* cmd =
        app.add_subcommand("finetune", "adapt to a novel subject (E_r frozen)");
    auto os = std::make_shared<OptionSet>(cmd);
    add_train_options(*os, /*default_epochs=*/kFinetuneEpochs);
    os->add<int>("--frames", "finetune_frames", kFinetuneFrames,
                 "frames (x all views) used for adaptation");
    cmd->callback([os, &guard] {
      guard([&] {
        RunConfig rc = os->resolve();
        TrainConfig cfg = train_config_from(rc, TrainConfig::Stage::Finetune);
        cfg.finetune_frames = rc.get<int>("finetune_frames");
        rc.write_resolved(rc.get<std::string>("out"));
        TrainResult res = run_training(cfg);
        std::fprintf(stderr, "[train] %lld steps, loss %.6g -> %.6g, checkpoint %s\n",
                     static_cast<long long>(res.steps), res.first_loss, res.final_loss,
                     res.checkpoint_path.c_str());
      });
    });
  }

  // infer
  {
    CLI::App* cmd = app.add_subcommand("infer", "run the pipeline on frames");
    auto os = std::make_shared<OptionSet>(cmd);
    os->add<std::string>("--ckpt", "ckpt", "", "model checkpoint");
    os->add<std::string>("--frame", "frame", "", "path to one dataset frame PNG");
    os->add<std::string>("--data", "data", "", "dataset root (for --subject mode)");
    os->add<std::string>("--subject", "subject", "", "run a whole subject sequence");
    os->add<int>("--view", "view", -1, "restrict sequence inference to one view");
    os->add<std::string>("--out", "out", "infer_out", "output directory");
    os->add<double>("--alpha", "alpha", -1.0, "blend ratio override (-1 = checkpoint)");
    os->add<int>("--n-refs", "n_refs", kReferenceCountDesk, "reference candidates");
    cmd->callback([os, &guard] {
      guard([&] {
        RunConfig rc = os->resolve();
        const std::string frame_path = rc.get<std::string>("frame");
        std::string data = rc.get<std::string>("data");
        std::string subject = rc.get<std::string>("subject");
        std::string only_png;
        if (!frame_path.empty()) {
          const fs::path p = fs::absolute(frame_path);
          data = p.parent_path().parent_path().parent_path().string();
          subject = p.parent_path().parent_path().filename().string();
          only_png = p.filename().string();
        }
        RR_CHECK(!data.empty() && !subject.empty(),
                 "pass --frame PATH or --data ROOT --subject ID");

        LoadedDataset ds = load_dataset(data, {subject});
        const SubjectData* sd = ds.find_subject(subject);
        RR_RUNTIME_CHECK(sd != nullptr, "subject not in dataset: " << subject);
        RR_RUNTIME_CHECK(!sd->refs.empty(), "no reference set for subject " << subject);

        LoadedCheckpoint lc = load_checkpoint(rc.get<std::string>("ckpt"));
        InferenceEngine engine(std::move(lc.model));
        const float alpha = static_cast<float>(rc.get<double>("alpha"));
        const int view = rc.get<int>("view");
        const std::string out = rc.get<std::string>("out");
        rc.write_resolved(out);

        int written = 0;
        char stem[64];
        for (const auto& frame : sd->frames) {
          if (view >= 0 && frame.view_id != view) continue;
          if (!only_png.empty()) {
            char name[64];
            std::snprintf(name, sizeof name, "%04d_%d.png", frame.frame_id, frame.view_id);
            if (only_png != name) continue;
          }
          InferenceEngine::Result r =
              engine.infer(frame, sd->refs, alpha, rc.get<int>("n_refs"));
          if (r.cache_hit)
            std::fprintf(stderr, "[infer] reference cache hit for %s\n", subject.c_str());
          std::snprintf(stem, sizeof stem, "%s_%04d_%d", subject.c_str(), frame.frame_id,
                        frame.view_id);
          write_infer_outputs(out, stem, r);
          ++written;
        }
        RR_RUNTIME_CHECK(written > 0, "no frames matched");
        std::fprintf(stderr, "[infer] wrote %d frame(s) x 4 images to %s\n", written,
                     out.c_str());
      });
    });
  }

  // eval
  {
    CLI::App* cmd = app.add_subcommand("eval", "PSNR/SSIM/MSE over a dataset split");
    auto os = std::make_shared<OptionSet>(cmd);
    os->add<std::string>("--ckpt", "ckpt", "", "model checkpoint");
    os->add<std::string>("--data", "data", "", "dataset root");
    os->add<std::string>("--subjects", "subjects", "", "comma-separated subject filter");
    os->add<std::string>("--output", "output", "composed",
                         "composed | coarse | input (what to score)");
    os->add<std::string>("--out", "out", "eval_out", "report directory");
    os->add<double>("--alpha", "alpha", -1.0, "blend ratio override");
    os->add<int>("--n-refs", "n_refs", kReferenceCountDesk, "reference candidates");
    cmd->callback([os, &guard] {
      guard([&] {
        RunConfig rc = os->resolve();
        const auto subjects = split_csv(rc.get<std::string>("subjects"));
        LoadedDataset ds = load_dataset(rc.get<std::string>("data"), subjects);
        const std::string what = rc.get<std::string>("output");
        EvalOutput output = what == "coarse"  ? EvalOutput::CoarseOnly
                            : what == "input" ? EvalOutput::RenderedInput
                                              : EvalOutput::Composed;
        LoadedCheckpoint lc = load_checkpoint(rc.get<std::string>("ckpt"));
        MetricReport rep =
            evaluate_model(lc.model, ds, subjects, output,
                           static_cast<float>(rc.get<double>("alpha")), rc.get<int>("n_refs"));
        const std::string out = rc.get<std::string>("out");
        fs::create_directories(out);
        rc.write_resolved(out);
        std::ofstream(fs::path(out) / "metrics.csv", std::ios::trunc) << rep.to_csv();
        std::ofstream(fs::path(out) / "metrics.json", std::ios::trunc) << rep.to_json();
        std::fprintf(stderr, "[eval] %zu frames: PSNR %.3f dB, SSIM %.4f, MSE %.6g\n",
                     rep.frames.size(), rep.mean_psnr, rep.mean_ssim, rep.mean_mse);
      });
    });
  }

  // ablate
  {
    CLI::App* cmd = app.add_subcommand("ablate", "three-configuration comparison table");
    auto os = std::make_shared<OptionSet>(cmd);
    os->add<std::string>("--data", "data", "", "dataset root");
    os->add<std::string>("--subjects", "subjects", "", "held-out subjects (comma list)");
    os->add<std::string>("--full", "full", "", "full model checkpoint");
    os->add<std::string>("--wo-detail", "wo_detail", "", "coarse-only checkpoint");
    os->add<std::string>("--wo-coarse", "wo_coarse", "", "guidance-free checkpoint");
    os->add<std::string>("--out", "out", "ablation_out", "output directory");
    os->add<int>("--n-refs", "n_refs", kReferenceCountDesk, "reference candidates");
    cmd->callback([os, &guard] {
      guard([&] {
        RunConfig rc = os->resolve();
        const auto subjects = split_csv(rc.get<std::string>("subjects"));
        LoadedDataset ds = load_dataset(rc.get<std::string>("data"), subjects);
        const std::string out = rc.get<std::string>("out");
        AblationResult res = run_ablation(
            ds, subjects, rc.get<std::string>("full"), rc.get<std::string>("wo_detail"),
            rc.get<std::string>("wo_coarse"), out, rc.get<int>("n_refs"));
        rc.write_resolved(out);
        std::fprintf(stderr, "%s", res.table_csv.c_str());
      });
    });
  }

  // sweep-alpha
  {
    CLI::App* cmd = app.add_subcommand("sweep-alpha", "blend-ratio sweep (CSV + plot)");
    auto os = std::make_shared<OptionSet>(cmd);
    os->add<std::string>("--ckpt", "ckpt", "", "model checkpoint");
    os->add<std::string>("--data", "data", "", "dataset root");
    os->add<std::string>("--subjects", "subjects", "", "subjects (comma list)");
    os->add<std::string>("--alphas", "alphas", "0,0.05,0.1,0.15,0.5,1.0", "alpha grid");
    os->add<std::string>("--out", "out", "sweep_out", "output directory");
    os->add<int>("--n-refs", "n_refs", kReferenceCountDesk, "reference candidates");
    cmd->callback([os, &guard] {
      guard([&] {
        RunConfig rc = os->resolve();
        const auto subjects = split_csv(rc.get<std::string>("subjects"));
        LoadedDataset ds = load_dataset(rc.get<std::string>("data"), subjects);
        const std::string out = rc.get<std::string>("out");
        auto rows = sweep_alpha(ds, subjects, rc.get<std::string>("ckpt"),
                                split_doubles(rc.get<std::string>("alphas")), out,
                                rc.get<int>("n_refs"));
        rc.write_resolved(out);
        for (const auto& r : rows)
          std::fprintf(stderr, "[sweep] alpha %.3f -> PSNR %.3f dB, MSE %.6g\n", r.alpha,
                       r.psnr, r.mse);
      });
    });
  }

  // bench
  {
    CLI::App* cmd = app.add_subcommand("bench", "per-stage inference timing");
    auto os = std::make_shared<OptionSet>(cmd);
    os->add<std::string>("--ckpt", "ckpt", "", "model checkpoint");
    os->add<std::string>("--data", "data", "", "dataset root");
    os->add<std::string>("--precision", "precision", "f32", "f32 | f16");
    os->add<int>("--iters", "iterations", 50, "timed iterations");
    os->add<int>("--warmup", "warmup", 5, "warmup iterations");
    os->add<std::string>("--out", "out", "bench_out", "output directory");
    cmd->callback([os, &guard] {
      guard([&] {
        RunConfig rc = os->resolve();
        LoadedDataset ds = load_dataset(rc.get<std::string>("data"));
        BenchReport rep =
            bench_inference(rc.get<std::string>("ckpt"), ds, rc.get<std::string>("precision"),
                            rc.get<int>("iterations"), rc.get<int>("warmup"));
        const std::string out = rc.get<std::string>("out");
        fs::create_directories(out);
        rc.write_resolved(out);
        std::ofstream(fs::path(out) / "bench.json", std::ios::trunc) << rep.to_json();
        std::fprintf(stderr,
                     "[bench %s] coarse %.2f ms, ref-enc %.2f ms, warp %.2f ms, "
                     "decode %.2f ms; total %.2f ms, online %.2f ms\n",
                     rep.precision.c_str(), rep.coarse_ms, rep.reference_encoding_ms,
                     rep.warping_ms, rep.detail_decoding_ms, rep.total_ms(), rep.online_ms());
      });
    });
  }

  // grad-check
  {
    CLI::App* cmd = app.add_subcommand("grad-check",
                                       "finite-difference audit of every differentiable op");
    auto seeds = std::make_shared<int>(5);
    auto tol = std::make_shared<double>(1e-3);
    cmd->add_option("--seeds", *seeds, "seeds per op");
    cmd->add_option("--tolerance", *tol, "max relative error");
    cmd->callback([seeds, tol, &guard, &exit_code] {
      guard([&] {
        const auto results = run_grad_checks(*seeds, *tol);
        bool all_pass = true;
        for (const auto& r : results) {
          std::printf("%-28s max_rel_err %.3e  %s\n", r.name.c_str(), r.max_rel_err,
                      r.pass ? "ok" : "FAIL");
          all_pass = all_pass && r.pass;
        }
        if (!all_pass) {
          std::fprintf(stderr, "grad-check failed\n");
          exit_code = 2;
        }
      });
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::ostringstream oss;
    oss << app.help();
    std::fprintf(stderr, "%s\nerror: %s\n", oss.str().c_str(), e.what());
    return 1;
  }
  return exit_code;
}
