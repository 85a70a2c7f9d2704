// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "rerender/refselect.hpp"

namespace rerender {

namespace {

const char* stage_name(TrainConfig::Stage s) {
  switch (s) {
    case TrainConfig::Stage::Coarse: return "coarse";
    case TrainConfig::Stage::Detail: return "detail";
    case TrainConfig::Stage::Finetune: return "finetune";
  }
  return "?";
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

struct SampleRef {
  int subject = 0;
  int frame = 0;
};

struct SubjectRefs {
  std::vector<PreparedReference> prepared;
  std::vector<ReferenceCandidate> candidates;
};

// Deterministic Fisher-Yates with a derived stream.
std::vector<size_t> shuffled_order(size_t n, uint64_t seed, int epoch) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::derive(seed, 0xe70c, static_cast<uint64_t>(epoch));
  for (size_t i = n; i > 1; --i) {
    const size_t j = rng.next_below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace

std::string StepLog::csv_header() {
  return "step,stage,epoch,loss_total,loss_coarse,loss_vgg,loss_img,"
         "loss_warp_coarse,loss_warp_refined,loss_warp_reg,"
         "lambda_c_img,lambda_r_img,lambda_reg";
}

std::string StepLog::csv_row() const {
  std::string out;
  out += std::to_string(step) + "," + stage + "," + std::to_string(epoch);
  for (const double v : {loss_total, loss_coarse, loss_vgg, loss_img, loss_warp_coarse,
                         loss_warp_refined, loss_warp_reg, lambda_c_img, lambda_r_img,
                         lambda_reg})
    out += "," + fmt_g(v);
  return out;
}

TrainResult run_training(const TrainConfig& cfg) {
  RR_CHECK(cfg.batch_size >= 1, "batch size must be positive");
  RR_CHECK(cfg.lr > 0, "learning rate must be positive");
  RR_CHECK(cfg.epochs >= 1, "epoch count must be positive");
  RR_CHECK(!cfg.dataset_dir.empty(), "dataset directory required");

  const bool is_coarse = cfg.stage == TrainConfig::Stage::Coarse;
  const bool is_detail = cfg.stage == TrainConfig::Stage::Detail;
  const bool is_finetune = cfg.stage == TrainConfig::Stage::Finetune;

  LoadedDataset ds = load_dataset(cfg.dataset_dir, cfg.subjects);
  RR_RUNTIME_CHECK(!ds.subjects.empty(), "no subjects matched in " << cfg.dataset_dir);

  // Model: fresh for the coarse stage, otherwise from the previous stage.
  RerenderModel model;
  CheckpointState ckpt_state;
  bool have_ckpt = false;
  if (!cfg.checkpoint_in.empty()) {
    LoadedCheckpoint lc = load_checkpoint(cfg.checkpoint_in);
    model = std::move(lc.model);
    ckpt_state = std::move(lc.state);
    have_ckpt = true;
  } else {
    RR_CHECK(is_coarse || cfg.wo_coarse,
             "detail/finetune stages need a checkpoint to start from");
    ModelConfig mc;
    mc.height = cfg.height;
    mc.width = cfg.width;
    mc.alpha = static_cast<float>(cfg.alpha);
    mc.with_coarse = !cfg.wo_coarse;
    mc.init_seed = cfg.model_seed;
    mc.extractor_seed = cfg.extractor_seed;
    model = RerenderModel(mc);
  }
  const int H = model.config().height, W = model.config().width;

  // Stage freezes.
  model.set_requires_grad_all(false);
  if (is_coarse) {
    RR_CHECK(model.has_coarse(), "coarse stage needs the coarse branch");
    model.set_requires_grad_prefix("coarse", true);
  } else if (is_detail) {
    model.set_requires_grad_prefix("ref_enc", true);
    model.set_requires_grad_prefix("refine", true);
    model.set_requires_grad_prefix("decoder", true);
  } else {
    model.set_requires_grad_all(true);
    model.set_requires_grad_prefix("ref_enc", false);  // E_r stays fixed
  }

  ParamRefs trainable;
  for (auto& [name, t] : model.parameters())
    if (t.requires_grad()) trainable.emplace_back(name, t);
  RR_CHECK(!trainable.empty(), "stage has no trainable parameters");

  AdamOptimizer::Config adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.weight_decay = cfg.weight_decay;
  AdamOptimizer opt(trainable, adam_cfg);

  // Sample list.
  std::vector<SampleRef> samples;
  for (int si = 0; si < static_cast<int>(ds.subjects.size()); ++si) {
    const auto& frames = ds.subjects[size_t(si)].frames;
    for (int fi = 0; fi < static_cast<int>(frames.size()); ++fi) {
      if (is_finetune && frames[size_t(fi)].frame_id >= cfg.finetune_frames) continue;
      samples.push_back({si, fi});
    }
  }
  RR_RUNTIME_CHECK(!samples.empty(), "no training samples"
                                         << (is_finetune ? " (insufficient frames for fine-tuning)"
                                                         : ""));
  const int64_t steps_per_epoch =
      (static_cast<int64_t>(samples.size()) + cfg.batch_size - 1) / cfg.batch_size;

  // Reference sets (detail/finetune paths).
  std::vector<SubjectRefs> subject_refs(ds.subjects.size());
  if (!is_coarse) {
    for (size_t si = 0; si < ds.subjects.size(); ++si) {
      const auto& refs = ds.subjects[si].refs;
      RR_RUNTIME_CHECK(!refs.empty(), "subject " << ds.subjects[si].id
                                                 << " has no reference set");
      const int n = std::min<int>(cfg.n_refs, static_cast<int>(refs.size()));
      for (int ri = 0; ri < n; ++ri) {
        const ImageFrame& rf = refs[size_t(ri)];
        subject_refs[si].prepared.push_back(prepare_reference(rf, H, W));
        ReferenceCandidate cand;
        cand.keypoints = rf.keypoints;
        cand.descriptors = grid_descriptors(subject_refs[si].prepared.back().image);
        subject_refs[si].candidates.push_back(std::move(cand));
      }
    }
  }

  // Resume bookkeeping. Counter-derived RNG streams make every draw a pure
  // function of (seed, stage, step), so restoring the counters is enough to
  // reproduce the uninterrupted run.
  int64_t global_step = 0;
  int start_epoch = 0;
  if (cfg.resume) {
    RR_CHECK(have_ckpt, "resume requires checkpoint_in");
    RR_RUNTIME_CHECK(ckpt_state.stage == stage_name(cfg.stage),
                     "resume stage mismatch: checkpoint is " << ckpt_state.stage);
    global_step = ckpt_state.global_step;
    start_epoch = static_cast<int>(global_step / steps_per_epoch);
    opt.set_step_count(ckpt_state.adam_step_count);
    for (auto& slot : opt.slots()) {
      auto it = ckpt_state.adam_moments.find(slot.name);
      RR_RUNTIME_CHECK(it != ckpt_state.adam_moments.end(),
                       "checkpoint lacks optimizer state for " << slot.name);
      slot.m = it->second.first;
      slot.v = it->second.second;
    }
  }

  std::ofstream csv;
  if (!cfg.metrics_csv.empty()) {
    const bool append = cfg.resume && std::ifstream(cfg.metrics_csv).good();
    csv.open(cfg.metrics_csv, append ? std::ios::app : std::ios::trunc);
    RR_RUNTIME_CHECK(csv.good(), "cannot open metrics log: " << cfg.metrics_csv);
    if (!append) csv << StepLog::csv_header() << "\n";
  }

  const uint64_t stage_key = static_cast<uint64_t>(cfg.stage) + 1;
  TrainResult result;
  bool first_recorded = false;
  bool stop = false;

  for (int epoch = start_epoch; epoch < cfg.epochs && !stop; ++epoch) {
    const auto order = shuffled_order(samples.size(), cfg.seed, epoch);
    int64_t step_in_epoch = (epoch == start_epoch && cfg.resume)
                                ? global_step - static_cast<int64_t>(epoch) * steps_per_epoch
                                : 0;
    for (; step_in_epoch < steps_per_epoch && !stop; ++step_in_epoch) {
      const size_t begin = static_cast<size_t>(step_in_epoch) * cfg.batch_size;
      const size_t end = std::min(begin + cfg.batch_size, samples.size());

      StepLog log;
      log.step = global_step;
      log.stage = stage_name(cfg.stage);
      log.epoch = epoch;
      const auto lambdas = WarpSchedule::lambdas_for_epoch(epoch);
      log.lambda_c_img = lambdas.coarse_img;
      log.lambda_r_img = lambdas.refined_img;
      log.lambda_reg = lambdas.reg;

      Tensor batch_loss;
      try {
        for (size_t bi = begin; bi < end; ++bi) {
          const SampleRef& sref = samples[order[bi]];
          ImageFrame frame = ds.subjects[size_t(sref.subject)].frames[size_t(sref.frame)];
          if (cfg.augment) {
            const uint64_t aseed =
                Rng::derive(cfg.seed, 0xa09u * stage_key,
                            static_cast<uint64_t>(global_step), bi - begin)
                    .next_u64();
            frame = augment(frame, aseed);
          }
          Tensor input = image_to_tensor(frame.rendered_input);
          Tensor gt = image_to_tensor(frame.gt_image);
          Tensor gt_mask = image_to_tensor(frame.gt_mask);

          Tensor sample_loss;
          if (is_coarse) {
            CoarseOutput co = model.coarse().forward(input);
            sample_loss = coarse_loss(co.image, co.mask, gt, gt_mask);
            log.loss_coarse += sample_loss.vec()[0];
          } else {
            const auto& srefs = subject_refs[size_t(sref.subject)];
            const int ref_idx =
                select_reference(frame.keypoints, input, srefs.candidates);
            const PreparedReference& ref = srefs.prepared[size_t(ref_idx)];

            PipelineOutput po = run_pipeline(model, input, frame.keypoints, ref);
            ReconstructionLoss<float> rec =
                reconstruction_loss(po.composed, gt, model.extractor());
            // Fine-tuning happens after the curriculum window: late-phase
            // warp loss only.
            const int warp_epoch = is_detail ? epoch : WarpSchedule::kCurriculumEnd;
            WarpLoss<float> wl =
                warp_loss(ref.image, gt, po.field_coarse, po.field_total, warp_epoch);

            const LossWeights lw;
            Tensor detail_total =
                add(add(mul_scalar(rec.vgg, static_cast<float>(lw.lambda_r_vgg)),
                        mul_scalar(rec.img, static_cast<float>(lw.lambda_r_img))),
                    wl.total);
            if (is_finetune && model.has_coarse()) {
              Tensor lc = coarse_loss(po.coarse_image, po.coarse_mask, gt, gt_mask);
              log.loss_coarse += lc.vec()[0];
              sample_loss = add(mul_scalar(lc, static_cast<float>(lw.lambda_c)),
                                mul_scalar(detail_total, static_cast<float>(lw.lambda_d)));
            } else {
              sample_loss = detail_total;
            }
            log.loss_vgg += rec.vgg.vec()[0];
            log.loss_img += rec.img.vec()[0];
            log.loss_warp_coarse += wl.coarse_img;
            log.loss_warp_refined += wl.refined_img;
            log.loss_warp_reg += wl.reg;
          }
          batch_loss = batch_loss.defined() ? add(batch_loss, sample_loss) : sample_loss;
        }
      } catch (const RuntimeError& e) {
        throw RuntimeError("training aborted at step " + std::to_string(global_step) +
                           ": " + e.what());
      }

      const float inv_batch = 1.f / static_cast<float>(end - begin);
      batch_loss = mul_scalar(batch_loss, inv_batch);
      const double loss_value = batch_loss.vec()[0];
      RR_RUNTIME_CHECK(std::isfinite(loss_value),
                       "non-finite loss at step " << global_step);

      opt.zero_grad();
      backward(batch_loss);
      opt.clip_grad_norm(cfg.grad_clip);
      opt.step();

      log.loss_total = loss_value;
      const double scale = inv_batch;
      log.loss_coarse *= scale;
      log.loss_vgg *= scale;
      log.loss_img *= scale;
      log.loss_warp_coarse *= scale;
      log.loss_warp_refined *= scale;
      log.loss_warp_reg *= scale;
      if (csv.is_open()) csv << log.csv_row() << "\n";

      if (!first_recorded) {
        result.first_loss = loss_value;
        first_recorded = true;
      }
      result.final_loss = loss_value;
      ++global_step;
      ++result.steps;
      if (cfg.max_steps > 0 && global_step >= cfg.max_steps) stop = true;
    }
    result.epochs_run = epoch + 1;
  }

  if (!cfg.checkpoint_out.empty()) {
    CheckpointState state;
    state.model_config = model.config();
    state.stage = stage_name(cfg.stage);
    state.epoch = static_cast<int>(global_step / steps_per_epoch);
    state.global_step = global_step;
    state.train_seed = cfg.seed;
    state.adam_step_count = opt.step_count();
    for (const auto& slot : opt.slots())
      state.adam_moments[slot.name] = {slot.m, slot.v};
    save_checkpoint(cfg.checkpoint_out, model, state);
    result.checkpoint_path = cfg.checkpoint_out;
  }
  return result;
}

}  // namespace rerender
