// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "rerender/checkpoint.hpp"
#include "rerender/metrics.hpp"
#include "rerender/model.hpp"
#include "rerender/refselect.hpp"
#include "rerender/synth.hpp"

namespace rerender {

enum class EvalOutput {
  Composed,       // final two-branch result
  CoarseOnly,     // coarse branch output alone ("w/o detail")
  RenderedInput,  // the degraded input, as a baseline
};

// Inference engine with per-subject reference caching: a subject's references
// are encoded once and later frames reuse the pyramids.
class InferenceEngine {
 public:
  explicit InferenceEngine(RerenderModel model) : model_(std::move(model)) {}

  struct Result {
    Image coarse_image, coarse_mask, detail_image, composed;
    bool cache_hit = false;
  };

  Result infer(const ImageFrame& frame, const std::vector<ImageFrame>& refs,
               float alpha_override = -1.f, int n_refs = kReferenceCountDesk);

  RerenderModel& model() { return model_; }
  int cache_hits() const { return cache_hits_; }

 private:
  struct CachedSubject {
    std::vector<PreparedReference> prepared;
    std::vector<ReferenceCandidate> candidates;
  };

  RerenderModel model_;
  std::map<std::string, CachedSubject> cache_;
  int cache_hits_ = 0;
};

// Frame-by-frame metrics of a model over the given subjects.
MetricReport evaluate_model(RerenderModel& model, const LoadedDataset& ds,
                            const std::vector<std::string>& subjects, EvalOutput output,
                            float alpha_override = -1.f, int n_refs = kReferenceCountDesk);

struct AblationRow {
  std::string configuration;
  std::string subject;
  double psnr = 0, ssim = 0, mse = 0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::string table_csv;
};

// Runs the three-configuration comparison (full / coarse-only / guidance-free)
// over held-out subjects; writes the table CSV and a qualitative image grid.
AblationResult run_ablation(const LoadedDataset& ds,
                            const std::vector<std::string>& subjects,
                            const std::string& ckpt_full,
                            const std::string& ckpt_wo_detail,
                            const std::string& ckpt_wo_coarse, const std::string& out_dir,
                            int n_refs = kReferenceCountDesk);

struct AlphaSweepRow {
  double alpha = 0;
  double psnr = 0, mse = 0;
};

// Inference-only blend-ratio sweep; writes CSV and a line-plot PNG.
std::vector<AlphaSweepRow> sweep_alpha(const LoadedDataset& ds,
                                       const std::vector<std::string>& subjects,
                                       const std::string& ckpt,
                                       const std::vector<double>& alphas,
                                       const std::string& out_dir,
                                       int n_refs = kReferenceCountDesk);

struct BenchReport {
  double coarse_ms = 0;
  double reference_encoding_ms = 0;
  double warping_ms = 0;
  double detail_decoding_ms = 0;
  std::string precision;  // "f32" or "f16"
  int height = 0, width = 0;
  int iterations = 0;

  double total_ms() const {
    return coarse_ms + reference_encoding_ms + warping_ms + detail_decoding_ms;
  }
  // Reference encoding amortizes across a sequence, so the online time
  // excludes it.
  double online_ms() const { return total_ms() - reference_encoding_ms; }
  std::string to_json() const;
};

// Times the four pipeline stages single-threaded after warmup. f16 mode
// stores weights at half precision and widens to f32 for compute.
BenchReport bench_inference(const std::string& ckpt, const LoadedDataset& ds,
                            const std::string& precision, int iterations = 50,
                            int warmup = 5);

// Simple line plot rendered into a PNG.
void write_line_plot(const std::string& path, const std::vector<double>& xs,
                     const std::vector<double>& ys, const std::string& title);

}  // namespace rerender
