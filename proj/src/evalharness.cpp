// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/evalharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "rerender/parallel.hpp"

namespace fs = std::filesystem;

namespace rerender {

InferenceEngine::Result InferenceEngine::infer(const ImageFrame& frame,
                                               const std::vector<ImageFrame>& refs,
                                               float alpha_override, int n_refs) {
  RR_CHECK(!refs.empty(), "no reference set for subject " << frame.subject_id);
  NoGradGuard no_grad;
  const int H = model_.config().height, W = model_.config().width;

  auto it = cache_.find(frame.subject_id);
  const bool hit = it != cache_.end();
  if (!hit) {
    CachedSubject cs;
    const int n = std::min<int>(n_refs, static_cast<int>(refs.size()));
    for (int ri = 0; ri < n; ++ri) {
      PreparedReference pr = prepare_reference(refs[size_t(ri)], H, W);
      pr.cached_pyramid = model_.ref_encoder().forward(pr.image);
      ReferenceCandidate cand;
      cand.keypoints = pr.keypoints;
      cand.descriptors = grid_descriptors(pr.image);
      cs.prepared.push_back(std::move(pr));
      cs.candidates.push_back(std::move(cand));
    }
    it = cache_.emplace(frame.subject_id, std::move(cs)).first;
  } else {
    ++cache_hits_;
  }
  const CachedSubject& cs = it->second;

  Tensor input = image_to_tensor(frame.rendered_input);
  const int ref_idx = select_reference(frame.keypoints, input, cs.candidates);
  PipelineOutput po = run_pipeline(model_, input, frame.keypoints,
                                   cs.prepared[size_t(ref_idx)], alpha_override,
                                   /*use_cached_pyramid=*/true);

  Result out;
  out.cache_hit = hit;
  if (model_.has_coarse()) {
    out.coarse_image = tensor_to_image(po.coarse_image);
    out.coarse_mask = tensor_to_image(po.coarse_mask);
  }
  out.detail_image = tensor_to_image(po.detail_image);
  out.composed = tensor_to_image(po.composed);
  return out;
}

MetricReport evaluate_model(RerenderModel& model, const LoadedDataset& ds,
                            const std::vector<std::string>& subjects, EvalOutput output,
                            float alpha_override, int n_refs) {
  InferenceEngine engine(std::move(model));
  MetricReport report;
  for (const auto& subject : ds.subjects) {
    if (!subjects.empty() &&
        std::find(subjects.begin(), subjects.end(), subject.id) == subjects.end())
      continue;
    for (const auto& frame : subject.frames) {
      Image result;
      switch (output) {
        case EvalOutput::RenderedInput:
          result = frame.rendered_input;
          break;
        case EvalOutput::CoarseOnly: {
          NoGradGuard no_grad;
          CoarseOutput co = engine.model().coarse().forward(image_to_tensor(frame.rendered_input));
          result = tensor_to_image(co.image);
          break;
        }
        case EvalOutput::Composed:
          result = engine.infer(frame, subject.refs, alpha_override, n_refs).composed;
          break;
      }
      FrameMetrics fm;
      fm.subject = subject.id;
      fm.frame = frame.frame_id;
      fm.view = frame.view_id;
      fm.mse = mse(result, frame.gt_image);
      fm.psnr = psnr_from_mse(fm.mse);
      fm.ssim = ssim(result, frame.gt_image);
      report.frames.push_back(fm);
    }
  }
  report.aggregate();
  model = std::move(engine.model());
  return report;
}

namespace {

MetricReport eval_subject(RerenderModel& model, const LoadedDataset& ds,
                          const std::string& subject, EvalOutput output, int n_refs) {
  return evaluate_model(model, ds, {subject}, output, -1.f, n_refs);
}

}  // namespace

AblationResult run_ablation(const LoadedDataset& ds,
                            const std::vector<std::string>& subjects,
                            const std::string& ckpt_full,
                            const std::string& ckpt_wo_detail,
                            const std::string& ckpt_wo_coarse, const std::string& out_dir,
                            int n_refs) {
  RR_CHECK(!subjects.empty(), "ablation needs at least one held-out subject");
  fs::create_directories(out_dir);

  struct Config {
    std::string name;
    std::string ckpt;
    EvalOutput output;
  };
  const std::vector<Config> configs = {
      {"full", ckpt_full, EvalOutput::Composed},
      {"wo_detail", ckpt_wo_detail, EvalOutput::CoarseOnly},
      {"wo_coarse", ckpt_wo_coarse, EvalOutput::Composed},
  };

  AblationResult result;
  std::string csv = "configuration,subject,psnr,ssim,mse\n";
  char buf[200];
  for (const auto& config : configs) {
    LoadedCheckpoint lc = load_checkpoint(config.ckpt);
    for (const auto& subject : subjects) {
      MetricReport rep = eval_subject(lc.model, ds, subject, config.output, n_refs);
      AblationRow row;
      row.configuration = config.name;
      row.subject = subject;
      row.psnr = rep.mean_psnr;
      row.ssim = rep.mean_ssim;
      row.mse = rep.mean_mse;
      result.rows.push_back(row);
      std::snprintf(buf, sizeof buf, "%s,%s,%.9g,%.9g,%.9g\n", config.name.c_str(),
                    subject.c_str(), row.psnr, row.ssim, row.mse);
      csv += buf;
    }
  }
  result.table_csv = csv;
  {
    std::ofstream os(fs::path(out_dir) / "ablation.csv", std::ios::trunc);
    os << csv;
  }

  // Qualitative grid: input / w-o-detail / w-o-coarse / full / GT columns.
  const SubjectData* grid_subject = ds.find_subject(subjects.front());
  if (grid_subject && !grid_subject->frames.empty()) {
    LoadedCheckpoint full_lc = load_checkpoint(ckpt_full);
    LoadedCheckpoint wd_lc = load_checkpoint(ckpt_wo_detail);
    LoadedCheckpoint wc_lc = load_checkpoint(ckpt_wo_coarse);
    InferenceEngine full_engine(std::move(full_lc.model));
    InferenceEngine wc_engine(std::move(wc_lc.model));
    NoGradGuard no_grad;

    std::vector<Image> grid_rows;
    const int rows = std::min<size_t>(4, grid_subject->frames.size());
    for (int r = 0; r < rows; ++r) {
      const size_t idx = grid_subject->frames.size() * static_cast<size_t>(r) / rows;
      const ImageFrame& frame = grid_subject->frames[idx];
      CoarseOutput co =
          wd_lc.model.coarse().forward(image_to_tensor(frame.rendered_input));
      Image wd_img = tensor_to_image(co.image);
      Image full_img = full_engine.infer(frame, grid_subject->refs, -1.f, n_refs).composed;
      Image wc_img = wc_engine.infer(frame, grid_subject->refs, -1.f, n_refs).composed;
      grid_rows.push_back(hconcat(
          {frame.rendered_input, wd_img, wc_img, full_img, frame.gt_image}));
    }
    Image grid(3, grid_rows[0].height * rows, grid_rows[0].width);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < grid_rows[size_t(r)].height; ++y)
          for (int x = 0; x < grid_rows[size_t(r)].width; ++x)
            grid.at(c, r * grid_rows[size_t(r)].height + y, x) =
                grid_rows[size_t(r)].at(c, y, x);
    write_png((fs::path(out_dir) / "ablation_grid.png").string(), grid);
  }
  return result;
}

std::vector<AlphaSweepRow> sweep_alpha(const LoadedDataset& ds,
                                       const std::vector<std::string>& subjects,
                                       const std::string& ckpt,
                                       const std::vector<double>& alphas,
                                       const std::string& out_dir, int n_refs) {
  RR_CHECK(!alphas.empty(), "alpha sweep needs a non-empty grid");
  fs::create_directories(out_dir);

  std::vector<AlphaSweepRow> rows;
  for (const double a : alphas) {
    LoadedCheckpoint lc = load_checkpoint(ckpt);
    MetricReport rep = evaluate_model(lc.model, ds, subjects, EvalOutput::Composed,
                                      static_cast<float>(a), n_refs);
    AlphaSweepRow row;
    row.alpha = a;
    row.psnr = rep.mean_psnr;
    row.mse = rep.mean_mse;
    rows.push_back(row);
  }

  std::string csv = "alpha,psnr,mse\n";
  char buf[120];
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", r.alpha, r.psnr, r.mse);
    csv += buf;
    xs.push_back(r.alpha);
    ys.push_back(r.psnr);
  }
  {
    std::ofstream os(fs::path(out_dir) / "alpha_sweep.csv", std::ios::trunc);
    os << csv;
  }
  write_line_plot((fs::path(out_dir) / "alpha_sweep.png").string(), xs, ys, "psnr vs alpha");
  return rows;
}

std::string BenchReport::to_json() const {
  nlohmann::json j;
  j["stages"] = {{"coarse", coarse_ms},
                 {"reference_encoding", reference_encoding_ms},
                 {"warping", warping_ms},
                 {"detail_decoding", detail_decoding_ms}};
  j["total_ms"] = total_ms();
  j["online_ms"] = online_ms();
  j["precision"] = precision;
  j["height"] = height;
  j["width"] = width;
  j["iterations"] = iterations;
  return j.dump(2);
}

BenchReport bench_inference(const std::string& ckpt, const LoadedDataset& ds,
                            const std::string& precision, int iterations, int warmup) {
  RR_CHECK(precision == "f32" || precision == "f16", "precision must be f32 or f16");
  RR_CHECK(iterations >= 10, "benchmark needs at least 10 iterations");
  RR_RUNTIME_CHECK(!ds.subjects.empty() && !ds.subjects[0].frames.empty() &&
                       !ds.subjects[0].refs.empty(),
                   "benchmark needs a dataset with frames and references");

  LoadedCheckpoint lc = load_checkpoint(ckpt);
  if (precision == "f16") cast_weights_to_half(lc.model);
  RerenderModel& model = lc.model;
  const int H = model.config().height, W = model.config().width;

  const ImageFrame& frame = ds.subjects[0].frames[0];
  const ImageFrame& ref_frame = ds.subjects[0].refs[0];
  Tensor input = image_to_tensor(frame.rendered_input);
  PreparedReference ref = prepare_reference(ref_frame, H, W);

  // Timing runs strictly single-threaded.
  set_thread_count(1);
  NoGradGuard no_grad;
  BenchReport report;
  report.precision = precision;
  report.height = H;
  report.width = W;
  report.iterations = iterations;

  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  const int qh = H / 4, qw = W / 4;
  Tensor input_heatmap = keypoints_to_heatmaps(frame.keypoints, qh, qw, heatmap_sigma(qh));

  for (int it = 0; it < warmup + iterations; ++it) {
    const bool timed = it >= warmup;

    auto t0 = Clock::now();
    CoarseOutput co = model.coarse().forward(input);
    if (timed) report.coarse_ms += ms_since(t0);

    t0 = Clock::now();
    FeaturePyramid ref_pyr = model.ref_encoder().forward(ref.image);
    if (timed) report.reference_encoding_ms += ms_since(t0);

    t0 = Clock::now();
    Tensor wc = coarse_field(frame.keypoints, ref.keypoints, ref.heatmap);
    Tensor ref_q = bilinear_resize(ref.image, qh, qw);
    Tensor warped_q = grid_sample(ref_q, wc);
    Tensor wr = model.refine().forward(ref_q, warped_q, input_heatmap, ref.heatmap);
    Tensor w_total = add(wc, wr);
    FeaturePyramid warped = warp_pyramid(ref_pyr, w_total);
    if (timed) report.warping_ms += ms_since(t0);

    t0 = Clock::now();
    FeaturePyramid blended = blend_features(co.guidance, warped, model.alpha());
    Tensor detail = model.decoder().forward(blended);
    Tensor composed = compose_output(co.image, detail);
    if (timed) report.detail_decoding_ms += ms_since(t0);
    (void)composed;
  }
  set_thread_count(0);

  report.coarse_ms /= iterations;
  report.reference_encoding_ms /= iterations;
  report.warping_ms /= iterations;
  report.detail_decoding_ms /= iterations;
  return report;
}

namespace {

// 3x5 digit glyphs for plot tick labels.
const char* glyph(char c) {
  switch (c) {
    case '0': return "111101101101111";
    case '1': return "010110010010111";
    case '2': return "111001111100111";
    case '3': return "111001111001111";
    case '4': return "101101111001001";
    case '5': return "111100111001111";
    case '6': return "111100111101111";
    case '7': return "111001010010010";
    case '8': return "111101111101111";
    case '9': return "111101111001111";
    case '.': return "000000000000010";
    case '-': return "000000111000000";
    default: return "000000000000000";
  }
}

void draw_text(Image& img, int x0, int y0, const std::string& text) {
  for (size_t i = 0; i < text.size(); ++i) {
    const char* g = glyph(text[i]);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 3; ++x) {
        if (g[y * 3 + x] != '1') continue;
        const int px = x0 + static_cast<int>(i) * 4 + x, py = y0 + y;
        if (px < 0 || px >= img.width || py < 0 || py >= img.height) continue;
        for (int c = 0; c < 3; ++c) img.at(c, py, px) = 0.f;
      }
  }
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

void write_line_plot(const std::string& path, const std::vector<double>& xs,
                     const std::vector<double>& ys, const std::string&) {
  RR_CHECK(xs.size() == ys.size() && !xs.empty(), "plot needs matching non-empty series");
  const int W = 480, H = 320, ml = 48, mr = 16, mt = 16, mb = 32;
  Image img(3, H, W, 1.f);

  double xmin = xs[0], xmax = xs[0], ymin = ys[0], ymax = ys[0];
  for (size_t i = 0; i < xs.size(); ++i) {
    xmin = std::min(xmin, xs[i]);
    xmax = std::max(xmax, xs[i]);
    ymin = std::min(ymin, ys[i]);
    ymax = std::max(ymax, ys[i]);
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto to_px = [&](double x) {
    return ml + static_cast<int>((x - xmin) / (xmax - xmin) * (W - ml - mr));
  };
  auto to_py = [&](double y) {
    return H - mb - static_cast<int>((y - ymin) / (ymax - ymin) * (H - mt - mb));
  };

  auto put = [&](int x, int y, float r, float g, float b) {
    if (x < 0 || x >= W || y < 0 || y >= H) return;
    img.at(0, y, x) = r;
    img.at(1, y, x) = g;
    img.at(2, y, x) = b;
  };

  for (int x = ml; x < W - mr; ++x) put(x, H - mb, 0, 0, 0);
  for (int y = mt; y < H - mb; ++y) put(ml, y, 0, 0, 0);

  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4;
    const double yv = ymin + (ymax - ymin) * t / 4;
    const int px = to_px(xv), py = to_py(yv);
    for (int d = 0; d < 3; ++d) {
      put(px, H - mb + d, 0, 0, 0);
      put(ml - d, py, 0, 0, 0);
    }
    draw_text(img, px - 6, H - mb + 6, short_num(xv));
    draw_text(img, 4, py - 2, short_num(yv));
  }

  auto line = [&](int x0, int y0, int x1, int y1) {
    const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
    for (int i = 0; i <= steps; ++i) {
      const int x = x0 + (x1 - x0) * i / steps;
      const int y = y0 + (y1 - y0) * i / steps;
      put(x, y, 0.8f, 0.2f, 0.1f);
    }
  };
  for (size_t i = 1; i < xs.size(); ++i)
    line(to_px(xs[i - 1]), to_py(ys[i - 1]), to_px(xs[i]), to_py(ys[i]));
  for (size_t i = 0; i < xs.size(); ++i) {
    const int px = to_px(xs[i]), py = to_py(ys[i]);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) put(px + dx, py + dy, 0.1f, 0.2f, 0.8f);
  }
  write_png(path, img);
}

}  // namespace rerender
