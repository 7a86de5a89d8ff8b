// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <json.hpp>

#include "gpnerf/image.hpp"
#include "gpnerf/trainer.hpp"

namespace gpnerf {

double psnr(const Tensor& pred, const Tensor& gt) {
  GPNERF_CHECK(pred.same_shape(gt), "psnr shape mismatch " + pred.shape_str() +
                                        " vs " + gt.shape_str());
  double mse = 0.0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    const double d = pred[i] - gt[i];
    mse += d * d;
  }
  mse /= pred.numel();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

Tensor luminance(const Tensor& img) {
  if (img.rank() == 2) return img;
  GPNERF_CHECK(img.rank() == 3 && img.dim(2) == 3, "expected [H,W] or [H,W,3]");
  Tensor y({img.dim(0), img.dim(1)});
  for (int64_t p = 0; p < y.numel(); ++p)
    y[p] = 0.299 * img[p * 3] + 0.587 * img[p * 3 + 1] + 0.114 * img[p * 3 + 2];
  return y;
}

}  // namespace

double ssim(const Tensor& pred, const Tensor& gt) {
  GPNERF_CHECK(pred.same_shape(gt), "ssim shape mismatch");
  const Tensor a = luminance(pred), b = luminance(gt);
  const int H = a.dim(0), W = a.dim(1);
  constexpr int win = 11;
  GPNERF_CHECK(H >= win && W >= win, "image smaller than the 11x11 ssim window");

  double g[win];
  double gsum = 0;
  for (int i = 0; i < win; ++i) {
    const double x = i - (win - 1) / 2.0;
    g[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // L = 1
  double total = 0.0;
  int64_t count = 0;
  for (int y = 0; y + win <= H; ++y) {
    for (int x = 0; x + win <= W; ++x) {
      double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double w = g[i] * g[j];
          const double va = a.at({y + i, x + j}), vb = b.at({y + i, x + j});
          mu_a += w * va;
          mu_b += w * vb;
          aa += w * va * va;
          bb += w * vb * vb;
          ab += w * va * vb;
        }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++count;
    }
  }
  return total / count;
}

SegMetrics segmentation_metrics(const LabelArray& pred, const LabelArray& gt,
                                int n_classes, bool include_background) {
  GPNERF_CHECK(pred.numel() == gt.numel(), "label map size mismatch");
  std::vector<int64_t> confusion((size_t)n_classes * n_classes, 0);
  for (int64_t i = 0; i < gt.numel(); ++i) {
    GPNERF_CHECK(gt[i] >= 0 && gt[i] < n_classes, "gt label out of range");
    GPNERF_CHECK(pred[i] >= 0 && pred[i] < n_classes, "pred label out of range");
    ++confusion[(size_t)gt[i] * n_classes + pred[i]];
  }
  SegMetrics m;
  int64_t trace = 0, total = 0, considered = 0;
  double iou_sum = 0, recall_sum = 0;
  int present = 0;
  for (int c = include_background ? 0 : 1; c < n_classes; ++c) {
    int64_t tp = confusion[(size_t)c * n_classes + c];
    int64_t gt_c = 0, pred_c = 0;
    for (int k = 0; k < n_classes; ++k) {
      gt_c += confusion[(size_t)c * n_classes + k];
      pred_c += confusion[(size_t)k * n_classes + c];
    }
    trace += tp;
    considered += gt_c;
    if (gt_c == 0) continue;  // absent from GT: undefined ratios excluded
    ++present;
    iou_sum += (double)tp / (double)(gt_c + pred_c - tp);
    recall_sum += (double)tp / (double)gt_c;
  }
  total = include_background ? gt.numel() : considered;
  m.total_acc = total > 0 ? (double)trace / (double)total : 1.0;
  m.miou = present > 0 ? iou_sum / present : 1.0;
  m.avg_acc = present > 0 ? recall_sum / present : 1.0;
  return m;
}

namespace {

struct Component {
  int label = 0;
  std::vector<int64_t> pixels;
};

std::vector<Component> connected_components(const LabelArray& labels) {
  const int H = labels.dim(0), W = labels.dim(1);
  std::vector<int> comp((size_t)H * W, -1);
  std::vector<Component> out;
  for (int64_t start = 0; start < (int64_t)H * W; ++start) {
    if (labels[start] == 0 || comp[start] >= 0) continue;
    Component c;
    c.label = labels[start];
    std::queue<int64_t> q;
    q.push(start);
    comp[start] = (int)out.size();
    while (!q.empty()) {
      const int64_t p = q.front();
      q.pop();
      c.pixels.push_back(p);
      const int y = (int)(p / W), x = (int)(p % W);
      const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int ny = y + dy[k], nx = x + dx[k];
        if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
        const int64_t np = (int64_t)ny * W + nx;
        if (comp[np] >= 0 || labels[np] != c.label) continue;
        comp[np] = (int)out.size();
        q.push(np);
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

double ap75(const LabelArray& pred, const LabelArray& gt) {
  GPNERF_CHECK(pred.numel() == gt.numel(), "instance map size mismatch");
  const auto preds = connected_components(pred);
  const auto gts = connected_components(gt);
  if (preds.empty()) return gts.empty() ? 1.0 : 0.0;

  struct Pair {
    double iou;
    int gi, pi;
  };
  std::vector<Pair> pairs;
  for (int gi = 0; gi < (int)gts.size(); ++gi) {
    std::vector<uint8_t> in_gt(gt.numel(), 0);
    for (int64_t p : gts[gi].pixels) in_gt[p] = 1;
    for (int pi = 0; pi < (int)preds.size(); ++pi) {
      int64_t inter = 0;
      for (int64_t p : preds[pi].pixels) inter += in_gt[p];
      if (inter == 0) continue;
      const double iou =
          (double)inter /
          (double)((int64_t)gts[gi].pixels.size() + preds[pi].pixels.size() - inter);
      pairs.push_back({iou, gi, pi});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.gi != b.gi) return a.gi < b.gi;
    return a.pi < b.pi;
  });
  std::vector<uint8_t> gt_used(gts.size(), 0), pred_used(preds.size(), 0);
  int tp = 0;
  for (const Pair& pr : pairs) {
    if (gt_used[pr.gi] || pred_used[pr.pi]) continue;
    gt_used[pr.gi] = pred_used[pr.pi] = 1;
    if (pr.iou >= 0.75) ++tp;
  }
  return (double)tp / (double)preds.size();  // unmatched preds are FPs
}

Tensor pca_feature_image(const Tensor& sem_map, bool* degenerate,
                         std::vector<std::vector<double>>* components) {
  GPNERF_CHECK(sem_map.rank() == 4 && sem_map.dim(0) == 1, "pca expects [1,D,H,W]");
  const int D = sem_map.dim(1), H = sem_map.dim(2), W = sem_map.dim(3);
  const int64_t P = (int64_t)H * W;
  if (degenerate) *degenerate = false;

  std::vector<double> mean(D, 0.0);
  for (int d = 0; d < D; ++d) {
    for (int64_t p = 0; p < P; ++p) mean[d] += sem_map[(int64_t)d * P + p];
    mean[d] /= P;
  }
  std::vector<double> cov((size_t)D * D, 0.0);
  for (int i = 0; i < D; ++i)
    for (int j = i; j < D; ++j) {
      double s = 0;
      for (int64_t p = 0; p < P; ++p)
        s += (sem_map[(int64_t)i * P + p] - mean[i]) *
             (sem_map[(int64_t)j * P + p] - mean[j]);
      cov[(size_t)i * D + j] = cov[(size_t)j * D + i] = s / P;
    }

  // Cyclic Jacobi on the covariance.
  std::vector<double> v((size_t)D * D, 0.0);
  for (int i = 0; i < D; ++i) v[(size_t)i * D + i] = 1.0;
  for (int sweep = 0; sweep < 24; ++sweep) {
    double off = 0;
    for (int i = 0; i < D; ++i)
      for (int j = i + 1; j < D; ++j) off += cov[(size_t)i * D + j] * cov[(size_t)i * D + j];
    if (off < 1e-22) break;
    for (int p = 0; p < D; ++p)
      for (int q = p + 1; q < D; ++q) {
        const double apq = cov[(size_t)p * D + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = cov[(size_t)p * D + p], aqq = cov[(size_t)q * D + q];
        const double theta = 0.5 * std::atan2(2 * apq, aqq - app);
        const double c = std::cos(theta), s = std::sin(theta);
        for (int k = 0; k < D; ++k) {
          const double akp = cov[(size_t)k * D + p], akq = cov[(size_t)k * D + q];
          cov[(size_t)k * D + p] = c * akp - s * akq;
          cov[(size_t)k * D + q] = s * akp + c * akq;
        }
        for (int k = 0; k < D; ++k) {
          const double apk = cov[(size_t)p * D + k], aqk = cov[(size_t)q * D + k];
          cov[(size_t)p * D + k] = c * apk - s * aqk;
          cov[(size_t)q * D + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < D; ++k) {
          const double vkp = v[(size_t)k * D + p], vkq = v[(size_t)k * D + q];
          v[(size_t)k * D + p] = c * vkp - s * vkq;
          v[(size_t)k * D + q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::pair<double, int>> eig;
  for (int i = 0; i < D; ++i) eig.push_back({cov[(size_t)i * D + i], i});
  std::sort(eig.begin(), eig.end(), std::greater<>());

  Tensor img({H, W, 3});
  if (eig[0].first < 1e-12) {
    if (degenerate) *degenerate = true;
    // Grayscale fallback: normalized feature magnitude (constant input ->
    // constant image).
    for (int64_t p = 0; p < P; ++p) {
      double s = 0;
      for (int d = 0; d < D; ++d) s += sem_map[(int64_t)d * P + p] * sem_map[(int64_t)d * P + p];
      const double gray = 0.5 * std::tanh(std::sqrt(s)) + 0.25;
      for (int c = 0; c < 3; ++c) img[p * 3 + c] = gray;
    }
    return img;
  }

  for (int c = 0; c < 3; ++c) {
    const int col = eig[std::min(c, D - 1)].second;
    if (components) {
      std::vector<double> comp(D);
      for (int d = 0; d < D; ++d) comp[d] = v[(size_t)d * D + col];
      components->push_back(comp);
    }
    double lo = 1e300, hi = -1e300;
    std::vector<double> proj(P);
    for (int64_t p = 0; p < P; ++p) {
      double s = 0;
      for (int d = 0; d < D; ++d)
        s += (sem_map[(int64_t)d * P + p] - mean[d]) * v[(size_t)d * D + col];
      proj[p] = s;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    const double span = hi - lo > 1e-12 ? hi - lo : 1.0;
    for (int64_t p = 0; p < P; ++p) img[p * 3 + c] = (proj[p] - lo) / span;
  }
  return img;
}

void pca_feature_export(const Tensor& sem_map, const std::string& path) {
  bool degenerate = false;
  const Tensor img = pca_feature_image(sem_map, &degenerate);
  if (degenerate)
    std::fprintf(stderr, "warning: degenerate feature covariance, grayscale fallback for %s\n",
                 path.c_str());
  write_png8(path, rgb_to_u8(img));
}

std::string EvalReport::to_json(const std::string& config_dump) const {
  nlohmann::json j;
  auto put = [](nlohmann::json& obj, const char* key, double value) {
    if (std::isfinite(value)) obj[key] = value;
    else obj[key] = "inf";
  };
  put(j, "psnr", psnr);
  put(j, "ssim", ssim);
  j["miou"] = miou;
  j["total_acc"] = total_acc;
  j["avg_acc"] = avg_acc;
  if (ap75) j["ap75"] = *ap75;
  j["gt_class_pixels"] = gt_class_pixels;
  j["views"] = nlohmann::json::array();
  for (const auto& v : views) {
    nlohmann::json vj;
    vj["scene"] = v.scene;
    vj["view"] = v.view;
    put(vj, "psnr", v.psnr);
    put(vj, "ssim", v.ssim);
    vj["miou"] = v.miou;
    vj["total_acc"] = v.total_acc;
    vj["avg_acc"] = v.avg_acc;
    if (v.ap75) vj["ap75"] = *v.ap75;
    j["views"].push_back(vj);
  }
  j["config"] = config_dump;
  return j.dump(2);
}

EvalReport evaluate_model(const GpnerfModel& model, const Dataset& data) {
  const RunConfig& cfg = model.cfg;
  EvalReport report;
  const int n_classes = model.head_classes();
  report.gt_class_pixels.assign(n_classes, 0);
  double ap_sum = 0;
  int ap_count = 0;
  for (int s = 0; s < (int)data.scenes.size(); ++s) {
    const SceneDataset& sd = data.scenes[s];
    const auto train_ids = train_view_ids(sd, cfg.holdout_views);
    std::vector<CameraModel> cams;
    for (const auto& v : sd.views) cams.push_back(v.camera);
    for (int t : test_view_ids(sd, cfg.holdout_views)) {
      const auto refs = select_reference_views(cams, train_ids, t, cfg.n_ref);
      const FullViewRender r =
          render_full_view(model, sd, refs, sd.views[t].camera);
      EvalReport::PerView pv;
      pv.scene = s;
      pv.view = t;
      pv.psnr = psnr(r.rgb, sd.views[t].rgb);
      pv.ssim = ssim(r.rgb, sd.views[t].rgb);
      const LabelArray& gt =
          cfg.instance_mode ? sd.views[t].instance : sd.views[t].semantic;
      const SegMetrics m = segmentation_metrics(r.labels, gt, n_classes);
      pv.miou = m.miou;
      pv.total_acc = m.total_acc;
      pv.avg_acc = m.avg_acc;
      if (cfg.instance_mode) {
        pv.ap75 = ap75(r.labels, gt);
        ap_sum += *pv.ap75;
        ++ap_count;
      }
      for (int64_t i = 0; i < gt.numel(); ++i) ++report.gt_class_pixels[gt[i]];
      report.views.push_back(pv);
    }
  }
  GPNERF_CHECK(!report.views.empty(), "no held-out views to evaluate");
  for (const auto& v : report.views) {
    report.psnr += v.psnr / report.views.size();
    report.ssim += v.ssim / report.views.size();
    report.miou += v.miou / report.views.size();
    report.total_acc += v.total_acc / report.views.size();
    report.avg_acc += v.avg_acc / report.views.size();
  }
  if (ap_count > 0) report.ap75 = ap_sum / ap_count;
  return report;
}

}  // namespace gpnerf
