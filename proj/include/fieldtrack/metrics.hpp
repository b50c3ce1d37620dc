#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fieldtrack/error.hpp"
#include "fieldtrack/field_template.hpp"
#include "fieldtrack/geometry.hpp"
#include "fieldtrack/rng.hpp"

namespace fieldtrack {

// Conventions: a homography maps template meters to image pixels.
// Re-projection is template -> image (H), projection is image -> template (H^-1).

namespace detail {

inline ConvexPolygon map_or_degenerate(const Eigen::Matrix3d& G, const ConvexPolygon& poly, const char* what) {
  auto mapped = map_polygon(G, poly);
  if (!mapped) throw Error(ErrorCode::DegenerateProjection, what);
  return *mapped;
}

inline double iou(const ConvexPolygon& a, const ConvexPolygon& b) {
  const auto inter = clip_polygon(a, b);
  const double ia = inter ? polygon_area(*inter) : 0.0;
  const double uni = polygon_area(a) + polygon_area(b) - ia;
  return std::clamp(ia / uni, 0.0, 1.0);
}

}  // namespace detail

/// Field rectangle re-projected by the ground truth, projected back by the
/// prediction, compared with the field rectangle.
inline double iou_entire(const Homography& H_gt, const Homography& H_pred, const FieldTemplate& tmpl) {
  const Eigen::Matrix3d G = oriented_matrix(H_gt, tmpl);
  const Eigen::Matrix3d P = oriented_matrix(H_pred, tmpl);
  const ConvexPolygon field = tmpl.field_polygon();
  const auto in_image = detail::map_or_degenerate(G, field, "field crosses the horizon under ground truth");
  const auto back = detail::map_or_degenerate(P.inverse(), in_image, "field crosses the horizon under prediction");
  return detail::iou(back, field);
}

/// Image-mask variant: image rectangle projected by the ground truth,
/// re-projected by the prediction, compared with the image rectangle.
inline double iou_entire_kpsfr(const Homography& H_gt, const Homography& H_pred, const FieldTemplate& tmpl,
                               const ImageDims& dims) {
  const Eigen::Matrix3d G = oriented_matrix(H_gt, tmpl);
  const Eigen::Matrix3d P = oriented_matrix(H_pred, tmpl);
  const ConvexPolygon image = dims.polygon();
  const auto on_field = detail::map_or_degenerate(G.inverse(), image, "image crosses the horizon under ground truth");
  const auto back = detail::map_or_degenerate(P, on_field, "projected image crosses the horizon under prediction");
  return detail::iou(back, image);
}

/// Image rectangle projected onto the template by both homographies.
inline double iou_part(const Homography& H_gt, const Homography& H_pred, const FieldTemplate& tmpl,
                       const ImageDims& dims) {
  const Eigen::Matrix3d G = oriented_matrix(H_gt, tmpl);
  const Eigen::Matrix3d P = oriented_matrix(H_pred, tmpl);
  const ConvexPolygon image = dims.polygon();
  const auto gt = detail::map_or_degenerate(G.inverse(), image, "image crosses the horizon under ground truth");
  const auto pred = detail::map_or_degenerate(P.inverse(), image, "image crosses the horizon under prediction");
  return detail::iou(gt, pred);
}

/// Part of the image where the field is visible under the ground truth.
inline std::optional<ConvexPolygon> visible_field_region(const Homography& H_gt, const FieldTemplate& tmpl,
                                                         const ImageDims& dims) {
  const auto in_image = detail::map_or_degenerate(oriented_matrix(H_gt, tmpl), tmpl.field_polygon(),
                                                  "field crosses the horizon under ground truth");
  return clip_polygon(in_image, dims.polygon());
}

/// Mean template-space distance (meters) between ground-truth and predicted
/// projections of points drawn uniformly over the visible field region.
inline double projection_error(const Homography& H_gt, const Homography& H_pred, const FieldTemplate& tmpl,
                               const ImageDims& dims, int n_samples = 2500, std::uint64_t seed = 0) {
  const auto region = visible_field_region(H_gt, tmpl, dims);
  if (!region) throw Error(ErrorCode::EmptyVisibleRegion, "field not visible under ground truth");
  const Eigen::Matrix3d Gi = H_gt.matrix().inverse();
  const Eigen::Matrix3d Pi = H_pred.matrix().inverse();
  const auto [x0, y0, x1, y1] = region->bounds();

  CounterRng rng(seed, 0x9fb21c651e98df25ULL);
  const std::int64_t cap = 100LL * n_samples;
  double total = 0.0;
  int accepted = 0;
  for (std::int64_t tries = 0; tries < cap && accepted < n_samples; ++tries) {
    const Point2 p{rng.uniform(x0, x1), rng.uniform(y0, y1)};
    if (!region->contains(p)) continue;
    const Eigen::Vector3d a = Gi * Eigen::Vector3d(p.x, p.y, 1.0);
    const Eigen::Vector3d b = Pi * Eigen::Vector3d(p.x, p.y, 1.0);
    if (!(std::abs(a.z()) > kDefaultEpsT) || !(std::abs(b.z()) > kDefaultEpsT)) {
      throw Error(ErrorCode::DegenerateProjection, "sampled point projects to infinity");
    }
    total += std::hypot(a.x() / a.z() - b.x() / b.z(), a.y() / a.z() - b.y() / b.z());
    ++accepted;
  }
  if (accepted == 0) throw Error(ErrorCode::EmptyVisibleRegion, "rejection sampling found no visible points");
  return total / accepted;
}

/// Mean pixel distance between template keypoints re-projected by the ground
/// truth and by the prediction, as a fraction of image height.
inline double reprojection_error(const Homography& H_gt, const Homography& H_pred, const FieldTemplate& tmpl,
                                 const ImageDims& dims) {
  double total = 0.0;
  for (const auto& k : tmpl.keypoints()) {
    try {
      total += distance(apply_homography(H_gt, k.position), apply_homography(H_pred, k.position));
    } catch (const Error&) {
      throw Error(ErrorCode::DegenerateProjection, "keypoint re-projects to infinity");
    }
  }
  return total / static_cast<double>(tmpl.size()) / dims.height_px;
}

enum class Axis { X, Y };

/// sqrt(sum (x - x_hat)^2) / (Z sqrt(L)) over id-matched pairs; Z is the
/// image width for X and height for Y.
inline double nrmse(std::span<const KeypointObservation> estimates, std::span<const KeypointObservation> ground_truth,
                    const ImageDims& dims, Axis axis) {
  std::map<int, Point2> truth;
  for (const auto& g : ground_truth) truth.emplace(g.id, g.position);
  double sum = 0.0;
  int matched = 0;
  for (const auto& e : estimates) {
    const auto it = truth.find(e.id);
    if (it == truth.end()) continue;
    const double d = axis == Axis::X ? e.position.x - it->second.x : e.position.y - it->second.y;
    sum += d * d;
    ++matched;
  }
  if (matched == 0) throw Error(ErrorCode::NoMatchedKeypoints, "no estimate shares an id with the ground truth");
  const double Z = axis == Axis::X ? dims.width_px : dims.height_px;
  return std::sqrt(sum) / (Z * std::sqrt(static_cast<double>(matched)));
}

/// Thresholds are in pixels of a 1280x720 frame; distances in other
/// resolutions are rescaled by 720 / height before comparison.
inline constexpr double kReferenceHeightPx = 720.0;
inline constexpr std::array<double, 4> kApThresholdsPx{5.0, 10.0, 15.0, 20.0};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  int true_positives = 0;
  bool precision_undefined = false;  // no detections
  bool recall_undefined = false;     // no ground truth
};

inline PrecisionRecall precision_recall(std::span<const KeypointObservation> detections,
                                        std::span<const KeypointObservation> ground_truth, const ImageDims& dims,
                                        double threshold_px) {
  std::map<int, Point2> truth;
  for (const auto& g : ground_truth) truth.emplace(g.id, g.position);
  const double to_reference = kReferenceHeightPx / dims.height_px;
  PrecisionRecall pr;
  for (const auto& d : detections) {
    const auto it = truth.find(d.id);
    if (it != truth.end() && distance(d.position, it->second) * to_reference < threshold_px) ++pr.true_positives;
  }
  pr.precision_undefined = detections.empty();
  pr.recall_undefined = truth.empty();
  pr.precision = pr.precision_undefined ? 0.0 : static_cast<double>(pr.true_positives) / static_cast<double>(detections.size());
  pr.recall = pr.recall_undefined ? 0.0 : static_cast<double>(pr.true_positives) / static_cast<double>(truth.size());
  return pr;
}

/// AP = sum_n (R_n - R_{n-1}) P_n over the 5/10/15/20 px thresholds, R_0 = 0.
inline double average_precision(std::span<const KeypointObservation> detections,
                                std::span<const KeypointObservation> ground_truth, const ImageDims& dims) {
  double ap = 0.0, prev_recall = 0.0;
  for (const double thr : kApThresholdsPx) {
    const auto pr = precision_recall(detections, ground_truth, dims, thr);
    ap += (pr.recall - prev_recall) * pr.precision;
    prev_recall = pr.recall;
  }
  return ap;
}

/// Mean AP over a set of frames, each given as (detections, ground truth).
inline double mean_average_precision(
    std::span<const std::pair<std::vector<KeypointObservation>, std::vector<KeypointObservation>>> frames,
    const ImageDims& dims) {
  if (frames.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [det, gt] : frames) total += average_precision(det, gt, dims);
  return total / static_cast<double>(frames.size());
}

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  std::int64_t count = 0;
};

inline Summary summarize(std::vector<double> values) {
  Summary s;
  s.count = static_cast<std::int64_t>(values.size());
  if (values.empty()) return s;
  double total = 0.0;
  for (const double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

}  // namespace fieldtrack
