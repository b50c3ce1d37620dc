#pragma once

#include <algorithm>
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
#include "fieldtrack/motion.hpp"

namespace fieldtrack {

/// One annotated training frame. `motion_to_next` maps this frame's image to
/// the next frame's image.
struct TrainingRecord {
  int frame_index = 0;
  Homography gt_homography;
  std::vector<KeypointObservation> gt_keypoints;
  std::vector<KeypointObservation> measured_keypoints;
  std::optional<AffineSimilarity> motion_to_next;
};

using TrainingSequence = std::vector<TrainingRecord>;

/// Running sum of outer products about zero. Partial moments from disjoint
/// record sets merge by addition.
template <int Dim>
struct SecondMoment {
  using Matrix = Eigen::Matrix<double, Dim, Dim>;
  using Vector = Eigen::Matrix<double, Dim, 1>;

  Matrix sum = Matrix::Zero();
  std::int64_t count = 0;

  void add(const Vector& e) {
    sum += e * e.transpose();
    ++count;
  }

  SecondMoment& merge(const SecondMoment& o) {
    sum += o.sum;
    count += o.count;
    return *this;
  }

  Matrix mean() const { return count > 0 ? Matrix(sum / static_cast<double>(count)) : Matrix(Matrix::Zero()); }
};

/// Clamps negative eigenvalues to zero. Inputs that are already PSD come
/// back unchanged apart from symmetrization.
template <typename Derived>
typename Derived::PlainObject repair_psd(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  const Plain sym = 0.5 * (m + m.transpose());
  const Eigen::SelfAdjointEigenSolver<Plain> eig(sym);
  if (eig.eigenvalues().minCoeff() >= 0.0) return sym;
  const auto clamped = eig.eigenvalues().cwiseMax(0.0);
  const Plain rebuilt = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (rebuilt + rebuilt.transpose());
}

struct PerKeypointCovariance {
  std::vector<Eigen::Matrix2d> cov;
  std::vector<std::int64_t> samples;
  std::vector<bool> pooled_fallback;
  Eigen::Matrix2d pooled = Eigen::Matrix2d::Zero();
};

struct CalibrationConfig {
  std::int64_t min_samples = 10;
  RansacConfig ransac;
};

namespace detail {

inline PerKeypointCovariance finalize_per_keypoint(const std::vector<SecondMoment<2>>& moments,
                                                   std::int64_t min_samples, const char* what) {
  SecondMoment<2> pooled;
  for (const auto& m : moments) pooled.merge(m);
  if (pooled.count < std::max<std::int64_t>(min_samples, 1)) {
    throw Error(ErrorCode::NoSamples, std::string("not enough samples for ") + what);
  }
  PerKeypointCovariance out;
  out.pooled = repair_psd(pooled.mean());
  for (const auto& m : moments) {
    const bool fallback = m.count < min_samples;
    out.cov.push_back(fallback ? out.pooled : repair_psd(m.mean()));
    out.samples.push_back(m.count);
    out.pooled_fallback.push_back(fallback);
  }
  return out;
}

/// Calls fn(prev, curr, motion) for each consecutive annotated pair inside a
/// sequence, ordered by frame index; pairs never span sequences.
template <typename Fn>
void for_each_transition(std::span<const TrainingSequence> sequences, Fn&& fn) {
  for (const auto& seq : sequences) {
    std::vector<const TrainingRecord*> sorted;
    for (const auto& r : seq) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const TrainingRecord* a, const TrainingRecord* b) { return a->frame_index < b->frame_index; });
    for (std::size_t k = 1; k < sorted.size(); ++k) {
      const auto* prev = sorted[k - 1];
      const auto* curr = sorted[k];
      if (curr->frame_index != prev->frame_index + 1 || !prev->motion_to_next) continue;
      fn(*prev, *curr, *prev->motion_to_next);
    }
  }
}

}  // namespace detail

/// Per-keypoint second moment of x_t - A_t x_{t-1} over ground-truth keypoints.
inline PerKeypointCovariance estimate_keypoint_process_cov(std::span<const TrainingSequence> sequences,
                                                           const FieldTemplate& tmpl, const CalibrationConfig& cfg = {}) {
  std::vector<SecondMoment<2>> moments(tmpl.size());
  detail::for_each_transition(sequences, [&](const TrainingRecord& prev, const TrainingRecord& curr,
                                             const AffineSimilarity& motion) {
    std::map<int, Point2> before;
    for (const auto& k : prev.gt_keypoints) before.emplace(k.id, k.position);
    for (const auto& k : curr.gt_keypoints) {
      const auto it = before.find(k.id);
      if (it == before.end()) continue;
      const Point2 e = k.position - motion.apply(it->second);
      moments[tmpl.index_of(k.id)].add(e.vec());
    }
  });
  return detail::finalize_per_keypoint(moments, cfg.min_samples, "keypoint process covariance");
}

/// Second moment of vec8(H_t - A_t H_{t-1}) with both homographies h33-normalized.
inline Mat8 estimate_homography_process_cov(std::span<const TrainingSequence> sequences,
                                            std::int64_t* samples = nullptr) {
  SecondMoment<8> moment;
  detail::for_each_transition(sequences, [&](const TrainingRecord& prev, const TrainingRecord& curr,
                                             const AffineSimilarity& motion) {
    const Eigen::Matrix3d predicted = motion.matrix() * prev.gt_homography.matrix();
    const Vec8 e = curr.gt_homography.params() - Homography::from_matrix(predicted, 0.0).params();
    moment.add(e);
  });
  if (samples) *samples = moment.count;
  if (moment.count == 0) throw Error(ErrorCode::NoSamples, "no consecutive annotated frames with motion");
  return repair_psd(moment.mean());
}

/// Per-keypoint second moment of measured minus ground-truth positions.
inline PerKeypointCovariance estimate_measurement_cov(std::span<const TrainingSequence> sequences,
                                                      const FieldTemplate& tmpl, const CalibrationConfig& cfg = {}) {
  std::vector<SecondMoment<2>> moments(tmpl.size());
  for (const auto& seq : sequences) {
    for (const auto& r : seq) {
      std::map<int, Point2> truth;
      for (const auto& k : r.gt_keypoints) truth.emplace(k.id, k.position);
      for (const auto& m : r.measured_keypoints) {
        const auto it = truth.find(m.id);
        if (it == truth.end()) continue;
        moments[tmpl.index_of(m.id)].add((m.position - it->second).vec());
      }
    }
  }
  return detail::finalize_per_keypoint(moments, cfg.min_samples, "measurement covariance");
}

/// Second moment of vec8(H_ransac - H_gt) over frames with at least 4
/// measurements; the covariance the homography filter starts from.
inline Mat8 estimate_init_homography_cov(std::span<const TrainingSequence> sequences, const FieldTemplate& tmpl,
                                         const RansacConfig& ransac, std::int64_t* samples = nullptr) {
  SecondMoment<8> moment;
  for (const auto& seq : sequences) {
    for (const auto& r : seq) {
      if (r.measured_keypoints.size() < 4) continue;
      std::vector<PointPair> pairs;
      for (const auto& m : r.measured_keypoints) pairs.push_back({tmpl.at(tmpl.index_of(m.id)).position, m.position});
      try {
        const auto fit = ransac_homography(pairs, ransac);
        moment.add(fit.homography.params() - r.gt_homography.params());
      } catch (const Error&) {
        continue;
      }
    }
  }
  if (samples) *samples = moment.count;
  if (moment.count == 0) throw Error(ErrorCode::NoSamples, "no frame produced a RANSAC homography");
  return repair_psd(moment.mean());
}

struct CovarianceBank {
  std::vector<int> keypoint_ids;  // template order
  std::vector<Eigen::Matrix2d> sigma_i;
  std::vector<Eigen::Matrix2d> sigma_m;
  Mat8 sigma_h = Mat8::Zero();
  Mat8 h0_cov = Mat8::Zero();
  std::vector<std::int64_t> samples_i;
  std::vector<std::int64_t> samples_m;
  std::vector<bool> fallback_i;
  std::vector<bool> fallback_m;
  std::int64_t samples_h = 0;
  std::int64_t samples_h0 = 0;

  /// Bank with the same matrices for every keypoint.
  static CovarianceBank uniform(const FieldTemplate& tmpl, const Eigen::Matrix2d& sigma_i, const Eigen::Matrix2d& sigma_m,
                                const Mat8& sigma_h, const Mat8& h0_cov) {
    CovarianceBank b;
    const auto n = tmpl.size();
    for (const auto& k : tmpl.keypoints()) b.keypoint_ids.push_back(k.id);
    b.sigma_i.assign(n, sigma_i);
    b.sigma_m.assign(n, sigma_m);
    b.sigma_h = sigma_h;
    b.h0_cov = h0_cov;
    b.samples_i.assign(n, 0);
    b.samples_m.assign(n, 0);
    b.fallback_i.assign(n, false);
    b.fallback_m.assign(n, false);
    return b;
  }
};

inline CovarianceBank calibrate(std::span<const TrainingSequence> sequences, const FieldTemplate& tmpl,
                                const CalibrationConfig& cfg = {}) {
  CovarianceBank bank;
  for (const auto& k : tmpl.keypoints()) bank.keypoint_ids.push_back(k.id);
  const auto proc = estimate_keypoint_process_cov(sequences, tmpl, cfg);
  const auto meas = estimate_measurement_cov(sequences, tmpl, cfg);
  bank.sigma_i = proc.cov;
  bank.samples_i = proc.samples;
  bank.fallback_i = proc.pooled_fallback;
  bank.sigma_m = meas.cov;
  bank.samples_m = meas.samples;
  bank.fallback_m = meas.pooled_fallback;
  bank.sigma_h = estimate_homography_process_cov(sequences, &bank.samples_h);
  bank.h0_cov = estimate_init_homography_cov(sequences, tmpl, cfg.ransac, &bank.samples_h0);
  return bank;
}

}  // namespace fieldtrack
