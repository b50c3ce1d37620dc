#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fieldtrack/error.hpp"
#include "fieldtrack/field_template.hpp"
#include "fieldtrack/geometry.hpp"
#include "fieldtrack/motion.hpp"

namespace fieldtrack {

inline void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

/// Block-diagonal assembly of per-keypoint 2x2 matrices.
inline Eigen::MatrixXd block_diagonal(std::span<const Eigen::Matrix2d> blocks) {
  const auto n = static_cast<Eigen::Index>(blocks.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) m.block<2, 2>(2 * i, 2 * i) = blocks[static_cast<std::size_t>(i)];
  return m;
}

/// Process covariance Q^I (2N x 2N) and per-keypoint measurement covariances.
struct KeypointNoise {
  Eigen::MatrixXd process;
  std::vector<Eigen::Matrix2d> measurement;

  static KeypointNoise from_blocks(std::span<const Eigen::Matrix2d> process_blocks,
                                   std::vector<Eigen::Matrix2d> measurement_blocks) {
    if (process_blocks.size() != measurement_blocks.size())
      throw Error(ErrorCode::DimensionMismatch, "process and measurement block counts differ");
    return {block_diagonal(process_blocks), std::move(measurement_blocks)};
  }

  static KeypointNoise uniform(std::size_t n, const Eigen::Matrix2d& process, const Eigen::Matrix2d& measurement) {
    return from_blocks(std::vector<Eigen::Matrix2d>(n, process), std::vector<Eigen::Matrix2d>(n, measurement));
  }

  std::size_t keypoint_count() const { return measurement.size(); }
};

struct KeypointFilterState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<bool> initialized;
  std::vector<bool> measured_ever;
  std::vector<bool> measured_now;

  static KeypointFilterState empty(std::size_t n) {
    const auto d = static_cast<Eigen::Index>(2 * n);
    return {Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d), std::vector<bool>(n, false),
            std::vector<bool>(n, false), std::vector<bool>(n, false)};
  }

  std::size_t keypoint_count() const { return initialized.size(); }

  Point2 position(std::size_t i) const {
    return {mean(static_cast<Eigen::Index>(2 * i)), mean(static_cast<Eigen::Index>(2 * i + 1))};
  }

  Eigen::Matrix2d block(std::size_t i) const {
    return cov.block<2, 2>(static_cast<Eigen::Index>(2 * i), static_cast<Eigen::Index>(2 * i));
  }
};

namespace detail {

inline void check_dims(const KeypointFilterState& s, const KeypointNoise& noise) {
  const auto d = static_cast<Eigen::Index>(2 * s.keypoint_count());
  if (s.mean.size() != d || s.cov.rows() != d || s.cov.cols() != d || noise.process.rows() != d ||
      noise.process.cols() != d || noise.measurement.size() != s.keypoint_count() ||
      s.measured_ever.size() != s.keypoint_count() || s.measured_now.size() != s.keypoint_count()) {
    throw Error(ErrorCode::DimensionMismatch, "keypoint filter state and noise dimensions disagree");
  }
}

/// Sets keypoint i to a fresh estimate with no cross-covariance.
inline void seed_keypoint(KeypointFilterState& s, std::size_t i, Point2 position, const Eigen::Matrix2d& block) {
  const auto r = static_cast<Eigen::Index>(2 * i);
  s.mean.segment<2>(r) = position.vec();
  s.cov.middleRows(r, 2).setZero();
  s.cov.middleCols(r, 2).setZero();
  s.cov.block<2, 2>(r, r) = block;
  s.initialized[i] = true;
}

}  // namespace detail

/// Initializes every keypoint through a homography, used when all keypoints
/// should enter the filter at once. Keypoints in `measured` take the
/// observation and its covariance; the rest take H X with the initial
/// homography uncertainty pushed through the projection Jacobian.
inline KeypointFilterState lkf_init_from_homography(const FieldTemplate& tmpl, const Homography& H,
                                                    const Mat8& h_cov, const MeasurementFrame& measured,
                                                    const KeypointNoise& noise) {
  auto s = KeypointFilterState::empty(tmpl.size());
  detail::check_dims(s, noise);
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    const Point2 X = tmpl.at(i).position;
    const auto hp = H.map_homogeneous(X);
    if (!(std::abs(hp.t) > kDefaultEpsT)) continue;
    const double D = hp.t, u = hp.x / D, v = hp.y / D;
    Eigen::Matrix<double, 2, 8> J;
    J << X.x / D, 0.0, -u * X.x / D, X.y / D, 0.0, -u * X.y / D, 1.0 / D, 0.0,
         0.0, X.x / D, -v * X.x / D, 0.0, X.y / D, -v * X.y / D, 0.0, 1.0 / D;
    detail::seed_keypoint(s, i, {u, v}, J * h_cov * J.transpose() + noise.measurement[i]);
  }
  for (const auto& obs : measured.observations) {
    const auto i = tmpl.index_of(obs.id);
    detail::seed_keypoint(s, i, obs.position, noise.measurement[i]);
    s.measured_ever[i] = true;
    s.measured_now[i] = true;
  }
  symmetrize(s.cov);
  return s;
}

/// x <- A~ x + B~, P <- A~ P A~^T + Q with A~ = I_N (x) A^u and B~ the
/// translation stacked per keypoint.
inline KeypointFilterState lkf_predict(const KeypointFilterState& state, const AffineSimilarity& motion,
                                       const KeypointNoise& noise) {
  detail::check_dims(state, noise);
  KeypointFilterState out = state;
  const Eigen::Matrix2d A = motion.linear();
  const Eigen::Vector2d b = motion.offset();
  const auto n = static_cast<Eigen::Index>(state.keypoint_count());
  for (Eigen::Index i = 0; i < n; ++i) out.mean.segment<2>(2 * i) = A * state.mean.segment<2>(2 * i) + b;

  Eigen::MatrixXd rows(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) rows.middleRows(2 * i, 2) = A * state.cov.middleRows(2 * i, 2);
  for (Eigen::Index j = 0; j < n; ++j) out.cov.middleCols(2 * j, 2) = rows.middleCols(2 * j, 2) * A.transpose();
  out.cov += noise.process;
  symmetrize(out.cov);
  return out;
}

/// Kalman update restricted to the observed keypoints. Keypoints observed for
/// the first time are seeded from the observation instead of updated.
inline KeypointFilterState lkf_update(const KeypointFilterState& state, const MeasurementFrame& frame,
                                      const FieldTemplate& tmpl, const KeypointNoise& noise) {
  detail::check_dims(state, noise);
  if (tmpl.size() != state.keypoint_count()) throw Error(ErrorCode::DimensionMismatch, "template size differs from state");

  KeypointFilterState out = state;
  std::fill(out.measured_now.begin(), out.measured_now.end(), false);

  std::vector<std::size_t> update_kps;
  std::vector<Point2> update_obs;
  std::vector<std::pair<std::size_t, Point2>> fresh;
  std::vector<bool> seen(state.keypoint_count(), false);
  for (const auto& obs : frame.observations) {
    const auto i = tmpl.index_of(obs.id);
    if (seen[i]) throw Error(ErrorCode::InvalidArgument, "keypoint id " + std::to_string(obs.id) + " observed twice");
    if (!std::isfinite(obs.position.x) || !std::isfinite(obs.position.y))
      throw Error(ErrorCode::InvalidArgument, "non-finite observation");
    seen[i] = true;
    if (state.initialized[i]) {
      update_kps.push_back(i);
      update_obs.push_back(obs.position);
    } else {
      fresh.emplace_back(i, obs.position);
    }
  }

  if (!update_kps.empty()) {
    const auto m = static_cast<Eigen::Index>(2 * update_kps.size());
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(m));
    Eigen::VectorXd z(m);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = 0; k < update_kps.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(update_kps[k]);
      const auto r = static_cast<Eigen::Index>(2 * k);
      idx.push_back(2 * i);
      idx.push_back(2 * i + 1);
      z.segment<2>(r) = update_obs[k].vec();
      R.block<2, 2>(r, r) = noise.measurement[update_kps[k]];
    }
    // Only states correlated with the measured ones get a nonzero gain, and
    // the Joseph update leaves every other row and column as it was.
    std::vector<bool> in_idx(static_cast<std::size_t>(state.cov.rows()), false);
    for (const auto i : idx) in_idx[static_cast<std::size_t>(i)] = true;
    std::vector<Eigen::Index> coupled;
    for (Eigen::Index r = 0; r < state.cov.rows(); ++r) {
      bool linked = in_idx[static_cast<std::size_t>(r)];
      for (std::size_t k = 0; !linked && k < idx.size(); ++k) linked = state.cov(r, idx[k]) != 0.0;
      if (linked) coupled.push_back(r);
    }
    std::vector<Eigen::Index> sel;  // positions of idx inside `coupled`
    for (const auto i : idx)
      sel.push_back(std::lower_bound(coupled.begin(), coupled.end(), i) - coupled.begin());

    const Eigen::MatrixXd P = state.cov(coupled, coupled);
    const Eigen::MatrixXd PHt = P(Eigen::all, sel);
    Eigen::MatrixXd S = P(sel, sel) + R;
    symmetrize(S);
    const Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularInnovation, "keypoint innovation not positive definite");
    const Eigen::MatrixXd K = llt.solve(PHt.transpose()).transpose();
    const Eigen::VectorXd innovation = z - state.mean(idx);
    out.mean(coupled) += K * innovation;

    // Joseph form: (I - KH) P (I - KH)^T + K R K^T with H a 0/I selection.
    const Eigen::MatrixXd M = P - K * PHt.transpose();
    Eigen::MatrixXd updated = M - M(Eigen::all, sel) * K.transpose() + K * R * K.transpose();
    symmetrize(updated);
    out.cov(coupled, coupled) = updated;
  }

  for (const auto& [i, p] : fresh) detail::seed_keypoint(out, i, p, noise.measurement[i]);
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i]) {
      out.measured_now[i] = true;
      out.measured_ever[i] = true;
    }
  }
  return out;
}

}  // namespace fieldtrack
