#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fieldtrack/error.hpp"
#include "fieldtrack/field_template.hpp"
#include "fieldtrack/geometry.hpp"
#include "fieldtrack/keypoint_filter.hpp"
#include "fieldtrack/motion.hpp"

namespace fieldtrack {

/// State [X^1 Y^1 ... X^N Y^N | h11 h21 h31 h12 h22 h32 h13 h23] with h33 = 1
/// implicit. The field block is in meters, the homography maps meters to
/// pixels.
struct HomographyFilterState {
  Eigen::VectorXd field_mean;
  Vec8 h_mean = Vec8::Zero();
  Eigen::MatrixXd cov;

  std::size_t keypoint_count() const { return static_cast<std::size_t>(field_mean.size() / 2); }
  Eigen::Index dim() const { return field_mean.size() + 8; }
  Eigen::Index h_offset() const { return field_mean.size(); }

  Point2 field_point(std::size_t i) const {
    return {field_mean(static_cast<Eigen::Index>(2 * i)), field_mean(static_cast<Eigen::Index>(2 * i + 1))};
  }

  Mat8 h_cov() const { return cov.bottomRightCorner<8, 8>(); }
};

struct HomographyNoise {
  std::vector<Eigen::Matrix2d> sigma_f;  // per keypoint, zero for a known template
  Mat8 sigma_h = Mat8::Zero();
  Mat8 h0_cov = Mat8::Identity();

  static HomographyNoise known_template(std::size_t n, const Mat8& sigma_h, const Mat8& h0_cov) {
    return {std::vector<Eigen::Matrix2d>(n, Eigen::Matrix2d::Zero()), sigma_h, h0_cov};
  }
};

struct UpdateOptions {
  /// Innovation covariances worse conditioned than this are rejected.
  double max_condition = 1e12;
  double eps_t = kDefaultEpsT;
};

inline Homography reconstruct_homography(const HomographyFilterState& state) {
  return Homography::from_params(state.h_mean);
}

/// Seeds the state from one frame: template coordinates, a RANSAC homography
/// fitted to the frame's observations, and block-diagonal covariance.
inline HomographyFilterState ekf_init(const MeasurementFrame& first_frame, const FieldTemplate& tmpl,
                                      const HomographyNoise& noise, const RansacConfig& ransac_cfg) {
  if (noise.sigma_f.size() != tmpl.size()) throw Error(ErrorCode::DimensionMismatch, "sigma_f count differs from template");
  if (first_frame.observations.size() < 4) throw Error(ErrorCode::InsufficientPoints, "initialization needs 4 observations");
  std::vector<PointPair> pairs;
  pairs.reserve(first_frame.observations.size());
  for (const auto& obs : first_frame.observations) pairs.push_back({tmpl.at(tmpl.index_of(obs.id)).position, obs.position});

  Homography H;
  try {
    H = ransac_homography(pairs, ransac_cfg).homography;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InsufficientPoints) throw;
    throw Error(ErrorCode::DegenerateConfiguration, e.what());
  }

  const auto n = static_cast<Eigen::Index>(tmpl.size());
  HomographyFilterState s;
  s.field_mean.resize(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) s.field_mean.segment<2>(2 * i) = tmpl.at(static_cast<std::size_t>(i)).position.vec();
  s.h_mean = H.params();
  s.cov = Eigen::MatrixXd::Zero(2 * n + 8, 2 * n + 8);
  for (Eigen::Index i = 0; i < n; ++i) s.cov.block<2, 2>(2 * i, 2 * i) = noise.sigma_f[static_cast<std::size_t>(i)];
  s.cov.bottomRightCorner<8, 8>() = noise.h0_cov;
  symmetrize(s.cov);
  return s;
}

/// 8x8 map realizing H <- A H on the column-stacked parameters. Columns 1 and
/// 2 of H transform by the full 3x3 A; column 3 has h33 fixed at 1, so only
/// the 2x2 rotation-scale block acts on (h13, h23) and the translation enters
/// as an offset (see predict_h_mean).
inline Mat8 homography_transition(const AffineSimilarity& motion) {
  Mat8 F = Mat8::Zero();
  const Eigen::Matrix3d A = motion.matrix();
  F.block<3, 3>(0, 0) = A;
  F.block<3, 3>(3, 3) = A;
  F.block<2, 2>(6, 6) = motion.linear();
  return F;
}

inline Vec8 predict_h_mean(const Vec8& h, const AffineSimilarity& m) {
  Vec8 out;
  // Column j of A H; the third row of A is (0, 0, 1) so h3j carries over.
  for (int c = 0; c < 2; ++c) {
    const double h1 = h(3 * c), h2 = h(3 * c + 1), h3 = h(3 * c + 2);
    out(3 * c) = m.a * h1 - m.b * h2 + m.tx * h3;
    out(3 * c + 1) = m.b * h1 + m.a * h2 + m.ty * h3;
    out(3 * c + 2) = h3;
  }
  out(6) = m.a * h(6) - m.b * h(7) + m.tx;
  out(7) = m.b * h(6) + m.a * h(7) + m.ty;
  return out;
}

inline HomographyFilterState ekf_predict(const HomographyFilterState& state, const AffineSimilarity& motion,
                                         const HomographyNoise& noise) {
  const auto n2 = state.field_mean.size();
  if (state.cov.rows() != n2 + 8 || state.cov.cols() != n2 + 8 ||
      noise.sigma_f.size() != static_cast<std::size_t>(n2 / 2)) {
    throw Error(ErrorCode::DimensionMismatch, "homography filter state and noise dimensions disagree");
  }
  HomographyFilterState out = state;
  out.h_mean = predict_h_mean(state.h_mean, motion);

  const Mat8 F = homography_transition(motion);
  out.cov.bottomRightCorner<8, 8>() = F * state.cov.bottomRightCorner<8, 8>() * F.transpose();
  out.cov.topRightCorner(n2, 8) = state.cov.topRightCorner(n2, 8) * F.transpose();
  out.cov.bottomLeftCorner(8, n2) = F * state.cov.bottomLeftCorner(8, n2);
  for (Eigen::Index i = 0; i < n2 / 2; ++i) out.cov.block<2, 2>(2 * i, 2 * i) += noise.sigma_f[static_cast<std::size_t>(i)];
  out.cov.bottomRightCorner<8, 8>() += noise.sigma_h;
  symmetrize(out.cov);
  return out;
}

/// Projected image points h(x) for the active keypoints, stacked (u, v).
inline Eigen::VectorXd predict_measurements(const HomographyFilterState& state, std::span<const std::size_t> active,
                                            double eps_t = kDefaultEpsT) {
  const Vec8& h = state.h_mean;
  Eigen::VectorXd z(static_cast<Eigen::Index>(2 * active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) {
    const Point2 X = state.field_point(active[k]);
    const double D = h(2) * X.x + h(5) * X.y + 1.0;
    if (!(std::abs(D) > eps_t)) throw Error(ErrorCode::NumericalDegeneracy, "keypoint projects to infinity");
    z(static_cast<Eigen::Index>(2 * k)) = (h(0) * X.x + h(3) * X.y + h(6)) / D;
    z(static_cast<Eigen::Index>(2 * k + 1)) = (h(1) * X.x + h(4) * X.y + h(7)) / D;
  }
  return z;
}

/// Jacobian of h(x) over the full state for the active keypoints
/// (`active` holds template-order keypoint indices). Each row pair is nonzero
/// only in its own field block and the 8 homography columns.
inline Eigen::MatrixXd measurement_jacobian(const HomographyFilterState& state, std::span<const std::size_t> active,
                                            double eps_t = kDefaultEpsT) {
  const Vec8& h = state.h_mean;
  const Eigen::Index off = state.h_offset();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * active.size()), state.dim());
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (active[k] >= state.keypoint_count()) throw Error(ErrorCode::UnknownKeypointId, "keypoint index out of range");
    const Point2 X = state.field_point(active[k]);
    const double D = h(2) * X.x + h(5) * X.y + 1.0;
    if (!(std::abs(D) > eps_t)) throw Error(ErrorCode::NumericalDegeneracy, "keypoint projects to infinity");
    const double u = (h(0) * X.x + h(3) * X.y + h(6)) / D;
    const double v = (h(1) * X.x + h(4) * X.y + h(7)) / D;
    const auto ru = static_cast<Eigen::Index>(2 * k), rv = ru + 1;
    const auto fc = static_cast<Eigen::Index>(2 * active[k]);

    J(ru, fc) = (h(0) - u * h(2)) / D;
    J(ru, fc + 1) = (h(3) - u * h(5)) / D;
    J(rv, fc) = (h(1) - v * h(2)) / D;
    J(rv, fc + 1) = (h(4) - v * h(5)) / D;

    J(ru, off + 0) = X.x / D;
    J(ru, off + 2) = -u * X.x / D;
    J(ru, off + 3) = X.y / D;
    J(ru, off + 5) = -u * X.y / D;
    J(ru, off + 6) = 1.0 / D;

    J(rv, off + 1) = X.x / D;
    J(rv, off + 2) = -v * X.x / D;
    J(rv, off + 4) = X.y / D;
    J(rv, off + 5) = -v * X.y / D;
    J(rv, off + 7) = 1.0 / D;
  }
  return J;
}

/// EKF update whose measurement is the stage-1 posterior: the filtered image
/// keypoints of `active` with their posterior covariance as measurement noise.
/// When `condition` is given it receives the innovation condition number.
inline HomographyFilterState ekf_update(const HomographyFilterState& state, const KeypointFilterState& kp_state,
                                        std::span<const std::size_t> active, const UpdateOptions& opts = {},
                                        double* condition = nullptr) {
  if (active.empty()) return state;
  if (kp_state.keypoint_count() != state.keypoint_count())
    throw Error(ErrorCode::DimensionMismatch, "keypoint and homography filters disagree on keypoint count");

  std::vector<Eigen::Index> idx;
  idx.reserve(2 * active.size());
  for (const auto i : active) {
    idx.push_back(static_cast<Eigen::Index>(2 * i));
    idx.push_back(static_cast<Eigen::Index>(2 * i + 1));
  }
  const Eigen::MatrixXd J = measurement_jacobian(state, active, opts.eps_t);
  const Eigen::VectorXd innovation = kp_state.mean(idx) - predict_measurements(state, active, opts.eps_t);
  Eigen::MatrixXd R = kp_state.cov(idx, idx);
  symmetrize(R);

  // A PSD covariance with a zero diagonal entry has that whole row and column
  // zero; such states (e.g. a known template) cannot move, so the update runs
  // on the remaining indices only.
  std::vector<Eigen::Index> live;
  for (Eigen::Index i = 0; i < state.dim(); ++i)
    if (state.cov(i, i) != 0.0) live.push_back(i);
  const Eigen::MatrixXd Jl = J(Eigen::all, live);
  const Eigen::MatrixXd P = state.cov(live, live);
  const Eigen::MatrixXd JP = Jl * P;
  Eigen::MatrixXd S = JP * Jl.transpose() + R;
  symmetrize(S);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (condition) *condition = cond;
  if (!(cond <= opts.max_condition)) {
    throw Error(ErrorCode::SingularInnovation, "innovation covariance ill-conditioned (condition " +
                                                   std::to_string(cond) + ")");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularInnovation, "innovation covariance not positive definite");
  const Eigen::MatrixXd K = llt.solve(JP).transpose();

  Eigen::VectorXd x(state.dim());
  x << state.field_mean, state.h_mean;
  x(live) += K * innovation;
  HomographyFilterState out;
  out.field_mean = x.head(state.field_mean.size());
  out.h_mean = x.tail<8>();

  const Eigen::MatrixXd M = P - K * JP;
  Eigen::MatrixXd updated = M - (M * Jl.transpose()) * K.transpose() + K * R * K.transpose();
  symmetrize(updated);
  out.cov = state.cov;
  out.cov(live, live) = updated;
  return out;
}

}  // namespace fieldtrack
