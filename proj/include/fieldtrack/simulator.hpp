#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fieldtrack/error.hpp"
#include "fieldtrack/field_template.hpp"
#include "fieldtrack/geometry.hpp"
#include "fieldtrack/motion.hpp"
#include "fieldtrack/rng.hpp"

namespace fieldtrack {

/// Pinhole camera looking at the field plane, used only to produce plausible
/// broadcast-style ground-truth homographies.
struct BroadcastCamera {
  Eigen::Vector3d position{52.5, -40.0, 22.0};  // meters, z up
  Eigen::Vector3d look_at{40.0, 34.0, 0.0};
  double focal_px = 1500.0;
};

inline Homography broadcast_homography(const BroadcastCamera& cam, const ImageDims& dims) {
  const Eigen::Vector3d forward = (cam.look_at - cam.position).normalized();
  const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d R;
  R.row(0) = right;
  R.row(1) = down;
  R.row(2) = forward;
  const Eigen::Vector3d t = -R * cam.position;
  Eigen::Matrix3d K;
  K << cam.focal_px, 0.0, 0.5 * dims.width_px,
       0.0, cam.focal_px, 0.5 * dims.height_px,
       0.0, 0.0, 1.0;
  Eigen::Matrix3d plane;
  plane << R.col(0), R.col(1), t;
  return Homography::from_matrix(K * plane);
}

/// Smooth pan/tilt/zoom about the image center. Every term is a sinusoid in
/// the frame index, so accumulated motion stays bounded.
struct PanPath {
  double pan_px = 3.0;      // horizontal translation amplitude per frame
  double tilt_px = 1.0;     // vertical translation amplitude per frame
  double rotation_rad = 4e-4;
  double zoom = 1.5e-3;     // per-frame log-scale amplitude
  double period_frames = 120.0;
  double phase = 0.0;

  AffineSimilarity at(int frame, const ImageDims& dims) const {
    const double w = 2.0 * std::numbers::pi * frame / period_frames + phase;
    const Point2 center{0.5 * dims.width_px, 0.5 * dims.height_px};
    return AffineSimilarity::about(center, rotation_rad * std::sin(0.9 * w), std::exp(zoom * std::sin(0.6 * w)),
                                   pan_px * std::cos(w), tilt_px * std::sin(1.3 * w));
  }
};

struct SimNoise {
  Mat8 sigma_h = Mat8::Zero();                       // homography process noise W^H
  Eigen::Matrix2d sigma_m = Eigen::Matrix2d::Zero();  // measurement noise, all keypoints
  std::vector<Eigen::Matrix2d> sigma_m_per_keypoint;  // overrides sigma_m when non-empty
  Eigen::Matrix2d sigma_f = Eigen::Matrix2d::Zero();  // field keypoint random walk
};

struct SimConfig {
  FieldTemplate tmpl = FieldTemplate::uniform_grid(13, 7);
  ImageDims dims;
  int n_frames = 100;
  Homography initial_homography = broadcast_homography(BroadcastCamera{}, ImageDims{});
  std::vector<AffineSimilarity> motion_script;  // motion into frame t is motion_script[t - 1]
  PanPath pan;                                  // used when motion_script is empty
  SimNoise noise;
  double dropout_rate = 0.0;
  int n_correspondences = 0;  // background feature tracks per frame
  double correspondence_outlier_rate = 0.0;
  double correspondence_noise_px = 0.0;
  std::uint64_t seed = 0;
  std::string sequence_id = "sim";
};

struct SimFrame {
  int frame_index = 0;
  Homography gt_homography;
  std::vector<KeypointObservation> gt_keypoints;
  MeasurementFrame measurements;
  AffineSimilarity gt_motion;  // previous frame to this frame; identity at frame 0
  std::vector<Correspondence> correspondences;
};

/// Template keypoints whose image lies in [0, w) x [0, h) in front of the camera.
inline std::vector<KeypointObservation> visible_keypoints(const Homography& H, const FieldTemplate& tmpl,
                                                          const ImageDims& dims) {
  const Eigen::Matrix3d M = oriented_matrix(H, tmpl);
  std::vector<KeypointObservation> out;
  for (const auto& k : tmpl.keypoints()) {
    const Eigen::Vector3d p = M * Eigen::Vector3d(k.position.x, k.position.y, 1.0);
    if (!(p.z() > kDefaultEpsT)) continue;
    const Point2 q{p.x() / p.z(), p.y() / p.z()};
    if (q.x >= 0.0 && q.x < dims.width_px && q.y >= 0.0 && q.y < dims.height_px) out.push_back({k.id, q});
  }
  return out;
}

namespace detail {

/// Symmetric square root S with S S^T = C; semidefinite inputs are fine.
template <int Dim>
Eigen::Matrix<double, Dim, Dim> covariance_sqrt(const Eigen::Matrix<double, Dim, Dim>& c) {
  using M = Eigen::Matrix<double, Dim, Dim>;
  const Eigen::SelfAdjointEigenSolver<M> eig(0.5 * (c + c.transpose()));
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

template <int Dim>
Eigen::Matrix<double, Dim, 1> draw_gaussian(CounterRng& rng, const Eigen::Matrix<double, Dim, Dim>& sqrt_cov) {
  Eigen::Matrix<double, Dim, 1> z;
  for (int i = 0; i < Dim; ++i) z(i) = rng.normal();
  return sqrt_cov * z;
}

}  // namespace detail

inline AffineSimilarity scripted_motion(const SimConfig& cfg, int frame) {
  if (frame == 0) return AffineSimilarity::identity();
  if (!cfg.motion_script.empty()) return cfg.motion_script[static_cast<std::size_t>(frame - 1) % cfg.motion_script.size()];
  return cfg.pan.at(frame, cfg.dims);
}

/// Samples a sequence from the generative model:
///   H_t = A_t H_{t-1} + W^H,   y_t = norm(H_t X) + w^M,
/// with optional field-point random walk, i.i.d. dropout, and background
/// correspondences for motion estimation.
inline std::vector<SimFrame> generate_sequence(const SimConfig& cfg) {
  if (cfg.n_frames < 1) throw Error(ErrorCode::InvalidArgument, "n_frames must be at least 1");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate <= 1.0) ||
      !(cfg.correspondence_outlier_rate >= 0.0 && cfg.correspondence_outlier_rate <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "probabilities must lie in [0, 1]");
  }
  const auto& tmpl = cfg.tmpl;
  const std::size_t n = tmpl.size();
  std::vector<Eigen::Matrix2d> sigma_m = cfg.noise.sigma_m_per_keypoint;
  if (sigma_m.empty()) sigma_m.assign(n, cfg.noise.sigma_m);
  if (sigma_m.size() != n) throw Error(ErrorCode::DimensionMismatch, "per-keypoint measurement noise count");

  std::vector<Eigen::Matrix2d> sqrt_m;
  for (const auto& s : sigma_m) sqrt_m.push_back(detail::covariance_sqrt<2>(s));
  const Mat8 sqrt_h = detail::covariance_sqrt<8>(cfg.noise.sigma_h);
  const Eigen::Matrix2d sqrt_f = detail::covariance_sqrt<2>(cfg.noise.sigma_f);
  const bool h_noise = !cfg.noise.sigma_h.isZero(0.0);
  const bool f_noise = !cfg.noise.sigma_f.isZero(0.0);

  CounterRng process_rng(cfg.seed, 1), meas_rng(cfg.seed, 2), dropout_rng(cfg.seed, 3), corr_rng(cfg.seed, 4),
      field_rng(cfg.seed, 5);

  std::vector<Point2> field(n);
  for (std::size_t i = 0; i < n; ++i) field[i] = tmpl.at(i).position;

  std::vector<SimFrame> frames;
  frames.reserve(static_cast<std::size_t>(cfg.n_frames));
  Homography H = cfg.initial_homography;
  for (int t = 0; t < cfg.n_frames; ++t) {
    SimFrame f;
    f.frame_index = t;
    f.gt_motion = scripted_motion(cfg, t);
    if (t > 0) {
      // A's last row is (0, 0, 1), so A H keeps h33 = 1 and W^H acts on the 8 free entries.
      Eigen::Matrix3d next = f.gt_motion.matrix() * H.matrix();
      next(2, 2) = 1.0;
      Vec8 p = Homography::from_matrix(next, 0.0).params();
      if (h_noise) p += detail::draw_gaussian<8>(process_rng, sqrt_h);
      try {
        H = Homography::from_params(p);
      } catch (const Error& e) {
        throw Error(ErrorCode::DegenerateHomography, "frame " + std::to_string(t) + ": " + e.what());
      }
      if (f_noise)
        for (auto& X : field) X = X + Point2::from(detail::draw_gaussian<2>(field_rng, sqrt_f));
    }
    f.gt_homography = H;

    const Eigen::Matrix3d M = oriented_matrix(H, tmpl);
    f.measurements.frame_index = t;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d p = M * Eigen::Vector3d(field[i].x, field[i].y, 1.0);
      if (!(p.z() > kDefaultEpsT)) continue;
      const Point2 q{p.x() / p.z(), p.y() / p.z()};
      if (!(q.x >= 0.0 && q.x < cfg.dims.width_px && q.y >= 0.0 && q.y < cfg.dims.height_px)) continue;
      const int id = tmpl.at(i).id;
      f.gt_keypoints.push_back({id, q});
      if (cfg.dropout_rate > 0.0 && dropout_rng.uniform() < cfg.dropout_rate) continue;
      Point2 y = q;
      if (!sigma_m[i].isZero(0.0)) y = y + Point2::from(detail::draw_gaussian<2>(meas_rng, sqrt_m[i]));
      f.measurements.observations.push_back({id, y});
    }

    if (t > 0) {
      for (int c = 0; c < cfg.n_correspondences; ++c) {
        const Point2 prev{corr_rng.uniform(0.0, cfg.dims.width_px), corr_rng.uniform(0.0, cfg.dims.height_px)};
        Point2 curr;
        if (cfg.correspondence_outlier_rate > 0.0 && corr_rng.uniform() < cfg.correspondence_outlier_rate) {
          curr = prev + Point2{corr_rng.uniform(-40.0, 40.0), corr_rng.uniform(-40.0, 40.0)};
        } else {
          curr = f.gt_motion.apply(prev);
          if (cfg.correspondence_noise_px > 0.0)
            curr = curr + cfg.correspondence_noise_px * Point2{corr_rng.normal(), corr_rng.normal()};
        }
        f.correspondences.push_back({prev, curr});
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace fieldtrack
