#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fieldtrack/error.hpp"
#include "fieldtrack/geometry.hpp"

namespace fieldtrack {

struct TemplateKeypoint {
  int id = 0;
  Point2 position;  // meters
};

/// World-plane keypoints plus the field rectangle [0, width] x [0, height].
/// The order of `keypoints()` is the global state ordering used by both
/// filters: keypoint i occupies rows 2i and 2i + 1.
class FieldTemplate {
 public:
  FieldTemplate(std::vector<TemplateKeypoint> keypoints, double width_m = 105.0, double height_m = 68.0,
                std::string id = "custom")
      : keypoints_(std::move(keypoints)), width_m_(width_m), height_m_(height_m), id_(std::move(id)) {
    if (!(width_m_ > 0.0) || !(height_m_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "field dimensions must be positive");
    if (keypoints_.size() < 4) throw Error(ErrorCode::InvalidArgument, "template needs at least 4 keypoints");
    for (std::size_t i = 0; i < keypoints_.size(); ++i) {
      const auto& k = keypoints_[i];
      if (!index_.emplace(k.id, i).second) throw Error(ErrorCode::InvalidArgument, "duplicate keypoint id " + std::to_string(k.id));
      const auto& p = k.position;
      if (!(p.x >= 0.0 && p.x <= width_m_ && p.y >= 0.0 && p.y <= height_m_)) {
        throw Error(ErrorCode::InvalidArgument, "keypoint " + std::to_string(k.id) + " outside the field");
      }
    }
  }

  /// cols x rows lattice including the field boundary; ids row-major from 0.
  static FieldTemplate uniform_grid(int cols, int rows, double width_m = 105.0, double height_m = 68.0) {
    std::vector<TemplateKeypoint> kps;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        kps.push_back({r * cols + c, {width_m * c / (cols - 1), height_m * r / (rows - 1)}});
    return FieldTemplate(std::move(kps), width_m, height_m,
                         "uniform-" + std::to_string(cols) + "x" + std::to_string(rows));
  }

  std::size_t size() const { return keypoints_.size(); }
  const std::vector<TemplateKeypoint>& keypoints() const { return keypoints_; }
  const TemplateKeypoint& at(std::size_t index) const { return keypoints_.at(index); }
  double width_m() const { return width_m_; }
  double height_m() const { return height_m_; }
  const std::string& id() const { return id_; }

  bool contains(int keypoint_id) const { return index_.count(keypoint_id) != 0; }

  std::size_t index_of(int keypoint_id) const {
    const auto it = index_.find(keypoint_id);
    if (it == index_.end()) throw Error(ErrorCode::UnknownKeypointId, "keypoint id " + std::to_string(keypoint_id));
    return it->second;
  }

  ConvexPolygon field_polygon() const { return ConvexPolygon::rectangle(0.0, 0.0, width_m_, height_m_); }

 private:
  std::vector<TemplateKeypoint> keypoints_;
  std::unordered_map<int, std::size_t> index_;
  double width_m_;
  double height_m_;
  std::string id_;
};

/// Scales H so that the field center has positive homogeneous t. After that
/// t > 0 means "in front of the camera" both for H and for its plain inverse.
inline Eigen::Matrix3d oriented_matrix(const Homography& H, const FieldTemplate& tmpl) {
  const Eigen::Vector3d c = H.matrix() * Eigen::Vector3d(0.5 * tmpl.width_m(), 0.5 * tmpl.height_m(), 1.0);
  return c.z() < 0.0 ? Eigen::Matrix3d(-H.matrix()) : H.matrix();
}

struct ImageDims {
  int width_px = 1280;
  int height_px = 720;

  ConvexPolygon polygon() const { return ConvexPolygon::rectangle(0.0, 0.0, width_px, height_px); }
};

struct KeypointObservation {
  int id = 0;
  Point2 position;
};

struct MeasurementFrame {
  int frame_index = 0;
  std::vector<KeypointObservation> observations;
};

}  // namespace fieldtrack
