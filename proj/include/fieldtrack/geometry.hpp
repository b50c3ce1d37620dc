#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fieldtrack/error.hpp"
#include "fieldtrack/rng.hpp"

namespace fieldtrack {

inline constexpr double kDefaultEpsT = 1e-12;
inline constexpr double kDefaultEpsDet = 1e-12;

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Eigen::Vector2d vec() const { return {x, y}; }
  static Point2 from(const Eigen::Vector2d& v) { return {v.x(), v.y()}; }

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

struct HomogeneousPoint2 {
  double x = 0.0;
  double y = 0.0;
  double t = 1.0;

  Eigen::Vector3d vec() const { return {x, y, t}; }
  static HomogeneousPoint2 from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  static HomogeneousPoint2 lift(Point2 p) { return {p.x, p.y, 1.0}; }
};

inline Point2 normalize_homogeneous(const HomogeneousPoint2& p, double eps_t = kDefaultEpsT) {
  if (!(std::abs(p.t) > eps_t)) {
    throw Error(ErrorCode::PointAtInfinity, "homogeneous coordinate t is zero or non-finite");
  }
  return {p.x / p.t, p.y / p.t};
}

/// Projective map of the plane stored with h33 = 1.
///
/// The eight free entries are exposed column-stacked
/// (h11, h21, h31, h12, h22, h32, h13, h23), which is the ordering used by
/// the homography filter state and every 8x8 covariance in the project.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}

  static Homography identity() { return {}; }

  /// Rescales so h33 = 1 and checks invertibility.
  static Homography from_matrix(const Eigen::Matrix3d& m, double eps_det = kDefaultEpsDet) {
    if (!m.allFinite()) throw Error(ErrorCode::NumericalDegeneracy, "non-finite homography");
    const double h33 = m(2, 2);
    if (!(std::abs(h33) > std::numeric_limits<double>::epsilon() * m.cwiseAbs().maxCoeff())) {
      throw Error(ErrorCode::NumericalDegeneracy, "h33 is zero; cannot normalize");
    }
    Homography h;
    h.m_ = m / h33;
    if (!(std::abs(h.m_.determinant()) > eps_det)) {
      throw Error(ErrorCode::SingularMatrix, "homography determinant below threshold");
    }
    return h;
  }

  static Homography from_params(const Vec8& p, double eps_det = kDefaultEpsDet) {
    Eigen::Matrix3d m;
    m << p(0), p(3), p(6),
         p(1), p(4), p(7),
         p(2), p(5), 1.0;
    return from_matrix(m, eps_det);
  }

  Vec8 params() const {
    Vec8 p;
    p << m_(0, 0), m_(1, 0), m_(2, 0), m_(0, 1), m_(1, 1), m_(2, 1), m_(0, 2), m_(1, 2);
    return p;
  }

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  /// Homogeneous image of X without normalization.
  HomogeneousPoint2 map_homogeneous(Point2 X) const {
    return HomogeneousPoint2::from(m_ * Eigen::Vector3d(X.x, X.y, 1.0));
  }

  double max_abs_diff(const Homography& o) const { return (m_ - o.m_).cwiseAbs().maxCoeff(); }

 private:
  Eigen::Matrix3d m_;
};

inline Point2 apply_homography(const Homography& H, Point2 X, double eps_t = kDefaultEpsT) {
  return normalize_homogeneous(H.map_homogeneous(X), eps_t);
}

inline Homography invert_homography(const Homography& H, double eps_det = kDefaultEpsDet) {
  if (!(std::abs(H.matrix().determinant()) > eps_det)) {
    throw Error(ErrorCode::SingularMatrix, "cannot invert homography");
  }
  return Homography::from_matrix(H.matrix().inverse(), 0.0);
}

inline Homography compose(const Homography& outer, const Homography& inner) {
  return Homography::from_matrix(outer.matrix() * inner.matrix(), 0.0);
}

struct PointPair {
  Point2 src;
  Point2 dst;
};

namespace detail {

/// Isotropic conditioning: centroid to origin, mean distance sqrt(2).
inline Eigen::Matrix3d conditioning_transform(std::span<const Point2> pts) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0) || !std::isfinite(mean_dist)) {
    throw Error(ErrorCode::DegenerateConfiguration, "coincident points");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d T;
  T << s, 0.0, -s * cx,
       0.0, s, -s * cy,
       0.0, 0.0, 1.0;
  return T;
}

inline Point2 transform_affine(const Eigen::Matrix3d& T, Point2 p) {
  return {T(0, 0) * p.x + T(0, 1) * p.y + T(0, 2), T(1, 0) * p.x + T(1, 1) * p.y + T(1, 2)};
}

inline bool has_collinear_triple(std::span<const Point2> pts, double tol) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k)
        if (std::abs(cross(pts[j] - pts[i], pts[k] - pts[i])) < tol) return true;
  return false;
}

}  // namespace detail

/// Normalized DLT. Minimal (4-point) sets are also screened for collinear
/// triples since the SVD alone does not reject an inconsistent minimal set.
inline Homography dlt_homography(std::span<const PointPair> pairs, double eps_det = kDefaultEpsDet) {
  const std::size_t n = pairs.size();
  if (n < 4) throw Error(ErrorCode::InsufficientPoints, "DLT needs at least 4 correspondences");

  std::vector<Point2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = pairs[i].src;
    dst[i] = pairs[i].dst;
  }
  const Eigen::Matrix3d Ts = detail::conditioning_transform(src);
  const Eigen::Matrix3d Td = detail::conditioning_transform(dst);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = detail::transform_affine(Ts, src[i]);
    dst[i] = detail::transform_affine(Td, dst[i]);
  }
  if (n == 4) {
    if (detail::has_collinear_triple(src, 1e-9) || detail::has_collinear_triple(dst, 1e-9))
      throw Error(ErrorCode::DegenerateConfiguration, "three collinear points in a minimal set");
    // Exactly determined: solve the 8x8 system with h33 = 1 in conditioned
    // coordinates, falling back to the SVD when that pivot is unusable.
    Eigen::Matrix<double, 8, 8> M;
    Eigen::Matrix<double, 8, 1> rhs;
    for (std::size_t i = 0; i < 4; ++i) {
      const double x = src[i].x, y = src[i].y, u = dst[i].x, v = dst[i].y;
      const auto r = static_cast<Eigen::Index>(2 * i);
      M.row(r) << x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y;
      M.row(r + 1) << 0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y;
      rhs(r) = u;
      rhs(r + 1) = v;
    }
    const Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(M);
    if (lu.rcond() > 1e-12) {
      const Eigen::Matrix<double, 8, 1> h = lu.solve(rhs);
      Eigen::Matrix3d Hn;
      Hn << h(0), h(1), h(2),
            h(3), h(4), h(5),
            h(6), h(7), 1.0;
      try {
        return Homography::from_matrix(Td.inverse() * Hn * Ts, eps_det);
      } catch (const Error& e) {
        throw Error(ErrorCode::DegenerateConfiguration, e.what());
      }
    }
  }

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(std::max<std::size_t>(2 * n, 9)), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = src[i].x, y = src[i].y, u = dst[i].x, v = dst[i].y;
    const auto r = static_cast<Eigen::Index>(2 * i);
    A.row(r) << -x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u;
    A.row(r + 1) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(7) > 1e-10 * sv(0))) {
    throw Error(ErrorCode::DegenerateConfiguration, "rank-deficient DLT system");
  }
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << h(0), h(1), h(2),
        h(3), h(4), h(5),
        h(6), h(7), h(8);
  const Eigen::Matrix3d H = Td.inverse() * Hn * Ts;
  try {
    return Homography::from_matrix(H, eps_det);
  } catch (const Error& e) {
    throw Error(ErrorCode::DegenerateConfiguration, e.what());
  }
}

struct RansacConfig {
  double inlier_threshold_px = 3.0;
  int max_iters = 2000;
  double confidence = 0.99;
  std::uint64_t seed = 0;
};

struct RansacResult {
  Homography homography;
  std::vector<bool> inliers;
  int inlier_count = 0;
  int iterations = 0;
};

namespace detail {

inline int count_homography_inliers(const Homography& H, std::span<const PointPair> pairs, double thr,
                                    std::vector<bool>* mask) {
  int count = 0;
  if (mask) mask->assign(pairs.size(), false);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto hp = H.map_homogeneous(pairs[i].src);
    if (!(std::abs(hp.t) > kDefaultEpsT)) continue;
    const Point2 p{hp.x / hp.t, hp.y / hp.t};
    if (distance(p, pairs[i].dst) < thr) {
      ++count;
      if (mask) (*mask)[i] = true;
    }
  }
  return count;
}

inline int adaptive_iterations(double inlier_ratio, int sample_size, double confidence, int cap) {
  const double w = std::pow(inlier_ratio, sample_size);
  if (w >= 1.0) return 0;
  if (w <= 0.0) return cap;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - w);
  if (!std::isfinite(n) || n > cap) return cap;
  return static_cast<int>(std::ceil(n));
}

}  // namespace detail

inline RansacResult ransac_homography(std::span<const PointPair> pairs, const RansacConfig& cfg = {}) {
  const std::size_t n = pairs.size();
  if (n < 4) throw Error(ErrorCode::InsufficientPoints, "RANSAC needs at least 4 correspondences");

  CounterRng rng(cfg.seed, 0x4f1bbcdcbfa53e0bULL);
  int best_count = 0;
  std::optional<Homography> best;
  int needed = cfg.max_iters;
  int iter = 0;
  std::array<PointPair, 4> sample;
  std::array<std::size_t, 4> idx{};
  for (; iter < cfg.max_iters && iter < needed; ++iter) {
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        idx[k] = static_cast<std::size_t>(rng.below(n));
        fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
      } while (!fresh);
      sample[k] = pairs[idx[k]];
    }
    Homography candidate;
    try {
      candidate = dlt_homography(sample);
    } catch (const Error&) {
      continue;
    }
    const int count = detail::count_homography_inliers(candidate, pairs, cfg.inlier_threshold_px, nullptr);
    if (count > best_count) {
      best_count = count;
      best = candidate;
      needed = detail::adaptive_iterations(static_cast<double>(count) / static_cast<double>(n), 4,
                                           cfg.confidence, cfg.max_iters);
    }
  }
  if (!best || best_count < 4) throw Error(ErrorCode::NoConsensus, "fewer than 4 inliers");

  RansacResult out;
  out.iterations = iter;
  detail::count_homography_inliers(*best, pairs, cfg.inlier_threshold_px, &out.inliers);
  std::vector<PointPair> consensus;
  for (std::size_t i = 0; i < n; ++i)
    if (out.inliers[i]) consensus.push_back(pairs[i]);
  try {
    out.homography = dlt_homography(consensus);
  } catch (const Error&) {
    out.homography = *best;
  }
  out.inlier_count = detail::count_homography_inliers(out.homography, pairs, cfg.inlier_threshold_px, &out.inliers);
  if (out.inlier_count < best_count) {
    out.homography = *best;
    out.inlier_count = detail::count_homography_inliers(out.homography, pairs, cfg.inlier_threshold_px, &out.inliers);
  }
  return out;
}

/// Counter-clockwise convex polygon (y axis up; in image coordinates with y
/// down the stored order appears clockwise on screen).
class ConvexPolygon {
 public:
  /// Validates convexity and reorders to counter-clockwise.
  explicit ConvexPolygon(std::vector<Point2> vertices) : v_(cleanup(std::move(vertices))) {
    if (v_.size() < 3) throw Error(ErrorCode::InvalidArgument, "polygon needs at least 3 distinct vertices");
    if (signed_area(v_) < 0.0) std::reverse(v_.begin(), v_.end());
    if (!(signed_area(v_) > 0.0)) throw Error(ErrorCode::InvalidArgument, "polygon has zero area");
    if (!is_convex_ccw(v_)) throw Error(ErrorCode::InvalidArgument, "polygon is not convex");
  }

  static ConvexPolygon rectangle(double x0, double y0, double x1, double y1) {
    return ConvexPolygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
  }

  /// Empty optional when the vertices do not form a convex polygon with area.
  static std::optional<ConvexPolygon> try_make(std::vector<Point2> vertices) {
    try {
      return ConvexPolygon(std::move(vertices));
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  const std::vector<Point2>& vertices() const { return v_; }
  std::size_t size() const { return v_.size(); }

  bool contains(Point2 p) const {
    for (std::size_t i = 0; i < v_.size(); ++i) {
      const Point2 a = v_[i], b = v_[(i + 1) % v_.size()];
      if (cross(b - a, p - a) < 0.0) return false;
    }
    return true;
  }

  std::array<double, 4> bounds() const {
    std::array<double, 4> b{v_[0].x, v_[0].y, v_[0].x, v_[0].y};
    for (const auto& p : v_) {
      b[0] = std::min(b[0], p.x);
      b[1] = std::min(b[1], p.y);
      b[2] = std::max(b[2], p.x);
      b[3] = std::max(b[3], p.y);
    }
    return b;
  }

  static double signed_area(const std::vector<Point2>& v) {
    double a = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) a += cross(v[i], v[(i + 1) % v.size()]);
    return 0.5 * a;
  }

 private:
  static double scale_of(const std::vector<Point2>& v) {
    double s = 0.0;
    for (const auto& p : v) s = std::max({s, std::abs(p.x), std::abs(p.y)});
    return std::max(s, 1.0);
  }

  // Drops repeated and collinear vertices left behind by clipping.
  static std::vector<Point2> cleanup(std::vector<Point2> v) {
    for (const auto& p : v)
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw Error(ErrorCode::InvalidArgument, "non-finite polygon vertex");
    const double s = scale_of(v);
    const double tol = 1e-12 * s;
    bool changed = true;
    while (changed && v.size() >= 3) {
      changed = false;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Point2 prev = v[(i + v.size() - 1) % v.size()], cur = v[i], next = v[(i + 1) % v.size()];
        const Point2 d1 = cur - prev, d2 = next - cur;
        const bool dup = distance(prev, cur) <= tol;
        const bool collinear = std::abs(cross(d1, d2)) <= 1e-14 * s * s && d1.x * d2.x + d1.y * d2.y >= 0.0;
        if (dup || collinear) {
          v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
          changed = true;
          break;
        }
      }
    }
    if (v.size() == 2 && distance(v[0], v[1]) <= tol) v.pop_back();
    return v;
  }

  static bool is_convex_ccw(const std::vector<Point2>& v) {
    const double s = scale_of(v);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Point2 a = v[i], b = v[(i + 1) % v.size()], c = v[(i + 2) % v.size()];
      if (cross(b - a, c - b) < -1e-12 * s * s) return false;
    }
    // Turning number one rules out star-shaped self-intersections.
    double turn = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Point2 a = v[i], b = v[(i + 1) % v.size()], c = v[(i + 2) % v.size()];
      const Point2 e1 = b - a, e2 = c - b;
      turn += std::atan2(cross(e1, e2), e1.x * e2.x + e1.y * e2.y);
    }
    return std::abs(turn - 2.0 * std::numbers::pi) < 1e-6;
  }

  std::vector<Point2> v_;
};

inline double polygon_area(const ConvexPolygon& p) { return std::abs(ConvexPolygon::signed_area(p.vertices())); }

/// Sutherland-Hodgman; both inputs convex, result empty when disjoint or
/// touching along an edge only.
inline std::optional<ConvexPolygon> clip_polygon(const ConvexPolygon& subject, const ConvexPolygon& clip) {
  std::vector<Point2> out = subject.vertices();
  const auto& c = clip.vertices();
  for (std::size_t e = 0; e < c.size() && !out.empty(); ++e) {
    const Point2 a = c[e], b = c[(e + 1) % c.size()];
    const Point2 edge = b - a;
    std::vector<Point2> in;
    in.swap(out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point2 p = in[i], q = in[(i + 1) % in.size()];
      const double dp = cross(edge, p - a);
      const double dq = cross(edge, q - a);
      if (dp >= 0.0) out.push_back(p);
      if ((dp >= 0.0) != (dq >= 0.0)) {
        const double s = dp / (dp - dq);
        out.push_back(p + s * (q - p));
      }
    }
  }
  if (out.size() < 3) return std::nullopt;
  return ConvexPolygon::try_make(std::move(out));
}

/// Maps a polygon through a homography; empty when any vertex lands on or
/// behind the line at infinity (t <= eps_t) or the image is not convex.
inline std::optional<ConvexPolygon> map_polygon(const Eigen::Matrix3d& G, const ConvexPolygon& poly,
                                                double eps_t = kDefaultEpsT) {
  std::vector<Point2> out;
  out.reserve(poly.size());
  for (const auto& v : poly.vertices()) {
    const Eigen::Vector3d h = G * Eigen::Vector3d(v.x, v.y, 1.0);
    if (!(h.z() > eps_t)) return std::nullopt;
    out.push_back({h.x() / h.z(), h.y() / h.z()});
  }
  return ConvexPolygon::try_make(std::move(out));
}

}  // namespace fieldtrack
