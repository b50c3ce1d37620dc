#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "fieldtrack/error.hpp"
#include "fieldtrack/geometry.hpp"
#include "fieldtrack/rng.hpp"

namespace fieldtrack {

/// Inter-frame rotation + uniform scale + translation:
///   [a -b tx]
///   [b  a ty]
///   [0  0  1]
struct AffineSimilarity {
  double a = 1.0;
  double b = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  static AffineSimilarity identity() { return {}; }

  static AffineSimilarity translation(double tx, double ty) { return {1.0, 0.0, tx, ty}; }

  /// Rotation by theta and scaling by s about `center`, followed by (tx, ty).
  static AffineSimilarity about(Point2 center, double theta, double s, double tx, double ty) {
    const double a = s * std::cos(theta), b = s * std::sin(theta);
    return {a, b, center.x - (a * center.x - b * center.y) + tx, center.y - (b * center.x + a * center.y) + ty};
  }

  double scale() const { return std::hypot(a, b); }

  Eigen::Matrix2d linear() const {
    Eigen::Matrix2d m;
    m << a, -b, b, a;
    return m;
  }

  Eigen::Vector2d offset() const { return {tx, ty}; }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d m;
    m << a, -b, tx,
         b, a, ty,
         0.0, 0.0, 1.0;
    return m;
  }

  Point2 apply(Point2 p) const { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }

  HomogeneousPoint2 apply(const HomogeneousPoint2& p) const {
    return {a * p.x - b * p.y + tx * p.t, b * p.x + a * p.y + ty * p.t, p.t};
  }

  /// (*this) after `first`.
  AffineSimilarity after(const AffineSimilarity& first) const {
    return {a * first.a - b * first.b, b * first.a + a * first.b, a * first.tx - b * first.ty + tx,
            b * first.tx + a * first.ty + ty};
  }

  friend bool operator==(const AffineSimilarity&, const AffineSimilarity&) = default;
};

struct Correspondence {
  Point2 prev;
  Point2 curr;
};

/// Closed-form least squares for (a, b, tx, ty) on centred coordinates.
inline AffineSimilarity fit_similarity(std::span<const Correspondence> pairs) {
  if (pairs.size() < 2) throw Error(ErrorCode::InsufficientPoints, "similarity fit needs at least 2 pairs");
  const double n = static_cast<double>(pairs.size());
  double px = 0.0, py = 0.0, cx = 0.0, cy = 0.0;
  for (const auto& c : pairs) {
    px += c.prev.x;
    py += c.prev.y;
    cx += c.curr.x;
    cy += c.curr.y;
  }
  px /= n;
  py /= n;
  cx /= n;
  cy /= n;
  double spp = 0.0, sdot = 0.0, scross = 0.0, extent = 0.0;
  for (const auto& c : pairs) {
    const double ux = c.prev.x - px, uy = c.prev.y - py;
    const double vx = c.curr.x - cx, vy = c.curr.y - cy;
    spp += ux * ux + uy * uy;
    sdot += ux * vx + uy * vy;
    scross += ux * vy - uy * vx;
    extent = std::max({extent, std::abs(c.prev.x), std::abs(c.prev.y)});
  }
  const double floor = 1e-24 * std::max(1.0, extent * extent) * n;
  if (!(spp > floor)) throw Error(ErrorCode::DegenerateConfiguration, "source points coincide");
  const double a = sdot / spp;
  const double b = scross / spp;
  if (!(std::hypot(a, b) > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "zero scale");
  return {a, b, cx - (a * px - b * py), cy - (b * px + a * py)};
}

struct MotionEstimatorConfig {
  double inlier_threshold_px = 1.5;
  int max_iters = 500;
  double confidence = 0.99;
  double mad_multiplier = 3.0;
  std::uint64_t seed = 0;
};

struct MotionEstimate {
  AffineSimilarity motion;
  std::vector<bool> inliers;  // in the caller's input order
  int inlier_count = 0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline double residual(const AffineSimilarity& m, const Correspondence& c) { return distance(m.apply(c.prev), c.curr); }

}  // namespace detail

/// Robust global motion: median-displacement outlier rejection, then 2-point
/// RANSAC over the survivors, then a least-squares refit on every pair within
/// threshold of the consensus model.
inline MotionEstimate estimate_global_motion(std::span<const Correspondence> input,
                                             const MotionEstimatorConfig& cfg = {}) {
  const std::size_t n = input.size();
  if (n < 2) throw Error(ErrorCode::InsufficientPoints, "motion estimation needs at least 2 pairs");

  // Canonical order makes the result independent of the caller's ordering.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto& p = input[i];
    const auto& q = input[j];
    return std::tie(p.prev.x, p.prev.y, p.curr.x, p.curr.y) < std::tie(q.prev.x, q.prev.y, q.curr.x, q.curr.y);
  });
  std::vector<Correspondence> pairs(n);
  for (std::size_t k = 0; k < n; ++k) pairs[k] = input[order[k]];

  std::vector<double> dx(n), dy(n);
  for (std::size_t i = 0; i < n; ++i) {
    dx[i] = pairs[i].curr.x - pairs[i].prev.x;
    dy[i] = pairs[i].curr.y - pairs[i].prev.y;
  }
  const double mx = detail::median_of(dx), my = detail::median_of(dy);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = std::hypot(dx[i] - mx, dy[i] - my);
  const double mad = detail::median_of(dev);
  const double gate = std::max(cfg.mad_multiplier * mad, cfg.inlier_threshold_px);
  std::vector<Correspondence> survivors;
  for (std::size_t i = 0; i < n; ++i)
    if (dev[i] <= gate) survivors.push_back(pairs[i]);
  if (survivors.size() < 2) throw Error(ErrorCode::NoConsensus, "displacement filter left fewer than 2 pairs");

  CounterRng rng(cfg.seed, 0x2545f4914f6cdd1dULL);
  const std::size_t m = survivors.size();
  AffineSimilarity best;
  int best_count = -1;
  int needed = cfg.max_iters;
  for (int iter = 0; iter < cfg.max_iters && iter < needed; ++iter) {
    const auto i = static_cast<std::size_t>(rng.below(m));
    auto j = static_cast<std::size_t>(rng.below(m - 1));
    if (j >= i) ++j;
    const std::array<Correspondence, 2> sample{survivors[i], survivors[j]};
    AffineSimilarity candidate;
    try {
      candidate = fit_similarity(sample);
    } catch (const Error&) {
      continue;
    }
    int count = 0;
    for (const auto& c : survivors)
      if (detail::residual(candidate, c) < cfg.inlier_threshold_px) ++count;
    if (count > best_count) {
      best_count = count;
      best = candidate;
      needed = detail::adaptive_iterations(static_cast<double>(count) / static_cast<double>(m), 2,
                                           cfg.confidence, cfg.max_iters);
    }
  }
  if (best_count < 2) throw Error(ErrorCode::NoConsensus, "no 2-point consensus");

  auto consensus_of = [&](const AffineSimilarity& model, std::vector<Correspondence>& out, std::vector<bool>& mask) {
    out.clear();
    mask.assign(n, false);
    for (std::size_t k = 0; k < n; ++k) {
      if (detail::residual(model, pairs[k]) < cfg.inlier_threshold_px) {
        out.push_back(pairs[k]);
        mask[order[k]] = true;
      }
    }
  };
  std::vector<Correspondence> consensus;
  MotionEstimate result;
  consensus_of(best, consensus, result.inliers);
  if (consensus.size() < 2) throw Error(ErrorCode::NoConsensus, "consensus smaller than 2 pairs");
  result.motion = fit_similarity(consensus);
  consensus_of(result.motion, consensus, result.inliers);
  if (consensus.size() < 2) {
    result.motion = best;
    consensus_of(best, consensus, result.inliers);
  }
  result.inlier_count = static_cast<int>(consensus.size());
  return result;
}

}  // namespace fieldtrack
