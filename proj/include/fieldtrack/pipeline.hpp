#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fieldtrack/calibration.hpp"
#include "fieldtrack/error.hpp"
#include "fieldtrack/field_template.hpp"
#include "fieldtrack/geometry.hpp"
#include "fieldtrack/homography_filter.hpp"
#include "fieldtrack/keypoint_filter.hpp"
#include "fieldtrack/metrics.hpp"
#include "fieldtrack/motion.hpp"
#include "fieldtrack/rng.hpp"
#include "fieldtrack/sequence.hpp"

namespace fieldtrack {

enum class MotionSource { Provided, Estimate, Identity, GroundTruth };
enum class EkfUpdateMode { CurrentFrame, AllEverMeasured };
enum class LkfInit { FirstObservation, InitialHomography };

inline std::string to_string(MotionSource s) {
  switch (s) {
    case MotionSource::Provided: return "provided";
    case MotionSource::Estimate: return "estimate";
    case MotionSource::Identity: return "identity";
    case MotionSource::GroundTruth: return "gt";
  }
  return "?";
}

inline MotionSource parse_motion_source(const std::string& s) {
  if (s == "provided") return MotionSource::Provided;
  if (s == "estimate") return MotionSource::Estimate;
  if (s == "identity") return MotionSource::Identity;
  if (s == "gt") return MotionSource::GroundTruth;
  throw Error(ErrorCode::InvalidArgument, "unknown motion source '" + s + "'");
}

struct FilterOptions {
  MotionSource motion_source = MotionSource::Provided;
  MotionEstimatorConfig motion;
  RansacConfig ransac;
  UpdateOptions update;
  EkfUpdateMode ekf_update_mode = EkfUpdateMode::CurrentFrame;
  LkfInit lkf_init = LkfInit::FirstObservation;
};

/// Per-frame seeds derived from the run seed so frames are independent of
/// processing history.
inline std::uint64_t frame_seed(std::uint64_t seed, int frame_index) {
  return CounterRng(seed, static_cast<std::uint64_t>(frame_index))();
}

struct ResolvedMotion {
  AffineSimilarity motion;
  std::string source;  // what was actually used
  bool fallback = false;
};

/// provided: supplied affine, else correspondences, else identity.
/// estimate: correspondences, else identity. gt: ground-truth affine only.
inline ResolvedMotion resolve_motion(const SequenceRecord& r, const FilterOptions& opts) {
  auto from_correspondences = [&]() -> std::optional<AffineSimilarity> {
    if (r.correspondences.size() < 2) return std::nullopt;
    MotionEstimatorConfig cfg = opts.motion;
    cfg.seed = frame_seed(opts.motion.seed, r.frame_index);
    try {
      return estimate_global_motion(r.correspondences, cfg).motion;
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  switch (opts.motion_source) {
    case MotionSource::Provided:
      if (r.motion) return {*r.motion, "provided", false};
      [[fallthrough]];
    case MotionSource::Estimate:
      if (auto m = from_correspondences()) return {*m, "estimate", false};
      return {AffineSimilarity::identity(), "identity", true};
    case MotionSource::Identity:
      return {AffineSimilarity::identity(), "identity", false};
    case MotionSource::GroundTruth:
      if (!r.gt_motion) throw Error(ErrorCode::FormatError, "frame " + std::to_string(r.frame_index) + " has no gt_motion");
      return {*r.gt_motion, "gt", false};
  }
  return {AffineSimilarity::identity(), "identity", true};
}

struct FrameEstimate {
  int frame_index = 0;
  std::string status = "pre-init";  // ok | pre-init | no-estimate
  std::optional<Homography> homography;
  std::vector<KeypointObservation> keypoints;  // filtered positions of ids measured this frame
  std::vector<std::string> flags;
  std::optional<double> condition;
  std::string motion_source;
};

inline KeypointNoise keypoint_noise(const CovarianceBank& bank) {
  return KeypointNoise::from_blocks(bank.sigma_i, bank.sigma_m);
}

inline HomographyNoise homography_noise(const CovarianceBank& bank) {
  return HomographyNoise::known_template(bank.keypoint_ids.size(), bank.sigma_h, bank.h0_cov);
}

inline void check_bank(const CovarianceBank& bank, const FieldTemplate& tmpl) {
  if (bank.keypoint_ids.size() != tmpl.size() || bank.sigma_i.size() != tmpl.size() || bank.sigma_m.size() != tmpl.size())
    throw Error(ErrorCode::DimensionMismatch, "covariance bank and template keypoint counts differ");
  for (std::size_t i = 0; i < tmpl.size(); ++i)
    if (bank.keypoint_ids[i] != tmpl.at(i).id)
      throw Error(ErrorCode::DimensionMismatch, "covariance bank keypoint order differs from template");
}

/// Keypoint filter feeding the homography filter, one frame at a time. Memory
/// is O(N^2) in the keypoint count and independent of sequence length.
class TwoStageFilter {
 public:
  TwoStageFilter(FieldTemplate tmpl, const CovarianceBank& bank, FilterOptions opts)
      : tmpl_(std::move(tmpl)), kp_noise_(keypoint_noise(bank)), h_noise_(homography_noise(bank)), opts_(opts) {
    check_bank(bank, tmpl_);
  }

  bool initialized() const { return h_.has_value(); }
  const KeypointFilterState& keypoint_state() const { return *kp_; }
  const HomographyFilterState& homography_state() const { return *h_; }

  FrameEstimate step(const SequenceRecord& r) {
    if (last_frame_ && r.frame_index <= *last_frame_)
      throw Error(ErrorCode::FormatError, "frame indices must increase (frame " + std::to_string(r.frame_index) + ")");
    const bool gap = last_frame_ && r.frame_index != *last_frame_ + 1;
    last_frame_ = r.frame_index;
    FrameEstimate out;
    out.frame_index = r.frame_index;
    if (!initialized()) {
      try_initialize(r, out);
      return out;
    }
    if (gap) out.flags.push_back("frame-gap");

    const auto motion = resolve_motion(r, opts_);
    out.motion_source = motion.source;
    if (motion.fallback) out.flags.push_back("motion-fallback");

    const MeasurementFrame frame = r.measurement_frame();
    KeypointFilterState kp = lkf_predict(*kp_, motion.motion, kp_noise_);
    try {
      kp = lkf_update(kp, frame, tmpl_, kp_noise_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularInnovation) throw;
      std::fill(kp.measured_now.begin(), kp.measured_now.end(), false);
      out.flags.push_back("keypoint-update-skipped");
    }

    HomographyFilterState h = ekf_predict(*h_, motion.motion, h_noise_);
    const auto active = active_keypoints(kp);
    if (active.empty()) {
      out.flags.push_back("no-active-keypoints");
    } else {
      try {
        double cond = 0.0;
        h = ekf_update(h, kp, active, opts_.update, &cond);
        out.condition = cond;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularInnovation && e.code() != ErrorCode::NumericalDegeneracy) throw;
        out.flags.push_back("homography-update-skipped");
      }
    }
    kp_ = std::move(kp);
    h_ = std::move(h);
    emit(out);
    return out;
  }

 private:
  void try_initialize(const SequenceRecord& r, FrameEstimate& out) {
    if (r.measurements.size() < 4) return;
    const MeasurementFrame frame = r.measurement_frame();
    RansacConfig rc = opts_.ransac;
    rc.seed = frame_seed(opts_.ransac.seed, r.frame_index);
    try {
      h_ = ekf_init(frame, tmpl_, h_noise_, rc);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientPoints && e.code() != ErrorCode::DegenerateConfiguration &&
          e.code() != ErrorCode::NoConsensus && e.code() != ErrorCode::SingularMatrix &&
          e.code() != ErrorCode::NumericalDegeneracy)
        throw;
      out.flags.push_back("init-failed");
      return;
    }
    if (opts_.lkf_init == LkfInit::InitialHomography) {
      kp_ = lkf_init_from_homography(tmpl_, reconstruct_homography(*h_), h_noise_.h0_cov, frame, kp_noise_);
    } else {
      kp_ = lkf_update(KeypointFilterState::empty(tmpl_.size()), frame, tmpl_, kp_noise_);
    }
    out.flags.push_back("init");
    // The init frame's measurements already went into the RANSAC fit; no EKF update here.
    emit(out);
  }

  std::vector<std::size_t> active_keypoints(const KeypointFilterState& kp) const {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < kp.keypoint_count(); ++i) {
      const bool use = opts_.ekf_update_mode == EkfUpdateMode::CurrentFrame ? kp.measured_now[i]
                                                                            : kp.measured_ever[i] && kp.initialized[i];
      if (use) active.push_back(i);
    }
    return active;
  }

  void emit(FrameEstimate& out) const {
    for (std::size_t i = 0; i < kp_->keypoint_count(); ++i)
      if (kp_->measured_now[i]) out.keypoints.push_back({tmpl_.at(i).id, kp_->position(i)});
    try {
      const Homography H = reconstruct_homography(*h_);
      if (!H.matrix().allFinite()) throw Error(ErrorCode::NumericalDegeneracy, "non-finite homography");
      out.homography = H;
      out.status = "ok";
    } catch (const Error&) {
      out.status = "no-estimate";
      out.flags.push_back("non-invertible");
    }
  }

  FieldTemplate tmpl_;
  KeypointNoise kp_noise_;
  HomographyNoise h_noise_;
  FilterOptions opts_;
  std::optional<KeypointFilterState> kp_;
  std::optional<HomographyFilterState> h_;
  std::optional<int> last_frame_;
};

inline std::vector<FrameEstimate> run_filter(const FieldTemplate& tmpl, const CovarianceBank& bank,
                                             const FilterOptions& opts, std::span<const SequenceRecord> records) {
  TwoStageFilter filter(tmpl, bank, opts);
  std::vector<FrameEstimate> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(filter.step(r));
  if (!filter.initialized()) throw Error(ErrorCode::NoInitializableFrame, "no frame allowed initialization");
  return out;
}

/// Independent RANSAC per frame; keypoint output is the raw measurements.
inline std::vector<FrameEstimate> run_ransac_baseline(const FieldTemplate& tmpl, const RansacConfig& ransac,
                                                      std::span<const SequenceRecord> records) {
  std::vector<FrameEstimate> out;
  for (const auto& r : records) {
    FrameEstimate e;
    e.frame_index = r.frame_index;
    e.status = "no-estimate";
    e.keypoints = r.measurements;
    if (r.measurements.size() < 4) {
      e.flags.push_back("insufficient-keypoints");
      out.push_back(std::move(e));
      continue;
    }
    std::vector<PointPair> pairs;
    for (const auto& m : r.measurements) pairs.push_back({tmpl.at(tmpl.index_of(m.id)).position, m.position});
    RansacConfig rc = ransac;
    rc.seed = frame_seed(ransac.seed, r.frame_index);
    try {
      e.homography = ransac_homography(pairs, rc).homography;
      e.status = "ok";
    } catch (const Error& err) {
      e.flags.push_back("ransac-failed:" + std::string(to_string(err.code())));
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// Training records from an annotated sequence. The motion into frame t + 1
/// becomes frame t's motion_to_next.
inline TrainingSequence to_training(const Sequence& seq, const FilterOptions& opts) {
  TrainingSequence out;
  for (std::size_t k = 0; k < seq.records.size(); ++k) {
    const auto& r = seq.records[k];
    if (!r.gt_homography || !r.gt_keypoints) continue;
    TrainingRecord t;
    t.frame_index = r.frame_index;
    t.gt_homography = *r.gt_homography;
    t.gt_keypoints = *r.gt_keypoints;
    t.measured_keypoints = r.measurements;
    if (k + 1 < seq.records.size() && seq.records[k + 1].frame_index == r.frame_index + 1) {
      const auto m = resolve_motion(seq.records[k + 1], opts);
      if (!m.fallback) t.motion_to_next = m.motion;
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline CovarianceBank run_calibrate(std::span<const Sequence> sequences, const FieldTemplate& tmpl,
                                    const FilterOptions& opts, const CalibrationConfig& cfg) {
  std::vector<TrainingSequence> training;
  for (const auto& s : sequences) training.push_back(to_training(s, opts));
  return calibrate(training, tmpl, cfg);
}

// ---- evaluation ----

inline constexpr double kDefaultPrThresholdPx = 20.0;

struct FrameMetrics {
  int frame_index = 0;
  std::string status;
  std::map<std::string, double> values;
  std::vector<std::string> flags;
};

struct MetricsReport {
  std::vector<FrameMetrics> frames;
  std::map<std::string, Summary> aggregates;
  int evaluated = 0;
  int pre_init = 0;
  int no_estimate = 0;
  std::map<std::string, int> degenerate;  // per metric
};

inline const std::vector<std::string>& report_metric_names() {
  static const std::vector<std::string> names{"iou_entire",    "iou_entire_kpsfr", "iou_part",  "proj_error_m",
                                              "reproj_error_frac", "nrmse_x",      "nrmse_y",   "precision",
                                              "recall",        "map"};
  return names;
}

struct EvaluateOptions {
  int projection_samples = 2500;
  std::uint64_t seed = 0;
  double pr_threshold_px = kDefaultPrThresholdPx;
};

inline MetricsReport run_evaluate(std::span<const FrameEstimate> predictions, const Sequence& truth,
                                  const FieldTemplate& tmpl, const EvaluateOptions& opts = {}) {
  if (predictions.size() != truth.records.size())
    throw Error(ErrorCode::FrameMismatch, "prediction and ground-truth frame counts differ");
  for (std::size_t k = 0; k < predictions.size(); ++k)
    if (predictions[k].frame_index != truth.records[k].frame_index)
      throw Error(ErrorCode::FrameMismatch, "frame " + std::to_string(predictions[k].frame_index) +
                                                " does not match ground-truth frame " +
                                                std::to_string(truth.records[k].frame_index));

  const ImageDims& dims = truth.header.dims;
  MetricsReport report;
  std::map<std::string, std::vector<double>> series;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const auto& p = predictions[k];
    const auto& g = truth.records[k];
    FrameMetrics fm;
    fm.frame_index = p.frame_index;
    fm.status = p.status;
    if (p.status == "pre-init") {
      ++report.pre_init;
      report.frames.push_back(std::move(fm));
      continue;
    }
    if (!g.gt_homography || !g.gt_keypoints)
      throw Error(ErrorCode::FormatError, "frame " + std::to_string(g.frame_index) + " lacks ground truth");
    if (!p.homography) {
      ++report.no_estimate;
      report.frames.push_back(std::move(fm));
      continue;
    }
    ++report.evaluated;
    const Homography& Hg = *g.gt_homography;
    const Homography& Hp = *p.homography;
    auto record = [&](const std::string& name, auto&& fn) {
      try {
        const double v = fn();
        fm.values[name] = v;
        series[name].push_back(v);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateProjection && e.code() != ErrorCode::EmptyVisibleRegion &&
            e.code() != ErrorCode::NoMatchedKeypoints && e.code() != ErrorCode::PointAtInfinity &&
            e.code() != ErrorCode::SingularMatrix)
          throw;
        fm.flags.push_back(name + ":" + std::string(to_string(e.code())));
        ++report.degenerate[name];
      }
    };
    record("iou_entire", [&] { return iou_entire(Hg, Hp, tmpl); });
    record("iou_entire_kpsfr", [&] { return iou_entire_kpsfr(Hg, Hp, tmpl, dims); });
    record("iou_part", [&] { return iou_part(Hg, Hp, tmpl, dims); });
    record("proj_error_m", [&] {
      return projection_error(Hg, Hp, tmpl, dims, opts.projection_samples, frame_seed(opts.seed, p.frame_index));
    });
    record("reproj_error_frac", [&] { return reprojection_error(Hg, Hp, tmpl, dims); });
    record("nrmse_x", [&] { return nrmse(p.keypoints, *g.gt_keypoints, dims, Axis::X); });
    record("nrmse_y", [&] { return nrmse(p.keypoints, *g.gt_keypoints, dims, Axis::Y); });
    const auto pr = precision_recall(p.keypoints, *g.gt_keypoints, dims, opts.pr_threshold_px);
    if (!pr.precision_undefined) record("precision", [&] { return pr.precision; });
    else fm.flags.push_back("precision-undefined");
    if (!pr.recall_undefined) record("recall", [&] { return pr.recall; });
    else fm.flags.push_back("recall-undefined");
    record("map", [&] { return average_precision(p.keypoints, *g.gt_keypoints, dims); });
    report.frames.push_back(std::move(fm));
  }
  for (const auto& name : report_metric_names()) report.aggregates[name] = summarize(series[name]);
  return report;
}

}  // namespace fieldtrack
