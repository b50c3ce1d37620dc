#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldtrack/calibration.hpp"
#include "fieldtrack/field_template.hpp"
#include "fieldtrack/geometry.hpp"
#include "fieldtrack/motion.hpp"
#include "fieldtrack/simulator.hpp"

namespace fieldtrack {

struct SequenceHeader {
  std::string sequence_id = "sequence";
  std::string template_id;
  ImageDims dims;
};

/// One frame of a sequence file. `motion` and `gt_motion` map the previous
/// frame's image to this frame's image.
struct SequenceRecord {
  int frame_index = 0;
  std::vector<KeypointObservation> measurements;
  std::optional<Homography> gt_homography;
  std::optional<std::vector<KeypointObservation>> gt_keypoints;
  std::optional<AffineSimilarity> motion;
  std::optional<AffineSimilarity> gt_motion;
  std::vector<Correspondence> correspondences;

  MeasurementFrame measurement_frame() const { return {frame_index, measurements}; }
};

struct Sequence {
  SequenceHeader header;
  std::vector<SequenceRecord> records;
};

/// Simulator output in file form; the simulated motion is written both as the
/// supplied motion and as ground truth.
inline Sequence to_sequence(std::span<const SimFrame> frames, const SimConfig& cfg) {
  Sequence s;
  s.header = {cfg.sequence_id, cfg.tmpl.id(), cfg.dims};
  for (const auto& f : frames) {
    SequenceRecord r;
    r.frame_index = f.frame_index;
    r.measurements = f.measurements.observations;
    r.gt_homography = f.gt_homography;
    r.gt_keypoints = f.gt_keypoints;
    if (f.frame_index > 0) {
      r.motion = f.gt_motion;
      r.gt_motion = f.gt_motion;
    }
    r.correspondences = f.correspondences;
    s.records.push_back(std::move(r));
  }
  return s;
}

}  // namespace fieldtrack
