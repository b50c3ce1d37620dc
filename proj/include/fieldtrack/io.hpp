#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fieldtrack/calibration.hpp"
#include "fieldtrack/error.hpp"
#include "fieldtrack/field_template.hpp"
#include "fieldtrack/geometry.hpp"
#include "fieldtrack/motion.hpp"
#include "fieldtrack/pipeline.hpp"
#include "fieldtrack/sequence.hpp"
#include "fieldtrack/simulator.hpp"

// File formats, all JSON. Schemas are in docs/formats.md.
namespace fieldtrack::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kHomographyOrdering = "column-stacked h1 h2 h3, h33 excluded";
inline const std::vector<std::string> kHomographyParamNames{"h11", "h21", "h31", "h12", "h22", "h32", "h13", "h23"};

// ---- helpers ----

template <typename Derived>
json matrix_to_json(const Eigen::MatrixBase<Derived>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw Error(ErrorCode::FormatError, what + ": expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw Error(ErrorCode::FormatError, what + ": expected " + std::to_string(cols) + " columns");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) throw Error(ErrorCode::FormatError, what + ": non-numeric entry");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

/// Row-major 3x3 as 9 numbers.
inline json homography_to_json(const Homography& H) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(H.matrix()(r, c));
  return a;
}

inline Homography homography_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9) throw Error(ErrorCode::FormatError, "homography must have 9 entries");
  Eigen::Matrix3d m;
  for (int k = 0; k < 9; ++k) {
    if (!j[static_cast<std::size_t>(k)].is_number()) throw Error(ErrorCode::FormatError, "homography entry not numeric");
    m(k / 3, k % 3) = j[static_cast<std::size_t>(k)].get<double>();
  }
  return Homography::from_matrix(m);
}

inline json observations_to_json(const std::vector<KeypointObservation>& obs) {
  json a = json::array();
  for (const auto& o : obs) a.push_back({{"id", o.id}, {"x", o.position.x}, {"y", o.position.y}});
  return a;
}

inline std::vector<KeypointObservation> observations_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::FormatError, "keypoint list must be an array");
  std::vector<KeypointObservation> out;
  for (const auto& o : j) out.push_back({o.at("id").get<int>(), {o.at("x").get<double>(), o.at("y").get<double>()}});
  return out;
}

inline json motion_to_json(const AffineSimilarity& m) { return {{"a", m.a}, {"b", m.b}, {"tx", m.tx}, {"ty", m.ty}}; }

inline AffineSimilarity motion_from_json(const json& j) {
  return {j.at("a").get<double>(), j.at("b").get<double>(), j.at("tx").get<double>(), j.at("ty").get<double>()};
}

inline void check_header(const json& j, const char* format) {
  if (!j.is_object() || j.value("format", "") != format)
    throw Error(ErrorCode::FormatError, std::string("expected a ") + format + " document");
  if (j.value("version", 0) != kFormatVersion)
    throw Error(ErrorCode::FormatError, std::string(format) + ": unsupported version");
}

inline json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError, where + ": " + e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FormatError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FormatError, "cannot write " + path.string());
  out << text;
}

/// Re-throws json access errors as FormatError tagged with a location.
template <typename Fn>
auto with_location(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, where + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::FormatError) throw Error(ErrorCode::FormatError, where + ": " + e.message());
    throw;
  }
}

// ---- template ----

inline json template_to_json(const FieldTemplate& t) {
  json kps = json::array();
  for (const auto& k : t.keypoints()) kps.push_back({{"id", k.id}, {"x", k.position.x}, {"y", k.position.y}});
  return {{"format", "fieldtrack-template"}, {"version", kFormatVersion}, {"id", t.id()},
          {"width_m", t.width_m()},        {"height_m", t.height_m()},    {"keypoints", kps}};
}

/// Either a full template document or {"grid": [cols, rows]} for a uniform grid.
inline FieldTemplate template_from_json(const json& j) {
  return with_location("template", [&] {
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      return FieldTemplate::uniform_grid(g.at(0).get<int>(), g.at(1).get<int>(), j.value("width_m", 105.0),
                                         j.value("height_m", 68.0));
    }
    check_header(j, "fieldtrack-template");
    std::vector<TemplateKeypoint> kps;
    for (const auto& k : j.at("keypoints")) kps.push_back({k.at("id").get<int>(), {k.at("x").get<double>(), k.at("y").get<double>()}});
    return FieldTemplate(std::move(kps), j.value("width_m", 105.0), j.value("height_m", 68.0), j.at("id").get<std::string>());
  });
}

// ---- sequences (JSON lines: header, then one frame per line) ----

inline json sequence_header_to_json(const SequenceHeader& h) {
  return {{"format", "fieldtrack-sequence"},
          {"version", kFormatVersion},
          {"sequence_id", h.sequence_id},
          {"template_id", h.template_id},
          {"image", {{"width", h.dims.width_px}, {"height", h.dims.height_px}}}};
}

inline json record_to_json(const SequenceRecord& r) {
  json j = {{"frame", r.frame_index}, {"measurements", observations_to_json(r.measurements)}};
  if (r.gt_homography) j["gt_homography"] = homography_to_json(*r.gt_homography);
  if (r.gt_keypoints) j["gt_keypoints"] = observations_to_json(*r.gt_keypoints);
  if (r.motion) j["motion"] = motion_to_json(*r.motion);
  if (r.gt_motion) j["gt_motion"] = motion_to_json(*r.gt_motion);
  if (!r.correspondences.empty()) {
    json c = json::array();
    for (const auto& p : r.correspondences) c.push_back({p.prev.x, p.prev.y, p.curr.x, p.curr.y});
    j["correspondences"] = std::move(c);
  }
  return j;
}

inline SequenceRecord record_from_json(const json& j) {
  SequenceRecord r;
  r.frame_index = j.at("frame").get<int>();
  r.measurements = observations_from_json(j.at("measurements"));
  if (j.contains("gt_homography")) r.gt_homography = homography_from_json(j.at("gt_homography"));
  if (j.contains("gt_keypoints")) r.gt_keypoints = observations_from_json(j.at("gt_keypoints"));
  if (j.contains("motion")) r.motion = motion_from_json(j.at("motion"));
  if (j.contains("gt_motion")) r.gt_motion = motion_from_json(j.at("gt_motion"));
  if (j.contains("correspondences")) {
    for (const auto& c : j.at("correspondences")) {
      if (!c.is_array() || c.size() != 4) throw Error(ErrorCode::FormatError, "correspondence needs 4 numbers");
      r.correspondences.push_back({{c[0].get<double>(), c[1].get<double>()}, {c[2].get<double>(), c[3].get<double>()}});
    }
  }
  return r;
}

/// Streams records one line at a time; errors carry the line number.
class SequenceReader {
 public:
  SequenceReader(std::istream& in, std::string name = "sequence") : in_(in), name_(std::move(name)) {
    std::string line;
    if (!next_line(line)) throw Error(ErrorCode::FormatError, name_ + ": empty sequence file");
    const json j = parse_json(line, where());
    header_ = with_location(where(), [&] {
      check_header(j, "fieldtrack-sequence");
      SequenceHeader h;
      h.sequence_id = j.at("sequence_id").get<std::string>();
      h.template_id = j.value("template_id", "");
      h.dims = {j.at("image").at("width").get<int>(), j.at("image").at("height").get<int>()};
      if (h.dims.width_px <= 0 || h.dims.height_px <= 0) throw Error(ErrorCode::FormatError, "image dims must be positive");
      return h;
    });
  }

  const SequenceHeader& header() const { return header_; }

  std::optional<SequenceRecord> next() {
    std::string line;
    if (!next_line(line)) return std::nullopt;
    const json j = parse_json(line, where());
    auto r = with_location(where(), [&] { return record_from_json(j); });
    if (last_ && r.frame_index <= *last_)
      throw Error(ErrorCode::FormatError, where() + ": frame indices must be strictly increasing");
    last_ = r.frame_index;
    return r;
  }

 private:
  bool next_line(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }

  std::string where() const { return name_ + ":" + std::to_string(line_no_); }

  std::istream& in_;
  std::string name_;
  std::size_t line_no_ = 0;
  SequenceHeader header_;
  std::optional<int> last_;
};

inline Sequence read_sequence(std::istream& in, const std::string& name = "sequence") {
  SequenceReader reader(in, name);
  Sequence s;
  s.header = reader.header();
  while (auto r = reader.next()) s.records.push_back(std::move(*r));
  return s;
}

inline Sequence read_sequence_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FormatError, "cannot open " + path.string());
  return read_sequence(in, path.string());
}

inline void write_sequence(std::ostream& out, const Sequence& s) {
  out << sequence_header_to_json(s.header).dump() << '\n';
  for (const auto& r : s.records) out << record_to_json(r).dump() << '\n';
}

// ---- covariance bank ----

inline json bank_to_json(const CovarianceBank& b) {
  json kps = json::array();
  for (std::size_t i = 0; i < b.keypoint_ids.size(); ++i) {
    kps.push_back({{"id", b.keypoint_ids[i]},
                   {"sigma_i", matrix_to_json(b.sigma_i[i])},
                   {"sigma_m", matrix_to_json(b.sigma_m[i])},
                   {"samples_i", b.samples_i[i]},
                   {"samples_m", b.samples_m[i]},
                   {"pooled_fallback_i", static_cast<bool>(b.fallback_i[i])},
                   {"pooled_fallback_m", static_cast<bool>(b.fallback_m[i])}});
  }
  return {{"format", "fieldtrack-covariance-bank"},
          {"version", kFormatVersion},
          {"matrix_layout", "row-major"},
          {"homography_ordering", kHomographyOrdering},
          {"homography_parameters", kHomographyParamNames},
          {"keypoints", kps},
          {"sigma_h", matrix_to_json(b.sigma_h)},
          {"samples_h", b.samples_h},
          {"h0_cov", matrix_to_json(b.h0_cov)},
          {"samples_h0", b.samples_h0}};
}

inline CovarianceBank bank_from_json(const json& j) {
  return with_location("covariance bank", [&] {
    check_header(j, "fieldtrack-covariance-bank");
    if (j.at("homography_ordering").get<std::string>() != kHomographyOrdering)
      throw Error(ErrorCode::FormatError, "unsupported homography parameter ordering");
    CovarianceBank b;
    for (const auto& k : j.at("keypoints")) {
      b.keypoint_ids.push_back(k.at("id").get<int>());
      b.sigma_i.push_back(matrix_from_json(k.at("sigma_i"), 2, 2, "sigma_i"));
      b.sigma_m.push_back(matrix_from_json(k.at("sigma_m"), 2, 2, "sigma_m"));
      b.samples_i.push_back(k.value("samples_i", std::int64_t{0}));
      b.samples_m.push_back(k.value("samples_m", std::int64_t{0}));
      b.fallback_i.push_back(k.value("pooled_fallback_i", false));
      b.fallback_m.push_back(k.value("pooled_fallback_m", false));
    }
    b.sigma_h = matrix_from_json(j.at("sigma_h"), 8, 8, "sigma_h");
    b.h0_cov = matrix_from_json(j.at("h0_cov"), 8, 8, "h0_cov");
    b.samples_h = j.value("samples_h", std::int64_t{0});
    b.samples_h0 = j.value("samples_h0", std::int64_t{0});
    return b;
  });
}

// ---- predictions (JSON lines) ----

struct PredictionHeader {
  std::string sequence_id;
  std::string template_id;
  std::string method;  // filter | ransac
};

inline json estimate_to_json(const FrameEstimate& e) {
  json j = {{"frame", e.frame_index}, {"status", e.status}};
  j["homography"] = e.homography ? homography_to_json(*e.homography) : json(nullptr);
  j["keypoints"] = observations_to_json(e.keypoints);
  j["flags"] = e.flags;
  j["condition"] = e.condition ? json(*e.condition) : json(nullptr);
  j["motion_source"] = e.motion_source;
  return j;
}

inline FrameEstimate estimate_from_json(const json& j) {
  FrameEstimate e;
  e.frame_index = j.at("frame").get<int>();
  e.status = j.at("status").get<std::string>();
  if (!j.at("homography").is_null()) e.homography = homography_from_json(j.at("homography"));
  e.keypoints = observations_from_json(j.at("keypoints"));
  e.flags = j.value("flags", std::vector<std::string>{});
  if (j.contains("condition") && !j.at("condition").is_null()) e.condition = j.at("condition").get<double>();
  e.motion_source = j.value("motion_source", "");
  return e;
}

inline void write_predictions(std::ostream& out, const PredictionHeader& h, const std::vector<FrameEstimate>& frames) {
  out << json{{"format", "fieldtrack-predictions"},
              {"version", kFormatVersion},
              {"sequence_id", h.sequence_id},
              {"template_id", h.template_id},
              {"method", h.method}}
             .dump()
      << '\n';
  for (const auto& f : frames) out << estimate_to_json(f).dump() << '\n';
}

inline std::vector<FrameEstimate> read_predictions(std::istream& in, const std::string& name = "predictions",
                                                   PredictionHeader* header = nullptr) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<FrameEstimate> out;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    const json j = parse_json(line, where);
    with_location(where, [&] {
      if (!have_header) {
        check_header(j, "fieldtrack-predictions");
        if (header) *header = {j.at("sequence_id").get<std::string>(), j.value("template_id", ""), j.value("method", "")};
        have_header = true;
      } else {
        out.push_back(estimate_from_json(j));
      }
    });
  }
  if (!have_header) throw Error(ErrorCode::FormatError, name + ": empty predictions file");
  return out;
}

// ---- metrics report ----

inline json report_to_json(const MetricsReport& r, const std::string& sequence_id, const std::string& method) {
  json agg = json::object();
  for (const auto& name : report_metric_names()) {
    const auto& s = r.aggregates.at(name);
    agg[name] = {{"mean", s.mean}, {"median", s.median}, {"count", s.count}};
  }
  json frames = json::array();
  for (const auto& f : r.frames) {
    json values = json::object();
    for (const auto& [k, v] : f.values) values[k] = v;
    frames.push_back({{"frame", f.frame_index}, {"status", f.status}, {"metrics", values}, {"flags", f.flags}});
  }
  json degenerate = json::object();
  for (const auto& name : report_metric_names()) {
    const auto it = r.degenerate.find(name);
    degenerate[name] = it == r.degenerate.end() ? 0 : it->second;
  }
  return {{"format", "fieldtrack-metrics-report"},
          {"version", kFormatVersion},
          {"sequence_id", sequence_id},
          {"method", method},
          {"counts", {{"frames", r.frames.size()}, {"evaluated", r.evaluated}, {"pre_init", r.pre_init},
                      {"no_estimate", r.no_estimate}, {"degenerate", degenerate}}},
          {"aggregates", agg},
          {"frames", frames}};
}

// ---- pipeline config ----

struct SimSettings {
  int n_frames = 200;
  std::string sequence_id = "sim";
  BroadcastCamera camera;
  PanPath pan;
  SimNoise noise;
  double dropout_rate = 0.0;
  int n_correspondences = 0;
  double correspondence_outlier_rate = 0.0;
  double correspondence_noise_px = 0.0;
};

struct PipelineConfig {
  std::filesystem::path base_dir;
  FieldTemplate tmpl = FieldTemplate::uniform_grid(13, 7);
  std::optional<std::filesystem::path> bank_path;
  std::uint64_t seed = 0;
  FilterOptions filter;
  CalibrationConfig calibration;
  EvaluateOptions evaluate;
  SimSettings simulation;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : base_dir / p; }

  /// Propagates the run seed into every seeded component.
  void set_seed(std::uint64_t s) {
    seed = s;
    filter.ransac.seed = s;
    filter.motion.seed = s;
    calibration.ransac.seed = s;
    evaluate.seed = s;
  }

  SimConfig sim_config() const {
    SimConfig c;
    c.tmpl = tmpl;
    c.n_frames = simulation.n_frames;
    c.initial_homography = broadcast_homography(simulation.camera, c.dims);
    c.pan = simulation.pan;
    c.noise = simulation.noise;
    c.dropout_rate = simulation.dropout_rate;
    c.n_correspondences = simulation.n_correspondences;
    c.correspondence_outlier_rate = simulation.correspondence_outlier_rate;
    c.correspondence_noise_px = simulation.correspondence_noise_px;
    c.seed = seed;
    c.sequence_id = simulation.sequence_id;
    return c;
  }
};

namespace detail {

inline Eigen::Matrix2d mat2_from(const json& j, const std::string& what) {
  return matrix_from_json(j, 2, 2, what);
}

/// "sigma_h" as a full 8x8 matrix, or "sigma_h_relative": r giving
/// diag((r |h0_k|)^2) around the initial homography.
inline Mat8 sigma_h_from(const json& sim, const Homography& h0) {
  if (sim.contains("sigma_h")) return matrix_from_json(sim.at("sigma_h"), 8, 8, "sigma_h");
  if (sim.contains("sigma_h_relative")) {
    const double r = sim.at("sigma_h_relative").get<double>();
    return (r * h0.params().cwiseAbs()).cwiseAbs2().asDiagonal();
  }
  return Mat8::Zero();
}

}  // namespace detail

inline PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  return with_location("config", [&] {
    check_header(j, "fieldtrack-config");
    PipelineConfig c;
    c.base_dir = base_dir;
    if (j.contains("template")) {
      const auto& t = j.at("template");
      c.tmpl = t.is_string() ? template_from_json(parse_json(read_file(c.resolve(t.get<std::string>())), "template"))
                             : template_from_json(t);
    }
    if (j.contains("bank")) c.bank_path = c.resolve(j.at("bank").get<std::string>());
    if (j.contains("ransac")) {
      const auto& r = j.at("ransac");
      c.filter.ransac.inlier_threshold_px = r.value("inlier_threshold_px", c.filter.ransac.inlier_threshold_px);
      c.filter.ransac.max_iters = r.value("max_iters", c.filter.ransac.max_iters);
      c.filter.ransac.confidence = r.value("confidence", c.filter.ransac.confidence);
    }
    if (j.contains("motion")) {
      const auto& m = j.at("motion");
      if (m.contains("source")) c.filter.motion_source = parse_motion_source(m.at("source").get<std::string>());
      c.filter.motion.inlier_threshold_px = m.value("inlier_threshold_px", c.filter.motion.inlier_threshold_px);
      c.filter.motion.max_iters = m.value("max_iters", c.filter.motion.max_iters);
      c.filter.motion.confidence = m.value("confidence", c.filter.motion.confidence);
      c.filter.motion.mad_multiplier = m.value("mad_multiplier", c.filter.motion.mad_multiplier);
    }
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      const std::string mode = f.value("ekf_update_mode", "current-frame");
      if (mode == "current-frame") c.filter.ekf_update_mode = EkfUpdateMode::CurrentFrame;
      else if (mode == "all-ever-measured") c.filter.ekf_update_mode = EkfUpdateMode::AllEverMeasured;
      else throw Error(ErrorCode::FormatError, "unknown ekf_update_mode '" + mode + "'");
      const std::string init = f.value("lkf_init", "first-observation");
      if (init == "first-observation") c.filter.lkf_init = LkfInit::FirstObservation;
      else if (init == "initial-homography") c.filter.lkf_init = LkfInit::InitialHomography;
      else throw Error(ErrorCode::FormatError, "unknown lkf_init '" + init + "'");
      c.filter.update.max_condition = f.value("max_condition", c.filter.update.max_condition);
    }
    c.calibration.ransac = c.filter.ransac;
    if (j.contains("calibration")) c.calibration.min_samples = j.at("calibration").value("min_samples", c.calibration.min_samples);
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      c.evaluate.projection_samples = m.value("projection_samples", c.evaluate.projection_samples);
      c.evaluate.pr_threshold_px = m.value("pr_threshold_px", c.evaluate.pr_threshold_px);
    }
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      auto& o = c.simulation;
      o.n_frames = s.value("n_frames", o.n_frames);
      o.sequence_id = s.value("sequence_id", o.sequence_id);
      if (s.contains("camera")) {
        const auto& cam = s.at("camera");
        auto vec3 = [](const json& a) { return Eigen::Vector3d(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()); };
        if (cam.contains("position")) o.camera.position = vec3(cam.at("position"));
        if (cam.contains("look_at")) o.camera.look_at = vec3(cam.at("look_at"));
        o.camera.focal_px = cam.value("focal_px", o.camera.focal_px);
      }
      if (s.contains("pan")) {
        const auto& p = s.at("pan");
        o.pan.pan_px = p.value("pan_px", o.pan.pan_px);
        o.pan.tilt_px = p.value("tilt_px", o.pan.tilt_px);
        o.pan.rotation_rad = p.value("rotation_rad", o.pan.rotation_rad);
        o.pan.zoom = p.value("zoom", o.pan.zoom);
        o.pan.period_frames = p.value("period_frames", o.pan.period_frames);
        o.pan.phase = p.value("phase", o.pan.phase);
      }
      if (s.contains("sigma_m")) o.noise.sigma_m = detail::mat2_from(s.at("sigma_m"), "sigma_m");
      if (s.contains("sigma_f")) o.noise.sigma_f = detail::mat2_from(s.at("sigma_f"), "sigma_f");
      o.noise.sigma_h = detail::sigma_h_from(s, broadcast_homography(o.camera, ImageDims{}));
      o.dropout_rate = s.value("dropout_rate", o.dropout_rate);
      o.n_correspondences = s.value("n_correspondences", o.n_correspondences);
      o.correspondence_outlier_rate = s.value("correspondence_outlier_rate", o.correspondence_outlier_rate);
      o.correspondence_noise_px = s.value("correspondence_noise_px", o.correspondence_noise_px);
    }
    c.set_seed(j.value("seed", std::uint64_t{0}));
    return c;
  });
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return config_from_json(parse_json(read_file(path), path.string()), path.parent_path());
}

}  // namespace fieldtrack::io
