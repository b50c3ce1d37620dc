#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fieldtrack/io.hpp"
#include "test_support.hpp"

using namespace fieldtrack;
namespace fs = std::filesystem;

namespace {

fs::path data(const std::string& name) { return fs::path(FIELDTRACK_TEST_DATA) / name; }

io::json load_json(const std::string& name) { return io::parse_json(io::read_file(data(name)), name); }

// Returns the message of the FormatError thrown by fn, or fails.
template <typename Fn>
std::string format_error(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no error thrown";
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST(TemplateJson, GoldenFile) {
  const auto t = io::template_from_json(load_json("template_small.json"));
  EXPECT_EQ(t.id(), "small-4");
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t.at(3).id, 7);
  EXPECT_EQ(t.at(3).position, (Point2{52.5, 34.0}));
  EXPECT_EQ(t.index_of(7), 3u);
}

TEST(TemplateJson, RoundTripAndGridShorthand) {
  const auto grid = io::template_from_json(io::json{{"grid", {13, 7}}});
  EXPECT_EQ(grid.size(), 91u);
  EXPECT_EQ(grid.id(), "uniform-13x7");
  const auto back = io::template_from_json(io::template_to_json(grid));
  ASSERT_EQ(back.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(back.at(i).id, grid.at(i).id);
    EXPECT_EQ(back.at(i).position, grid.at(i).position);
  }
  EXPECT_EQ(back.id(), grid.id());
}

TEST(TemplateJson, RejectsWrongFormat) {
  auto j = load_json("template_small.json");
  j["format"] = "something-else";
  format_error([&] { io::template_from_json(j); });
  j = load_json("template_small.json");
  j["version"] = 2;
  EXPECT_TRUE(contains(format_error([&] { io::template_from_json(j); }), "version"));
}

TEST(SequenceJsonl, GoldenFile) {
  const auto s = io::read_sequence_file(data("sequence_small.jsonl"));
  EXPECT_EQ(s.header.sequence_id, "golden");
  EXPECT_EQ(s.header.template_id, "small-4");
  EXPECT_EQ(s.header.dims.width_px, 1280);
  EXPECT_EQ(s.header.dims.height_px, 720);
  ASSERT_EQ(s.records.size(), 3u);  // blank line skipped

  const auto& r0 = s.records[0];
  EXPECT_EQ(r0.frame_index, 0);
  ASSERT_EQ(r0.measurements.size(), 3u);
  EXPECT_EQ(r0.measurements[2].id, 7);
  ASSERT_TRUE(r0.gt_homography);
  // Row-major on disk.
  EXPECT_EQ(r0.gt_homography->matrix()(0, 2), 100.0);
  EXPECT_EQ(r0.gt_homography->matrix()(1, 1), -10.0);
  ASSERT_TRUE(r0.gt_keypoints);
  EXPECT_EQ(r0.gt_keypoints->size(), 2u);
  EXPECT_FALSE(r0.motion);

  const auto& r1 = s.records[1];
  EXPECT_TRUE(r1.measurements.empty());
  ASSERT_TRUE(r1.motion);
  EXPECT_EQ(*r1.motion, AffineSimilarity::translation(2.5, -1.0));
  ASSERT_TRUE(r1.gt_motion);
  ASSERT_EQ(r1.correspondences.size(), 2u);
  EXPECT_EQ(r1.correspondences[1].curr, (Point2{302.5, 399.0}));
  EXPECT_FALSE(r1.gt_homography);

  EXPECT_EQ(s.records[2].frame_index, 3);
}

TEST(SequenceJsonl, RoundTripIsExact) {
  const auto s = io::read_sequence_file(data("sequence_small.jsonl"));
  std::stringstream first;
  io::write_sequence(first, s);
  const auto back = io::read_sequence(first);
  std::stringstream second;
  io::write_sequence(second, back);
  EXPECT_EQ(first.str(), second.str());
}

TEST(SequenceJsonl, SimulatedRoundTripPreservesDoubles) {
  auto cfg = fixtures::broadcast_config(20, 3);
  cfg.noise.sigma_m = Eigen::Matrix2d::Identity() * 3.3;
  cfg.n_correspondences = 5;
  const auto seq = to_sequence(generate_sequence(cfg), cfg);
  std::stringstream ss;
  io::write_sequence(ss, seq);
  const auto back = io::read_sequence(ss);
  ASSERT_EQ(back.records.size(), seq.records.size());
  for (std::size_t k = 0; k < seq.records.size(); ++k) {
    EXPECT_EQ(back.records[k].gt_homography->matrix(), seq.records[k].gt_homography->matrix());
    ASSERT_EQ(back.records[k].measurements.size(), seq.records[k].measurements.size());
    for (std::size_t i = 0; i < seq.records[k].measurements.size(); ++i)
      EXPECT_EQ(back.records[k].measurements[i].position, seq.records[k].measurements[i].position);
    EXPECT_EQ(back.records[k].correspondences.size(), seq.records[k].correspondences.size());
  }
}

TEST(SequenceJsonl, ErrorsCarryLineNumbers) {
  const auto order = format_error([] { io::read_sequence_file(data("sequence_bad_order.jsonl")); });
  EXPECT_TRUE(contains(order, "sequence_bad_order.jsonl:4")) << order;
  EXPECT_TRUE(contains(order, "increasing")) << order;

  const auto syntax = format_error([] { io::read_sequence_file(data("sequence_bad_json.jsonl")); });
  EXPECT_TRUE(contains(syntax, "sequence_bad_json.jsonl:3")) << syntax;

  const auto record = format_error([] { io::read_sequence_file(data("sequence_bad_record.jsonl")); });
  EXPECT_TRUE(contains(record, "sequence_bad_record.jsonl:2")) << record;
  EXPECT_TRUE(contains(record, "9 entries")) << record;
}

TEST(SequenceJsonl, HeaderProblems) {
  std::istringstream empty("\n\n");
  EXPECT_TRUE(contains(format_error([&] { io::read_sequence(empty, "e"); }), "empty"));
  std::istringstream wrong(R"({"format":"fieldtrack-predictions","version":1})" "\n");
  EXPECT_TRUE(contains(format_error([&] { io::read_sequence(wrong, "w"); }), "w:1"));
  std::istringstream dims(R"({"format":"fieldtrack-sequence","version":1,"sequence_id":"s","image":{"width":0,"height":10}})" "\n");
  EXPECT_TRUE(contains(format_error([&] { io::read_sequence(dims, "d"); }), "positive"));
}

TEST(SequenceJsonl, StreamingReaderYieldsRecordsLazily) {
  std::ifstream in(data("sequence_bad_order.jsonl"));
  io::SequenceReader reader(in, "lazy");
  EXPECT_EQ(reader.header().sequence_id, "bad");
  EXPECT_EQ(reader.next()->frame_index, 0);
  EXPECT_EQ(reader.next()->frame_index, 2);
  EXPECT_THROW(reader.next(), Error);
}

TEST(BankJson, GoldenFile) {
  const auto b = io::bank_from_json(load_json("bank_small.json"));
  ASSERT_EQ(b.keypoint_ids.size(), 4u);
  EXPECT_EQ(b.keypoint_ids[3], 7);
  EXPECT_EQ(b.sigma_m[0](0, 1), 0.5);
  EXPECT_EQ(b.sigma_m[0](1, 1), 2.0);
  EXPECT_EQ(b.sigma_i[2](0, 0), 0.25);
  EXPECT_EQ(b.samples_m[1], 20);
  EXPECT_TRUE(b.fallback_i[3]);
  EXPECT_FALSE(b.fallback_i[0]);
  EXPECT_EQ(b.sigma_h(4, 4), 1e-6);
  EXPECT_EQ(b.h0_cov(7, 7), 1e-4);
  EXPECT_EQ(b.samples_h, 99);
  EXPECT_EQ(b.samples_h0, 12);
}

TEST(BankJson, RoundTripIsBitExact) {
  const auto tmpl = FieldTemplate::uniform_grid(4, 3);
  Mat8 sh = Mat8::Identity() * (1.0 / 3.0);
  sh(0, 7) = sh(7, 0) = 1e-17;
  auto b = CovarianceBank::uniform(tmpl, Eigen::Matrix2d::Identity() * 0.1, Eigen::Matrix2d::Identity() * 7.7, sh,
                                   Mat8::Identity() * 2e-5);
  b.sigma_m[3](0, 1) = b.sigma_m[3](1, 0) = -0.3;
  const auto back = io::bank_from_json(io::parse_json(io::bank_to_json(b).dump(2), "bank"));
  EXPECT_EQ(back.keypoint_ids, b.keypoint_ids);
  for (std::size_t i = 0; i < b.keypoint_ids.size(); ++i) {
    EXPECT_EQ(back.sigma_i[i], b.sigma_i[i]);
    EXPECT_EQ(back.sigma_m[i], b.sigma_m[i]);
  }
  EXPECT_EQ(back.sigma_h, b.sigma_h);
  EXPECT_EQ(back.h0_cov, b.h0_cov);
}

TEST(BankJson, DocumentsParameterOrdering) {
  const auto j = io::bank_to_json(io::bank_from_json(load_json("bank_small.json")));
  EXPECT_EQ(j.at("homography_parameters").at(2), "h31");
  EXPECT_EQ(j.at("homography_parameters").at(6), "h13");
  EXPECT_EQ(j.at("matrix_layout"), "row-major");
}

TEST(BankJson, RejectsBadShapesAndOrdering) {
  auto j = load_json("bank_small.json");
  j["homography_ordering"] = "row-stacked";
  EXPECT_TRUE(contains(format_error([&] { io::bank_from_json(j); }), "ordering"));
  j = load_json("bank_small.json");
  j["sigma_h"].erase(0);
  EXPECT_TRUE(contains(format_error([&] { io::bank_from_json(j); }), "sigma_h"));
  j = load_json("bank_small.json");
  j["keypoints"][1]["sigma_m"][0][1] = "x";
  EXPECT_TRUE(contains(format_error([&] { io::bank_from_json(j); }), "non-numeric"));
  j = load_json("bank_small.json");
  j["keypoints"][0].erase("sigma_i");
  format_error([&] { io::bank_from_json(j); });
}

TEST(PredictionsJsonl, GoldenFileAndRoundTrip) {
  std::ifstream in(data("predictions_small.jsonl"));
  io::PredictionHeader h;
  const auto p = io::read_predictions(in, "golden", &h);
  EXPECT_EQ(h.sequence_id, "golden");
  EXPECT_EQ(h.method, "filter");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].status, "pre-init");
  EXPECT_FALSE(p[0].homography);
  EXPECT_FALSE(p[0].condition);
  EXPECT_EQ(p[0].flags, std::vector<std::string>{"init-failed"});
  ASSERT_TRUE(p[1].homography);
  EXPECT_EQ(p[1].homography->matrix()(1, 2), 600.0);
  EXPECT_EQ(*p[1].condition, 12.5);
  EXPECT_EQ(p[1].motion_source, "provided");

  std::stringstream first;
  io::write_predictions(first, h, p);
  io::PredictionHeader h2;
  const auto back = io::read_predictions(first, "again", &h2);
  std::stringstream second;
  io::write_predictions(second, h2, back);
  EXPECT_EQ(first.str(), second.str());
}

TEST(PredictionsJsonl, Errors) {
  std::istringstream empty("");
  EXPECT_TRUE(contains(format_error([&] { io::read_predictions(empty, "p"); }), "empty"));
  std::istringstream bad(R"({"format":"fieldtrack-predictions","version":1,"sequence_id":"s"})" "\n"
                         R"({"frame":0,"status":"ok","homography":[1,2],"keypoints":[]})" "\n");
  EXPECT_TRUE(contains(format_error([&] { io::read_predictions(bad, "p"); }), "p:2"));
}

TEST(ReportJson, HasEveryMetricColumn) {
  const auto tmpl = FieldTemplate::uniform_grid(13, 7);
  auto cfg = fixtures::broadcast_config(5, 1);
  cfg.tmpl = tmpl;
  const auto seq = to_sequence(generate_sequence(cfg), cfg);
  std::vector<FrameEstimate> pred;
  for (const auto& r : seq.records) {
    FrameEstimate e;
    e.frame_index = r.frame_index;
    e.status = "ok";
    e.homography = r.gt_homography;
    e.keypoints = *r.gt_keypoints;
    pred.push_back(e);
  }
  const auto report = run_evaluate(pred, seq, tmpl);
  const auto j = io::report_to_json(report, "s", "filter");
  for (const auto& name : report_metric_names()) {
    ASSERT_TRUE(j.at("aggregates").contains(name)) << name;
    EXPECT_TRUE(j["aggregates"][name].contains("mean"));
    EXPECT_TRUE(j["aggregates"][name].contains("median"));
    EXPECT_TRUE(j["counts"]["degenerate"].contains(name));
  }
  EXPECT_EQ(j["counts"]["frames"], 5);
  EXPECT_EQ(j["frames"].size(), 5u);
}

TEST(ConfigJson, FullGoldenConfig) {
  const auto c = io::load_config(data("config_full.json"));
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.tmpl.id(), "small-4");
  ASSERT_TRUE(c.bank_path);
  EXPECT_EQ(*c.bank_path, data("bank_small.json"));
  EXPECT_EQ(c.filter.ransac.inlier_threshold_px, 7.5);
  EXPECT_EQ(c.filter.ransac.max_iters, 500);
  EXPECT_EQ(c.filter.ransac.confidence, 0.95);
  EXPECT_EQ(c.filter.motion_source, MotionSource::Estimate);
  EXPECT_EQ(c.filter.motion.mad_multiplier, 4.0);
  EXPECT_EQ(c.filter.ekf_update_mode, EkfUpdateMode::AllEverMeasured);
  EXPECT_EQ(c.filter.lkf_init, LkfInit::InitialHomography);
  EXPECT_EQ(c.filter.update.max_condition, 1e10);
  EXPECT_EQ(c.calibration.min_samples, 7);
  EXPECT_EQ(c.calibration.ransac.inlier_threshold_px, 7.5);
  EXPECT_EQ(c.evaluate.projection_samples, 1234);
  EXPECT_EQ(c.evaluate.pr_threshold_px, 15.0);

  // The run seed reaches every seeded component.
  EXPECT_EQ(c.filter.ransac.seed, 42u);
  EXPECT_EQ(c.filter.motion.seed, 42u);
  EXPECT_EQ(c.calibration.ransac.seed, 42u);
  EXPECT_EQ(c.evaluate.seed, 42u);

  const auto& s = c.simulation;
  EXPECT_EQ(s.n_frames, 33);
  EXPECT_EQ(s.sequence_id, "cfg-sim");
  EXPECT_EQ(s.camera.focal_px, 1400.0);
  EXPECT_EQ(s.pan.phase, 0.25);
  EXPECT_EQ(s.noise.sigma_m(0, 1), 0.5);
  EXPECT_EQ(s.dropout_rate, 0.1);
  EXPECT_EQ(s.n_correspondences, 40);

  // sigma_h_relative is diag((r |h0_k|)^2) around the configured camera.
  const Vec8 h0 = broadcast_homography(s.camera, ImageDims{}).params();
  for (int k = 0; k < 8; ++k) EXPECT_DOUBLE_EQ(s.noise.sigma_h(k, k), std::pow(1e-3 * h0(k), 2));

  const auto sim = c.sim_config();
  EXPECT_EQ(sim.seed, 42u);
  EXPECT_EQ(sim.n_frames, 33);
  EXPECT_EQ(sim.tmpl.id(), "small-4");
}

TEST(ConfigJson, DefaultsAndErrors) {
  const auto c = io::config_from_json(io::json{{"format", "fieldtrack-config"}, {"version", 1}}, ".");
  EXPECT_EQ(c.tmpl.size(), 91u);
  EXPECT_EQ(c.seed, 0u);
  EXPECT_FALSE(c.bank_path);
  EXPECT_EQ(c.filter.motion_source, MotionSource::Provided);
  EXPECT_EQ(c.simulation.noise.sigma_h, Mat8::Zero());

  io::json bad{{"format", "fieldtrack-config"}, {"version", 1}, {"filter", {{"ekf_update_mode", "sometimes"}}}};
  EXPECT_TRUE(contains(format_error([&] { io::config_from_json(bad, "."); }), "sometimes"));
  bad = {{"format", "fieldtrack-config"}, {"version", 1}, {"simulation", {{"sigma_m", {{1.0, 0.0}}}}}};
  EXPECT_TRUE(contains(format_error([&] { io::config_from_json(bad, "."); }), "sigma_m"));
  EXPECT_THROW(io::load_config(data("missing.json")), Error);
}

TEST(ConfigJson, CliGoldenConfigLoads) {
  const auto c = io::load_config(data("config_cli.json"));
  EXPECT_EQ(c.tmpl.id(), "uniform-13x7");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.filter.ransac.inlier_threshold_px, 10.0);
  EXPECT_EQ(c.simulation.n_frames, 60);
  EXPECT_GT(c.simulation.noise.sigma_h(0, 0), 0.0);
}
