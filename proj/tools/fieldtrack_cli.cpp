// fieldtrack: simulate, calibrate, filter, baseline and evaluate.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fieldtrack/fieldtrack.hpp"

namespace fs = std::filesystem;
using namespace fieldtrack;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::optional<std::string> motion_source;
};

io::PipelineConfig load(const Common& c) {
  auto cfg = io::load_config(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  if (c.motion_source) cfg.filter.motion_source = parse_motion_source(*c.motion_source);
  return cfg;
}

void check_template(const Sequence& seq, const FieldTemplate& tmpl) {
  if (!seq.header.template_id.empty() && seq.header.template_id != tmpl.id())
    throw Error(ErrorCode::FormatError, "sequence '" + seq.header.sequence_id + "' uses template '" +
                                            seq.header.template_id + "', config has '" + tmpl.id() + "'");
}

void write_text(const std::string& path, const std::string& text) { io::write_file(path, text); }

int cmd_simulate(const Common& c, std::optional<int> frames) {
  auto cfg = load(c);
  if (frames) cfg.simulation.n_frames = *frames;
  const SimConfig sim = cfg.sim_config();
  const auto seq = to_sequence(generate_sequence(sim), sim);
  std::ostringstream out;
  io::write_sequence(out, seq);
  write_text(c.output, out.str());
  return 0;
}

int cmd_calibrate(const Common& c, const std::vector<std::string>& inputs) {
  const auto cfg = load(c);
  std::vector<Sequence> seqs;
  for (const auto& in : inputs) {
    seqs.push_back(io::read_sequence_file(in));
    check_template(seqs.back(), cfg.tmpl);
  }
  const auto bank = run_calibrate(seqs, cfg.tmpl, cfg.filter, cfg.calibration);
  write_text(c.output, io::bank_to_json(bank).dump(2) + "\n");
  return 0;
}

CovarianceBank load_bank(const io::PipelineConfig& cfg, const std::optional<std::string>& flag) {
  std::optional<fs::path> path = flag ? std::optional<fs::path>(*flag) : cfg.bank_path;
  if (!path) throw Error(ErrorCode::InvalidArgument, "no covariance bank given (--bank or config \"bank\")");
  return io::bank_from_json(io::parse_json(io::read_file(*path), path->string()));
}

int cmd_filter(const Common& c, const std::string& input, const std::optional<std::string>& bank_flag) {
  const auto cfg = load(c);
  const auto bank = load_bank(cfg, bank_flag);
  std::ifstream in(input, std::ios::binary);
  if (!in) throw Error(ErrorCode::FormatError, "cannot open " + input);
  io::SequenceReader reader(in, input);
  Sequence shell{reader.header(), {}};
  check_template(shell, cfg.tmpl);

  TwoStageFilter filter(cfg.tmpl, bank, cfg.filter);
  std::vector<FrameEstimate> out;
  while (auto r = reader.next()) out.push_back(filter.step(*r));

  std::ostringstream text;
  io::write_predictions(text, {reader.header().sequence_id, cfg.tmpl.id(), "filter"}, out);
  write_text(c.output, text.str());
  if (!filter.initialized()) {
    std::cerr << "error: " << to_string(ErrorCode::NoInitializableFrame) << ": no frame allowed initialization\n";
    return 2;
  }
  return 0;
}

int cmd_baseline(const Common& c, const std::string& input) {
  const auto cfg = load(c);
  const auto seq = io::read_sequence_file(input);
  check_template(seq, cfg.tmpl);
  const auto out = run_ransac_baseline(cfg.tmpl, cfg.filter.ransac, seq.records);
  std::ostringstream text;
  io::write_predictions(text, {seq.header.sequence_id, cfg.tmpl.id(), "ransac"}, out);
  write_text(c.output, text.str());
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& input, const std::string& predictions) {
  const auto cfg = load(c);
  const auto truth = io::read_sequence_file(input);
  check_template(truth, cfg.tmpl);
  std::ifstream in(predictions, std::ios::binary);
  if (!in) throw Error(ErrorCode::FormatError, "cannot open " + predictions);
  io::PredictionHeader header;
  const auto pred = io::read_predictions(in, predictions, &header);
  const auto report = run_evaluate(pred, truth, cfg.tmpl, cfg.evaluate);
  write_text(c.output, io::report_to_json(report, truth.header.sequence_id, header.method).dump(2) + "\n");
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool motion) {
  sub->add_option("--config", c.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "overrides the config seed");
  sub->add_option("--output", c.output, "output path")->required();
  if (motion)
    sub->add_option("--motion-source", c.motion_source, "provided | estimate | identity | gt")
        ->check(CLI::IsMember({"provided", "estimate", "identity", "gt"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage keypoint/homography filtering for sports-field registration"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::string> inputs;
  std::string input, predictions;
  std::optional<std::string> bank;
  std::optional<int> frames;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic sequence");
  add_common(sim, common, false);
  sim->add_option("--frames", frames, "number of frames (overrides config)");

  auto* cal = app.add_subcommand("calibrate", "estimate the covariance bank from annotated sequences");
  add_common(cal, common, true);
  cal->add_option("--input", inputs, "annotated sequence file(s)")->required()->check(CLI::ExistingFile);

  auto* filt = app.add_subcommand("filter", "run the two-stage filter over a sequence");
  add_common(filt, common, true);
  filt->add_option("--input", input, "sequence file")->required()->check(CLI::ExistingFile);
  filt->add_option("--bank", bank, "covariance bank (overrides config)");

  auto* base = app.add_subcommand("baseline", "per-frame RANSAC homographies");
  add_common(base, common, false);
  base->add_option("--input", input, "sequence file")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("evaluate", "score predictions against ground truth");
  add_common(eval, common, false);
  eval->add_option("--input", input, "ground-truth sequence file")->required()->check(CLI::ExistingFile);
  eval->add_option("--predictions", predictions, "predictions file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(common, frames);
    if (cal->parsed()) return cmd_calibrate(common, inputs);
    if (filt->parsed()) return cmd_filter(common, input, bank);
    if (base->parsed()) return cmd_baseline(common, input);
    if (eval->parsed()) return cmd_evaluate(common, input, predictions);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
