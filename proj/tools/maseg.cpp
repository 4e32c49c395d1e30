#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "maseg/errors.hpp"
#include "maseg/io.hpp"
#include "maseg/metrics.hpp"
#include "maseg/phantom.hpp"
#include "maseg/pipeline.hpp"

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw maseg::IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw maseg::IoError("cannot read " + path);
  return ss.str();
}

struct SegmentArgs {
  std::string target, atlas_dir, config, mode, out, prob_out;
  int threads = 1;
};

int run_segment(const SegmentArgs& a) {
  maseg::RunConfig cfg;
  if (!a.config.empty())
    cfg = maseg::run_config_from_json(read_text_file(a.config));
  if (!a.mode.empty()) cfg.mode = maseg::mode_from_string(a.mode);

  const maseg::IntensityVolume target = maseg::read_volume<float>(a.target);
  const maseg::AtlasSet atlases = maseg::load_atlas_dir(a.atlas_dir);

  const maseg::SegmentResult res = maseg::segment(target, atlases, cfg, a.threads);
  maseg::write_volume(res.mask, a.out);
  if (!a.prob_out.empty()) maseg::write_volume(res.prob, a.prob_out);
  std::cout << res.meta.to_json();
  return 0;
}

int run_evaluate(const std::string& pred_path, const std::string& truth_path) {
  const auto pred = maseg::read_volume<std::uint8_t>(pred_path);
  const auto truth = maseg::read_volume<std::uint8_t>(truth_path);
  std::cout << maseg::evaluate(pred, truth).to_json();
  return 0;
}

int run_phantom(const std::string& spec_path, const std::string& out_dir) {
  maseg::PhantomSpec spec;
  if (!spec_path.empty())
    spec = maseg::phantom_spec_from_json(read_text_file(spec_path));
  spec.validate();
  const maseg::Phantom ph = maseg::generate_phantom(spec);
  maseg::write_phantom_dir(ph, spec, out_dir);
  nlohmann::json j;
  j["out"] = out_dir;
  j["n_atlases"] = spec.n_atlases;
  j["dims"] = spec.dims;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_rank(const std::string& target_path, const std::string& atlas_dir,
             std::size_t n, int margin) {
  const maseg::IntensityVolume target = maseg::read_volume<float>(target_path);
  const maseg::AtlasSet atlases = maseg::load_atlas_dir(atlas_dir);
  std::vector<const maseg::LabelVolume*> labels;
  labels.reserve(atlases.size());
  for (const maseg::Atlas& a : atlases) labels.push_back(&a.labels);
  const maseg::BoundingBox box = maseg::bounding_box_from_labels(labels, margin);
  const auto ranked = maseg::rank_atlases(target, atlases, box, n);
  std::cout << nlohmann::json(ranked).dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-atlas segmentation: random-forest label fusion with "
               "semi-supervised label propagation"};
  app.require_subcommand(1);

  SegmentArgs seg;
  CLI::App* c_seg = app.add_subcommand("segment", "Segment a target volume");
  c_seg->add_option("--target", seg.target, "Target volume (.json/.raw stem)")
      ->required();
  c_seg->add_option("--atlas-dir", seg.atlas_dir,
                    "Directory of *_img / *_lbl atlas pairs")
      ->required();
  c_seg->add_option("--config", seg.config, "Run configuration JSON");
  c_seg->add_option("--mode", seg.mode, "mv | mv-sslp | lll-rf | rf-sslp");
  c_seg->add_option("--out", seg.out, "Output mask stem")->required();
  c_seg->add_option("--prob-out", seg.prob_out, "Output score-map stem");
  c_seg->add_option("--threads", seg.threads, "Worker threads (0 = auto)");

  std::string ev_pred, ev_truth;
  CLI::App* c_eval = app.add_subcommand("evaluate", "Compare a mask to truth");
  c_eval->add_option("--pred", ev_pred, "Predicted mask")->required();
  c_eval->add_option("--truth", ev_truth, "Ground-truth mask")->required();

  std::string ph_spec, ph_out;
  CLI::App* c_ph = app.add_subcommand("phantom", "Generate a synthetic scene");
  c_ph->add_option("--spec", ph_spec, "Phantom spec JSON (defaults if omitted)");
  c_ph->add_option("--out", ph_out, "Output directory")->required();

  std::string rk_target, rk_dir;
  std::size_t rk_n = 20;
  int rk_margin = 10;
  CLI::App* c_rank = app.add_subcommand("rank-atlases",
                                        "Rank atlases by NMI against a target");
  c_rank->add_option("--target", rk_target, "Target volume")->required();
  c_rank->add_option("--atlas-dir", rk_dir, "Atlas directory")->required();
  c_rank->add_option("--n", rk_n, "How many to keep");
  c_rank->add_option("--margin", rk_margin, "ROI margin in voxels");

  std::string sw_grid, sw_dir;
  int sw_threads = 1;
  CLI::App* c_sweep = app.add_subcommand("sweep",
                                         "Evaluate a config grid on phantoms");
  c_sweep->add_option("--grid", sw_grid, "Grid JSON")->required();
  c_sweep->add_option("--phantom-dir", sw_dir, "Phantom directory")->required();
  c_sweep->add_option("--threads", sw_threads, "Worker threads (0 = auto)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(c_seg)) return run_segment(seg);
    if (app.got_subcommand(c_eval)) return run_evaluate(ev_pred, ev_truth);
    if (app.got_subcommand(c_ph)) return run_phantom(ph_spec, ph_out);
    if (app.got_subcommand(c_rank))
      return run_rank(rk_target, rk_dir, rk_n, rk_margin);
    if (app.got_subcommand(c_sweep)) {
      maseg::run_sweep(read_text_file(sw_grid), sw_dir, sw_threads, std::cout);
      return 0;
    }
  } catch (const maseg::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const maseg::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
