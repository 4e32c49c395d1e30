#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "maseg/fusion.hpp"
#include "maseg/metrics.hpp"
#include "maseg/propagation.hpp"
#include "maseg/volume.hpp"

namespace maseg {

enum class Mode { MV, MVSSLP, LLLRF, RFSSLP };

/// Accepts "mv" | "mv-sslp" | "lll-rf" | "rf-sslp".
Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct RunConfig {
  Mode mode = Mode::RFSSLP;
  std::uint64_t seed = 0;
  int n_atlases_selected = 20;
  int margin = 10;  // ROI dilation around the atlas foreground union
  FusionConfig fusion;
  PropagationConfig propagation;

  void validate() const;
};

/// Strict parse: unknown keys anywhere in the document are rejected.
/// Missing keys keep their defaults. The run seed drives every random
/// choice; the forest has no separately configurable seed.
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& cfg);

struct RunMeta {
  Mode mode = Mode::RFSSLP;
  std::uint64_t seed = 0;
  BoundingBox box;
  std::size_t n_atlases = 0;
  std::vector<std::size_t> selected;  // canonical-order indices, best NMI first
  std::int64_t n_candidates = 0;
  BalanceInfo balance;  // meaningful for the SSLP modes only
  int iterations = 0;
  std::int64_t n_foreground = 0;
  double total_ms = 0.0;
  double fusion_ms = 0.0;
  double propagation_ms = 0.0;

  std::string to_json() const;
};

struct SegmentResult {
  LabelVolume mask;      // full-volume binary mask
  IntensityVolume prob;  // full-volume score map; -1 outside the ROI box
  RunMeta meta;
};

/// End-to-end segmentation: ROI from the union of atlas foregrounds,
/// NMI-based atlas selection, majority vote, then the mode's fusion and/or
/// propagation stages. Voxels outside the ROI are background. Deterministic
/// in (inputs, cfg) for any thread count.
SegmentResult segment(const IntensityVolume& target, const AtlasSet& atlases,
                      const RunConfig& cfg, int threads = 1);

struct AllModeMasks {
  LabelVolume mv;
  LabelVolume mv_sslp;
  LabelVolume lll_rf;
  LabelVolume rf_sslp;
  std::int64_t n_candidates = 0;
};

/// All four modes over shared stages; the forest fusion runs once and feeds
/// both lll-rf and rf-sslp. cfg.mode is ignored.
AllModeMasks run_all_modes(const IntensityVolume& target, const AtlasSet& atlases,
                           const RunConfig& cfg, int threads = 1);

EvalReport evaluate(const LabelVolume& pred, const LabelVolume& truth);

/// One grid point of a sweep: the expanded config plus the "key=value"
/// settings that identify it in the CSV.
struct SweepPoint {
  RunConfig config;
  std::vector<std::string> keys;
  std::vector<std::string> values;
};

/// Grid file: {"base": <RunConfig object>, "grid": {"dotted.path": [v, ...]}}.
/// The cartesian product is expanded in file order; every point passes the
/// strict RunConfig parse.
std::vector<SweepPoint> expand_sweep_grid(const std::string& grid_json);

/// Runs every grid point over every phantom under phantom_dir (either one
/// phantom directory or a directory of them) and writes a CSV of per-config
/// mean and sample-std Dice / mean-distance.
void run_sweep(const std::string& grid_json, const std::string& phantom_dir,
               int threads, std::ostream& csv_out);

}  // namespace maseg
