#include "maseg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <ostream>

#include "maseg/errors.hpp"
#include "maseg/json_util.hpp"
#include "maseg/phantom.hpp"

namespace maseg {

Mode mode_from_string(const std::string& s) {
  if (s == "mv") return Mode::MV;
  if (s == "mv-sslp") return Mode::MVSSLP;
  if (s == "lll-rf") return Mode::LLLRF;
  if (s == "rf-sslp") return Mode::RFSSLP;
  throw ValidationError("unknown mode \"" + s +
                        "\" (expected mv | mv-sslp | lll-rf | rf-sslp)");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::MV: return "mv";
    case Mode::MVSSLP: return "mv-sslp";
    case Mode::LLLRF: return "lll-rf";
    case Mode::RFSSLP: return "rf-sslp";
  }
  throw ValidationError("invalid mode value");
}

void RunConfig::validate() const {
  if (n_atlases_selected < 1)
    throw ValidationError("config: n_atlases_selected must be >= 1");
  if (margin < 0) throw ValidationError("config: margin must be >= 0");
  if (fusion.k < 1) throw ValidationError("config: fusion.k must be >= 1");
  fusion.patch.validate();
  if (fusion.forest.n_tree < 1)
    throw ValidationError("config: forest.n_tree must be >= 1");
  if (fusion.forest.n_split < 1)
    throw ValidationError("config: forest.n_split must be >= 1");
  if (fusion.forest.min_leaf < 1)
    throw ValidationError("config: forest.min_leaf must be >= 1");
  if (fusion.forest.max_depth < 0)
    throw ValidationError("config: forest.max_depth must be >= 0");
  propagation.validate();
}

namespace {

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "intensity") return FeatureMode::IntensityOnly;
  if (s == "intensity-texture") return FeatureMode::IntensityPlusTexture;
  throw ValidationError("config: feature_mode must be \"intensity\" or "
                        "\"intensity-texture\"");
}

const char* to_string(FeatureMode m) {
  return m == FeatureMode::IntensityOnly ? "intensity" : "intensity-texture";
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  require_known_keys(j, "config",
                     {"mode", "seed", "n_atlases_selected", "margin", "fusion",
                      "propagation"});
  RunConfig cfg;
  if (j.contains("mode")) {
    if (!j["mode"].is_string())
      throw ValidationError("config.mode: expected a string");
    cfg.mode = mode_from_string(j["mode"].get<std::string>());
  }
  read_field(j, "config", "seed", cfg.seed);
  read_field(j, "config", "n_atlases_selected", cfg.n_atlases_selected);
  read_field(j, "config", "margin", cfg.margin);

  if (j.contains("fusion")) {
    const nlohmann::json& f = j["fusion"];
    require_known_keys(f, "config.fusion",
                       {"k", "patch_radius", "neighborhood_radius",
                        "feature_mode", "forest"});
    read_field(f, "config.fusion", "k", cfg.fusion.k);
    read_field(f, "config.fusion", "patch_radius", cfg.fusion.patch.patch_radius);
    read_field(f, "config.fusion", "neighborhood_radius",
               cfg.fusion.patch.neighborhood_radius);
    if (f.contains("feature_mode")) {
      if (!f["feature_mode"].is_string())
        throw ValidationError("config.fusion.feature_mode: expected a string");
      cfg.fusion.patch.feature_mode =
          feature_mode_from_string(f["feature_mode"].get<std::string>());
    }
    if (f.contains("forest")) {
      const nlohmann::json& t = f["forest"];
      require_known_keys(t, "config.fusion.forest",
                         {"n_tree", "n_split", "min_leaf", "max_depth",
                          "bootstrap"});
      read_field(t, "config.fusion.forest", "n_tree", cfg.fusion.forest.n_tree);
      read_field(t, "config.fusion.forest", "n_split", cfg.fusion.forest.n_split);
      read_field(t, "config.fusion.forest", "min_leaf", cfg.fusion.forest.min_leaf);
      read_field(t, "config.fusion.forest", "max_depth", cfg.fusion.forest.max_depth);
      read_field(t, "config.fusion.forest", "bootstrap", cfg.fusion.forest.bootstrap);
    }
  }

  if (j.contains("propagation")) {
    const nlohmann::json& p = j["propagation"];
    require_known_keys(p, "config.propagation",
                       {"sigma", "beta", "T", "stencil", "max_iters", "tol"});
    read_field(p, "config.propagation", "sigma", cfg.propagation.sigma);
    read_field(p, "config.propagation", "beta", cfg.propagation.beta);
    read_field(p, "config.propagation", "T", cfg.propagation.reliable_threshold);
    read_field(p, "config.propagation", "stencil", cfg.propagation.stencil);
    read_field(p, "config.propagation", "max_iters", cfg.propagation.max_iters);
    read_field(p, "config.propagation", "tol", cfg.propagation.tol);
  }

  cfg.validate();
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["mode"] = to_string(cfg.mode);
  j["seed"] = cfg.seed;
  j["n_atlases_selected"] = cfg.n_atlases_selected;
  j["margin"] = cfg.margin;
  j["fusion"]["k"] = cfg.fusion.k;
  j["fusion"]["patch_radius"] = cfg.fusion.patch.patch_radius;
  j["fusion"]["neighborhood_radius"] = cfg.fusion.patch.neighborhood_radius;
  j["fusion"]["feature_mode"] = to_string(cfg.fusion.patch.feature_mode);
  j["fusion"]["forest"]["n_tree"] = cfg.fusion.forest.n_tree;
  j["fusion"]["forest"]["n_split"] = cfg.fusion.forest.n_split;
  j["fusion"]["forest"]["min_leaf"] = cfg.fusion.forest.min_leaf;
  j["fusion"]["forest"]["max_depth"] = cfg.fusion.forest.max_depth;
  j["fusion"]["forest"]["bootstrap"] = cfg.fusion.forest.bootstrap;
  j["propagation"]["sigma"] = cfg.propagation.sigma;
  j["propagation"]["beta"] = cfg.propagation.beta;
  j["propagation"]["T"] = cfg.propagation.reliable_threshold;
  j["propagation"]["stencil"] = cfg.propagation.stencil;
  j["propagation"]["max_iters"] = cfg.propagation.max_iters;
  j["propagation"]["tol"] = cfg.propagation.tol;
  return j.dump(2) + "\n";
}

std::string RunMeta::to_json() const {
  nlohmann::json j;
  j["mode"] = maseg::to_string(mode);
  j["seed"] = seed;
  j["box"]["min"] = {box.min_corner.x, box.min_corner.y, box.min_corner.z};
  j["box"]["max"] = {box.max_corner.x, box.max_corner.y, box.max_corner.z};
  j["n_atlases"] = n_atlases;
  j["selected"] = selected;
  j["n_candidates"] = n_candidates;
  j["balance"]["n_fg_reliable"] = balance.n_fg_reliable;
  j["balance"]["n_bg_reliable"] = balance.n_bg_reliable;
  j["balance"]["skipped"] = balance.balance_skipped;
  j["iterations"] = iterations;
  j["n_foreground"] = n_foreground;
  j["timings_ms"]["total"] = total_ms;
  j["timings_ms"]["fusion"] = fusion_ms;
  j["timings_ms"]["propagation"] = propagation_ms;
  return j.dump(2) + "\n";
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Shared front half of every mode: validation, ROI, NMI ranking, vote map.
struct Stage {
  BoundingBox box;
  std::vector<std::size_t> ranked;
  std::vector<const Atlas*> selected;
  ProbMap mv;
};

Stage run_front(const IntensityVolume& target, const AtlasSet& atlases,
                const RunConfig& cfg) {
  cfg.validate();
  if (atlases.empty()) throw ValidationError("segment: zero atlases");
  for (const Atlas& a : atlases) {
    if (!a.image.same_grid(target) || !a.labels.same_grid(target))
      throw ValidationError(
          "segment: atlas grid differs from target (inputs must be "
          "pre-registered on one grid)");
    validate_binary(a.labels, "segment: atlas " + a.name);
  }
  if (static_cast<std::size_t>(cfg.n_atlases_selected) > atlases.size())
    throw ValidationError("segment: n_atlases_selected exceeds atlas count");

  Stage st;
  std::vector<const LabelVolume*> labels;
  labels.reserve(atlases.size());
  for (const Atlas& a : atlases) labels.push_back(&a.labels);
  st.box = bounding_box_from_labels(labels, cfg.margin);

  st.ranked = rank_atlases(target, atlases, st.box,
                           static_cast<std::size_t>(cfg.n_atlases_selected));
  st.selected.reserve(st.ranked.size());
  for (std::size_t i : st.ranked) st.selected.push_back(&atlases[i]);

  std::vector<const LabelVolume*> sel_labels;
  sel_labels.reserve(st.selected.size());
  for (const Atlas* a : st.selected) sel_labels.push_back(&a->labels);
  st.mv = majority_vote(sel_labels, st.box);
  return st;
}

/// Mask in full-volume coordinates; outside the box everything is background.
LabelVolume embed_mask(const ProbMap& map, const Dims3& dims,
                       const Spacing3& spacing) {
  LabelVolume out(dims, spacing);
  for (std::int64_t i = 0; i < map.size(); ++i)
    if (map.values[i] > 0.0) {
      const VoxelIndex v = map.box.delocalize(i);
      out(v) = 1;
    }
  return out;
}

/// Score map in full-volume coordinates; outside the box the score is the
/// unanimous-background vote -1.
IntensityVolume embed_prob(const ProbMap& map, const Dims3& dims,
                           const Spacing3& spacing) {
  IntensityVolume out(dims, spacing);
  out.array().setConstant(-1.0f);
  for (std::int64_t i = 0; i < map.size(); ++i) {
    const VoxelIndex v = map.box.delocalize(i);
    out(v) = static_cast<float>(map.values[i]);
  }
  return out;
}

}  // namespace

SegmentResult segment(const IntensityVolume& target, const AtlasSet& atlases,
                      const RunConfig& cfg, int threads) {
  const auto t0 = Clock::now();
  Stage st = run_front(target, atlases, cfg);

  RunMeta meta;
  meta.mode = cfg.mode;
  meta.seed = cfg.seed;
  meta.box = st.box;
  meta.n_atlases = atlases.size();
  meta.selected = st.ranked;

  FusionConfig fc = cfg.fusion;
  fc.forest.seed = cfg.seed;  // the run seed governs the forests

  ProbMap map = st.mv;
  if (cfg.mode == Mode::LLLRF || cfg.mode == Mode::RFSSLP) {
    const auto tf = Clock::now();
    const std::vector<VoxelIndex> candidates = candidate_voxels(st.mv);
    meta.n_candidates = static_cast<std::int64_t>(candidates.size());
    map = fuse_rf(target, st.selected, candidates, st.mv, fc, threads);
    meta.fusion_ms = ms_since(tf);
  }
  if (cfg.mode == Mode::MVSSLP || cfg.mode == Mode::RFSSLP) {
    const auto tp = Clock::now();
    RefineStats stats;
    map = refine(map, target, cfg.propagation, &stats);
    meta.balance = stats.balance;
    meta.iterations = stats.iterations;
    meta.propagation_ms = ms_since(tp);
  }

  SegmentResult res{embed_mask(map, target.dims(), target.spacing_mm()),
                    embed_prob(map, target.dims(), target.spacing_mm()),
                    std::move(meta)};
  for (std::int64_t i = 0; i < res.mask.size(); ++i)
    res.meta.n_foreground += res.mask[i];
  res.meta.total_ms = ms_since(t0);
  return res;
}

AllModeMasks run_all_modes(const IntensityVolume& target, const AtlasSet& atlases,
                           const RunConfig& cfg, int threads) {
  Stage st = run_front(target, atlases, cfg);

  FusionConfig fc = cfg.fusion;
  fc.forest.seed = cfg.seed;

  const std::vector<VoxelIndex> candidates = candidate_voxels(st.mv);
  const ProbMap rf = fuse_rf(target, st.selected, candidates, st.mv, fc, threads);
  const ProbMap mv_ref = refine(st.mv, target, cfg.propagation);
  const ProbMap rf_ref = refine(rf, target, cfg.propagation);

  const Dims3& d = target.dims();
  const Spacing3& sp = target.spacing_mm();
  return AllModeMasks{embed_mask(st.mv, d, sp), embed_mask(mv_ref, d, sp),
                      embed_mask(rf, d, sp), embed_mask(rf_ref, d, sp),
                      static_cast<std::int64_t>(candidates.size())};
}

EvalReport evaluate(const LabelVolume& pred, const LabelVolume& truth) {
  EvalReport r;
  r.dice = dice(pred, truth);
  r.mean_distance_mm = mean_distance(pred, truth);
  for (std::int64_t i = 0; i < pred.size(); ++i) r.n_pred += pred[i] != 0;
  for (std::int64_t i = 0; i < truth.size(); ++i) r.n_truth += truth[i] != 0;
  return r;
}

namespace {

void set_by_dotted_path(nlohmann::ordered_json& j, const std::string& path,
                        const nlohmann::ordered_json& value) {
  nlohmann::ordered_json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot - start);
    if (part.empty())
      throw ValidationError("sweep: bad grid path \"" + path + "\"");
    if (dot == std::string::npos) {
      (*cur)[part] = value;
      return;
    }
    if (!cur->contains(part) || !(*cur)[part].is_object())
      (*cur)[part] = nlohmann::ordered_json::object();
    cur = &(*cur)[part];
    start = dot + 1;
  }
}

std::string scalar_to_string(const nlohmann::ordered_json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

std::vector<SweepPoint> expand_sweep_grid(const std::string& grid_json) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(grid_json);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("sweep grid: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("sweep grid: expected a JSON object");
  for (const auto& item : j.items())
    if (item.key() != "base" && item.key() != "grid")
      throw ValidationError("sweep grid: unknown key \"" + item.key() + "\"");

  nlohmann::ordered_json base = nlohmann::ordered_json::object();
  if (j.contains("base")) {
    base = j["base"];
    if (!base.is_object())
      throw ValidationError("sweep grid: \"base\" must be an object");
  }

  std::vector<std::pair<std::string, nlohmann::ordered_json>> axes;
  if (j.contains("grid")) {
    if (!j["grid"].is_object())
      throw ValidationError("sweep grid: \"grid\" must be an object");
    for (const auto& item : j["grid"].items()) {
      if (!item.value().is_array() || item.value().empty())
        throw ValidationError("sweep grid: \"" + item.key() +
                              "\" must be a nonempty array");
      axes.emplace_back(item.key(), item.value());
    }
  }

  std::vector<SweepPoint> points;
  std::vector<std::size_t> odo(axes.size(), 0);
  while (true) {
    nlohmann::ordered_json cfg_json = base;
    SweepPoint point;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const nlohmann::ordered_json& v = axes[a].second[odo[a]];
      set_by_dotted_path(cfg_json, axes[a].first, v);
      point.keys.push_back(axes[a].first);
      point.values.push_back(scalar_to_string(v));
    }
    point.config = run_config_from_json(cfg_json.dump());
    points.push_back(std::move(point));

    // odometer: last axis varies fastest
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++odo[a] < axes[a].second.size()) break;
      odo[a] = 0;
      if (a == 0) return points;
    }
    if (axes.empty()) return points;
  }
}

namespace {

std::vector<std::filesystem::path> find_phantom_dirs(const std::string& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    throw IoError("sweep: not a directory: " + root);
  if (fs::exists(fs::path(root) / "target.json")) return {fs::path(root)};
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "target.json"))
      dirs.push_back(entry.path());
  if (dirs.empty())
    throw IoError("sweep: no phantom directories under " + root);
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

struct RunningStats {
  double sum = 0.0, sumsq = 0.0;
  std::int64_t n = 0;
  void push(double v) { sum += v; sumsq += v * v; ++n; }
  double mean() const { return n ? sum / n : 0.0; }
  double sample_std() const {
    if (n < 2) return 0.0;
    const double var = (sumsq - sum * sum / n) / (n - 1);
    return var > 0.0 ? std::sqrt(var) : 0.0;
  }
};

}  // namespace

void run_sweep(const std::string& grid_json, const std::string& phantom_dir,
               int threads, std::ostream& csv_out) {
  const std::vector<SweepPoint> points = expand_sweep_grid(grid_json);
  const auto dirs = find_phantom_dirs(phantom_dir);

  std::vector<PhantomDir> phantoms;
  phantoms.reserve(dirs.size());
  for (const auto& d : dirs) phantoms.push_back(read_phantom_dir(d.string()));

  for (std::size_t k = 0; k < points.front().keys.size(); ++k)
    csv_out << points.front().keys[k] << ",";
  csv_out << "dice_mean,dice_std,md_mean,md_std,n_runs\n";

  char buf[64];
  for (const SweepPoint& point : points) {
    RunningStats ds, ms;
    for (const PhantomDir& ph : phantoms) {
      const SegmentResult res = segment(ph.target, ph.atlases, point.config, threads);
      const EvalReport rep = evaluate(res.mask, ph.truth);
      ds.push(rep.dice);
      ms.push(rep.mean_distance_mm);
    }
    for (const std::string& v : point.values) csv_out << v << ",";
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%lld", ds.mean(),
                  ds.sample_std(), ms.mean(), ms.sample_std(),
                  static_cast<long long>(ds.n));
    csv_out << buf << "\n";
  }
}

}  // namespace maseg
