#include <doctest.h>

#include <random>

#include "maseg/features.hpp"

using namespace maseg;

namespace {

IntensityVolume constant_volume(Dims3 dims, float value) {
  IntensityVolume v(dims);
  v.array() = value;
  return v;
}

IntensityVolume ramp_volume(Dims3 dims) {
  IntensityVolume v(dims);
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  return v;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("config arithmetic") {
  PatchConfig cfg;
  CHECK(cfg.patch_edge() == 7);
  CHECK(cfg.patch_size() == 343);
  CHECK(cfg.neighborhood_size() == 27);
  CHECK(cfg.feature_length() == 2 * 343 + 4);
  cfg.feature_mode = FeatureMode::IntensityOnly;
  CHECK(cfg.feature_length() == 343);
  cfg.patch_radius = 1;
  CHECK(cfg.patch_size() == 27);
  CHECK_THROWS_AS([] { PatchConfig c; c.patch_radius = 0; c.validate(); }(),
                  ValidationError);
  CHECK_THROWS_AS([] { PatchConfig c; c.neighborhood_radius = -1; c.validate(); }(),
                  ValidationError);
}

TEST_CASE("patch over a constant volume is constant") {
  PatchConfig cfg;
  IntensityVolume v = constant_volume({9, 9, 9}, 5.0f);
  Eigen::ArrayXf p = extract_patch(v, {4, 4, 4}, cfg);
  REQUIRE(p.size() == 343);
  CHECK((p == 5.0f).all());
}

TEST_CASE("patch at a corner is zero-padded") {
  PatchConfig cfg;
  cfg.patch_radius = 1;
  IntensityVolume v = constant_volume({5, 5, 5}, 3.0f);
  Eigen::ArrayXf p = extract_patch(v, {0, 0, 0}, cfg);
  REQUIRE(p.size() == 27);
  CHECK((p == 0.0f).count() == 27 - 8);
  CHECK((p == 3.0f).count() == 8);
  // last in-patch corner (dx,dy,dz all +1) is inside the volume
  CHECK(p[26] == 3.0f);
  CHECK(p[0] == 0.0f);
}

TEST_CASE("patch centered in a matching volume is the volume itself") {
  PatchConfig cfg;
  IntensityVolume v = ramp_volume({7, 7, 7});
  Eigen::ArrayXf p = extract_patch(v, {3, 3, 3}, cfg);
  REQUIRE(p.size() == v.size());
  for (std::int64_t i = 0; i < v.size(); ++i) REQUIRE(p[i] == v[i]);
}

TEST_CASE("constant patch maps to zero features in intensity mode") {
  PatchConfig cfg;
  cfg.feature_mode = FeatureMode::IntensityOnly;
  Eigen::ArrayXf patch = Eigen::ArrayXf::Constant(cfg.patch_size(), 4.5f);
  Eigen::ArrayXf f = compute_features(patch, cfg);
  REQUIRE(f.size() == cfg.patch_size());
  CHECK((f == 0.0f).all());
}

TEST_CASE("constant patch in texture mode: zeros plus the four stats") {
  PatchConfig cfg;
  Eigen::ArrayXf patch = Eigen::ArrayXf::Constant(cfg.patch_size(), 4.5f);
  Eigen::ArrayXf f = compute_features(patch, cfg);
  REQUIRE(f.size() == 2 * 343 + 4);
  CHECK((f.head(2 * 343) == 0.0f).all());
  CHECK(f[2 * 343 + 0] == 4.5f);  // mean
  CHECK(f[2 * 343 + 1] == 0.0f);  // std
  CHECK(f[2 * 343 + 2] == 4.5f);  // min
  CHECK(f[2 * 343 + 3] == 4.5f);  // max
}

TEST_CASE("z-normalization is invariant to constant shifts") {
  PatchConfig cfg;
  cfg.feature_mode = FeatureMode::IntensityOnly;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(0.0f, 50.0f);
  Eigen::ArrayXf patch(cfg.patch_size());
  for (auto& x : patch) x = u(rng);
  Eigen::ArrayXf f0 = compute_features(patch, cfg);
  Eigen::ArrayXf f1 = compute_features(patch + 17.0f, cfg);
  CHECK((f0 - f1).abs().maxCoeff() < 1e-4f);
  // population z-scores: zero mean, unit variance
  CHECK(std::abs(f0.mean()) < 1e-6f);
  CHECK(std::abs(f0.square().mean() - 1.0f) < 1e-5f);
}

TEST_CASE("ramp patch has constant interior gradient magnitude") {
  PatchConfig cfg;
  const int e = cfg.patch_edge();
  Eigen::ArrayXf patch(cfg.patch_size());
  std::int64_t i = 0;
  for (int z = 0; z < e; ++z)
    for (int y = 0; y < e; ++y)
      for (int x = 0; x < e; ++x, ++i) patch[i] = 2.0f * static_cast<float>(x);
  Eigen::ArrayXf f = compute_features(patch, cfg);
  const auto grad = f.segment(cfg.patch_size(), cfg.patch_size());
  // central difference along x gives slope 2 away from the patch faces
  i = 0;
  for (int z = 0; z < e; ++z)
    for (int y = 0; y < e; ++y)
      for (int x = 0; x < e; ++x, ++i)
        if (x > 0 && x < e - 1) REQUIRE(grad[i] == doctest::Approx(2.0f));
  CHECK(f[2 * 343 + 3] == 2.0f * (e - 1));  // max of the raw ramp
}

TEST_CASE("patch_distance is SSD") {
  Eigen::ArrayXf a(2), b(2);
  a << 1.0f, 2.0f;
  b << 2.0f, 4.0f;
  CHECK(patch_distance(a, b) == 5.0);
  CHECK(patch_distance(b, a) == 5.0);
  CHECK(patch_distance(a, a) == 0.0);
  Eigen::ArrayXf c(3);
  c.setZero();
  CHECK_THROWS_AS(patch_distance(a, c), ValidationError);
}

TEST_CASE("balanced selection keeps the nearest k per class") {
  const std::int64_t len = 1;
  PatchSampleBank bank;
  bank.reset(len, 6);
  auto patch = [](float v) { return Eigen::ArrayXf::Constant(1, v); };
  // positives at distances 1, 4, 9 from target 0; negatives at 0, 16, 25
  bank.push(patch(1.0f), +1.0f, 0, 0);
  bank.push(patch(2.0f), +1.0f, 0, 1);
  bank.push(patch(3.0f), +1.0f, 0, 2);
  bank.push(patch(0.0f), -1.0f, 1, 0);
  bank.push(patch(4.0f), -1.0f, 1, 1);
  bank.push(patch(5.0f), -1.0f, 1, 2);
  BalancedSelection sel = select_balanced_samples(bank, patch(0.0f), 2);
  REQUIRE(sel.n_positive == 2);
  REQUIRE(sel.n_negative == 2);
  CHECK_FALSE(sel.positive_short);
  CHECK(bank.labels[sel.indices[0]] == 1.0f);
  CHECK(bank.patches(0, sel.indices[0]) == 1.0f);
  CHECK(bank.patches(0, sel.indices[1]) == 2.0f);
  CHECK(bank.patches(0, sel.indices[2]) == 0.0f);
  CHECK(bank.patches(0, sel.indices[3]) == 4.0f);
}

TEST_CASE("selection ties break on atlas index then voxel order") {
  PatchSampleBank bank;
  bank.reset(1, 4);
  auto patch = [](float v) { return Eigen::ArrayXf::Constant(1, v); };
  bank.push(patch(1.0f), +1.0f, 3, 7);
  bank.push(patch(1.0f), +1.0f, 1, 9);
  bank.push(patch(1.0f), +1.0f, 1, 2);
  bank.push(patch(9.0f), -1.0f, 0, 0);
  BalancedSelection sel = select_balanced_samples(bank, patch(0.0f), 2);
  REQUIRE(sel.n_positive == 2);
  CHECK(bank.atlas_index[sel.indices[0]] == 1);
  CHECK(bank.voxel_index[sel.indices[0]] == 2);
  CHECK(bank.atlas_index[sel.indices[1]] == 1);
  CHECK(bank.voxel_index[sel.indices[1]] == 9);
}

TEST_CASE("class shortfall is returned whole and flagged") {
  PatchSampleBank bank;
  bank.reset(1, 4);
  auto patch = [](float v) { return Eigen::ArrayXf::Constant(1, v); };
  bank.push(patch(1.0f), +1.0f, 0, 0);
  bank.push(patch(2.0f), -1.0f, 0, 1);
  bank.push(patch(3.0f), -1.0f, 0, 2);
  bank.push(patch(4.0f), -1.0f, 0, 3);
  BalancedSelection sel = select_balanced_samples(bank, patch(0.0f), 3);
  CHECK(sel.n_positive == 1);
  CHECK(sel.positive_short);
  CHECK(sel.n_negative == 3);
  CHECK_FALSE(sel.negative_short);
  CHECK(sel.indices.size() == 4);
}

TEST_CASE("a class with no members is an error") {
  PatchSampleBank bank;
  bank.reset(1, 2);
  auto patch = [](float v) { return Eigen::ArrayXf::Constant(1, v); };
  bank.push(patch(1.0f), +1.0f, 0, 0);
  bank.push(patch(2.0f), +1.0f, 0, 1);
  CHECK_THROWS_AS(select_balanced_samples(bank, patch(0.0f), 1), ValidationError);
}

}  // TEST_SUITE
