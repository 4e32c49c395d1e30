#include <doctest.h>

#include <random>

#include "maseg/fusion.hpp"

using namespace maseg;
using LabelPtrs = std::vector<const LabelVolume*>;

namespace {

LabelVolume filled(Dims3 dims, std::uint8_t v) {
  LabelVolume m(dims);
  m.array() = v;
  return m;
}

FusionConfig small_cfg() {
  FusionConfig cfg;
  cfg.k = 8;
  cfg.patch.patch_radius = 1;
  cfg.patch.neighborhood_radius = 1;
  cfg.forest.n_tree = 7;
  cfg.forest.n_split = 4;
  cfg.forest.seed = 42;
  return cfg;
}

/// Two-level cube phantom: fg block in the middle of a constant background.
struct CubeScene {
  IntensityVolume target{{9, 9, 9}};
  AtlasSet atlases;
  BoundingBox box{{1, 1, 1}, {7, 7, 7}};

  explicit CubeScene(int n_atlases = 2) {
    LabelVolume truth({9, 9, 9});
    for (int z = 3; z <= 5; ++z)
      for (int y = 3; y <= 5; ++y)
        for (int x = 3; x <= 5; ++x) truth(x, y, z) = 1;
    for (std::int64_t i = 0; i < target.size(); ++i)
      target[i] = truth[i] ? 90.0f : 30.0f;
    std::mt19937_64 rng(17);
    std::normal_distribution<float> noise(0.0f, 2.0f);
    for (int a = 0; a < n_atlases; ++a) {
      Atlas atlas;
      atlas.labels = truth;
      atlas.image = target;
      for (std::int64_t i = 0; i < target.size(); ++i)
        atlas.image[i] += noise(rng);
      atlas.name = "a" + std::to_string(a);
      atlases.push_back(std::move(atlas));
    }
    // one disputed voxel just outside the cube face
    atlases[0].labels(6, 4, 4) = 1;
  }
};

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("majority vote arithmetic and decided flags") {
  const Dims3 dims{2, 1, 1};
  const BoundingBox box{{0, 0, 0}, {1, 0, 0}};
  LabelVolume a = filled(dims, 0), b = filled(dims, 0), c = filled(dims, 0);
  // voxel 0: all three foreground; voxel 1: two of three
  a(0, 0, 0) = b(0, 0, 0) = c(0, 0, 0) = 1;
  a(1, 0, 0) = b(1, 0, 0) = 1;
  ProbMap mv = majority_vote(LabelPtrs{&a, &b, &c}, box);
  CHECK(mv.values[0] == 1.0);
  CHECK(mv.decided[0] == 1);
  CHECK(mv.values[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(mv.decided[1] == 0);
}

TEST_CASE("13 of 20 foreground votes give 0.3") {
  const Dims3 dims{1, 1, 1};
  const BoundingBox box{{0, 0, 0}, {0, 0, 0}};
  std::vector<LabelVolume> atlases(20, filled(dims, 0));
  for (int i = 0; i < 13; ++i) atlases[i](0, 0, 0) = 1;
  std::vector<const LabelVolume*> ptrs;
  for (const auto& v : atlases) ptrs.push_back(&v);
  ProbMap mv = majority_vote(ptrs, box);
  CHECK(mv.values[0] == 0.3);
  CHECK(mv.decided[0] == 0);
}

TEST_CASE("majority vote validates input") {
  LabelVolume a = filled({2, 2, 2}, 1), b = filled({2, 2, 3}, 1);
  const BoundingBox box{{0, 0, 0}, {1, 1, 1}};
  CHECK_THROWS_AS(majority_vote(std::vector<const LabelVolume*>{}, box),
                  ValidationError);
  CHECK_THROWS_AS(majority_vote(LabelPtrs{&a, &b}, box), ValidationError);
  CHECK_THROWS_AS(majority_vote(LabelPtrs{&a}, BoundingBox{{0, 0, 0}, {2, 1, 1}}),
                  ValidationError);
}

TEST_CASE("label swap negates every vote value") {
  const Dims3 dims{4, 4, 4};
  const BoundingBox box{{0, 0, 0}, {3, 3, 3}};
  std::mt19937_64 rng(3);
  std::vector<LabelVolume> orig(5, LabelVolume(dims)), swapped(5, LabelVolume(dims));
  for (int a = 0; a < 5; ++a)
    for (std::int64_t i = 0; i < orig[a].size(); ++i) {
      orig[a][i] = static_cast<std::uint8_t>(rng() & 1);
      swapped[a][i] = 1 - orig[a][i];
    }
  std::vector<const LabelVolume*> optr, sptr;
  for (int a = 0; a < 5; ++a) {
    optr.push_back(&orig[a]);
    sptr.push_back(&swapped[a]);
  }
  ProbMap mv = majority_vote(optr, box);
  ProbMap neg = majority_vote(sptr, box);
  for (std::int64_t i = 0; i < mv.size(); ++i) {
    REQUIRE(neg.values[i] == -mv.values[i]);
    REQUIRE(neg.decided[i] == mv.decided[i]);
  }
}

TEST_CASE("candidate list is the undecided voxels in scan order") {
  const Dims3 dims{3, 1, 1};
  const BoundingBox box{{0, 0, 0}, {2, 0, 0}};
  LabelVolume a = filled(dims, 0), b = filled(dims, 0), c = filled(dims, 0);
  a(0, 0, 0) = b(0, 0, 0) = 1;       // 2/3 -> candidate
  a(2, 0, 0) = 1;                    // 1/3 -> candidate
  ProbMap mv = majority_vote(LabelPtrs{&a, &b, &c}, box);
  auto cands = candidate_voxels(mv);
  REQUIRE(cands.size() == 2);
  CHECK(cands[0] == VoxelIndex{0, 0, 0});
  CHECK(cands[1] == VoxelIndex{2, 0, 0});

  ProbMap unanimous = majority_vote(LabelPtrs{&a, &a}, box);
  CHECK(candidate_voxels(unanimous).empty());
}

TEST_CASE("fuse_rf leaves decided voxels untouched") {
  CubeScene scene;
  ProbMap mv = majority_vote(scene.atlases, scene.box);
  auto cands = candidate_voxels(mv);
  REQUIRE(cands.size() == 1);

  // ask for every voxel, decided ones included
  std::vector<VoxelIndex> all;
  for (std::int64_t i = 0; i < mv.size(); ++i) all.push_back(mv.box.delocalize(i));
  ProbMap fused = fuse_rf(scene.target, scene.atlases, all, mv, small_cfg());
  for (std::int64_t i = 0; i < mv.size(); ++i)
    if (mv.decided[i]) REQUIRE(fused.values[i] == mv.values[i]);
}

TEST_CASE("one-class neighborhood decides without training") {
  CubeScene scene;
  // a map that claims the cube's center is undecided: the gather there is
  // all-foreground, so the fallback fires
  ProbMap mv(scene.box);
  ProbMap fused =
      fuse_rf(scene.target, scene.atlases, {{4, 4, 4}}, mv, small_cfg());
  CHECK(fused.values[scene.box.local_index({4, 4, 4})] == 1.0);
  ProbMap fused_bg =
      fuse_rf(scene.target, scene.atlases, {{1, 1, 1}}, mv, small_cfg());
  CHECK(fused_bg.values[scene.box.local_index({1, 1, 1})] == -1.0);
}

TEST_CASE("fused values stay in [-1, 1] and the disputed voxel trains") {
  CubeScene scene;
  ProbMap mv = majority_vote(scene.atlases, scene.box);
  auto cands = candidate_voxels(mv);
  ProbMap fused = fuse_rf(scene.target, scene.atlases, cands, mv, small_cfg());
  for (std::int64_t i = 0; i < fused.size(); ++i) {
    REQUIRE(fused.values[i] >= -1.0);
    REQUIRE(fused.values[i] <= 1.0);
  }
  // only the disputed voxel may move
  const std::int64_t slot = scene.box.local_index({6, 4, 4});
  for (std::int64_t i = 0; i < fused.size(); ++i)
    if (i != slot) REQUIRE(fused.values[i] == mv.values[i]);
}

TEST_CASE("fusion is identical for any thread count") {
  CubeScene scene(3);
  scene.atlases[1].labels(2, 4, 4) = 1;
  scene.atlases[2].labels(4, 6, 4) = 1;
  ProbMap mv = majority_vote(scene.atlases, scene.box);
  auto cands = candidate_voxels(mv);
  REQUIRE(cands.size() >= 3);
  ProbMap one = fuse_rf(scene.target, scene.atlases, cands, mv, small_cfg(), 1);
  ProbMap four = fuse_rf(scene.target, scene.atlases, cands, mv, small_cfg(), 4);
  REQUIRE(one.size() == four.size());
  for (std::int64_t i = 0; i < one.size(); ++i)
    REQUIRE(one.values[i] == four.values[i]);
}

TEST_CASE("interior candidate of an agreeing scene scores positive") {
  CubeScene scene;
  ProbMap mv(scene.box);  // everything nominally undecided at 0
  ProbMap fused =
      fuse_rf(scene.target, scene.atlases, {{4, 4, 3}}, mv, small_cfg());
  CHECK(fused.values[scene.box.local_index({4, 4, 3})] > 0.0);
}

TEST_CASE("binarize thresholds strictly") {
  BoundingBox box{{0, 0, 0}, {2, 0, 0}};
  ProbMap p(box);
  p.values[0] = 1.0;
  p.values[1] = 0.0;
  p.values[2] = -0.2;
  LabelVolume m = binarize(p);
  CHECK(m.dims() == Dims3{3, 1, 1});
  CHECK(m[0] == 1);
  CHECK(m[1] == 0);
  CHECK(m[2] == 0);
  LabelVolume neg = binarize(p, -0.5);
  CHECK(neg[2] == 1);
}

TEST_CASE("fuse_rf validates candidates and grids") {
  CubeScene scene;
  ProbMap mv = majority_vote(scene.atlases, scene.box);
  CHECK_THROWS_AS(
      fuse_rf(scene.target, scene.atlases, {{0, 0, 0}}, mv, small_cfg()),
      ValidationError);
  AtlasSet none;
  CHECK_THROWS_AS(fuse_rf(scene.target, none, {}, mv, small_cfg()),
                  ValidationError);
}

}  // TEST_SUITE
