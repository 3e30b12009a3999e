#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "citygen/errors.hpp"
#include "citygen/layout.hpp"
#include "citygen/rng.hpp"
#include "oracles.hpp"

using namespace citygen;
using namespace citygen::layout;

namespace {

constexpr auto B = static_cast<std::uint8_t>(SemanticClass::kBuilding);
constexpr auto R = static_cast<std::uint8_t>(SemanticClass::kRoad);
constexpr auto O = static_cast<std::uint8_t>(SemanticClass::kOthers);

CityLayout random_layout(Rng& rng, int w, int h, double building_density, int max_h) {
  SemanticMap s(w, h);
  HeightField hf(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (rng.uniform() < building_density) {
        s(x, y) = B;
        hf(x, y) = static_cast<std::uint16_t>(rng.range(1, max_h));
      } else {
        s(x, y) = static_cast<std::uint8_t>(rng.range(1, 6));
        if (s(x, y) == B) s(x, y) = O;
        hf(x, y) = s(x, y) == R ? 4 : 0;
      }
    }
  return CityLayout(std::move(s), std::move(hf));
}

}  // namespace

TEST(LayoutAt, ExtrusionRuleIncludesTopVoxel) {
  SemanticMap s(3, 3, O);
  HeightField h(3, 3, 0);
  s(1, 1) = B;
  h(1, 1) = 21;
  s(2, 2) = static_cast<std::uint8_t>(SemanticClass::kWater);
  const CityLayout layout(s, h);
  EXPECT_EQ(layout_at(layout, 1, 1, 21), SemanticClass::kBuilding);
  EXPECT_EQ(layout_at(layout, 1, 1, 22), SemanticClass::kNull);
  EXPECT_EQ(layout_at(layout, 2, 2, 0), SemanticClass::kWater);
  EXPECT_EQ(layout_at(layout, 2, 2, 1), SemanticClass::kNull);
  EXPECT_EQ(layout_at(layout, -1, 0, 0), SemanticClass::kNull);
  EXPECT_EQ(layout_at(layout, 0, 3, 0), SemanticClass::kNull);
}

TEST(LayoutAt, MatchesMaterializedVolumeAndGroundIsOccupied) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const CityLayout layout = random_layout(rng, 16, 16, 0.3, 20);
    const int depth = layout.max_height() + 3;
    const auto vol = oracle::materialize(layout.semantic(), layout.heights(), depth);
    for (int k = 0; k < depth; ++k)
      for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 16; ++i)
          ASSERT_EQ(to_int(layout_at(layout, i, j, k)),
                    vol[(static_cast<std::size_t>(k) * 16 + j) * 16 + i]);
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) EXPECT_NE(layout_at(layout, i, j, 0), SemanticClass::kNull);
  }
}

TEST(CityLayout, RejectsMismatchedDimensions) {
  EXPECT_THROW(CityLayout(SemanticMap(3, 3, O), HeightField(3, 4, 0)), ValidationError);
  EXPECT_THROW(CityLayout(SemanticMap(2, 2, 9), HeightField(2, 2, 0)), ValidationError);
}

TEST(ExtractWindow, IdentityCrop) {
  Rng rng(2);
  const CityLayout layout = random_layout(rng, 10, 8, 0.3, 9);
  const LocalWindow w = extract_window(layout, {5, 4}, {8, 10, 32});
  EXPECT_EQ(w.origin, (Cell{0, 0}));
  EXPECT_EQ(w.semantic_patch, layout.semantic());
  EXPECT_EQ(w.height_patch, layout.heights());
}

TEST(ExtractWindow, PadsOutsideWithOthersAtZero) {
  SemanticMap s(6, 6, B);
  HeightField h(6, 6, 7);
  const CityLayout layout(s, h);
  const LocalWindow w = extract_window(layout, {0, 0}, {4, 4, 16});
  EXPECT_EQ(w.origin, (Cell{-2, -2}));
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const bool inside = x >= 2 && y >= 2;
      EXPECT_EQ(w.semantic_patch(x, y), inside ? B : O);
      EXPECT_EQ(w.height_patch(x, y), inside ? 7 : 0);
    }
  EXPECT_EQ(kBuildingWindow.height, 672);
  EXPECT_EQ(kBuildingWindow.width, 672);
  EXPECT_EQ(kBuildingWindow.depth, 640);
  EXPECT_EQ(kBackgroundWindow.width, 1536);
  EXPECT_EQ(kBackgroundWindow.depth, 640);
}

TEST(Instantiate, EmptyDiagonalAndCheckerboard) {
  EXPECT_TRUE(instantiate_buildings(SemanticMap(5, 5, O)).empty());

  // Two L-shaped blobs meeting only at a corner: (2,1) and (3,2).
  SemanticMap diag(6, 6, O);
  diag(1, 1) = diag(2, 1) = diag(1, 2) = B;
  diag(3, 2) = diag(3, 3) = diag(4, 3) = B;
  const auto inst = instantiate_buildings(diag);
  EXPECT_EQ(inst.size(), 2u);
  EXPECT_EQ(inst.size(), static_cast<std::size_t>([&] {
              const auto roots = oracle::union_find_components(diag, B);
              std::set<int> u(roots.begin(), roots.end());
              u.erase(-1);
              return u.size();
            }()));

  SemanticMap checker(8, 8, O);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      if ((x + y) % 2 == 0) checker(x, y) = B;
  EXPECT_EQ(instantiate_buildings(checker).size(), 32u);
}

TEST(Instantiate, IdsFollowScanlineOrderAndCenters) {
  SemanticMap s(10, 6, O);
  // Second-encountered blob in scanline order starts on row 0 at x = 7.
  for (int y = 2; y <= 4; ++y)
    for (int x = 1; x <= 4; ++x) s(x, y) = B;
  s(7, 0) = s(8, 0) = s(8, 1) = B;
  const auto inst = instantiate_buildings(s);
  ASSERT_EQ(inst.size(), 2u);
  EXPECT_EQ(inst[0].id, 1u);
  EXPECT_EQ(inst[0].footprint.front(), (Cell{7, 0}));
  EXPECT_EQ(inst[0].center, (Cell{7, 0}));  // bbox (7..8, 0..1) -> floor
  EXPECT_EQ(inst[1].id, 2u);
  EXPECT_EQ(inst[1].center, (Cell{2, 3}));
  EXPECT_EQ(inst[1].footprint.size(), 12u);
}

TEST(Instantiate, AgreesWithUnionFindOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const CityLayout layout = random_layout(rng, 64, 64, 0.3, 30);
    const auto inst = instantiate_buildings(layout);
    const auto ids = instance_id_raster(64, 64, inst);
    const auto ref = oracle::union_find_components(layout.semantic(), B);
    ASSERT_TRUE(oracle::same_partition(ref, ids.storage()));
    std::size_t cells = 0;
    for (const auto& b : inst) {
      cells += b.footprint.size();
      for (const Cell& c : b.footprint) EXPECT_LE(layout.heights()(c.x, c.y), b.height_max);
    }
    EXPECT_EQ(cells, static_cast<std::size_t>(
                         std::count(layout.semantic().data().begin(), layout.semantic().data().end(), B)));
  }
}

TEST(Relabel, FacadeRoofAndOtherInstancesErased) {
  SemanticMap s(12, 8, O);
  HeightField h(12, 8, 0);
  for (int y = 2; y <= 4; ++y)
    for (int x = 2; x <= 4; ++x) {
      s(x, y) = B;
      h(x, y) = 21;
    }
  s(8, 3) = s(9, 3) = B;
  h(8, 3) = h(9, 3) = 30;
  s(5, 3) = R;
  h(5, 3) = 4;
  const CityLayout layout(s, h);
  const auto inst = instantiate_buildings(layout);
  ASSERT_EQ(inst.size(), 2u);
  const LocalWindow w = building_window(layout, inst[0], inst, {8, 8, 64});
  const int ox = w.origin.x, oy = w.origin.y;
  for (int k = 0; k <= 20; ++k) EXPECT_EQ(w.at(3 - ox, 3 - oy, k), SemanticClass::kFacade);
  EXPECT_EQ(w.at(3 - ox, 3 - oy, 21), SemanticClass::kRoof);
  EXPECT_EQ(w.at(3 - ox, 3 - oy, 22), SemanticClass::kNull);
  for (int k = 0; k < 40; ++k) EXPECT_EQ(w.at(8 - ox, 3 - oy, k), SemanticClass::kNull);
  EXPECT_EQ(w.at(5 - ox, 3 - oy, 4), SemanticClass::kRoad);
  EXPECT_EQ(w.instance_at(3 - ox, 3 - oy), inst[0].id);
  EXPECT_EQ(w.instance_at(5 - ox, 3 - oy), 0u);

  // One roof voxel and H facade voxels per target column.
  for (const Cell& c : inst[0].footprint) {
    int roofs = 0, facades = 0;
    for (int k = 0; k < 64; ++k) {
      const auto l = w.at(c.x - ox, c.y - oy, k);
      roofs += l == SemanticClass::kRoof;
      facades += l == SemanticClass::kFacade;
    }
    EXPECT_EQ(roofs, 1);
    EXPECT_EQ(facades, layout.heights()(c.x, c.y));
  }
}

TEST(Relabel, TargetOutsideWindowIsError) {
  SemanticMap s(40, 40, O);
  s(35, 35) = B;
  const CityLayout layout(s, HeightField(40, 40, 3));
  const auto inst = instantiate_buildings(layout);
  const LocalWindow w = extract_window(layout, {4, 4}, {8, 8, 16});
  EXPECT_THROW(relabel_instance_window(w, inst[0], inst), ValidationError);
}

TEST(EditHeight, ChangesExactlyTheFootprint) {
  Rng rng(4);
  const CityLayout layout = random_layout(rng, 32, 32, 0.3, 25);
  const auto inst = instantiate_buildings(layout);
  ASSERT_FALSE(inst.empty());
  const auto& target = *std::max_element(inst.begin(), inst.end(), [](const auto& a, const auto& b) {
    return a.footprint.size() < b.footprint.size();
  });

  const CityLayout same = edit_building_height(layout, target, layout.heights()(target.footprint[0].x,
                                                                               target.footprint[0].y));
  if (std::all_of(target.footprint.begin(), target.footprint.end(), [&](Cell c) {
        return layout.heights()(c.x, c.y) == layout.heights()(target.footprint[0].x, target.footprint[0].y);
      }))
    EXPECT_EQ(same, layout);

  const CityLayout edited = edit_building_height(layout, target, 40);
  EXPECT_EQ(edited.semantic(), layout.semantic());
  std::set<std::pair<int, int>> foot;
  for (const Cell& c : target.footprint) foot.insert({c.x, c.y});
  std::size_t changed_outside = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      if (foot.count({x, y})) {
        EXPECT_EQ(edited.heights()(x, y), 40);
      } else {
        changed_outside += edited.heights()(x, y) != layout.heights()(x, y);
      }
    }
  EXPECT_EQ(changed_outside, 0u);
  EXPECT_THROW(edit_building_height(layout, target, 0), ValidationError);
  EXPECT_THROW(edit_building_height(layout, inst, 9999, 10), NotFoundError);
}

TEST(EditHeight, SetToCurrentUniformHeightIsNoOp) {
  SemanticMap s(6, 6, O);
  HeightField h(6, 6, 0);
  for (int x = 1; x < 4; ++x) {
    s(x, 2) = B;
    h(x, 2) = 21;
  }
  const CityLayout layout(s, h);
  const auto inst = instantiate_buildings(layout);
  EXPECT_EQ(edit_building_height(layout, inst[0], 21), layout);
}
