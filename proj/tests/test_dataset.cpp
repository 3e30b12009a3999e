#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "citygen/dataset.hpp"
#include "citygen/errors.hpp"
#include "citygen/image_io.hpp"
#include "citygen/rng.hpp"

using namespace citygen;
using namespace citygen::dataset;
using layout::CityLayout;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("citygen_" + name);
  std::filesystem::remove_all(p);
  return p;
}

CityLayout random_city(Rng& rng, int w, int h, int max_h) {
  geo::SemanticMap s(w, h);
  geo::HeightField hf(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool building = (x / 6 + y / 6) % 3 == 0 && x % 6 != 0 && y % 6 != 0;
      s(x, y) = building ? 2 : static_cast<std::uint8_t>(rng.range(3, 6));
      hf(x, y) = building ? static_cast<std::uint16_t>(rng.range(2, max_h)) : 0;
    }
  return CityLayout(s, hf);
}

}  // namespace

TEST(Orbit, AntipodalFramesAndSpacing) {
  OrbitSpec spec;
  spec.center_x = 256;
  spec.center_y = 200;
  spec.meters_per_pixel = 2.0;
  const auto t = orbit_trajectory(spec, 512, 512);
  ASSERT_EQ(t.size(), 60u);
  const double r = spec.radius_m / 2.0, z = spec.altitude_m / 2.0;
  for (int i = 0; i < 30; ++i) {
    const Vec3 s = t.poses[i].position + t.poses[i + 30].position;
    EXPECT_NEAR(s.x, 512, 1e-9);
    EXPECT_NEAR(s.y, 400, 1e-9);
    EXPECT_NEAR(s.z, 2 * z, 1e-9);
  }
  for (int i = 0; i < 60; ++i) {
    const Vec3 p = t.poses[i].position;
    EXPECT_NEAR(std::hypot(p.x - 256, p.y - 200), r, 1e-9);
    EXPECT_NO_THROW(t.poses[i].validate());
    const auto c = render::project(t.intrinsics[i], t.poses[i], Vec3{256, 200, 0});
    ASSERT_TRUE(c);
    EXPECT_LT(std::abs(c->u - t.intrinsics[i].cx), 0.5);
    EXPECT_LT(std::abs(c->v - t.intrinsics[i].cy), 0.5);
    // Zero roll: the camera's right axis stays horizontal.
    EXPECT_NEAR(t.poses[i].rotation.row(0).z, 0.0, 1e-12);
    const Vec3 q = t.poses[(i + 1) % 60].position;
    const double a0 = std::atan2(p.y - 200, p.x - 256), a1 = std::atan2(q.y - 200, q.x - 256);
    double d = (a1 - a0) * 180 / kPi;
    if (d < 0) d += 360;
    EXPECT_NEAR(d, 6.0, 1e-9);
  }
}

TEST(Orbit, RangeChecks) {
  OrbitSpec spec;
  spec.center_x = spec.center_y = 10;
  spec.radius_m = 100;
  EXPECT_THROW(orbit_trajectory(spec, 64, 64), ValidationError);
  spec.allow_out_of_range = true;
  EXPECT_NO_THROW(orbit_trajectory(spec, 64, 64));
  spec.allow_out_of_range = false;
  spec.radius_m = 813;
  spec.altitude_m = 900;
  EXPECT_THROW(orbit_trajectory(spec, 64, 64), ValidationError);
  spec.altitude_m = 884;
  spec.frames = 1;
  EXPECT_THROW(orbit_trajectory(spec, 64, 64), ValidationError);
  spec.frames = 60;
  spec.center_x = 65;
  EXPECT_THROW(orbit_trajectory(spec, 64, 64), DomainError);
}

TEST(Orbit, EvaluationPreset) {
  const auto spec = evaluation_orbit(32, 32);
  const auto t = orbit_trajectory(spec, 64, 64);
  EXPECT_EQ(t.size(), 40u);
  EXPECT_EQ(t.intrinsics[0].width, 960);
  EXPECT_EQ(t.intrinsics[0].height, 540);
}

TEST(Keypoints, SegmentArithmetic) {
  const auto intr = render::CameraIntrinsics::from_fov(64, 48, 50);
  std::vector<Keypoint> two{{Vec3{0, 0, 50}, Vec3{10, 10, 0}}, {Vec3{40, 8, 70}, Vec3{12, 10, 0}}};
  const auto t1 = keypoint_trajectory(two, 1, intr);
  ASSERT_EQ(t1.size(), 2u);
  EXPECT_EQ(t1.poses[0].position, two[0].position);
  EXPECT_EQ(t1.poses[1].position, two[1].position);
  const auto t2 = keypoint_trajectory(two, 2, intr);
  EXPECT_EQ(t2.poses[1].position, (two[0].position + two[1].position) * 0.5);
  auto three = two;
  three.push_back({Vec3{-5, 30, 40}, Vec3{0, 0, 0}});
  EXPECT_EQ(keypoint_trajectory(three, 10, intr).size(), 21u);
  three[2] = three[1];
  EXPECT_THROW(keypoint_trajectory(three, 10, intr), ValidationError);
  EXPECT_THROW(keypoint_trajectory(std::span(two).first(1), 3, intr), ValidationError);
}

TEST(Annotations, SkyIsNull) {
  Rng rng(1);
  const auto city = random_city(rng, 32, 32, 20);
  const auto intr = render::CameraIntrinsics::from_fov(40, 30, 40);
  const auto pose = render::look_at(Vec3{16, 16, 100}, Vec3{16, 80, 150});
  const auto a = project_annotations(city, layout::instantiate_buildings(city), intr, pose);
  for (auto v : a.semantic.storage()) EXPECT_EQ(v, 0);
  for (auto v : a.instance.storage()) EXPECT_EQ(v, 0u);
  for (auto v : a.depth.storage()) EXPECT_TRUE(std::isinf(v));
}

TEST(Annotations, NadirFootprintArea) {
  // 20x12 building of height 30 on flat road.
  geo::SemanticMap s(100, 100, 1);
  geo::HeightField h(100, 100, 0);
  for (int y = 44; y < 56; ++y)
    for (int x = 40; x < 60; ++x) {
      s(x, y) = 2;
      h(x, y) = 30;
    }
  const CityLayout city(s, h);
  const auto inst = layout::instantiate_buildings(city);
  ASSERT_EQ(inst.size(), 1u);
  const auto intr = render::CameraIntrinsics::from_fov(400, 400, 40);
  const double Z = 203.7;  // keeps footprint edges off pixel centers
  const auto pose = render::look_at(Vec3{50, 50, Z}, Vec3{50, 50, 0});
  const auto a = project_annotations(city, inst, intr, pose);
  // Roof plane sits at z = 31; pinhole scale fx / (Z - 31).
  const double scale = intr.fx / (Z - 31);
  const double expected = 20 * scale * 12 * scale;
  std::size_t count = 0;
  for (int y = 0; y < 400; ++y)
    for (int x = 0; x < 400; ++x)
      if (a.semantic(x, y) == 2) {
        ++count;
        EXPECT_EQ(a.instance(x, y), inst[0].id);
        EXPECT_GT(a.depth(x, y), Z - 31 - 1e-9);
      } else {
        EXPECT_EQ(a.instance(x, y), 0u);
      }
  EXPECT_NEAR(count / expected, 1.0, 0.02);
  EXPECT_NEAR(a.depth(200, 200), Z - 31, 0.05);  // near-center ray
}

TEST(Annotations, InstanceIdsComeFromInstantiation) {
  Rng rng(2);
  const auto city = random_city(rng, 48, 48, 25);
  const auto inst = layout::instantiate_buildings(city);
  std::set<std::uint32_t> ids{0};
  for (const auto& b : inst) ids.insert(b.id);
  const auto intr = render::CameraIntrinsics::from_fov(80, 60, 60);
  const auto pose = render::look_at(Vec3{-20, -10, 60}, Vec3{24, 24, 0});
  const auto a = project_annotations(city, inst, intr, pose);
  std::size_t building_px = 0;
  for (std::size_t i = 0; i < a.instance.size(); ++i) {
    EXPECT_TRUE(ids.count(a.instance.storage()[i]));
    building_px += a.instance.storage()[i] != 0;
  }
  EXPECT_GT(building_px, 0u);
}

TEST(Annotations, AgreeWithOpaqueVolumeRender) {
  Rng rng(3);
  const auto city = random_city(rng, 64, 64, 30);
  const auto intr = render::CameraIntrinsics::from_fov(96, 72, 55);
  const auto pose = render::look_at(Vec3{-15, 20, 70}, Vec3{32, 32, 0});
  const auto ann = project_annotations(city, layout::instantiate_buildings(city), intr, pose);
  const auto win = layout::extract_window(city, layout::Cell{32, 32}, layout::WindowDims{64, 64, 64});
  render::RenderSettings settings;
  settings.step = 0.125;
  const render::ProceduralField field(400.0);
  const auto out = render::march(win, render::make_rays(intr, pose), nullptr, field, settings);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < ann.semantic.size(); ++i) agree += ann.semantic.storage()[i] == out.semantic.storage()[i];
  EXPECT_GE(static_cast<double>(agree) / ann.semantic.size(), 0.99);
}

TEST(Export, RoundTrip) {
  Rng rng(4);
  const auto intr = render::CameraIntrinsics::from_fov(24, 16, 50);
  Trajectory t;
  std::vector<Frame> frames;
  for (int i = 0; i < 3; ++i) {
    t.push_back(render::look_at(Vec3{rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(5, 20)}, Vec3{0, 0, 0}), intr);
    Frame f{ColorImage(24, 16), Raster<std::uint8_t>(24, 16), Raster<std::uint32_t>(24, 16)};
    for (auto& c : f.color.storage())
      c = Rgb{static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform())};
    for (auto& s : f.semantic.storage()) s = static_cast<std::uint8_t>(rng.range(0, 8));
    for (auto& id : f.instance.storage()) id = static_cast<std::uint32_t>(rng.range(0, 65535));
    frames.push_back(std::move(f));
  }
  const auto dir = temp_dir("export");
  const auto m = export_dataset(t, frames, dir, "seed=4");
  EXPECT_EQ(m.frames, t.size());
  EXPECT_EQ(m.files.size(), 12u);
  EXPECT_EQ(m.config_hash, io::sha256_hex(std::string("seed=4")));
  EXPECT_TRUE(std::filesystem::exists(dir / "frame_00002_instance.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "frame_00000_camera.txt"));

  const auto back = import_dataset(dir);
  ASSERT_EQ(back.frames.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(io::quantize(back.frames[i].color), io::quantize(frames[i].color));
    EXPECT_EQ(back.frames[i].semantic, frames[i].semantic);
    EXPECT_EQ(back.frames[i].instance, frames[i].instance);
    for (int k = 0; k < 9; ++k) EXPECT_NEAR(back.trajectory.poses[i].rotation.m[k], t.poses[i].rotation.m[k], 1e-12);
    EXPECT_NEAR(norm(back.trajectory.poses[i].position - t.poses[i].position), 0.0, 1e-12);
    EXPECT_EQ(back.trajectory.intrinsics[i].fx, intr.fx);
    EXPECT_EQ(back.trajectory.intrinsics[i].cx, intr.cx);
  }

  // Re-export of the imported data reproduces every file.
  const auto dir2 = temp_dir("export2");
  const auto m2 = export_dataset(back.trajectory, back.frames, dir2, "seed=4");
  for (std::size_t i = 0; i < m.files.size(); ++i) EXPECT_EQ(m2.files[i].sha256, m.files[i].sha256);

  std::ofstream(dir / "frame_00001_camera.txt", std::ios::app) << "\n";
  EXPECT_THROW(import_dataset(dir), IoError);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST(Export, Errors) {
  const auto intr = render::CameraIntrinsics::from_fov(8, 8, 50);
  Trajectory t;
  t.push_back(render::look_at(Vec3{0, 0, 10}, Vec3{1, 0, 0}), intr);
  t.push_back(render::look_at(Vec3{1, 0, 10}, Vec3{1, 0, 0}), intr);
  std::vector<Frame> one{{ColorImage(8, 8), Raster<std::uint8_t>(8, 8), Raster<std::uint32_t>(8, 8)}};
  EXPECT_THROW(export_dataset(t, one, temp_dir("misaligned")), ValidationError);
  auto two = one;
  two.push_back(one[0]);
  const auto blocker = temp_dir("blocker");
  std::ofstream(blocker) << "x";
  EXPECT_THROW(export_dataset(t, two, blocker / "sub"), IoError);
  std::filesystem::remove(blocker);
  two[1].instance(0, 0) = 70000;
  EXPECT_THROW(export_dataset(t, two, temp_dir("wide")), ValidationError);
}

TEST(Export, CameraTextRoundTrip) {
  const auto intr = render::CameraIntrinsics::from_fov(960, 540, 45);
  const auto pose = render::look_at(Vec3{0.1, -3.7e2, 123.456789}, Vec3{1.0 / 3, 2.0 / 7, 0});
  render::CameraIntrinsics i2;
  render::CameraPose p2;
  parse_camera(format_camera(intr, pose), i2, p2);
  EXPECT_EQ(p2.rotation, pose.rotation);
  EXPECT_EQ(p2.position, pose.position);
  EXPECT_EQ(i2.fy, intr.fy);
  EXPECT_THROW(parse_camera("width 3\n", i2, p2), ValidationError);
}
