#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "citygen/composite.hpp"
#include "citygen/dataset.hpp"
#include "citygen/errors.hpp"
#include "citygen/geo.hpp"
#include "citygen/image_io.hpp"
#include "citygen/pipeline.hpp"
#include "citygen/studio.hpp"
#include "citygen/synth.hpp"

using namespace citygen;
namespace fs = std::filesystem;
using studio::Json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string config;
};

struct Size {
  int width = 0, height = 0;
};

Size parse_size(const std::string& s) {
  Size out;
  char x = 0;
  std::istringstream in(s);
  if (!(in >> out.width >> x >> out.height) || (x != 'x' && x != 'X') || !in.eof() || out.width <= 0 || out.height <= 0)
    throw ValidationError("size must look like 960x540: " + s);
  return out;
}

studio::ServiceConfig load_config(const Common& c) { return studio::ServiceConfig::load(c.config); }

layout::CityLayout read_layout(const fs::path& dir) {
  const auto r = geo::load_layout(dir);
  return layout::CityLayout(r.semantic, r.height);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--config", c.config, "JSON config file (service config format)");
}

struct CameraArgs {
  int frames = 60;
  std::string resolution = "960x540";
  double radius_m = 400, altitude_m = 300, fov_deg = 45, mpp = 1.0;
  std::vector<double> center;
  bool override_range = false;
  bool evaluation = false;

  void add(CLI::App* app) {
    app->add_option("--frames", frames, "Orbit frame count");
    app->add_option("--resolution", resolution, "Image size WxH");
    app->add_option("--radius-m", radius_m, "Orbit radius in meters");
    app->add_option("--altitude-m", altitude_m, "Orbit altitude in meters");
    app->add_option("--fov", fov_deg, "Vertical field of view in degrees");
    app->add_option("--meters-per-pixel", mpp, "Meters per layout cell");
    app->add_option("--center", center, "Orbit center x y (layout cells)")->expected(2);
    app->add_flag("--allow-out-of-range", override_range, "Skip orbit radius/altitude range checks");
    app->add_flag("--evaluation", evaluation, "Evaluation preset: 40 frames at 960x540");
  }

  render::Trajectory trajectory(const layout::CityLayout& city) const {
    dataset::OrbitSpec o;
    const double cx = center.empty() ? city.width() / 2.0 : center[0];
    const double cy = center.empty() ? city.height() / 2.0 : center[1];
    if (evaluation) {
      o = dataset::evaluation_orbit(cx, cy, mpp);
    } else {
      const Size s = parse_size(resolution);
      o.center_x = cx;
      o.center_y = cy;
      o.frames = frames;
      o.intrinsics = render::CameraIntrinsics::from_fov(s.width, s.height, fov_deg);
      o.meters_per_pixel = mpp;
    }
    o.radius_m = radius_m;
    o.altitude_m = altitude_m;
    o.allow_out_of_range = override_range;
    return dataset::orbit_trajectory(o, city.width(), city.height());
  }
};

Json trajectory_json(const render::Trajectory& t) {
  Json poses = Json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& k = t.intrinsics[i];
    const auto& p = t.poses[i];
    poses.push_back({{"position", {p.position.x, p.position.y, p.position.z}},
                     {"rotation", p.rotation.m},
                     {"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}}});
  }
  return {{"poses", poses}};
}

// A dataset directory (camera files) or a trajectory.json written by render.
render::Trajectory read_trajectory(const fs::path& path) {
  if (fs::is_directory(path)) {
    if (fs::exists(path / "manifest.json")) return dataset::import_dataset(path).trajectory;
    if (fs::exists(path / "trajectory.json")) return read_trajectory(path / "trajectory.json");
    throw NotFoundError("no trajectory found in " + path.string());
  }
  const Json j = Json::parse(io::read_text_file(path));
  render::Trajectory t;
  for (const auto& p : j.at("poses")) {
    render::CameraPose pose;
    const auto pos = p.at("position");
    pose.position = {pos.at(0).get<double>(), pos.at(1).get<double>(), pos.at(2).get<double>()};
    pose.rotation.m = p.at("rotation").get<std::array<double, 9>>();
    const auto& k = p.at("intrinsics");
    render::CameraIntrinsics intr;
    intr.fx = k.at("fx");
    intr.fy = k.at("fy");
    intr.cx = k.at("cx");
    intr.cy = k.at("cy");
    intr.width = k.at("width");
    intr.height = k.at("height");
    t.push_back(pose, intr);
  }
  return t;
}

// 16-bit PNG or whitespace-separated text rows.
DepthImage read_depth(const fs::path& path) {
  if (path.extension() == ".png") {
    const auto g = io::read_png_gray16(path);
    DepthImage d(g.width(), g.height());
    for (std::size_t i = 0; i < g.size(); ++i) d.storage()[i] = g.storage()[i];
    return d;
  }
  std::istringstream in(io::read_text_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) row.push_back(tok == "inf" ? std::numeric_limits<double>::infinity() : std::stod(tok));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("empty depth file: " + path.string());
  DepthImage d(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < d.height(); ++y) {
    if (rows[y].size() != rows[0].size()) throw ValidationError("ragged depth rows in " + path.string());
    for (int x = 0; x < d.width(); ++x) d(x, y) = rows[y][x];
  }
  return d;
}

pipeline::SceneConfig scene_config(const Common& c, double step, int threads, bool no_buildings) {
  pipeline::SceneConfig cfg = load_config(c).scene;
  cfg.seed = c.seed;
  if (step > 0) cfg.settings.step = step;
  if (threads > 0) cfg.settings.threads = threads;
  if (no_buildings) cfg.render_buildings = false;
  return cfg;
}

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.png", i);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"citygen: unbounded city layout synthesis and rendering"};
  app.require_subcommand(1);

  // generate-layout
  Common gen_c;
  std::string gen_size = "512x512", gen_out = "layout", gen_sampler = "procedural", gen_geojson;
  std::vector<double> gen_origin;
  int gen_zoom = geo::kDefaultZoom;
  auto* gen = app.add_subcommand("generate-layout", "Synthesize (or rasterize) a layout");
  add_common(gen, gen_c);
  gen->add_option("--size", gen_size, "Layout size WxH (multiples of 16, >= 512 when synthesized)");
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--sampler", gen_sampler, "Token sampler (procedural, replay:<token>)");
  gen->add_option("--geojson", gen_geojson, "Rasterize this GeoJSON instead of synthesizing");
  gen->add_option("--origin", gen_origin, "Global Web-Mercator pixel of the top-left corner")->expected(2);
  gen->add_option("--zoom", gen_zoom, "Web-Mercator zoom level");

  // instantiate
  Common inst_c;
  std::string inst_layout = "layout", inst_out;
  auto* inst = app.add_subcommand("instantiate", "List building instances of a layout");
  add_common(inst, inst_c);
  inst->add_option("--layout", inst_layout, "Layout directory")->required();
  inst->add_option("--out", inst_out, "Write instances JSON here (default: stdout)");

  // render
  Common ren_c;
  CameraArgs ren_cam;
  std::string ren_layout, ren_out = "frames";
  double ren_step = 0;
  int ren_threads = 0;
  bool ren_no_buildings = false;
  auto* ren = app.add_subcommand("render", "Render an orbit over a layout");
  add_common(ren, ren_c);
  ren_cam.add(ren);
  ren->add_option("--layout", ren_layout, "Layout directory")->required();
  ren->add_option("--out", ren_out, "Output directory");
  ren->add_option("--step", ren_step, "March step in voxels");
  ren->add_option("--threads", ren_threads, "Worker threads (0: all cores)");
  ren->add_flag("--no-buildings", ren_no_buildings, "Background render only");

  // export-dataset
  Common exp_c;
  CameraArgs exp_cam;
  std::string exp_layout, exp_out = "dataset";
  double exp_step = 0;
  int exp_threads = 0;
  auto* exp = app.add_subcommand("export-dataset", "Render an orbit and export images with annotations");
  add_common(exp, exp_c);
  exp_cam.add(exp);
  exp->add_option("--layout", exp_layout, "Layout directory")->required();
  exp->add_option("--out", exp_out, "Output directory");
  exp->add_option("--step", exp_step, "March step in voxels");
  exp->add_option("--threads", exp_threads, "Worker threads (0: all cores)");

  // metrics
  Common met_c;
  std::string met_kind, met_a, met_b, met_mask, met_json;
  bool met_rotation = false;
  auto* met = app.add_subcommand("metrics", "Depth error (de) or camera error (ce)");
  add_common(met, met_c);
  met->add_option("kind", met_kind, "de or ce")->required()->check(CLI::IsMember({"de", "ce"}));
  met->add_option("--a", met_a, "First input")->required();
  met->add_option("--b", met_b, "Second input")->required();
  met->add_option("--mask", met_mask, "Valid-pixel mask PNG (de)");
  met->add_option("--json", met_json, "Also write a JSON report here");
  met->add_flag("--rotation", met_rotation, "Add the rotation term (ce)");

  // serve
  Common srv_c;
  int srv_port = -1;
  std::string srv_host, srv_data;
  auto* srv = app.add_subcommand("serve", "Run the HTTP studio service");
  add_common(srv, srv_c);
  srv->add_option("--port", srv_port, "Listen port");
  srv->add_option("--host", srv_host, "Listen address");
  srv->add_option("--data-dir", srv_data, "Data directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const Size size = parse_size(gen_size);
      geo::RasterizedLayout out;
      out.config.width = size.width;
      out.config.height = size.height;
      out.config.seed = gen_c.seed;
      out.config.zoom = gen_zoom;
      if (!gen_geojson.empty()) {
        if (gen_origin.size() == 2) out.config.origin = {gen_origin[0], gen_origin[1]};
        out = geo::rasterize(geo::load_geojson(gen_geojson), out.config);
      } else {
        const auto cfg = load_config(gen_c);
        const auto sampler = synth::make_sampler(gen_sampler.empty() ? cfg.sampler : gen_sampler);
        const auto tok = synth::default_tokenizer();
        auto r = synth::extrapolate(size.width, size.height, *tok, *sampler, gen_c.seed);
        out.semantic = std::move(r.semantic);
        out.height = std::move(r.height);
      }
      fs::create_directories(gen_out);
      geo::save_layout(gen_out, out);
      std::cout << "checksum=" << studio::layout_checksum(out.semantic, out.height) << "\n"
                << "width=" << size.width << "\nheight=" << size.height << "\nout=" << gen_out << "\n";
    } else if (*inst) {
      const auto city = read_layout(inst_layout);
      Json list = Json::array();
      for (const auto& b : layout::instantiate_buildings(city))
        list.push_back({{"id", b.id},
                        {"center", {b.center.x, b.center.y}},
                        {"bbox_min", {b.bbox_min.x, b.bbox_min.y}},
                        {"bbox_max", {b.bbox_max.x, b.bbox_max.y}},
                        {"height_max", b.height_max},
                        {"area", b.footprint.size()}});
      const std::string text = Json{{"instances", list}}.dump(2) + "\n";
      if (inst_out.empty()) std::cout << text;
      else io::write_text_file(inst_out, text);
      std::cerr << "instances=" << list.size() << "\n";
    } else if (*ren) {
      const auto city = read_layout(ren_layout);
      const auto traj = ren_cam.trajectory(city);
      const pipeline::SceneRenderer scene(city, scene_config(ren_c, ren_step, ren_threads, ren_no_buildings));
      fs::create_directories(ren_out);
      for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto r = scene.render(traj.intrinsics[i], traj.poses[i]);
        io::write_png_rgb8(fs::path(ren_out) / frame_name(i), io::quantize(r.image));
        std::cerr << "frame " << i + 1 << "/" << traj.size() << "\n";
      }
      io::write_text_file(fs::path(ren_out) / "trajectory.json", trajectory_json(traj).dump(2) + "\n");
      std::cout << "frames=" << traj.size() << "\nout=" << ren_out << "\n";
    } else if (*exp) {
      const auto city = read_layout(exp_layout);
      const auto traj = exp_cam.trajectory(city);
      const auto cfg = scene_config(exp_c, exp_step, exp_threads, false);
      const pipeline::SceneRenderer scene(city, cfg);
      std::vector<dataset::Frame> frames;
      for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto r = scene.render(traj.intrinsics[i], traj.poses[i]);
        const auto ann = dataset::project_annotations(city, scene.instances(), traj.intrinsics[i], traj.poses[i],
                                                      cfg.settings.threads);
        frames.push_back({r.image, ann.semantic, ann.instance});
        std::cerr << "frame " << i + 1 << "/" << traj.size() << "\n";
      }
      const Json config_record{{"seed", exp_c.seed}, {"layout", studio::layout_checksum(city.semantic(), city.heights())},
                               {"step", cfg.settings.step}, {"trajectory", trajectory_json(traj)}};
      const auto m = dataset::export_dataset(traj, frames, exp_out, config_record.dump(), cfg.settings.threads);
      std::cout << "frames=" << m.frames << "\nconfig_hash=" << m.config_hash << "\nout=" << exp_out << "\n";
    } else if (*met) {
      double value = 0;
      if (met_kind == "ce") {
        value = compose::camera_error(read_trajectory(met_a), read_trajectory(met_b), {.rotation_term = met_rotation});
      } else {
        compose::MaskImage mask;
        if (!met_mask.empty()) {
          mask = io::read_png_indexed(met_mask);
          for (auto& v : mask.storage()) v = v != 0;
        }
        value = compose::depth_error(read_depth(met_a), read_depth(met_b), mask);
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", value);
      std::cout << met_kind << "=" << buf << "\n";
      if (!met_json.empty())
        io::write_text_file(met_json, Json{{"metric", met_kind}, {"value", value}, {"a", met_a}, {"b", met_b}}.dump(2) + "\n");
    } else if (*srv) {
      auto cfg = load_config(srv_c);
      if (srv_port >= 0) cfg.port = srv_port;
      if (!srv_host.empty()) cfg.host = srv_host;
      if (!srv_data.empty()) cfg.data_dir = srv_data;
      cfg.scene.seed = srv_c.seed;
      studio::Service service(cfg);
      studio::HttpServer server(service);
      std::cerr << "listening on " << cfg.host << ":" << cfg.port << "\n";
      if (!server.listen()) throw IoError("cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
