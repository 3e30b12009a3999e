#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "citygen/binary_io.hpp"
#include "citygen/errors.hpp"
#include "citygen/image_io.hpp"
#include "citygen/rng.hpp"
#include "citygen/studio.hpp"
#include "citygen/synth.hpp"

namespace citygen::studio {
namespace fs = std::filesystem;

namespace {

constexpr int kMaxLayoutSide = 8192;

template <typename T>
T field(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T required(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  return field<T>(j, key, T{});
}

Vec3 vec3(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(std::string(what) + " must be [x, y, z]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const Json::exception&) {
    throw ValidationError(std::string(what) + " must hold numbers");
  }
}

void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  io::write_text_file(tmp, text);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  const std::string s = io::read_text_file(path);
  return {s.begin(), s.end()};
}

Json pose_json(const render::CameraPose& p) {
  return {{"position", {p.position.x, p.position.y, p.position.z}}, {"rotation", p.rotation.m}};
}

JobStatus parse_status(const std::string& s) {
  if (s == "queued") return JobStatus::kQueued;
  if (s == "running") return JobStatus::kRunning;
  if (s == "done") return JobStatus::kDone;
  if (s == "failed") return JobStatus::kFailed;
  throw ValidationError("unknown job status: " + s);
}

fs::path object_dir(const fs::path& data, const std::string& checksum) { return data / "objects" / checksum; }

void save_layout_object(const fs::path& dir, const geo::SemanticMap& s, const geo::HeightField& h) {
  if (fs::exists(dir / "height.png")) return;
  fs::create_directories(dir);
  io::write_png_indexed(dir / "semantic.png", s, semantic_palette());
  io::write_png_gray16(dir / "height.png", h);
}

}  // namespace

const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::kQueued:
      return "queued";
    case JobStatus::kRunning:
      return "running";
    case JobStatus::kDone:
      return "done";
    case JobStatus::kFailed:
      return "failed";
  }
  return "failed";
}

ServiceConfig ServiceConfig::from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  static const char* kKeys[] = {"host", "port", "workers", "data_dir", "sampler", "preview_max", "render", "grid"};
  for (const auto& [k, v] : j.items())
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* key) { return k == key; }) == std::end(kKeys))
      throw ValidationError("unknown config key: " + k);
  ServiceConfig c;
  c.host = field<std::string>(j, "host", c.host);
  c.port = field<int>(j, "port", c.port);
  c.workers = field<int>(j, "workers", c.workers);
  c.data_dir = field<std::string>(j, "data_dir", c.data_dir.string());
  c.sampler = field<std::string>(j, "sampler", c.sampler);
  c.preview_max = field<int>(j, "preview_max", c.preview_max);
  if (j.contains("render")) {
    const auto& r = j["render"];
    c.scene.settings.step = field<double>(r, "step", c.scene.settings.step);
    c.scene.settings.threads = field<int>(r, "threads", c.scene.settings.threads);
    c.scene.kappa = field<double>(r, "kappa", c.scene.kappa);
    c.scene.render_buildings = field<bool>(r, "buildings", c.scene.render_buildings);
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    c.scene.grid.levels = field<int>(g, "levels", c.scene.grid.levels);
    const int tl = field<int>(g, "table_log2", 19);
    if (tl < 4 || tl > 24) throw ValidationError("grid.table_log2 must be in [4, 24]");
    c.scene.grid.table_size = 1u << tl;
    c.scene.grid.channels = field<int>(g, "channels", c.scene.grid.channels);
    c.scene.grid.base_resolution = field<double>(g, "base_resolution", c.scene.grid.base_resolution);
    c.scene.grid.max_resolution = field<double>(g, "max_resolution", c.scene.grid.max_resolution);
  }
  if (c.port < 0 || c.port > 65535) throw ValidationError("port out of range");
  if (c.workers < 1) throw ValidationError("workers must be >= 1");
  if (c.preview_max < 16) throw ValidationError("preview_max must be >= 16");
  c.scene.grid.validate();
  c.scene.settings.validate();
  return c;
}

ServiceConfig ServiceConfig::load(const fs::path& path) {
  fs::path p = path;
  if (p.empty())
    if (const char* env = std::getenv("CITYGEN_CONFIG"); env && *env) p = env;
  ServiceConfig c;
  if (!p.empty()) {
    try {
      c = from_json(Json::parse(io::read_text_file(p)));
    } catch (const Json::parse_error& e) {
      throw ValidationError("config " + p.string() + ": " + e.what());
    }
  }
  if (const char* env = std::getenv("CITYGEN_DATA_DIR"); env && *env) c.data_dir = env;
  return c;
}

std::string layout_checksum(const geo::SemanticMap& s, const geo::HeightField& h) {
  std::string bytes(reinterpret_cast<const char*>(s.storage().data()), s.size());
  bytes.reserve(s.size() + 2 * h.size() + 8);
  for (int v : {s.width(), s.height()})
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
  for (auto v : h.storage()) {
    bytes.push_back(static_cast<char>(v & 0xFF));
    bytes.push_back(static_cast<char>(v >> 8));
  }
  return io::sha256_hex(bytes);
}

render::Trajectory parse_trajectory(const Json& spec, int layout_width, int layout_height) {
  if (!spec.is_object()) throw ValidationError("trajectory spec must be an object");
  const auto kind = field<std::string>(spec, "kind", "orbit");
  const int w = field<int>(spec, "width", 960), h = field<int>(spec, "height", 540);
  if (w <= 0 || h <= 0 || w > 8192 || h > 8192) throw ValidationError("trajectory resolution out of range");
  const auto intr = render::CameraIntrinsics::from_fov(w, h, field<double>(spec, "fov_deg", 45.0));
  if (kind == "orbit") {
    dataset::OrbitSpec o;
    const Json center = spec.value("center", Json::array({layout_width / 2.0, layout_height / 2.0}));
    if (!center.is_array() || center.size() != 2 || !center[0].is_number() || !center[1].is_number())
      throw ValidationError("center must be [x, y]");
    o.center_x = center[0].get<double>();
    o.center_y = center[1].get<double>();
    o.radius_m = field<double>(spec, "radius_m", o.radius_m);
    o.altitude_m = field<double>(spec, "altitude_m", o.altitude_m);
    o.frames = field<int>(spec, "frames", o.frames);
    o.meters_per_pixel = field<double>(spec, "meters_per_pixel", o.meters_per_pixel);
    o.allow_out_of_range = field<bool>(spec, "allow_out_of_range", false);
    o.start_angle_deg = field<double>(spec, "start_angle_deg", 0.0);
    o.intrinsics = intr;
    if (o.frames > 10000) throw ValidationError("too many frames");
    return dataset::orbit_trajectory(o, layout_width, layout_height);
  }
  if (kind == "keypoints") {
    const Json pts = spec.value("points", Json::array());
    if (!pts.is_array()) throw ValidationError("points must be an array");
    std::vector<dataset::Keypoint> kp;
    for (const auto& p : pts) kp.push_back({vec3(p.value("position", Json()), "position"), vec3(p.value("target", Json()), "target")});
    const int steps = field<int>(spec, "steps", 10);
    if (steps > 10000) throw ValidationError("too many steps");
    return dataset::keypoint_trajectory(kp, steps, intr);
  }
  throw ValidationError("unknown trajectory kind: " + kind);
}

// ---- Service -----------------------------------------------------------------

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  std::error_code ec;
  for (const char* sub : {"projects", "jobs", "objects", "exports"}) fs::create_directories(config_.data_dir / sub, ec);
  if (ec) throw IoError("cannot create data directory " + config_.data_dir.string());
  load_state();
  for (int i = 0; i < config_.workers; ++i) workers_.emplace_back([this] { worker(); });
}

Service::~Service() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  job_cv_.notify_all();
  done_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

std::shared_ptr<const Project> Service::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = projects_.find(id);
  if (it == projects_.end()) throw NotFoundError("unknown project: " + id);
  return it->second;
}

void Service::persist_project(const Project& p) const {
  const std::string sum = layout_checksum(p.semantic, p.height);
  save_layout_object(object_dir(config_.data_dir, sum), p.semantic, p.height);
  Json styles = Json::object();
  for (const auto& [id, seed] : p.style_seeds) styles[std::to_string(id)] = seed;
  const Json j{{"id", p.id},           {"revision", p.revision},         {"seed", p.seed},
               {"sampler", p.sampler}, {"layout", sum},                  {"trajectories", p.trajectories},
               {"styles", styles}};
  const fs::path dir = config_.data_dir / "projects" / p.id;
  fs::create_directories(dir);
  write_atomic(dir / "state.json", j.dump(2));
}

void Service::store(const std::shared_ptr<const Project>& p) {
  persist_project(*p);
  projects_[p->id] = p;
}

void Service::persist_job(const Job& j) const {
  Json frames = Json::array();
  for (const auto& f : j.frames) frames.push_back({{"file", f.file}, {"sha256", f.sha256}});
  const Json out{{"id", j.id},           {"project", j.project},   {"revision", j.revision},
                 {"trajectory", j.trajectory}, {"status", to_string(j.status)}, {"total", j.total},
                 {"frames", frames},     {"error", j.error},       {"request", j.request}};
  write_atomic(job_dir(j.id) / "job.json", out.dump(2));
}

void Service::load_state() {
  for (const auto& entry : fs::directory_iterator(config_.data_dir / "projects")) {
    const fs::path state = entry.path() / "state.json";
    if (!fs::exists(state)) continue;
    const Json j = Json::parse(io::read_text_file(state));
    auto p = std::make_shared<Project>();
    p->id = j.at("id").get<std::string>();
    p->revision = j.at("revision").get<std::uint64_t>();
    p->seed = j.at("seed").get<std::uint64_t>();
    p->sampler = j.at("sampler").get<std::string>();
    const fs::path obj = object_dir(config_.data_dir, j.at("layout").get<std::string>());
    p->semantic = io::read_png_indexed(obj / "semantic.png");
    p->height = io::read_png_gray16(obj / "height.png");
    p->instances = layout::instantiate_buildings(p->semantic);
    for (const auto& [name, spec] : j.at("trajectories").items()) p->trajectories[name] = spec;
    for (const auto& [id, seed] : j.at("styles").items())
      p->style_seeds[static_cast<std::uint32_t>(std::stoul(id))] = seed.get<std::uint64_t>();
    projects_[p->id] = p;
    if (p->id.size() > 1 && p->id[0] == 'p')
      next_project_ = std::max<std::uint64_t>(next_project_, std::stoull(p->id.substr(1)) + 1);
  }
  for (const auto& entry : fs::directory_iterator(config_.data_dir / "jobs")) {
    const fs::path file = entry.path() / "job.json";
    if (!fs::exists(file)) continue;
    const Json j = Json::parse(io::read_text_file(file));
    Job job;
    job.id = j.at("id").get<std::string>();
    job.project = j.at("project").get<std::string>();
    job.revision = j.at("revision").get<std::uint64_t>();
    job.trajectory = j.at("trajectory").get<std::string>();
    job.status = parse_status(j.at("status").get<std::string>());
    job.total = j.at("total").get<std::size_t>();
    job.error = j.at("error").get<std::string>();
    job.request = j.at("request");
    for (const auto& f : j.at("frames")) job.frames.push_back({f.at("file"), f.at("sha256")});
    if (job.status == JobStatus::kQueued || job.status == JobStatus::kRunning) {
      // Interrupted by a restart: outputs are deterministic, so start over.
      job.status = JobStatus::kQueued;
      job.frames.clear();
      queue_.push_back(job.id);
    }
    jobs_[job.id] = std::move(job);
  }
}

Json Service::preview(const Project& p) const {
  const int w = p.semantic.width(), h = p.semantic.height();
  const int scale = std::max(1, (std::max(w, h) + config_.preview_max - 1) / config_.preview_max);
  const int pw = (w + scale - 1) / scale, ph = (h + scale - 1) / scale;
  Raster<std::uint8_t> s(pw, ph);
  Raster<std::array<std::uint8_t, 3>> hv(pw, ph);
  int max_h = 1;
  for (auto v : p.height.storage()) max_h = std::max<int>(max_h, v);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x) {
      s(x, y) = p.semantic(x * scale, y * scale);
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * p.height(x * scale, y * scale) / max_h));
      hv(x, y) = {g, g, g};
    }
  return {{"scale", scale},
          {"width", pw},
          {"height", ph},
          {"semantic_png", io::base64_encode(io::encode_png_indexed(s, semantic_palette()))},
          {"height_png", io::base64_encode(io::encode_png_rgb8(hv))}};
}

Json Service::generate_layout(int width, int height, std::uint64_t seed, const std::string& sampler_name) {
  if (width < 512 || height < 512 || width % 16 != 0 || height % 16 != 0)
    throw ValidationError("layout size must be >= 512 and a multiple of 16 on both axes");
  if (width > kMaxLayoutSide || height > kMaxLayoutSide) throw ValidationError("layout size exceeds 8192");
  const std::string name = sampler_name.empty() ? config_.sampler : sampler_name;
  const auto sampler = synth::make_sampler(name);
  const auto tok = synth::default_tokenizer();
  auto r = synth::extrapolate(width, height, *tok, *sampler, seed);

  auto p = std::make_shared<Project>();
  p->revision = 1;
  p->seed = seed;
  p->sampler = name;
  p->semantic = std::move(r.semantic);
  p->height = std::move(r.height);
  p->instances = layout::instantiate_buildings(p->semantic);
  {
    std::lock_guard lock(mu_);
    char id[32];
    std::snprintf(id, sizeof id, "p%06llu", static_cast<unsigned long long>(next_project_++));
    p->id = id;
    store(p);
  }
  return {{"project", p->id},
          {"revision", p->revision},
          {"width", width},
          {"height", height},
          {"checksum", layout_checksum(p->semantic, p->height)},
          {"instances", p->instances.size()},
          {"preview", preview(*p)}};
}

Json Service::project_summary(const std::string& id) const {
  const auto p = get(id);
  Json names = Json::array();
  for (const auto& [name, spec] : p->trajectories) names.push_back(name);
  return {{"project", p->id},
          {"revision", p->revision},
          {"width", p->semantic.width()},
          {"height", p->semantic.height()},
          {"seed", p->seed},
          {"sampler", p->sampler},
          {"checksum", layout_checksum(p->semantic, p->height)},
          {"instances", p->instances.size()},
          {"trajectories", names}};
}

Json Service::inpaint(const std::string& id, std::uint64_t revision, const std::vector<geo::PixelCoord>& polygon) {
  const auto cur = get(id);
  if (revision != cur->revision)
    throw ConflictError("stale revision " + std::to_string(revision) + " (current " + std::to_string(cur->revision) + ")");
  const auto region = geo::polygon_mask(polygon, cur->semantic.width(), cur->semantic.height());
  if (std::none_of(region.storage().begin(), region.storage().end(), [](std::uint8_t v) { return v != 0; }))
    throw ValidationError("inpaint region covers no layout cells");
  const auto tok = synth::default_tokenizer();
  const auto sampler = synth::make_sampler(cur->sampler);
  auto r = synth::inpaint(cur->semantic, cur->height, region, *tok, *sampler, hash_values(cur->seed, revision));

  auto next = std::make_shared<Project>(*cur);
  next->revision = cur->revision + 1;
  next->semantic = std::move(r.semantic);
  next->height = std::move(r.height);
  next->instances = layout::instantiate_buildings(next->semantic);
  std::size_t changed = 0, region_cells = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    region_cells += region.storage()[i] != 0;
    changed += cur->semantic.storage()[i] != next->semantic.storage()[i] || cur->height.storage()[i] != next->height.storage()[i];
  }
  {
    std::lock_guard lock(mu_);
    // Another mutation may have landed while sampling.
    if (projects_.at(id)->revision != revision)
      throw ConflictError("stale revision " + std::to_string(revision) + " (current " +
                          std::to_string(projects_.at(id)->revision) + ")");
    store(next);
  }
  return {{"project", id},
          {"revision", next->revision},
          {"checksum", layout_checksum(next->semantic, next->height)},
          {"region_cells", region_cells},
          {"changed_cells", changed},
          {"instances", next->instances.size()},
          {"preview", preview(*next)}};
}

Json Service::instances(const std::string& id) const {
  const auto p = get(id);
  Json out = Json::array();
  for (const auto& b : p->instances)
    out.push_back({{"id", b.id},
                   {"center", {b.center.x, b.center.y}},
                   {"bbox_min", {b.bbox_min.x, b.bbox_min.y}},
                   {"bbox_max", {b.bbox_max.x, b.bbox_max.y}},
                   {"height_max", b.height_max},
                   {"area", b.footprint.size()}});
  return {{"project", id}, {"revision", p->revision}, {"instances", out}};
}

Json Service::set_style(const std::string& id, std::uint64_t revision, std::uint32_t instance, std::uint64_t seed) {
  std::lock_guard lock(mu_);
  const auto it = projects_.find(id);
  if (it == projects_.end()) throw NotFoundError("unknown project: " + id);
  const auto& cur = it->second;
  if (revision != cur->revision)
    throw ConflictError("stale revision " + std::to_string(revision) + " (current " + std::to_string(cur->revision) + ")");
  if (std::none_of(cur->instances.begin(), cur->instances.end(), [&](const auto& b) { return b.id == instance; }))
    throw NotFoundError("unknown building instance: " + std::to_string(instance));
  auto next = std::make_shared<Project>(*cur);
  next->revision = cur->revision + 1;
  next->style_seeds[instance] = seed;
  store(next);
  return {{"project", id}, {"revision", next->revision}, {"instance", instance}, {"seed", seed}};
}

std::vector<std::uint8_t> Service::layout_png(const std::string& id, const std::string& which) const {
  const auto p = get(id);
  if (which == "semantic") return io::encode_png_indexed(p->semantic, semantic_palette());
  if (which == "height") {
    const fs::path f = object_dir(config_.data_dir, layout_checksum(p->semantic, p->height)) / "height.png";
    return read_bytes(f);
  }
  throw NotFoundError("unknown layout raster: " + which);
}

Json Service::preview_trajectory(const std::string& id, const Json& spec) {
  const auto cur = get(id);
  if (spec.contains("revision") && field<std::uint64_t>(spec, "revision", 0) != cur->revision)
    throw ConflictError("stale revision (current " + std::to_string(cur->revision) + ")");
  const auto name = required<std::string>(spec, "name");
  if (name.empty() || name.size() > 128) throw ValidationError("trajectory name must be 1-128 characters");
  const int w = cur->semantic.width(), h = cur->semantic.height();
  const auto traj = parse_trajectory(spec, w, h);
  const int every = field<int>(spec, "preview_every", 10);
  const int thumb_w = field<int>(spec, "thumb_width", 96);
  if (every < 1) throw ValidationError("preview_every must be >= 1");
  if (thumb_w < 8 || thumb_w > 1024) throw ValidationError("thumb_width must be in [8, 1024]");

  const layout::CityLayout city(cur->semantic, cur->height);
  const auto& k = traj.intrinsics[0];
  const int thumb_h = std::max(1, static_cast<int>(std::lround(static_cast<double>(thumb_w) * k.height / k.width)));
  Json poses = Json::array(), thumbs = Json::array();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    poses.push_back(pose_json(traj.poses[i]));
    if (i % static_cast<std::size_t>(every) != 0) continue;
    const auto ann = dataset::project_annotations(city, cur->instances, traj.intrinsics[i].resized(thumb_w, thumb_h),
                                                  traj.poses[i], config_.scene.settings.threads);
    thumbs.push_back({{"frame", i}, {"semantic_png", io::base64_encode(io::encode_png_indexed(ann.semantic, semantic_palette()))}});
  }

  Json saved = spec;
  saved.erase("revision");
  auto next = std::make_shared<Project>(*cur);
  next->revision = cur->revision + 1;
  next->trajectories[name] = saved;
  {
    std::lock_guard lock(mu_);
    if (projects_.at(id)->revision != cur->revision) throw ConflictError("project changed during preview");
    store(next);
  }
  return {{"project", id},
          {"revision", next->revision},
          {"name", name},
          {"frames", traj.size()},
          {"width", k.width},
          {"height", k.height},
          {"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}},
          {"poses", poses},
          {"thumbnails", thumbs}};
}

Json Service::submit_render(const std::string& id, const Json& request) {
  const auto p = get(id);
  const auto revision = required<std::uint64_t>(request, "revision");
  if (revision != p->revision)
    throw ConflictError("stale revision " + std::to_string(revision) + " (current " + std::to_string(p->revision) + ")");
  const auto name = required<std::string>(request, "trajectory");
  const auto it = p->trajectories.find(name);
  if (it == p->trajectories.end()) throw NotFoundError("unknown trajectory: " + name);
  const Json settings = request.value("settings", Json::object());
  const auto traj = parse_trajectory(it->second, p->semantic.width(), p->semantic.height());
  const double step = field<double>(settings, "step", config_.scene.settings.step);
  if (!(step > 0)) throw ValidationError("settings.step must be positive");
  const auto style_seed = field<std::uint64_t>(request, "style_seed", 0);

  const std::string sum = layout_checksum(p->semantic, p->height);
  const Json key{{"layout", sum}, {"trajectory", it->second}, {"styles", p->style_seeds}, {"step", step}, {"style_seed", style_seed},
                 {"seed", p->seed}, {"kappa", config_.scene.kappa}, {"buildings", config_.scene.render_buildings},
                 {"grid", {config_.scene.grid.levels, config_.scene.grid.table_size, config_.scene.grid.channels,
                           config_.scene.grid.base_resolution, config_.scene.grid.max_resolution}}};
  const std::string job_id = "j" + io::sha256_hex(key.dump()).substr(0, 20);

  std::lock_guard lock(mu_);
  if (projects_.at(id)->revision != revision) throw ConflictError("project changed during submission");
  const auto existing = jobs_.find(job_id);
  if (existing != jobs_.end() && existing->second.status != JobStatus::kFailed)
    return {{"job", job_id}, {"status", to_string(existing->second.status)}, {"cached", true}};

  Job job;
  job.id = job_id;
  job.project = id;
  job.revision = revision;
  job.trajectory = name;
  job.total = traj.size();
  job.request = {{"trajectory_spec", it->second}, {"step", step}, {"style_seed", style_seed}, {"seed", p->seed},
                 {"layout", sum}, {"styles", p->style_seeds}};
  fs::create_directories(job_dir(job_id));
  // The job reads its layout snapshot from the object store.
  save_layout_object(object_dir(config_.data_dir, sum), p->semantic, p->height);
  persist_job(job);
  jobs_[job_id] = job;
  queue_.push_back(job_id);
  job_cv_.notify_one();
  return {{"job", job_id}, {"status", "queued"}, {"cached", false}};
}

void Service::worker() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(mu_);
      job_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
    }
    run_job(id);
  }
}

void Service::run_job(const std::string& id) {
  Json request;
  {
    std::lock_guard lock(mu_);
    Job& job = jobs_.at(id);
    job.status = JobStatus::kRunning;
    job.frames.clear();
    request = job.request;
    persist_job(job);
  }
  done_cv_.notify_all();
  try {
    const fs::path obj = object_dir(config_.data_dir, request.at("layout").get<std::string>());
    layout::CityLayout city(io::read_png_indexed(obj / "semantic.png"), io::read_png_gray16(obj / "height.png"));
    const auto traj = parse_trajectory(request.at("trajectory_spec"), city.width(), city.height());
    pipeline::SceneConfig cfg = config_.scene;
    cfg.settings.step = request.at("step").get<double>();
    cfg.seed = hash_values(request.at("seed").get<std::uint64_t>(), request.at("style_seed").get<std::uint64_t>());
    pipeline::SceneRenderer scene(std::move(city), cfg);
    for (const auto& [inst, seed] : request.at("styles").items())
      scene.set_style(static_cast<std::uint32_t>(std::stoul(inst)), param::StyleCode::random(seed.get<std::uint64_t>()));

    for (std::size_t f = 0; f < traj.size(); ++f) {
      {
        std::lock_guard lock(mu_);
        if (stopping_) return;  // left queued/running on disk; resumed on restart
      }
      const auto result = scene.render(traj.intrinsics[f], traj.poses[f]);
      const auto png = io::encode_png_rgb8(io::quantize(result.image));
      char name[32];
      std::snprintf(name, sizeof name, "frame_%05zu.png", f);
      const std::string data(png.begin(), png.end());
      io::write_text_file(job_dir(id) / name, data);
      std::lock_guard lock(mu_);
      Job& job = jobs_.at(id);
      job.frames.push_back({name, io::sha256_hex(data)});
      if (job.frames.size() == job.total) job.status = JobStatus::kDone;
      persist_job(job);
      done_cv_.notify_all();
    }
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    Job& job = jobs_.at(id);
    job.status = JobStatus::kFailed;
    job.error = e.what();
    persist_job(job);
    done_cv_.notify_all();
  }
}

Json Service::job_status(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw NotFoundError("unknown job: " + id);
  const Job& j = it->second;
  Json frames = Json::array();
  for (std::size_t i = 0; i < j.frames.size(); ++i) frames.push_back({{"index", i}, {"sha256", j.frames[i].sha256}});
  return {{"job", j.id},         {"project", j.project},       {"revision", j.revision},
          {"trajectory", j.trajectory}, {"status", to_string(j.status)}, {"progress", j.frames.size()},
          {"total", j.total},    {"frames", frames},           {"error", j.error}};
}

Json Service::wait(const std::string& id) const {
  {
    std::unique_lock lock(mu_);
    if (!jobs_.count(id)) throw NotFoundError("unknown job: " + id);
    done_cv_.wait(lock, [&] {
      const auto s = jobs_.at(id).status;
      return stopping_ || s == JobStatus::kDone || s == JobStatus::kFailed;
    });
  }
  return job_status(id);
}

std::vector<std::uint8_t> Service::frame_png(const std::string& id, std::size_t index) const {
  std::string file;
  {
    std::lock_guard lock(mu_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFoundError("unknown job: " + id);
    if (index >= it->second.frames.size()) throw NotFoundError("frame not available yet");
    file = it->second.frames[index].file;
  }
  return read_bytes(job_dir(id) / file);
}

Json Service::export_job(const std::string& id) {
  Json request;
  std::vector<FrameRecord> frames;
  {
    std::lock_guard lock(mu_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFoundError("unknown job: " + id);
    if (it->second.status != JobStatus::kDone) throw ConflictError("job is not done");
    request = it->second.request;
    frames = it->second.frames;
  }
  const fs::path obj = object_dir(config_.data_dir, request.at("layout").get<std::string>());
  const layout::CityLayout city(io::read_png_indexed(obj / "semantic.png"), io::read_png_gray16(obj / "height.png"));
  const auto instances = layout::instantiate_buildings(city);
  const auto traj = parse_trajectory(request.at("trajectory_spec"), city.width(), city.height());
  std::vector<dataset::Frame> out;
  for (std::size_t f = 0; f < traj.size(); ++f) {
    const auto rgb = io::read_png_rgb8(job_dir(id) / frames[f].file);
    dataset::Frame fr;
    fr.color = ColorImage(rgb.width(), rgb.height());
    for (std::size_t p = 0; p < rgb.size(); ++p) {
      const auto& c = rgb.storage()[p];
      fr.color.storage()[p] = Rgb{c[0] / 255.f, c[1] / 255.f, c[2] / 255.f};
    }
    const auto ann = dataset::project_annotations(city, instances, traj.intrinsics[f], traj.poses[f],
                                                  config_.scene.settings.threads);
    fr.semantic = ann.semantic;
    fr.instance = ann.instance;
    out.push_back(std::move(fr));
  }
  const fs::path dir = config_.data_dir / "exports" / id;
  const auto m = dataset::export_dataset(traj, out, dir, request.dump(), config_.scene.settings.threads);
  return {{"job", id}, {"directory", dir.string()}, {"frames", m.frames}, {"config_hash", m.config_hash}};
}

}  // namespace citygen::studio
