#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "citygen/dataset.hpp"
#include "citygen/layout.hpp"
#include "citygen/pipeline.hpp"
#include "json.hpp"

namespace citygen::studio {

using Json = nlohmann::json;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 1;
  std::filesystem::path data_dir = "citygen-data";
  std::string sampler = "procedural";
  int preview_max = 256;  // longest side of layout previews
  pipeline::SceneConfig scene;

  // Keys: host, port, workers, data_dir, sampler, preview_max, render {step,
  // threads, kappa}, grid {levels, table_log2, channels, base_resolution,
  // max_resolution}. Unknown keys are rejected.
  static ServiceConfig from_json(const Json& j);
  // Reads `path` when non-empty, then applies CITYGEN_CONFIG (config path,
  // used when `path` is empty) and CITYGEN_DATA_DIR overrides.
  static ServiceConfig load(const std::filesystem::path& path = {});
};

// Layout checksum: sha256 over semantic bytes then little-endian heights.
std::string layout_checksum(const geo::SemanticMap& s, const geo::HeightField& h);

// Camera path from a request body: {"kind": "orbit", center: [x, y],
// radius_m, altitude_m, frames, width, height, fov_deg, meters_per_pixel,
// allow_out_of_range, start_angle_deg} or {"kind": "keypoints", points:
// [{position: [x,y,z], target: [x,y,z]}], steps, width, height, fov_deg}.
render::Trajectory parse_trajectory(const Json& spec, int layout_width, int layout_height);

enum class JobStatus { kQueued, kRunning, kDone, kFailed };
const char* to_string(JobStatus s);

struct FrameRecord {
  std::string file;
  std::string sha256;
};

struct Project {
  std::string id;
  std::uint64_t revision = 0;
  std::uint64_t seed = 0;
  std::string sampler;
  geo::SemanticMap semantic;
  geo::HeightField height;
  std::vector<layout::BuildingInstance> instances;
  std::map<std::string, Json> trajectories;  // name -> spec
  std::map<std::uint32_t, std::uint64_t> style_seeds;
};

struct Job {
  std::string id;
  std::string project;
  std::uint64_t revision = 0;
  std::string trajectory;
  JobStatus status = JobStatus::kQueued;
  std::size_t total = 0;
  std::vector<FrameRecord> frames;  // completed frames, in order
  std::string error;
  Json request;
};

// Transport-independent service state. All methods are thread-safe; every
// layout mutation checks the caller's revision.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const ServiceConfig& config() const { return config_; }

  Json generate_layout(int width, int height, std::uint64_t seed, const std::string& sampler);
  Json project_summary(const std::string& id) const;
  Json inpaint(const std::string& id, std::uint64_t revision, const std::vector<geo::PixelCoord>& polygon);
  Json instances(const std::string& id) const;
  // Style code of one building instance, drawn from `seed`.
  Json set_style(const std::string& id, std::uint64_t revision, std::uint32_t instance, std::uint64_t seed);
  // Saves the trajectory under spec["name"] (bumps the revision) and returns
  // poses plus semantic thumbnails for every `preview_every`-th frame.
  Json preview_trajectory(const std::string& id, const Json& spec);
  // Queues a render of a saved trajectory against the current revision.
  Json submit_render(const std::string& id, const Json& request);
  Json job_status(const std::string& job) const;
  std::vector<std::uint8_t> frame_png(const std::string& job, std::size_t index) const;
  Json export_job(const std::string& job);
  std::vector<std::uint8_t> layout_png(const std::string& id, const std::string& which) const;

  // Blocks until the job leaves queued/running.
  Json wait(const std::string& job) const;

 private:
  std::shared_ptr<const Project> get(const std::string& id) const;
  void store(const std::shared_ptr<const Project>& p);
  void persist_project(const Project& p) const;
  void persist_job(const Job& j) const;
  void load_state();
  void worker();
  void run_job(const std::string& id);
  std::filesystem::path job_dir(const std::string& id) const { return config_.data_dir / "jobs" / id; }
  Json preview(const Project& p) const;

  ServiceConfig config_;
  mutable std::mutex mu_;
  mutable std::condition_variable job_cv_;   // queue changes
  mutable std::condition_variable done_cv_;  // job progress and status
  std::map<std::string, std::shared_ptr<const Project>> projects_;
  std::map<std::string, Job> jobs_;
  std::deque<std::string> queue_;
  std::uint64_t next_project_ = 1;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

// Runs the HTTP front end on config().host:port until stop() is called.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  // Binds and serves in the calling thread; returns when stopped.
  bool listen();
  // Binds to an ephemeral port on host; returns the port.
  int bind_any();
  void serve_bound();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace citygen::studio
