#include <cstdio>
#include <sstream>

#include "citygen/dataset.hpp"
#include "citygen/errors.hpp"
#include "citygen/geo.hpp"
#include "citygen/image_io.hpp"
#include "citygen/parallel.hpp"
#include "json.hpp"

namespace citygen::dataset {
namespace {

constexpr const char* kFormat = "citygen-dataset/1";
constexpr const char* kKinds[] = {"color", "semantic", "instance", "camera"};

std::string frame_file(std::size_t i, const char* kind) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "frame_%05zu_%s.%s", i, kind, std::string(kind) == "camera" ? "txt" : "png");
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string format_camera(const CameraIntrinsics& intr, const CameraPose& pose) {
  std::ostringstream s;
  s << "# world->camera rotation rows: right, down, forward; world z up; units: layout cells\n";
  s << "width " << intr.width << "\nheight " << intr.height << "\n";
  s << "fx " << fmt(intr.fx) << "\nfy " << fmt(intr.fy) << "\ncx " << fmt(intr.cx) << "\ncy " << fmt(intr.cy) << "\n";
  s << "rotation";
  for (double v : pose.rotation.m) s << ' ' << fmt(v);
  s << "\nposition " << fmt(pose.position.x) << ' ' << fmt(pose.position.y) << ' ' << fmt(pose.position.z) << "\n";
  return s.str();
}

void parse_camera(const std::string& text, CameraIntrinsics& intr, CameraPose& pose) {
  std::istringstream in(text);
  std::string line;
  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    bool ok = true;
    if (key == "width") ok = static_cast<bool>(ls >> intr.width);
    else if (key == "height") ok = static_cast<bool>(ls >> intr.height);
    else if (key == "fx") ok = static_cast<bool>(ls >> intr.fx);
    else if (key == "fy") ok = static_cast<bool>(ls >> intr.fy);
    else if (key == "cx") ok = static_cast<bool>(ls >> intr.cx);
    else if (key == "cy") ok = static_cast<bool>(ls >> intr.cy);
    else if (key == "rotation") {
      for (double& v : pose.rotation.m) ok = ok && static_cast<bool>(ls >> v);
    } else if (key == "position") {
      ok = static_cast<bool>(ls >> pose.position.x >> pose.position.y >> pose.position.z);
    } else {
      throw ValidationError("camera file: unknown key '" + key + "'");
    }
    if (!ok) throw ValidationError("camera file: malformed value for '" + key + "'");
    ++seen;
  }
  if (seen != 8) throw ValidationError("camera file: expected 8 entries");
  intr.validate();
  pose.validate();
}

Manifest export_dataset(const Trajectory& trajectory, std::span<const Frame> frames,
                        const std::filesystem::path& out_dir, const std::string& config_text, int threads) {
  trajectory.validate();
  if (frames.size() != trajectory.size()) throw ValidationError("export: frame count does not match the trajectory");
  const int w = trajectory.intrinsics[0].width, h = trajectory.intrinsics[0].height;
  for (const auto& f : frames) {
    if (f.color.width() != w || f.color.height() != h || !f.color.same_shape(f.semantic) ||
        !f.color.same_shape(f.instance))
      throw ValidationError("export: raster size does not match the camera");
    for (auto id : f.instance.storage())
      if (id > 0xFFFF) throw ValidationError("export: instance id exceeds 16 bits");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("export: cannot create " + out_dir.string());

  Manifest m;
  m.frames = frames.size();
  m.width = w;
  m.height = h;
  m.config_hash = io::sha256_hex(config_text);
  m.files.resize(frames.size() * 4);
  parallel_for(0, static_cast<int>(frames.size()), threads, [&](int fi) {
    const auto i = static_cast<std::size_t>(fi);
    const Frame& f = frames[i];
    Raster<std::uint16_t> inst(w, h);
    for (std::size_t p = 0; p < inst.size(); ++p) inst.storage()[p] = static_cast<std::uint16_t>(f.instance.storage()[p]);
    const std::string names[4] = {frame_file(i, kKinds[0]), frame_file(i, kKinds[1]), frame_file(i, kKinds[2]),
                                  frame_file(i, kKinds[3])};
    io::write_png_rgb8(out_dir / names[0], io::quantize(f.color));
    io::write_png_indexed(out_dir / names[1], f.semantic, semantic_palette());
    io::write_png_gray16(out_dir / names[2], inst);
    io::write_text_file(out_dir / names[3], format_camera(trajectory.intrinsics[i], trajectory.poses[i]));
    for (int k = 0; k < 4; ++k) m.files[i * 4 + k] = {names[k], io::sha256_file(out_dir / names[k])};
  });

  nlohmann::json j;
  j["format"] = kFormat;
  j["frames"] = m.frames;
  j["width"] = w;
  j["height"] = h;
  j["config_hash"] = m.config_hash;
  j["files"] = nlohmann::json::array();
  for (const auto& f : m.files) j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}});
  io::write_text_file(out_dir / "manifest.json", j.dump(2) + "\n");
  return m;
}

ImportedDataset import_dataset(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  ImportedDataset out;
  try {
    if (j.at("format").get<std::string>() != kFormat) throw ValidationError("manifest: unsupported format");
    out.manifest.frames = j.at("frames").get<std::size_t>();
    out.manifest.width = j.at("width").get<int>();
    out.manifest.height = j.at("height").get<int>();
    out.manifest.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& f : j.at("files"))
      out.manifest.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  if (out.manifest.files.size() != out.manifest.frames * 4) throw ValidationError("manifest: file list is incomplete");
  for (const auto& f : out.manifest.files)
    if (io::sha256_file(dir / f.path) != f.sha256) throw IoError("checksum mismatch: " + f.path);

  for (std::size_t i = 0; i < out.manifest.frames; ++i) {
    Frame f;
    const auto rgb = io::read_png_rgb8(dir / frame_file(i, "color"));
    f.color = ColorImage(rgb.width(), rgb.height());
    for (std::size_t p = 0; p < rgb.size(); ++p) {
      const auto& c = rgb.storage()[p];
      f.color.storage()[p] = Rgb{c[0] / 255.f, c[1] / 255.f, c[2] / 255.f};
    }
    f.semantic = io::read_png_indexed(dir / frame_file(i, "semantic"));
    const auto inst = io::read_png_gray16(dir / frame_file(i, "instance"));
    f.instance = Raster<std::uint32_t>(inst.width(), inst.height());
    for (std::size_t p = 0; p < inst.size(); ++p) f.instance.storage()[p] = inst.storage()[p];
    CameraIntrinsics intr;
    CameraPose pose;
    parse_camera(io::read_text_file(dir / frame_file(i, "camera")), intr, pose);
    out.trajectory.push_back(pose, intr);
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace citygen::dataset
