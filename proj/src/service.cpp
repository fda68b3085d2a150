#include "posekit/service.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <httplib.h>

#include "posekit/error.hpp"

namespace posekit {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Wireframe

std::vector<std::array<int, 2>> feature_edges(const TriangleMesh& mesh, double min_angle) {
  std::vector<Vec3> normals(mesh.triangles.size());
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    normals[f] = n.norm() > 0 ? Vec3(n.normalized()) : Vec3::Zero();
  }
  std::map<std::pair<int, int>, std::vector<int>> faces;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      faces[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(f));
    }
  }
  const double cos_min = std::cos(min_angle);
  std::vector<std::array<int, 2>> out;
  for (const auto& [edge, fs_] : faces) {
    bool keep = fs_.size() != 2;
    if (!keep) keep = normals[fs_[0]].dot(normals[fs_[1]]) < cos_min;
    if (keep) out.push_back({edge.first, edge.second});
  }
  return out;
}

namespace {

constexpr double kOverlayNear = 1e-3;

Vec2 pixel_of(const Vec3& pc, const CameraIntrinsics& k) {
  const Vec2 p(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
  return k.has_distortion() ? distort_pixel(p, k) : p;
}

// Liang-Barsky against [lo, hi]; false when nothing is left.
bool clip_segment(Vec2& a, Vec2& b, const Vec2& lo, const Vec2& hi) {
  double t0 = 0, t1 = 1;
  const Vec2 d = b - a;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {a.x() - lo.x(), hi.x() - a.x(), a.y() - lo.y(), hi.y() - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0) {
      if (q[i] < 0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
  }
  const Vec2 a0 = a;
  a = a0 + t0 * d;
  b = a0 + t1 * d;
  return true;
}

}  // namespace

std::vector<Segment2> project_wireframe(const TriangleMesh& mesh, const std::vector<std::array<int, 2>>& edges,
                                        const Pose& obj_in_cam, const CameraIntrinsics& k) {
  std::vector<Segment2> out;
  const Vec2 lo(-0.5, -0.5), hi(k.width - 0.5, k.height - 0.5);
  for (const auto& e : edges) {
    Vec3 a = obj_in_cam * mesh.vertices[e[0]];
    Vec3 b = obj_in_cam * mesh.vertices[e[1]];
    const bool ia = a.z() >= kOverlayNear, ib = b.z() >= kOverlayNear;
    if (!ia && !ib) continue;
    if (!ia) a = a + (kOverlayNear - a.z()) / (b.z() - a.z()) * (b - a);
    if (!ib) b = b + (kOverlayNear - b.z()) / (a.z() - b.z()) * (a - b);
    Vec2 pa = pixel_of(a, k), pb = pixel_of(b, k);
    if (!clip_segment(pa, pb, lo, hi)) continue;
    out.push_back({pa, pb});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene helpers

PointCloud fuse_scene(const SceneManifest& m, const std::vector<std::optional<Pose>>& cameras,
                      const FusionParams& params) {
  std::vector<DepthFrame> frames;
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    if (!cameras[i] || m.frames[i].depth.empty()) continue;
    DepthMap d = parse_depth(m.resolve(m.frames[i].depth), m.depth_scale);
    check_dimensions(d.width, d.height, m.intrinsics, m.frames[i].depth);
    frames.push_back({std::move(d), *cameras[i]});
  }
  return frames.empty() ? PointCloud{} : extract_points(fuse_frames(frames, m.intrinsics, params));
}

Pose rough_scene_pose(const SceneManifest& m, const std::vector<std::optional<Pose>>& cameras,
                      const PointCloud& cloud, double distance) {
  const auto first = std::find_if(cameras.begin(), cameras.end(), [](const auto& c) { return c.has_value(); });
  if (first == cameras.end()) {
    throw Error(ErrorCode::UnavailableFrame, "scene " + m.scene_id + " has no frame with a camera pose");
  }
  const Pose& cam = **first;
  try {
    return init_rough_pose(cloud, cam, distance);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InvalidArgument && e.code() != ErrorCode::Degenerate) throw;
    return {Mat3::Identity(), cam.translation + distance * cam.z_axis()};
  }
}

std::vector<RefinementCamera> scene_refinement_cameras(const SceneManifest& m,
                                                       const std::vector<std::optional<Pose>>& cameras,
                                                       const std::vector<int>& frames) {
  const std::set<int> wanted(frames.begin(), frames.end());
  std::set<int> found;
  std::vector<RefinementCamera> out;
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const auto& f = m.frames[i];
    if (!wanted.empty() && !wanted.count(f.index)) continue;
    found.insert(f.index);
    if (f.mask.empty() || !cameras[i]) {
      if (!wanted.empty()) {
        throw Error(ErrorCode::UnavailableFrame, "frame " + std::to_string(f.index) + " lacks a mask or camera pose");
      }
      continue;
    }
    Mask mask = parse_mask(m.resolve(f.mask), m.mask_threshold);
    check_dimensions(mask.width, mask.height, m.intrinsics, f.mask);
    out.push_back({*cameras[i], m.intrinsics, std::move(mask), f.index});
  }
  for (int w : wanted) {
    if (!found.count(w)) throw Error(ErrorCode::NotFound, "frame " + std::to_string(w) + " is not in the scene");
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no frames with masks and camera poses to refine on");
  return out;
}

// ---------------------------------------------------------------------------
// Sessions

struct AnnotationService::Session {
  std::mutex mutex;
  std::condition_variable job_cv;
  std::string id;
  fs::path manifest_file;
  SceneManifest manifest;
  TriangleMesh mesh;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::optional<Pose>> cameras;  // by frame position
  Pose pose;
  std::deque<Pose> undo;
  double step_translation = 0;
  double step_rotation_deg = 0;
  bool dirty = false;
  std::optional<PointCloud> cloud;
  std::vector<RefinementRecord> history;

  std::thread worker;
  std::string job_state = "idle";  // idle, running, done, failed
  std::optional<RefinementTrace> trace;
  Json job_error;

  std::size_t position(int frame) const {
    for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
      if (manifest.frames[i].index == frame) return i;
    }
    throw Error(ErrorCode::NotFound, "frame " + std::to_string(frame) + " is not in scene " + manifest.scene_id);
  }

  const Pose& camera(std::size_t pos) const {
    if (!cameras[pos]) {
      throw Error(ErrorCode::UnavailableFrame,
                  "frame " + std::to_string(manifest.frames[pos].index) + " has no camera pose");
    }
    return *cameras[pos];
  }

  void require_idle() const {
    if (job_state == "running") throw Error(ErrorCode::Busy, "a refinement job is running for this session");
  }

  void push_undo(const Pose& p, std::size_t max) {
    undo.push_back(p);
    while (undo.size() > max) undo.pop_front();
  }
};

namespace {

Pose checked(const Pose& p) { return p.is_valid() ? p : p.orthonormalized(); }

const PointCloud& scene_cloud(const SceneManifest& m, std::optional<PointCloud>& cache,
                              const std::vector<std::optional<Pose>>& cameras, const FusionParams& params) {
  if (!cache) cache = fuse_scene(m, cameras, params);
  return *cache;
}

std::string content_type_for(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return "image/x-portable-anymap";
  return "application/octet-stream";
}

Json vec2_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

}  // namespace

AnnotationService::AnnotationService(ServiceOptions options) : options_(std::move(options)) {
  if (!fs::is_directory(options_.data_root)) {
    throw Error(ErrorCode::NotFound, "data root " + options_.data_root.string() + " is not a directory");
  }
}

AnnotationService::~AnnotationService() {
  for (auto& [id, s] : sessions_) {
    if (s->worker.joinable()) s->worker.join();
  }
}

std::shared_ptr<AnnotationService::Session> AnnotationService::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "unknown session " + id);
  return it->second;
}

Json AnnotationService::list_scenes() const {
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(options_.data_root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  Json out = Json::array();
  for (const auto& d : dirs) {
    Json item{{"id", d.filename().string()}};
    try {
      const SceneManifest m = load_manifest(d / "manifest.json", false);
      item["frames"] = m.frames.size();
      item["annotated"] = m.annotation.has_value();
    } catch (const Error& e) {
      item["error"] = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    }
    out.push_back(item);
  }
  return out;
}

std::string AnnotationService::open_session(const std::string& scene_id) {
  if (scene_id.empty() || scene_id.find('/') != std::string::npos || scene_id.find('\\') != std::string::npos ||
      scene_id == "." || scene_id == "..") {
    throw Error(ErrorCode::InvalidArgument, "bad scene id '" + scene_id + "'");
  }
  auto s = std::make_shared<Session>();
  s->manifest_file = options_.data_root / scene_id / "manifest.json";
  if (!fs::exists(s->manifest_file)) throw Error(ErrorCode::NotFound, "unknown scene " + scene_id);
  try {
    s->manifest = load_manifest(s->manifest_file, true);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MissingFile) throw Error(ErrorCode::NotFound, e.what());
    throw;
  }
  s->mesh = parse_mesh(s->manifest.resolve(s->manifest.mesh));
  s->edges = feature_edges(s->mesh);
  s->cameras = frame_camera_poses(s->manifest);
  s->step_translation = options_.step_translation;
  s->step_rotation_deg = options_.step_rotation_deg;

  if (s->manifest.annotation) {
    s->pose = s->manifest.annotation->object_pose;
    s->history = s->manifest.annotation->refinement_history;
  } else {
    const PointCloud& cloud = scene_cloud(s->manifest, s->cloud, s->cameras, options_.fusion);
    s->pose = rough_scene_pose(s->manifest, s->cameras, cloud, s->manifest.init_distance);
  }

  std::lock_guard lock(mutex_);
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%04d", next_id_++);
  s->id = buf;
  sessions_[s->id] = s;
  return s->id;
}

Json AnnotationService::session_info(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  const Pose p = checked(s->pose);
  const Vec3 zyx = p.rotation.eulerAngles(2, 1, 0);
  return {{"id", s->id},
          {"scene_id", s->manifest.scene_id},
          {"pose", pose_to_json(p)},
          {"euler_zyx_deg", {zyx(0) * 180 / std::numbers::pi, zyx(1) * 180 / std::numbers::pi,
                             zyx(2) * 180 / std::numbers::pi}},
          {"steps", {{"translation", s->step_translation}, {"rotation_deg", s->step_rotation_deg}}},
          {"undo_depth", s->undo.size()},
          {"dirty", s->dirty},
          {"frames", s->manifest.frames.size()},
          {"intrinsics", intrinsics_to_json(s->manifest.intrinsics)},
          {"refine_state", s->job_state}};
}

Pose AnnotationService::pose(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return checked(s->pose);
}

Json AnnotationService::frames(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  Json out = Json::array();
  for (std::size_t i = 0; i < s->manifest.frames.size(); ++i) {
    const auto& f = s->manifest.frames[i];
    Json item{{"index", f.index}, {"image", f.image}, {"has_pose", s->cameras[i].has_value()},
              {"has_mask", !f.mask.empty()}, {"has_depth", !f.depth.empty()}};
    if (s->cameras[i]) item["camera"] = pose_to_json(*s->cameras[i]);
    out.push_back(item);
  }
  return out;
}

Blob AnnotationService::frame_image(const std::string& id, int frame) {
  auto s = find(id);
  fs::path file;
  {
    std::lock_guard lock(s->mutex);
    const auto& rec = s->manifest.frames[s->position(frame)];
    if (rec.image.empty()) throw Error(ErrorCode::NotFound, "frame " + std::to_string(frame) + " has no image");
    file = s->manifest.resolve(rec.image);
  }
  try {
    return {content_type_for(file), read_file(file)};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MissingFile) throw Error(ErrorCode::NotFound, e.what());
    throw;
  }
}

Json AnnotationService::overlay(const std::string& id, int frame) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  const std::size_t pos = s->position(frame);
  const Pose obj = checked(s->pose);
  const auto segments = project_wireframe(s->mesh, s->edges, camera_centric_pose(obj, s->camera(pos)),
                                          s->manifest.intrinsics);
  Json lines = Json::array();
  for (const auto& seg : segments) lines.push_back(Json::array({vec2_json(seg[0]), vec2_json(seg[1])}));
  return {{"frame", frame},
          {"width", s->manifest.intrinsics.width},
          {"height", s->manifest.intrinsics.height},
          {"pose", pose_to_json(obj)},
          {"polylines", lines}};
}

Blob AnnotationService::overlay_mask(const std::string& id, int frame, double softness) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  const std::size_t pos = s->position(frame);
  const auto& k = s->manifest.intrinsics;
  Mask m(k.width, k.height);
  try {
    m = render_silhouette(s->mesh, camera_centric_pose(checked(s->pose), s->camera(pos)), k, {softness});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptySilhouette) throw;
  }
  std::string bytes = "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
  for (float v : m.values) bytes.push_back(static_cast<char>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f)));
  return {"image/x-portable-graymap", bytes};
}

Json AnnotationService::nudge(const std::string& id, const std::string& axis, int sign) {
  if (sign != 1 && sign != -1) throw Error(ErrorCode::InvalidArgument, "nudge sign must be +1 or -1");
  static const std::unordered_map<std::string, int> axes{{"tx", 0}, {"ty", 1}, {"tz", 2},
                                                         {"roll", 3}, {"pitch", 4}, {"yaw", 5}};
  const auto it = axes.find(axis);
  if (it == axes.end()) throw Error(ErrorCode::InvalidArgument, "unknown nudge axis '" + axis + "'");
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->require_idle();
  Pose next = s->pose;
  const int a = it->second;
  if (a < 3) {
    next.translation(a) += sign * s->step_translation;
  } else {
    const double angle = sign * s->step_rotation_deg * std::numbers::pi / 180.0;
    const Mat3 inc = a == 3 ? euler_zyx(0, 0, angle) : a == 4 ? euler_zyx(0, angle, 0) : euler_zyx(angle, 0, 0);
    next.rotation = next.rotation * inc;
    if (next.orthonormality_error() > 1e-10) next = next.orthonormalized();
  }
  s->push_undo(s->pose, options_.max_undo);
  s->pose = next;
  s->dirty = true;
  return {{"pose", pose_to_json(next)}, {"undo_depth", s->undo.size()}};
}

Json AnnotationService::set_pose(const std::string& id, const Pose& pose) {
  if (!pose.is_valid(1e-6)) throw Error(ErrorCode::InvalidArgument, "pose rotation is not orthonormal");
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->require_idle();
  s->push_undo(s->pose, options_.max_undo);
  s->pose = pose.orthonormalized();
  s->dirty = true;
  return {{"pose", pose_to_json(s->pose)}, {"undo_depth", s->undo.size()}};
}

Json AnnotationService::set_steps(const std::string& id, double translation, double rotation_deg) {
  if (!(translation > 0) || !(rotation_deg > 0) || !std::isfinite(translation) || !std::isfinite(rotation_deg)) {
    throw Error(ErrorCode::InvalidArgument, "nudge steps must be positive");
  }
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->step_translation = translation;
  s->step_rotation_deg = rotation_deg;
  return {{"translation", translation}, {"rotation_deg", rotation_deg}};
}

Json AnnotationService::undo(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->require_idle();
  if (s->undo.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to undo");
  s->pose = s->undo.back();
  s->undo.pop_back();
  s->dirty = true;
  return {{"pose", pose_to_json(s->pose)}, {"undo_depth", s->undo.size()}};
}

void AnnotationService::start_refinement(const std::string& id, const Json& body) {
  const Json cfg_json = body.is_object() && body.contains("config") ? body.at("config") : body;
  if (!cfg_json.is_object()) throw Error(ErrorCode::InvalidArgument, "refine body must be a JSON object");
  if (cfg_json.contains("frames") && cfg_json.at("frames").is_array() && cfg_json.at("frames").empty()) {
    throw Error(ErrorCode::InvalidArgument, "refinement needs at least one frame");
  }
  RefinementConfig cfg = refinement_config_from_json(cfg_json);
  cfg.validate();

  auto s = find(id);
  std::unique_lock lock(s->mutex);
  s->require_idle();
  std::vector<RefinementCamera> cams = scene_refinement_cameras(s->manifest, s->cameras, cfg.frames);
  cfg.frames.clear();

  if (s->worker.joinable()) s->worker.join();
  s->job_state = "running";
  s->trace.reset();
  s->job_error = nullptr;
  Session* raw = s.get();
  const Pose start = s->pose;
  s->worker = std::thread([raw, start, cams = std::move(cams), cfg, max_undo = options_.max_undo] {
    try {
      RefinementResult r = refine_pose(raw->mesh, start, cams, cfg);
      std::lock_guard guard(raw->mutex);
      raw->push_undo(start, max_undo);
      raw->pose = checked(r.pose);
      raw->dirty = true;
      RefinementRecord rec;
      rec.rounds = static_cast<int>(r.trace.losses.size()) - 1;
      rec.initial_loss = r.trace.initial_loss();
      rec.final_loss = r.trace.final_loss();
      rec.frames = r.trace.frames;
      raw->history.push_back(rec);
      raw->trace = std::move(r.trace);
      raw->job_state = "done";
    } catch (const Error& e) {
      std::lock_guard guard(raw->mutex);
      raw->job_error = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
      raw->job_state = "failed";
    } catch (const std::exception& e) {
      std::lock_guard guard(raw->mutex);
      raw->job_error = {{"code", "internal"}, {"message", e.what()}};
      raw->job_state = "failed";
    }
    raw->job_cv.notify_all();
  });
}

namespace {

Json status_of(const std::string& state, const std::optional<RefinementTrace>& trace, const Json& error,
               const Pose& pose) {
  Json out{{"state", state}, {"pose", pose_to_json(pose)}};
  if (trace) out["trace"] = trace->to_json();
  if (!error.is_null()) out["error"] = error;
  return out;
}

}  // namespace

Json AnnotationService::refinement_status(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return status_of(s->job_state, s->trace, s->job_error, checked(s->pose));
}

Json AnnotationService::wait_refinement(const std::string& id) {
  auto s = find(id);
  std::unique_lock lock(s->mutex);
  s->job_cv.wait(lock, [&] { return s->job_state != "running"; });
  return status_of(s->job_state, s->trace, s->job_error, checked(s->pose));
}

Json AnnotationService::save(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->require_idle();
  SceneManifest updated = s->manifest;
  Annotation a;
  a.object_pose = checked(s->pose);
  a.provenance = Provenance::Textureless;
  a.refinement_history = s->history;
  a.updated_at = utc_timestamp();
  updated.annotation = a;
  try {
    save_manifest(updated, s->manifest_file);
  } catch (const Error& e) {
    throw Error(ErrorCode::Io, std::string("save failed, manifest left unchanged: ") + e.what());
  }
  s->manifest = std::move(updated);
  s->dirty = false;
  return {{"saved", s->manifest_file.string()}, {"updated_at", a.updated_at}, {"pose", pose_to_json(a.object_pose)}};
}

Blob AnnotationService::cloud(const std::string& id, std::size_t max_points, bool ply) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  const PointCloud& full = scene_cloud(s->manifest, s->cloud, s->cameras, options_.fusion);
  const std::size_t stride = max_points == 0 ? 1 : std::max<std::size_t>(1, (full.size() + max_points - 1) / max_points);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < full.size(); i += stride) pts.push_back(full.points[i]);
  if (ply) {
    std::ostringstream os;
    os.precision(9);
    os << "ply\nformat ascii 1.0\nelement vertex " << pts.size()
       << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
    for (const auto& p : pts) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    return {"application/octet-stream", os.str()};
  }
  Json arr = Json::array();
  for (const auto& p : pts) arr.push_back({p.x(), p.y(), p.z()});
  return {"application/json", dump_canonical({{"count", pts.size()}, {"total", full.size()}, {"points", arr}})};
}

// ---------------------------------------------------------------------------
// HTTP

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::MissingFile:
      return 404;
    case ErrorCode::Busy:
    case ErrorCode::UnavailableFrame:
      return 409;
    case ErrorCode::Io:
      return 500;
    case ErrorCode::MalformedLine:
    case ErrorCode::UnknownCameraModel:
    case ErrorCode::NonUnitQuaternion:
    case ErrorCode::NonMonotonicTimestamps:
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::TrailingGarbage:
      return 422;
    default:
      return 400;
  }
}

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

void send_json(httplib::Response& res, const Json& j, int status = 200) {
  res.status = status;
  res.set_content(dump_canonical(j), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, {{"code", code}, {"message", message}}, status);
}

Json body_json(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

int frame_arg(const std::string& s) {
  try {
    return std::stoi(s);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bad frame index '" + s + "'");
  }
}

double query_double(const httplib::Request& req, const char* key, double fallback) {
  if (!req.has_param(key)) return fallback;
  try {
    return std::stod(req.get_param_value(key));
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad query parameter ") + key);
  }
}

}  // namespace

HttpServer::HttpServer(AnnotationService& svc, fs::path static_dir) : impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  auto guard = [](Handler fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, std::string(to_string(ErrorCode::InvalidArgument)), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  };

  srv.Get("/scenes", guard([&svc](const auto&, auto& res) { send_json(res, svc.list_scenes()); }));
  srv.Post("/sessions", guard([&svc](const auto& req, auto& res) {
             const Json body = body_json(req);
             if (!body.contains("scene_id") || !body.at("scene_id").is_string()) {
               throw Error(ErrorCode::InvalidArgument, "body needs a string scene_id");
             }
             const std::string id = svc.open_session(body.at("scene_id").get<std::string>());
             send_json(res, svc.session_info(id), 201);
           }));
  srv.Get(R"(/sessions/([^/]+))",
          guard([&svc](const auto& req, auto& res) { send_json(res, svc.session_info(req.matches[1])); }));
  srv.Get(R"(/sessions/([^/]+)/frames)",
          guard([&svc](const auto& req, auto& res) { send_json(res, svc.frames(req.matches[1])); }));
  srv.Get(R"(/sessions/([^/]+)/frames/([^/]+))", guard([&svc](const auto& req, auto& res) {
            const Blob b = svc.frame_image(req.matches[1], frame_arg(req.matches[2]));
            res.set_content(b.bytes, b.content_type);
          }));
  srv.Get(R"(/sessions/([^/]+)/overlay/([^/]+)/mask)", guard([&svc](const auto& req, auto& res) {
            const Blob b = svc.overlay_mask(req.matches[1], frame_arg(req.matches[2]), query_double(req, "softness", 0));
            res.set_content(b.bytes, b.content_type);
          }));
  srv.Get(R"(/sessions/([^/]+)/overlay/([^/]+))", guard([&svc](const auto& req, auto& res) {
            send_json(res, svc.overlay(req.matches[1], frame_arg(req.matches[2])));
          }));
  srv.Post(R"(/sessions/([^/]+)/nudge)", guard([&svc](const auto& req, auto& res) {
             const Json body = body_json(req);
             const std::string id = req.matches[1];
             if (body.contains("steps")) {
               const Json& st = body.at("steps");
               svc.set_steps(id, st.at("translation").get<double>(), st.at("rotation_deg").get<double>());
             }
             send_json(res, svc.nudge(id, body.at("axis").get<std::string>(), body.at("sign").get<int>()));
           }));
  srv.Put(R"(/sessions/([^/]+)/pose)", guard([&svc](const auto& req, auto& res) {
            send_json(res, svc.set_pose(req.matches[1], pose_from_json(body_json(req))));
          }));
  srv.Post(R"(/sessions/([^/]+)/steps)", guard([&svc](const auto& req, auto& res) {
             const Json body = body_json(req);
             send_json(res, svc.set_steps(req.matches[1], body.at("translation").get<double>(),
                                          body.at("rotation_deg").get<double>()));
           }));
  srv.Post(R"(/sessions/([^/]+)/undo)",
           guard([&svc](const auto& req, auto& res) { send_json(res, svc.undo(req.matches[1])); }));
  srv.Post(R"(/sessions/([^/]+)/refine)", guard([&svc](const auto& req, auto& res) {
             svc.start_refinement(req.matches[1], body_json(req));
             send_json(res, svc.refinement_status(req.matches[1]), 202);
           }));
  srv.Get(R"(/sessions/([^/]+)/refine/status)", guard([&svc](const auto& req, auto& res) {
            send_json(res, svc.refinement_status(req.matches[1]));
          }));
  srv.Post(R"(/sessions/([^/]+)/save)",
           guard([&svc](const auto& req, auto& res) { send_json(res, svc.save(req.matches[1])); }));
  srv.Get(R"(/sessions/([^/]+)/cloud)", guard([&svc](const auto& req, auto& res) {
            const auto max = static_cast<std::size_t>(query_double(req, "max", 20000));
            const bool ply = req.has_param("format") && req.get_param_value("format") == "ply";
            const Blob b = svc.cloud(req.matches[1], max, ply);
            res.set_content(b.bytes, b.content_type);
          }));

  if (!static_dir.empty()) {
    if (!srv.set_mount_point("/", static_dir.string())) {
      throw Error(ErrorCode::NotFound, "static UI directory " + static_dir.string() + " does not exist");
    }
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error(ErrorCode::Io, "cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace posekit
