#include "posekit/manifest.hpp"

#include <chrono>
#include <cmath>
#include <ctime>

#include "posekit/error.hpp"

namespace posekit {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, "manifest: " + what);
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) bad(std::string(what) + " must be a 3-array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
T required(const Json& j, const char* key) {
  if (!j.contains(key)) bad(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("field '") + key + "': " + e.what());
  }
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

Json pose_to_json(const Pose& p) {
  Json matrix = Json::array();
  const Mat4 m = p.matrix();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) matrix.push_back(m(r, c));
  }
  const auto q = p.quaternion();
  return {{"matrix", matrix},
          {"quaternion", Json::array({q.w(), q.x(), q.y(), q.z()})},
          {"translation", vec_json(p.translation)}};
}

Pose pose_from_json(const Json& j) {
  try {
    if (j.contains("matrix")) {
      const Json& a = j.at("matrix");
      if (!a.is_array() || a.size() != 16) bad("pose matrix must have 16 entries");
      Mat4 m;
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m(r, c) = a[4 * r + c].get<double>();
      }
      return Pose::from_matrix(m);
    }
    if (j.contains("quaternion") && j.contains("translation")) {
      const Json& q = j.at("quaternion");
      if (!q.is_array() || q.size() != 4) bad("quaternion must be [qw, qx, qy, qz]");
      const Eigen::Quaterniond quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                    q[3].get<double>());
      if (std::abs(quat.norm() - 1.0) > 1e-6) bad("quaternion is not unit-norm");
      return Pose::from_quaternion(quat, vec_from(j.at("translation"), "translation"));
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("pose: ") + e.what());
  }
  bad("pose needs 'matrix' or 'quaternion' + 'translation'");
}

Json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx},       {"fy", k.fy},         {"cx", k.cx},
          {"cy", k.cy},       {"width", k.width},   {"height", k.height},
          {"distortion", Json(std::vector<double>(k.distortion.begin(), k.distortion.end()))}};
}

CameraIntrinsics intrinsics_from_json(const Json& j) {
  CameraIntrinsics k;
  k.fx = required<double>(j, "fx");
  k.fy = required<double>(j, "fy");
  k.cx = required<double>(j, "cx");
  k.cy = required<double>(j, "cy");
  k.width = required<int>(j, "width");
  k.height = required<int>(j, "height");
  if (j.contains("distortion")) {
    const auto d = j.at("distortion").get<std::vector<double>>();
    if (d.size() != 5) bad("distortion must have 5 coefficients (k1, k2, p1, p2, k3)");
    std::copy(d.begin(), d.end(), k.distortion.begin());
  }
  k.validate();
  return k;
}

Json similarity_to_json(const Similarity& s) {
  Json r = Json::array();
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < 3; ++c) r.push_back(s.rotation(i, c));
  }
  return {{"scale", s.scale}, {"rotation", r}, {"translation", vec_json(s.translation)}};
}

std::string to_string(Provenance p) {
  return p == Provenance::TextureRich ? "texture-rich" : "textureless";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "texture-rich") return Provenance::TextureRich;
  if (s == "textureless") return Provenance::Textureless;
  bad("unknown provenance '" + s + "'");
}

Json manifest_to_json(const SceneManifest& m) {
  Json j;
  j["version"] = m.version;
  j["scene_id"] = m.scene_id;
  j["intrinsics"] = intrinsics_to_json(m.intrinsics);
  j["depth_scale"] = m.depth_scale;
  j["mask_threshold"] = m.mask_threshold;
  j["init_distance"] = m.init_distance;
  j["mesh"] = m.mesh;
  j["trajectory"] = m.trajectory ? Json(*m.trajectory) : Json(nullptr);
  j["sfm_model"] = m.sfm_model ? Json(*m.sfm_model) : Json(nullptr);
  Json frames = Json::array();
  for (const auto& f : m.frames) {
    Json fj{{"index", f.index}, {"image", f.image}, {"depth", f.depth}, {"mask", f.mask}};
    fj["timestamp"] = f.timestamp ? Json(*f.timestamp) : Json(nullptr);
    frames.push_back(fj);
  }
  j["frames"] = frames;
  if (m.annotation) {
    const auto& a = *m.annotation;
    Json hist = Json::array();
    for (const auto& h : a.refinement_history) {
      hist.push_back({{"rounds", h.rounds},
                      {"initial_loss", h.initial_loss},
                      {"final_loss", h.final_loss},
                      {"frames", h.frames}});
    }
    j["annotation"] = {{"object_pose", pose_to_json(a.object_pose)},
                       {"provenance", to_string(a.provenance)},
                       {"refinement_history", hist},
                       {"updated_at", a.updated_at}};
  } else {
    j["annotation"] = nullptr;
  }
  return j;
}

SceneManifest manifest_from_json(const Json& j) {
  if (!j.is_object()) bad("document must be a JSON object");
  SceneManifest m;
  m.version = required<int>(j, "version");
  if (m.version != kManifestVersion) bad("unsupported version " + std::to_string(m.version));
  m.scene_id = required<std::string>(j, "scene_id");
  m.intrinsics = intrinsics_from_json(required<Json>(j, "intrinsics"));
  if (j.contains("depth_scale")) m.depth_scale = j.at("depth_scale").get<double>();
  if (j.contains("mask_threshold")) m.mask_threshold = j.at("mask_threshold").get<double>();
  if (j.contains("init_distance")) m.init_distance = j.at("init_distance").get<double>();
  if (!(m.depth_scale > 0)) bad("depth_scale must be positive");
  m.mesh = required<std::string>(j, "mesh");
  m.trajectory = optional_string(j, "trajectory");
  m.sfm_model = optional_string(j, "sfm_model");
  if (j.contains("frames")) {
    for (const auto& fj : j.at("frames")) {
      FrameRecord f;
      f.index = required<int>(fj, "index");
      f.image = fj.value("image", "");
      f.depth = fj.value("depth", "");
      f.mask = fj.value("mask", "");
      if (fj.contains("timestamp") && !fj.at("timestamp").is_null()) {
        f.timestamp = fj.at("timestamp").get<double>();
      }
      m.frames.push_back(f);
    }
  }
  if (j.contains("annotation") && !j.at("annotation").is_null()) {
    const Json& aj = j.at("annotation");
    Annotation a;
    a.object_pose = pose_from_json(required<Json>(aj, "object_pose"));
    a.provenance = provenance_from_string(required<std::string>(aj, "provenance"));
    a.updated_at = aj.value("updated_at", "");
    if (aj.contains("refinement_history")) {
      for (const auto& hj : aj.at("refinement_history")) {
        RefinementRecord r;
        r.rounds = required<int>(hj, "rounds");
        r.initial_loss = required<double>(hj, "initial_loss");
        r.final_loss = required<double>(hj, "final_loss");
        r.frames = hj.value("frames", std::vector<int>{});
        a.refinement_history.push_back(r);
      }
    }
    m.annotation = a;
  }
  return m;
}

std::string dump_canonical(const Json& j) { return j.dump(2) + "\n"; }

SceneManifest load_manifest(const fs::path& file, bool check_files) {
  const std::string content = read_file(file);
  Json j;
  try {
    j = Json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(ErrorCode::MalformedLine, file.string(), 0, e.what());
  }
  SceneManifest m = manifest_from_json(j);
  m.base_dir = file.parent_path();
  if (check_files) {
    auto must_exist = [&](const std::string& rel) {
      if (rel.empty()) return;
      if (!fs::exists(m.resolve(rel))) {
        throw ParseError(ErrorCode::MissingFile, m.resolve(rel).string(), 0,
                         "referenced by " + file.string() + " but missing");
      }
    };
    must_exist(m.mesh);
    if (m.trajectory) must_exist(*m.trajectory);
    if (m.sfm_model) must_exist(*m.sfm_model);
    for (const auto& f : m.frames) {
      must_exist(f.image);
      must_exist(f.depth);
      must_exist(f.mask);
    }
  }
  return m;
}

void save_manifest(const SceneManifest& m, const fs::path& file) {
  write_file_atomic(file, dump_canonical(manifest_to_json(m)));
}

std::vector<std::optional<Pose>> frame_camera_poses(const SceneManifest& m) {
  std::vector<std::optional<Pose>> poses(m.frames.size());
  if (m.trajectory) {
    const Trajectory traj = parse_trajectory(m.resolve(*m.trajectory));
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
      const auto& f = m.frames[i];
      if (f.timestamp) {
        for (const auto& e : traj) {
          if (std::abs(e.timestamp - *f.timestamp) <= 1e-6) {
            poses[i] = e.cam_in_world;
            break;
          }
        }
      } else if (f.index >= 0 && static_cast<std::size_t>(f.index) < traj.size()) {
        poses[i] = traj[f.index].cam_in_world;
      }
    }
  } else if (m.sfm_model) {
    const SfmModel model = parse_sfm_text(m.resolve(*m.sfm_model));
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
      const std::string name = fs::path(m.frames[i].image).filename().string();
      if (const SfmImage* img = model.find_image(name)) poses[i] = img->cam_in_world();
    }
  }
  return poses;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace posekit
