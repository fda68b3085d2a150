#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/fuse.hpp"
#include "posekit/geometry.hpp"
#include "posekit/ingest.hpp"
#include "posekit/manifest.hpp"
#include "posekit/refine.hpp"

namespace posekit {

using Segment2 = std::array<Vec2, 2>;

/// Edges drawn in the overlay: boundary edges and edges whose two faces are
/// not coplanar (a cube gives its 12 box edges).
std::vector<std::array<int, 2>> feature_edges(const TriangleMesh& mesh, double min_angle = 1e-3);

/// Projects `edges` through the camera. Segments are clipped at z = 1 mm
/// and then to the image rectangle; fully hidden segments are dropped.
std::vector<Segment2> project_wireframe(const TriangleMesh& mesh, const std::vector<std::array<int, 2>>& edges,
                                        const Pose& obj_in_cam, const CameraIntrinsics& k);

/// Fuses every frame that has both depth and a camera pose; empty when none do.
PointCloud fuse_scene(const SceneManifest& m, const std::vector<std::optional<Pose>>& cameras,
                      const FusionParams& params);

/// init_rough_pose on the scene cloud, falling back to an identity rotation
/// `distance` ahead of the first posed camera when the cloud is empty or
/// degenerate. Throws UnavailableFrame when no frame has a pose.
Pose rough_scene_pose(const SceneManifest& m, const std::vector<std::optional<Pose>>& cameras,
                      const PointCloud& cloud, double distance);

/// Loads masks for the selected frames (all frames with a mask and pose when
/// `frames` is empty). Explicitly requested frames must exist and be usable.
std::vector<RefinementCamera> scene_refinement_cameras(const SceneManifest& m,
                                                       const std::vector<std::optional<Pose>>& cameras,
                                                       const std::vector<int>& frames);

struct ServiceOptions {
  std::filesystem::path data_root;
  std::size_t max_undo = 256;
  double step_translation = 0.005;  // meters
  double step_rotation_deg = 1.0;
  FusionParams fusion;
};

struct Blob {
  std::string content_type;
  std::string bytes;
};

/// Scene sessions behind the HTTP API. Every scene is a subdirectory of the
/// data root holding a manifest.json. Calls on one session are serialized;
/// refinement runs on a background thread, one job per session.
class AnnotationService {
 public:
  explicit AnnotationService(ServiceOptions options);
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  const ServiceOptions& options() const { return options_; }

  Json list_scenes() const;
  std::string open_session(const std::string& scene_id);
  Json session_info(const std::string& id);
  Pose pose(const std::string& id);
  Json frames(const std::string& id);
  Blob frame_image(const std::string& id, int frame);
  Json overlay(const std::string& id, int frame);
  Blob overlay_mask(const std::string& id, int frame, double softness);

  /// axis: tx, ty, tz (world axes) or roll, pitch, yaw (intrinsic Z-Y-X
  /// increment in the object frame); sign is +1 or -1.
  Json nudge(const std::string& id, const std::string& axis, int sign);
  /// Replaces the pose outright (undoable).
  Json set_pose(const std::string& id, const Pose& pose);
  Json set_steps(const std::string& id, double translation, double rotation_deg);
  Json undo(const std::string& id);

  /// Validates inputs and loads masks synchronously, then refines in the
  /// background. Throws Busy while a job is running.
  void start_refinement(const std::string& id, const Json& body);
  Json refinement_status(const std::string& id);
  /// Blocks until the current job (if any) finishes; returns the status.
  Json wait_refinement(const std::string& id);

  Json save(const std::string& id);
  /// Fused scene points, at most `max_points` (evenly strided).
  Blob cloud(const std::string& id, std::size_t max_points, bool ply);

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id);

  ServiceOptions options_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_id_ = 1;
};

/// HTTP front end over an AnnotationService.
class HttpServer {
 public:
  HttpServer(AnnotationService& service, std::filesystem::path static_dir = {});
  ~HttpServer();

  /// Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP status used for an error code.
int http_status(ErrorCode code);

}  // namespace posekit
