#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/ingest.hpp"
#include "posekit/manifest.hpp"

namespace posekit {

/// Object pose from a scene cloud: z-axis along the first principal
/// component (sign toward world +z), placed `distance` along the first
/// camera's optical axis. Throws InvalidArgument for fewer than 3 points and
/// Degenerate when all points coincide.
Pose init_rough_pose(const PointCloud& scene, const Pose& first_cam, double distance);

struct SilhouetteRenderParams {
  double softness = 0.0;  // edge ramp scale in pixels, 0 = binary
};

/// Inclusive pixel rectangle; empty when x1 < x0.
struct PixelBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool empty() const { return x1 < x0 || y1 < y0; }
};

/// Depth-agnostic silhouette rasterizer. Keeps the edge adjacency of one
/// mesh so repeated renders only pay for projection and scan conversion.
class SilhouetteRenderer {
 public:
  explicit SilhouetteRenderer(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }

  Mask render(const Pose& obj_in_cam, const CameraIntrinsics& k,
              const SilhouetteRenderParams& params) const;

  /// Renders into a reused mask of the right size. `box` must bound the
  /// nonzero pixels left by the previous call; it is cleared first and
  /// replaced with the new bound.
  void render_into(Mask& out, PixelBox& box, const Pose& obj_in_cam, const CameraIntrinsics& k,
                   const SilhouetteRenderParams& params) const;

 private:
  struct Edge {
    int a, b;
    std::vector<int> faces;
  };
  TriangleMesh mesh_;
  std::vector<Edge> edges_;
};

/// Hard or soft silhouette of `mesh` seen from a camera. Throws
/// EmptySilhouette when every vertex lies behind the near plane.
Mask render_silhouette(const TriangleMesh& mesh, const Pose& obj_in_cam, const CameraIntrinsics& k,
                       const SilhouetteRenderParams& params);

/// Mean squared per-pixel difference. Throws InvalidArgument on size mismatch.
double mask_loss(const Mask& rendered, const Mask& reference);

struct RefinementCamera {
  Pose cam_in_world;
  CameraIntrinsics intrinsics;
  Mask reference;
  int frame = 0;  // label carried into the trace
};

struct RefinementConfig {
  int rounds = 10;
  int inner_iterations = 30;
  double step = 1e-2;
  double eps_rotation = 1e-3;     // radians
  double eps_translation = 1e-3;  // meters
  double softness = 2.0;          // pixels, used while optimizing
  double convergence = 1e-10;     // minimum loss decrease per round
  int max_halvings = 5;
  bool per_camera = false;  // one camera per inner step instead of the full sum
  std::uint64_t seed = 0;   // camera order in per-camera mode
  std::vector<int> frames;  // subset of RefinementCamera::frame, empty = all

  void validate() const;
};

struct RefinementTrace {
  std::vector<double> losses;       // soft objective after each accepted round, [0] = start
  std::vector<double> hard_losses;  // mean hard mask loss, same indexing
  std::vector<Pose> poses;          // object-in-world, same indexing
  std::vector<std::vector<double>> frame_losses;  // hard loss per camera, same indexing
  std::vector<int> frames;
  int halvings = 0;
  int rejected_rounds = 0;
  bool converged = false;

  double initial_loss() const { return hard_losses.front(); }
  double final_loss() const { return hard_losses.back(); }
  Json to_json() const;
  /// round,loss,hard_loss,qw,qx,qy,qz,tx,ty,tz
  std::string to_csv() const;
};

struct RefinementResult {
  Pose pose;
  RefinementTrace trace;
};

/// Summed soft mask loss of the object at `obj_in_world` over all cameras.
double refinement_objective(const SilhouetteRenderer& renderer, const Pose& obj_in_world,
                            const std::vector<RefinementCamera>& cameras, double softness);

/// Central finite-difference gradient of the objective with respect to a
/// right-multiplied twist at zero; layout (rho, phi).
Eigen::Matrix<double, 6, 1> refinement_gradient(const SilhouetteRenderer& renderer,
                                                const Pose& obj_in_world,
                                                const std::vector<RefinementCamera>& cameras,
                                                double softness, double eps_rotation,
                                                double eps_translation);

/// Silhouette alignment by gradient descent on se(3) increments with
/// relinearization after every round. Throws CannotStart when the initial
/// pose renders nothing in every view.
RefinementResult refine_pose(const TriangleMesh& mesh, const Pose& obj_in_world,
                             const std::vector<RefinementCamera>& cameras,
                             const RefinementConfig& cfg = {});

Json refinement_config_to_json(const RefinementConfig& cfg);
RefinementConfig refinement_config_from_json(const Json& j);

}  // namespace posekit
