#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace posekit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Frame conventions are carried by variable names: `a_in_b` maps points
// expressed in frame a into frame b. Camera poses are camera-to-world,
// object poses object-to-world. Cameras follow the x-right, y-down,
// z-forward convention.

/// Rigid transform in SE(3).
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& r, const Vec3& t) : rotation(r), translation(t) {}

  static Pose identity() { return {}; }
  /// Throws InvalidArgument unless the matrix is a rigid transform.
  static Pose from_matrix(const Mat4& m, double tol = 1e-9);
  /// Quaternion (w, x, y, z) is normalized before conversion.
  static Pose from_quaternion(const Eigen::Quaterniond& q, const Vec3& t);

  Mat4 matrix() const;
  /// Unit quaternion with non-negative w.
  Eigen::Quaterniond quaternion() const;

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

  /// Optical axis (third rotation column) for camera poses.
  Vec3 z_axis() const { return rotation.col(2); }

  /// Max element-wise deviation of RᵀR from I, and |det R - 1|.
  double orthonormality_error() const;
  bool is_valid(double tol = 1e-9) const;
  /// Nearest rotation in the Frobenius sense; translation untouched.
  Pose orthonormalized() const;

  bool approx(const Pose& other, double tol) const;
};

/// se(3) increment: translational part rho (meters), rotational part phi
/// (axis-angle, radians).
struct Twist {
  Vec3 rho = Vec3::Zero();
  Vec3 phi = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& r, const Vec3& p) : rho(r), phi(p) {}

  /// Packed as (rho, phi).
  Eigen::Matrix<double, 6, 1> vector() const;
  static Twist from_vector(const Eigen::Matrix<double, 6, 1>& v);

  Twist operator-() const { return {-rho, -phi}; }
};

/// 7-DOF similarity transform: x -> scale * R x + t.
struct Similarity {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 operator*(const Vec3& p) const {
    return scale * (rotation * p) + translation;
  }
  Mat4 matrix() const;
  Similarity inverse() const;
};

enum class DistortionIndex { K1 = 0, K2 = 1, P1 = 2, P2 = 3, K3 = 4 };

/// Pinhole intrinsics with Brown-Conrady (k1, k2, p1, p2, k3) distortion.
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  std::array<double, 5> distortion{};

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int w,
                   int h, std::array<double, 5> dist = {})
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h),
        distortion(dist) {}

  /// Throws InvalidArgument when the invariants do not hold.
  void validate() const;
  bool has_distortion() const;
  Mat3 matrix() const;

  bool operator==(const CameraIntrinsics&) const = default;
};

Mat3 hat(const Vec3& v);
Vec3 vee(const Mat3& m);

/// Rotation about a unit axis by `angle` radians.
Mat3 axis_angle(const Vec3& axis, double angle);
Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// Angle of the relative rotation a^T b, in radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);

Pose se3_exp(const Twist& delta);
/// Throws NearSingularity when the rotation angle is within 1e-6 of pi.
Twist se3_log(const Pose& p);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// xi * exp(delta): the increment acts on the right, in xi's own frame.
Pose pose_update(const Pose& xi, const Twist& delta);

/// Object pose expressed in the camera frame: inverse(cam) * obj.
Pose camera_centric_pose(const Pose& obj_in_world, const Pose& cam_in_world);

/// Pixel coordinates of a homogeneous world point seen by an undistorted
/// pinhole camera. Throws PointAtInfinity when w == 0 and BehindCamera when
/// the camera-frame depth is not positive.
Vec2 project(const Vec4& point_world, const Pose& cam_in_world,
             const CameraIntrinsics& k);
/// Pinhole projection of a point already in the camera frame.
Vec2 project_camera_point(const Vec3& point_cam, const CameraIntrinsics& k);

/// Forward Brown-Conrady model on pixel coordinates.
Vec2 distort_pixel(const Vec2& p, const CameraIntrinsics& k);

/// Inverts distort_pixel by Gauss-Newton in normalized coordinates. Throws
/// NoConvergence (with the residual in the message) after `max_iters`.
Vec2 undistort_pixel(const Vec2& p, const CameraIntrinsics& k,
                     int max_iters = 50, double tol_px = 1e-10);

/// Look-at camera at `eye` whose optical axis passes through `target`. The
/// image y axis points away from `up`.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

/// Intrinsic Z-Y-X (yaw, pitch, roll) Euler rotation.
Mat3 euler_zyx(double yaw, double pitch, double roll);

}  // namespace posekit
