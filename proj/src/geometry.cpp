#include "posekit/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/SVD>

#include "posekit/error.hpp"

namespace posekit {

namespace {

// Below this angle the trigonometric coefficients are evaluated by series.
constexpr double kSmallAngle = 1e-4;

// sin(t)/t, (1-cos t)/t^2, (t-sin t)/t^3
struct ExpCoefficients {
  double a, b, c;
};

ExpCoefficients exp_coefficients(double theta) {
  const double t2 = theta * theta;
  if (theta < kSmallAngle) {
    return {1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0};
  }
  const double s = std::sin(theta);
  const double half = std::sin(0.5 * theta);
  return {s / theta, 2.0 * half * half / t2, (theta - s) / (t2 * theta)};
}

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

Pose Pose::from_matrix(const Mat4& m, double tol) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "pose matrix has non-finite entries");
  }
  if (std::abs(m(3, 0)) > tol || std::abs(m(3, 1)) > tol ||
      std::abs(m(3, 2)) > tol || std::abs(m(3, 3) - 1.0) > tol) {
    throw Error(ErrorCode::InvalidArgument, "pose matrix bottom row must be (0,0,0,1)");
  }
  Pose p(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
  if (!p.is_valid(tol)) {
    throw Error(ErrorCode::InvalidArgument, "pose rotation is not orthonormal");
  }
  return p;
}

Pose Pose::from_quaternion(const Eigen::Quaterniond& q, const Vec3& t) {
  return {q.normalized().toRotationMatrix(), t};
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Eigen::Quaterniond Pose::quaternion() const {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  return q;
}

double Pose::orthonormality_error() const {
  const double ortho =
      (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(rotation.determinant() - 1.0));
}

bool Pose::is_valid(double tol) const {
  return rotation.allFinite() && translation.allFinite() &&
         orthonormality_error() < tol;
}

Pose Pose::orthonormalized() const {
  Eigen::JacobiSVD<Mat3> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) = -u.col(2);
  return {u * v.transpose(), translation};
}

bool Pose::approx(const Pose& other, double tol) const {
  return (rotation - other.rotation).cwiseAbs().maxCoeff() <= tol &&
         (translation - other.translation).cwiseAbs().maxCoeff() <= tol;
}

Eigen::Matrix<double, 6, 1> Twist::vector() const {
  Eigen::Matrix<double, 6, 1> v;
  v << rho, phi;
  return v;
}

Twist Twist::from_vector(const Eigen::Matrix<double, 6, 1>& v) {
  return {v.head<3>(), v.tail<3>()};
}

Mat4 Similarity::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = scale * rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Similarity Similarity::inverse() const {
  Similarity inv;
  inv.scale = 1.0 / scale;
  inv.rotation = rotation.transpose();
  inv.translation = -inv.scale * (inv.rotation * translation);
  return inv;
}

void CameraIntrinsics::validate() const {
  std::ostringstream why;
  if (!(fx > 0) || !(fy > 0)) why << "focal lengths must be positive; ";
  if (width <= 0 || height <= 0) why << "image size must be positive; ";
  if (!(cx >= 0 && cx < width)) why << "cx outside [0, width); ";
  if (!(cy >= 0 && cy < height)) why << "cy outside [0, height); ";
  for (double d : distortion) {
    if (!std::isfinite(d)) {
      why << "distortion coefficients must be finite; ";
      break;
    }
  }
  if (!why.str().empty()) {
    throw Error(ErrorCode::InvalidArgument, "invalid intrinsics: " + why.str());
  }
}

bool CameraIntrinsics::has_distortion() const {
  for (double d : distortion) {
    if (d != 0.0) return true;
  }
  return false;
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Mat3 rot_x(double angle) { return axis_angle(Vec3::UnitX(), angle); }
Mat3 rot_y(double angle) { return axis_angle(Vec3::UnitY(), angle); }
Mat3 rot_z(double angle) { return axis_angle(Vec3::UnitZ(), angle); }

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a.transpose() * b;
  const double s = 0.5 * vee(rel - rel.transpose()).norm();
  const double c = 0.5 * (rel.trace() - 1.0);
  return std::atan2(s, c);
}

Pose se3_exp(const Twist& delta) {
  if (!finite(delta.rho) || !finite(delta.phi)) {
    throw Error(ErrorCode::InvalidArgument, "se3_exp: non-finite twist");
  }
  const double theta = delta.phi.norm();
  const auto [a, b, c] = exp_coefficients(theta);
  const Mat3 w = hat(delta.phi);
  const Mat3 w2 = w * w;
  const Mat3 r = Mat3::Identity() + a * w + b * w2;
  const Mat3 v = Mat3::Identity() + b * w + c * w2;
  return {r, v * delta.rho};
}

Twist se3_log(const Pose& p) {
  const Mat3& r = p.rotation;
  const Vec3 axis2 = vee(r - r.transpose());  // 2 sin(theta) * axis
  const double s = 0.5 * axis2.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (theta >= std::numbers::pi - 1e-6) {
    throw Error(ErrorCode::NearSingularity,
                "se3_log: rotation angle " + std::to_string(theta) +
                    " too close to pi");
  }
  const auto [a, b, unused] = exp_coefficients(theta);
  (void)unused;
  const Vec3 phi = axis2 / (2.0 * a);
  const Mat3 w = hat(phi);
  // V^-1 = I - W/2 + (1 - a / (2b)) / theta^2 * W^2
  double d;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    d = (1.0 - a / (2.0 * b)) / (theta * theta);
  }
  const Mat3 v_inv = Mat3::Identity() - 0.5 * w + d * (w * w);
  return {v_inv * p.translation, phi};
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose inverse(const Pose& p) {
  const Mat3 rt = p.rotation.transpose();
  return {rt, -(rt * p.translation)};
}

Pose pose_update(const Pose& xi, const Twist& delta) {
  return compose(xi, se3_exp(delta));
}

Pose camera_centric_pose(const Pose& obj_in_world, const Pose& cam_in_world) {
  return compose(inverse(cam_in_world), obj_in_world);
}

Vec2 project_camera_point(const Vec3& point_cam, const CameraIntrinsics& k) {
  if (!(point_cam.z() > 0)) {
    throw Error(ErrorCode::BehindCamera, "project: point is not in front of the camera");
  }
  return {k.fx * point_cam.x() / point_cam.z() + k.cx,
          k.fy * point_cam.y() / point_cam.z() + k.cy};
}

Vec2 project(const Vec4& point_world, const Pose& cam_in_world,
             const CameraIntrinsics& k) {
  const double w = point_world.w();
  if (w == 0.0) {
    throw Error(ErrorCode::PointAtInfinity, "project: homogeneous w is zero");
  }
  const Vec3 x = point_world.head<3>() / w;
  const Vec3 xc = cam_in_world.rotation.transpose() * (x - cam_in_world.translation);
  return project_camera_point(xc, k);
}

namespace {

struct Distorted {
  Vec2 value;
  Eigen::Matrix2d jacobian;
};

// Brown-Conrady on normalized coordinates.
Distorted distort_normalized(const Vec2& n, const std::array<double, 5>& d) {
  const double k1 = d[0], k2 = d[1], p1 = d[2], p2 = d[3], k3 = d[4];
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  const double dradial = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2);  // d radial / d r2
  Distorted out;
  out.value = {x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
               y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y};
  out.jacobian << radial + 2.0 * x * x * dradial + 2.0 * p1 * y + 6.0 * p2 * x,
      2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y,
      2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y,
      radial + 2.0 * y * y * dradial + 6.0 * p1 * y + 2.0 * p2 * x;
  return out;
}

}  // namespace

Vec2 distort_pixel(const Vec2& p, const CameraIntrinsics& k) {
  const Vec2 n{(p.x() - k.cx) / k.fx, (p.y() - k.cy) / k.fy};
  const Vec2 d = distort_normalized(n, k.distortion).value;
  return {k.fx * d.x() + k.cx, k.fy * d.y() + k.cy};
}

Vec2 undistort_pixel(const Vec2& p, const CameraIntrinsics& k, int max_iters,
                     double tol_px) {
  for (double c : k.distortion) {
    if (!std::isfinite(c)) {
      throw Error(ErrorCode::InvalidArgument, "undistort: non-finite distortion");
    }
  }
  if (!k.has_distortion()) return p;
  const Vec2 target{(p.x() - k.cx) / k.fx, (p.y() - k.cy) / k.fy};
  const Eigen::Vector2d scale{k.fx, k.fy};
  Vec2 n = target;
  double residual_px = 0;
  for (int it = 0; it < max_iters; ++it) {
    const Distorted d = distort_normalized(n, k.distortion);
    const Vec2 r = d.value - target;
    residual_px = r.cwiseProduct(scale).norm();
    if (residual_px < tol_px) {
      return {k.fx * n.x() + k.cx, k.fy * n.y() + k.cy};
    }
    n -= d.jacobian.partialPivLu().solve(r);
    if (!n.allFinite()) break;
  }
  throw Error(ErrorCode::NoConvergence,
              "undistort: no convergence, residual " + std::to_string(residual_px) +
                  " px");
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (!(x.norm() > 1e-12)) {
    throw Error(ErrorCode::InvalidArgument, "look_at: view direction parallel to up");
  }
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return {r, eye};
}

Mat3 euler_zyx(double yaw, double pitch, double roll) {
  return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
}

}  // namespace posekit
