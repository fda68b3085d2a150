#include "posekit/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "posekit/error.hpp"
#include "posekit/random.hpp"

namespace posekit {

using Vec6 = Eigen::Matrix<double, 6, 1>;

Pose init_rough_pose(const PointCloud& scene, const Pose& first_cam, double distance) {
  if (scene.size() < 3) throw Error(ErrorCode::InvalidArgument, "init_rough_pose: need at least 3 points");
  const double n = static_cast<double>(scene.size());
  Vec3 mean = Vec3::Zero();
  for (const auto& p : scene.points) mean += p;
  mean /= n;
  Mat3 cov = Mat3::Zero();
  for (const auto& p : scene.points) cov += (p - mean) * (p - mean).transpose();
  cov /= n;

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 lambda = eig.eigenvalues();  // ascending
  if (!(lambda(2) > 0)) throw Error(ErrorCode::Degenerate, "init_rough_pose: all points coincide");

  const Vec3 up = Vec3::UnitZ();
  Vec3 z = eig.eigenvectors().col(2);
  for (int c = 1; c >= 0; --c) {
    if (lambda(2) - lambda(c) >= 1e-9 * lambda(2)) break;
    const Vec3 cand = eig.eigenvectors().col(c);
    if (std::abs(cand.dot(up)) > std::abs(z.dot(up))) z = cand;
  }
  if (z.dot(up) < 0) z = -z;

  int least = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::abs(z(a)) < std::abs(z(least))) least = a;
  }
  const Vec3 axis = Vec3::Unit(least);
  const Vec3 x = (axis - axis.dot(z) * z).normalized();
  const Vec3 y = z.cross(x);

  Pose out;
  out.rotation.col(0) = x;
  out.rotation.col(1) = y;
  out.rotation.col(2) = z;
  out.translation = first_cam.translation + distance * first_cam.z_axis();
  return out;
}

// ---------------------------------------------------------------------------
// Rasterization

namespace {

constexpr double kNear = 1e-3;
// Logistic ramp is cut at +-kBand scale units and rescaled to hit 0 and 1
// exactly, so pixels beyond the band keep their hard value.
constexpr double kBand = 6.0;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

float soft_value(double signed_px, double softness) {
  static const double lo = logistic(-kBand);
  static const double span = logistic(kBand) - lo;
  const double x = std::clamp(signed_px / softness, -kBand, kBand);
  return static_cast<float>(std::clamp((logistic(x) - lo) / span, 0.0, 1.0));
}

Vec2 to_pixel(const Vec3& pc, const CameraIntrinsics& k) {
  const Vec2 p(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
  return k.has_distortion() ? distort_pixel(p, k) : p;
}

Vec3 near_cut(const Vec3& a, const Vec3& b) {
  const double s = (kNear - a.z()) / (b.z() - a.z());
  return a + s * (b - a);
}

void grow(PixelBox& box, int x, int y) {
  if (box.empty()) {
    box = {x, y, x, y};
    return;
  }
  box.x0 = std::min(box.x0, x);
  box.y0 = std::min(box.y0, y);
  box.x1 = std::max(box.x1, x);
  box.y1 = std::max(box.y1, y);
}

double cross2(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

void fill_triangle(Mask& out, PixelBox& box, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double area = cross2(a, b, c);
  if (!(std::abs(area) > 0) || !std::isfinite(area)) return;
  const double sgn = area > 0 ? 1.0 : -1.0;
  const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({a.x(), b.x(), c.x()}))));
  const int x1 = std::min(out.width - 1, static_cast<int>(std::floor(std::max({a.x(), b.x(), c.x()}))));
  const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({a.y(), b.y(), c.y()}))));
  const int y1 = std::min(out.height - 1, static_cast<int>(std::floor(std::max({a.y(), b.y(), c.y()}))));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p(x, y);
      if (sgn * cross2(a, b, p) >= 0 && sgn * cross2(b, c, p) >= 0 && sgn * cross2(c, a, p) >= 0) {
        out.at(x, y) = 1.f;
        grow(box, x, y);
      }
    }
  }
}

double segment_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

}  // namespace

SilhouetteRenderer::SilhouetteRenderer(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  if (mesh_.empty()) throw Error(ErrorCode::InvalidArgument, "silhouette: empty mesh");
  mesh_.validate();
  std::unordered_map<std::uint64_t, std::size_t> index;
  for (std::size_t f = 0; f < mesh_.triangles.size(); ++f) {
    const auto& t = mesh_.triangles[f];
    for (int e = 0; e < 3; ++e) {
      const int a = std::min(t[e], t[(e + 1) % 3]);
      const int b = std::max(t[e], t[(e + 1) % 3]);
      const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
      auto [it, fresh] = index.emplace(key, edges_.size());
      if (fresh) edges_.push_back({a, b, {}});
      edges_[it->second].faces.push_back(static_cast<int>(f));
    }
  }
}

Mask SilhouetteRenderer::render(const Pose& obj_in_cam, const CameraIntrinsics& k,
                                const SilhouetteRenderParams& params) const {
  Mask out(k.width, k.height);
  PixelBox box;
  render_into(out, box, obj_in_cam, k, params);
  return out;
}

void SilhouetteRenderer::render_into(Mask& out, PixelBox& box, const Pose& obj_in_cam,
                                     const CameraIntrinsics& k,
                                     const SilhouetteRenderParams& params) const {
  if (out.width != k.width || out.height != k.height) {
    throw Error(ErrorCode::InvalidArgument, "silhouette: output size differs from intrinsics");
  }
  if (params.softness < 0) throw Error(ErrorCode::InvalidArgument, "silhouette: negative softness");
  for (int y = box.y0; y <= box.y1; ++y) {
    std::fill_n(&out.at(box.x0, y), box.x1 - box.x0 + 1, 0.f);
  }
  box = {};

  std::vector<Vec3> pc(mesh_.vertices.size());
  bool any_front = false;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    pc[i] = obj_in_cam.rotation * mesh_.vertices[i] + obj_in_cam.translation;
    any_front = any_front || pc[i].z() > kNear;
  }
  if (!any_front) throw Error(ErrorCode::EmptySilhouette, "silhouette: mesh is entirely behind the camera");

  std::vector<Vec2> px(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (pc[i].z() > kNear) px[i] = to_pixel(pc[i], k);
  }

  for (const auto& t : mesh_.triangles) {
    const bool in0 = pc[t[0]].z() > kNear, in1 = pc[t[1]].z() > kNear, in2 = pc[t[2]].z() > kNear;
    if (in0 && in1 && in2) {
      fill_triangle(out, box, px[t[0]], px[t[1]], px[t[2]]);
      continue;
    }
    if (!in0 && !in1 && !in2) continue;
    // Clip against the near plane and fan the resulting polygon.
    std::vector<Vec2> poly;
    for (int e = 0; e < 3; ++e) {
      const Vec3& a = pc[t[e]];
      const Vec3& b = pc[t[(e + 1) % 3]];
      const bool ia = a.z() > kNear, ib = b.z() > kNear;
      if (ia) poly.push_back(px[t[e]]);
      if (ia != ib) poly.push_back(to_pixel(near_cut(a, b), k));
    }
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) fill_triangle(out, box, poly[0], poly[i], poly[i + 1]);
  }

  if (params.softness == 0) return;

  std::vector<char> front(mesh_.triangles.size());
  for (std::size_t f = 0; f < mesh_.triangles.size(); ++f) {
    const auto& t = mesh_.triangles[f];
    const Vec3 nrm = (pc[t[1]] - pc[t[0]]).cross(pc[t[2]] - pc[t[0]]);
    front[f] = nrm.dot(pc[t[0]]) < 0;
  }
  std::vector<std::array<Vec2, 2>> segments;
  for (const auto& e : edges_) {
    bool contour = e.faces.size() == 1;
    for (std::size_t i = 1; i < e.faces.size() && !contour; ++i) contour = front[e.faces[i]] != front[e.faces[0]];
    if (!contour) continue;
    Vec3 a = pc[e.a], b = pc[e.b];
    const bool ia = a.z() > kNear, ib = b.z() > kNear;
    if (!ia && !ib) continue;
    if (!ia) a = near_cut(a, b);
    if (!ib) b = near_cut(a, b);
    segments.push_back({to_pixel(a, k), to_pixel(b, k)});
  }
  if (segments.empty()) return;

  const double band = kBand * params.softness;
  PixelBox region;
  for (const auto& s : segments) {
    const double lo_x = std::min(s[0].x(), s[1].x()) - band, hi_x = std::max(s[0].x(), s[1].x()) + band;
    const double lo_y = std::min(s[0].y(), s[1].y()) - band, hi_y = std::max(s[0].y(), s[1].y()) + band;
    if (hi_x < 0 || hi_y < 0 || lo_x > out.width - 1 || lo_y > out.height - 1) continue;
    grow(region, std::max(0, static_cast<int>(std::ceil(lo_x))), std::max(0, static_cast<int>(std::ceil(lo_y))));
    grow(region, std::min(out.width - 1, static_cast<int>(std::floor(hi_x))),
         std::min(out.height - 1, static_cast<int>(std::floor(hi_y))));
  }
  if (region.empty()) return;

  const int rw = region.x1 - region.x0 + 1, rh = region.y1 - region.y0 + 1;
  std::vector<float> dist(static_cast<std::size_t>(rw) * rh, std::numeric_limits<float>::infinity());
  for (const auto& s : segments) {
    const int x0 = std::max(region.x0, static_cast<int>(std::ceil(std::min(s[0].x(), s[1].x()) - band)));
    const int x1 = std::min(region.x1, static_cast<int>(std::floor(std::max(s[0].x(), s[1].x()) + band)));
    const int y0 = std::max(region.y0, static_cast<int>(std::ceil(std::min(s[0].y(), s[1].y()) - band)));
    const int y1 = std::min(region.y1, static_cast<int>(std::floor(std::max(s[0].y(), s[1].y()) + band)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        float& d = dist[static_cast<std::size_t>(y - region.y0) * rw + (x - region.x0)];
        d = std::min(d, static_cast<float>(segment_distance(s[0], s[1], Vec2(x, y))));
      }
    }
  }
  for (int y = region.y0; y <= region.y1; ++y) {
    for (int x = region.x0; x <= region.x1; ++x) {
      const float d = dist[static_cast<std::size_t>(y - region.y0) * rw + (x - region.x0)];
      if (!(d < band)) continue;
      float& v = out.at(x, y);
      v = soft_value(v > 0.5f ? d : -d, params.softness);
      if (v > 0) grow(box, x, y);
    }
  }
}

Mask render_silhouette(const TriangleMesh& mesh, const Pose& obj_in_cam, const CameraIntrinsics& k,
                       const SilhouetteRenderParams& params) {
  return SilhouetteRenderer(mesh).render(obj_in_cam, k, params);
}

double mask_loss(const Mask& rendered, const Mask& reference) {
  if (rendered.width != reference.width || rendered.height != reference.height) {
    throw Error(ErrorCode::InvalidArgument, "mask_loss: masks differ in size");
  }
  if (rendered.values.empty()) return 0.0;
  double acc = 0;
  for (std::size_t i = 0; i < rendered.values.size(); ++i) {
    const double d = static_cast<double>(rendered.values[i]) - reference.values[i];
    acc += d * d;
  }
  return acc / static_cast<double>(rendered.values.size());
}

// ---------------------------------------------------------------------------
// Optimization

void RefinementConfig::validate() const {
  if (rounds < 0) throw Error(ErrorCode::InvalidArgument, "refine: rounds must be >= 0");
  if (inner_iterations < 1) throw Error(ErrorCode::InvalidArgument, "refine: inner iterations must be >= 1");
  if (!(step > 0)) throw Error(ErrorCode::InvalidArgument, "refine: step must be positive");
  if (!(eps_rotation > 0) || !(eps_translation > 0)) {
    throw Error(ErrorCode::InvalidArgument, "refine: finite-difference epsilons must be positive");
  }
  if (softness < 0) throw Error(ErrorCode::InvalidArgument, "refine: softness must be >= 0");
  if (max_halvings < 0) throw Error(ErrorCode::InvalidArgument, "refine: max_halvings must be >= 0");
}

namespace {

// Per-camera loss with a reused render buffer. Pixels outside the rendered
// box are zero, so their contribution comes from a summed-area table of the
// squared reference.
class CameraTerm {
 public:
  CameraTerm(const RefinementCamera& cam) : cam_(&cam), buffer_(cam.intrinsics.width, cam.intrinsics.height) {
    const int w = buffer_.width, h = buffer_.height;
    if (cam.reference.width != w || cam.reference.height != h) {
      throw Error(ErrorCode::InvalidArgument, "refine: reference mask size differs from intrinsics");
    }
    table_.assign(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
    for (int y = 0; y < h; ++y) {
      double row = 0;
      for (int x = 0; x < w; ++x) {
        const double r = cam.reference.at(x, y);
        row += r * r;
        table_[idx(x + 1, y + 1)] = table_[idx(x + 1, y)] + row;
      }
    }
  }

  double loss(const SilhouetteRenderer& renderer, const Pose& obj_in_world, double softness) {
    const double total = table_[idx(buffer_.width, buffer_.height)];
    const double n = static_cast<double>(buffer_.values.size());
    try {
      renderer.render_into(buffer_, box_, camera_centric_pose(obj_in_world, cam_->cam_in_world),
                           cam_->intrinsics, {softness});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySilhouette) throw;
      box_ = {};
      return total / n;
    }
    if (box_.empty()) return total / n;
    const double inside = table_[idx(box_.x1 + 1, box_.y1 + 1)] - table_[idx(box_.x0, box_.y1 + 1)] -
                          table_[idx(box_.x1 + 1, box_.y0)] + table_[idx(box_.x0, box_.y0)];
    double acc = 0;
    for (int y = box_.y0; y <= box_.y1; ++y) {
      for (int x = box_.x0; x <= box_.x1; ++x) {
        const double d = static_cast<double>(buffer_.at(x, y)) - cam_->reference.at(x, y);
        acc += d * d;
      }
    }
    return std::max(0.0, total - inside + acc) / n;
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * (buffer_.width + 1) + x; }

  const RefinementCamera* cam_;
  Mask buffer_;
  PixelBox box_;
  std::vector<double> table_;
};

class Problem {
 public:
  Problem(const SilhouetteRenderer& renderer, const std::vector<RefinementCamera>& cameras)
      : renderer_(renderer) {
    terms_.reserve(cameras.size());
    for (const auto& c : cameras) terms_.emplace_back(c);
  }

  std::size_t size() const { return terms_.size(); }

  double term(std::size_t k, const Pose& xi, double softness) { return terms_[k].loss(renderer_, xi, softness); }

  double total(const Pose& xi, double softness) {
    double acc = 0;
    for (std::size_t k = 0; k < terms_.size(); ++k) acc += term(k, xi, softness);
    return acc;
  }

  // Objective restricted to one camera when `only` is set.
  double at(const Pose& xi, const Vec6& delta, double softness, std::optional<std::size_t> only) {
    const Pose p = pose_update(xi, Twist::from_vector(delta));
    return only ? term(*only, p, softness) : total(p, softness);
  }

  Vec6 gradient(const Pose& xi, const Vec6& delta, double softness, double eps_r, double eps_t,
                std::optional<std::size_t> only) {
    Vec6 g;
    for (int i = 0; i < 6; ++i) {
      const double eps = i < 3 ? eps_t : eps_r;
      Vec6 hi = delta, lo = delta;
      hi(i) += eps;
      lo(i) -= eps;
      g(i) = (at(xi, hi, softness, only) - at(xi, lo, softness, only)) / (2 * eps);
    }
    return g;
  }

 private:
  const SilhouetteRenderer& renderer_;
  std::vector<CameraTerm> terms_;
};

}  // namespace

double refinement_objective(const SilhouetteRenderer& renderer, const Pose& obj_in_world,
                            const std::vector<RefinementCamera>& cameras, double softness) {
  Problem problem(renderer, cameras);
  return problem.total(obj_in_world, softness);
}

Vec6 refinement_gradient(const SilhouetteRenderer& renderer, const Pose& obj_in_world,
                         const std::vector<RefinementCamera>& cameras, double softness,
                         double eps_rotation, double eps_translation) {
  Problem problem(renderer, cameras);
  return problem.gradient(obj_in_world, Vec6::Zero(), softness, eps_rotation, eps_translation,
                          std::nullopt);
}

namespace {

void record(RefinementTrace& trace, const SilhouetteRenderer& renderer,
            const std::vector<RefinementCamera>& cameras, const Pose& xi, double soft_loss) {
  std::vector<double> per;
  double sum = 0;
  for (const auto& c : cameras) {
    double l;
    try {
      l = mask_loss(renderer.render(camera_centric_pose(xi, c.cam_in_world), c.intrinsics, {0.0}),
                    c.reference);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySilhouette) throw;
      l = mask_loss(Mask(c.reference.width, c.reference.height), c.reference);
    }
    per.push_back(l);
    sum += l;
  }
  trace.losses.push_back(soft_loss);
  trace.hard_losses.push_back(sum / static_cast<double>(cameras.size()));
  trace.poses.push_back(xi);
  trace.frame_losses.push_back(std::move(per));
}

// One linearization: descent on delta around xi. Each coordinate moves by
// its own step against the gradient sign; steps grow while the sign holds
// and shrink when it flips. Trial steps are kept only if the loss drops.
Vec6 run_round(Problem& problem, const Pose& xi, double start_loss, double base_step,
               const RefinementConfig& cfg, std::uint64_t rng_key) {
  Vec6 delta = Vec6::Zero();
  Vec6 step = Vec6::Constant(base_step);
  Vec6 prev = Vec6::Zero();
  double f_joint = start_loss;
  SplitMix64 rng = SplitMix64::keyed(cfg.seed, rng_key);
  for (int it = 0; it < cfg.inner_iterations; ++it) {
    std::optional<std::size_t> only;
    double f = f_joint;
    if (cfg.per_camera) {
      only = rng.below(problem.size());
      f = problem.at(xi, delta, cfg.softness, only);
    }
    const Vec6 g = problem.gradient(xi, delta, cfg.softness, cfg.eps_rotation, cfg.eps_translation, only);
    if (g.isZero(0.0)) {
      if (!cfg.per_camera) break;
      continue;
    }
    Vec6 move = Vec6::Zero();
    for (int i = 0; i < 6; ++i) {
      if (g(i) * prev(i) > 0) step(i) = std::min(base_step, 1.2 * step(i));
      if (g(i) * prev(i) < 0) step(i) *= 0.5;
      if (g(i) != 0) move(i) = g(i) > 0 ? -step(i) : step(i);
    }
    prev = g;
    const Vec6 trial = delta + move;
    const double ft = problem.at(xi, trial, cfg.softness, only);
    if (ft < f) {
      delta = trial;
      if (!cfg.per_camera) f_joint = ft;
    } else {
      step *= 0.5;
      prev.setZero();
    }
  }
  return delta;
}

}  // namespace

RefinementResult refine_pose(const TriangleMesh& mesh, const Pose& obj_in_world,
                             const std::vector<RefinementCamera>& all_cameras,
                             const RefinementConfig& cfg) {
  cfg.validate();
  std::vector<RefinementCamera> cameras;
  if (cfg.frames.empty()) {
    cameras = all_cameras;
  } else {
    const std::set<int> wanted(cfg.frames.begin(), cfg.frames.end());
    for (const auto& c : all_cameras) {
      if (wanted.count(c.frame)) cameras.push_back(c);
    }
  }
  std::stable_sort(cameras.begin(), cameras.end(),
                   [](const RefinementCamera& a, const RefinementCamera& b) { return a.frame < b.frame; });
  if (cameras.empty()) throw Error(ErrorCode::InvalidArgument, "refine: no cameras selected");
  if (std::none_of(cameras.begin(), cameras.end(), [](const auto& c) { return c.reference.any(); })) {
    throw Error(ErrorCode::InvalidArgument, "refine: every reference mask is empty");
  }

  const SilhouetteRenderer renderer(mesh);
  bool visible = false;
  for (const auto& c : cameras) {
    try {
      visible = visible || renderer.render(camera_centric_pose(obj_in_world, c.cam_in_world),
                                           c.intrinsics, {0.0}).any();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySilhouette) throw;
    }
  }
  if (!visible) throw Error(ErrorCode::CannotStart, "refine: initial pose renders nothing in any view");

  Problem problem(renderer, cameras);
  RefinementResult result{obj_in_world, {}};
  RefinementTrace& trace = result.trace;
  for (const auto& c : cameras) trace.frames.push_back(c.frame);

  Pose xi = obj_in_world;
  double loss = problem.total(xi, cfg.softness);
  record(trace, renderer, cameras, xi, loss);
  if (loss == 0) {
    trace.converged = true;
    return result;
  }

  int round = 0, attempt = 0;
  while (round < cfg.rounds) {
    const double base_step = std::ldexp(cfg.step, -trace.halvings);
    const Vec6 delta = run_round(problem, xi, loss, base_step, cfg, static_cast<std::uint64_t>(attempt++));
    const Pose candidate = pose_update(xi, Twist::from_vector(delta));
    const double next = problem.total(candidate, cfg.softness);
    if (next > loss) {
      ++trace.rejected_rounds;
      if (trace.halvings == cfg.max_halvings) break;
      ++trace.halvings;
      continue;
    }
    const double gain = loss - next;
    xi = candidate;
    loss = next;
    record(trace, renderer, cameras, xi, loss);
    ++round;
    if (gain < cfg.convergence) {
      trace.converged = true;
      break;
    }
  }
  result.pose = xi;
  return result;
}

Json RefinementTrace::to_json() const {
  Json poses_json = Json::array();
  for (const auto& p : poses) poses_json.push_back(pose_to_json(p));
  return {{"losses", losses},
          {"hard_losses", hard_losses},
          {"poses", poses_json},
          {"frame_losses", frame_losses},
          {"frames", frames},
          {"halvings", halvings},
          {"rejected_rounds", rejected_rounds},
          {"converged", converged}};
}

std::string RefinementTrace::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "round,loss,hard_loss,qw,qx,qy,qz,tx,ty,tz\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const auto q = poses[i].quaternion();
    const Vec3& t = poses[i].translation;
    os << i << ',' << losses[i] << ',' << hard_losses[i] << ',' << q.w() << ',' << q.x() << ','
       << q.y() << ',' << q.z() << ',' << t.x() << ',' << t.y() << ',' << t.z() << '\n';
  }
  return os.str();
}

Json refinement_config_to_json(const RefinementConfig& c) {
  return {{"rounds", c.rounds},
          {"inner_iterations", c.inner_iterations},
          {"step", c.step},
          {"eps_rotation", c.eps_rotation},
          {"eps_translation", c.eps_translation},
          {"softness", c.softness},
          {"convergence", c.convergence},
          {"max_halvings", c.max_halvings},
          {"per_camera", c.per_camera},
          {"seed", c.seed},
          {"frames", c.frames}};
}

RefinementConfig refinement_config_from_json(const Json& j) {
  RefinementConfig c;
  try {
    c.rounds = j.value("rounds", c.rounds);
    c.inner_iterations = j.value("inner_iterations", c.inner_iterations);
    c.step = j.value("step", c.step);
    c.eps_rotation = j.value("eps_rotation", c.eps_rotation);
    c.eps_translation = j.value("eps_translation", c.eps_translation);
    c.softness = j.value("softness", c.softness);
    c.convergence = j.value("convergence", c.convergence);
    c.max_halvings = j.value("max_halvings", c.max_halvings);
    c.per_camera = j.value("per_camera", c.per_camera);
    c.seed = j.value("seed", c.seed);
    c.frames = j.value("frames", c.frames);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("refine config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace posekit
