#include "posekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "posekit/error.hpp"
#include "posekit/random.hpp"

namespace posekit {

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample_surface: n must be >= 1");
  mesh.validate();
  std::vector<double> cdf(mesh.triangles.size());
  double total = 0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += mesh.triangle_area(t);
    cdf[t] = total;
  }
  if (!(total > 0)) throw Error(ErrorCode::Degenerate, "sample_surface: mesh has no area");

  PointCloud out;
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng = SplitMix64::keyed(seed, i);
    const double pick = rng.uniform() * total;
    std::size_t t = std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin();
    t = std::min(t, cdf.size() - 1);
    // Skip zero-area triangles that share a cdf value with their successor.
    while (mesh.triangle_area(t) <= 0 && t + 1 < cdf.size()) ++t;
    const double s = std::sqrt(rng.uniform());
    const double r = rng.uniform();
    const auto& tri = mesh.triangles[t];
    out.points.push_back((1 - s) * mesh.vertices[tri[0]] + s * (1 - r) * mesh.vertices[tri[1]] +
                         s * r * mesh.vertices[tri[2]]);
  }
  return out;
}

RescaleResult rescale_longest_edge(const TriangleMesh& gt, const std::vector<TriangleMesh>& others,
                                   double target) {
  if (gt.vertices.empty()) throw Error(ErrorCode::InvalidArgument, "rescale: empty gt mesh");
  const auto [lo, hi] = gt.bounds();
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0)) throw Error(ErrorCode::Degenerate, "rescale: gt bounding box has zero extent");
  RescaleResult r;
  r.scale = target / extent;
  auto scaled = [&](TriangleMesh m) {
    for (auto& v : m.vertices) v *= r.scale;
    return m;
  };
  r.gt = scaled(gt);
  for (const auto& m : others) r.others.push_back(scaled(m));
  return r;
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::size_t kLeafSize = 8;
}

KdTree::KdTree(const std::vector<Vec3>& points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) build(0, points_.size());
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({-1, 0, begin, end, -1, -1});
  if (end - begin <= kLeafSize) return id;
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis;
  if ((hi - lo).maxCoeff(&axis) <= 0) return id;  // all points coincide
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t a, std::size_t b) { return points_[a](axis) < points_[b](axis); });
  const double split = points_[order_[mid]](axis);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d = squared_distance(q, points_[idx]);
      if (d < best.sq_distance || (d == best.sq_distance && idx < best.index)) best = {idx, d};
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q(node.axis) - node.split;
  const int near = diff < 0 ? node.left : node.right;
  const int far = diff < 0 ? node.right : node.left;
  search(near, q, best);
  if (diff * diff <= best.sq_distance) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& q) const {
  if (points_.empty()) throw Error(ErrorCode::InvalidArgument, "kd-tree: no points");
  Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  search(0, q, best);
  return best;
}

namespace {

std::vector<double> nearest_sq(const PointCloud& from, const PointCloud& to) {
  const KdTree tree(to.points);
  std::vector<double> out(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) out[i] = tree.nearest(from.points[i]).sq_distance;
  return out;
}

void require_points(const PointCloud& p, const PointCloud& q, const char* what) {
  if (p.empty() || q.empty()) throw Error(ErrorCode::InvalidArgument, std::string(what) + ": empty point cloud");
}

double mean(const std::vector<double>& v) {
  double acc = 0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double share_within(const std::vector<double>& sq, double tau) {
  std::size_t hits = 0;
  for (double d : sq) hits += std::sqrt(d) <= tau;
  return static_cast<double>(hits) / static_cast<double>(sq.size());
}

F1Score score(const std::vector<double>& p_to_q, const std::vector<double>& q_to_p, double tau) {
  F1Score s;
  s.tau = tau;
  s.precision = share_within(p_to_q, tau);
  s.recall = share_within(q_to_p, tau);
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

}  // namespace

double chamfer(const PointCloud& p, const PointCloud& q) {
  require_points(p, q, "chamfer");
  return mean(nearest_sq(p, q)) + mean(nearest_sq(q, p));
}

F1Score f1_at(const PointCloud& pred, const PointCloud& gt, double tau) {
  require_points(pred, gt, "f1");
  if (!(tau > 0)) throw Error(ErrorCode::InvalidArgument, "f1: tau must be positive");
  return score(nearest_sq(pred, gt), nearest_sq(gt, pred), tau);
}

MetricReport evaluate_meshes(const TriangleMesh& pred, const TriangleMesh& gt, const MetricParams& params) {
  for (double tau : params.taus) {
    if (!(tau > 0)) throw Error(ErrorCode::InvalidArgument, "evaluate: tau must be positive");
  }
  MetricReport report;
  TriangleMesh p = pred, g = gt;
  if (params.rescale) {
    RescaleResult r = rescale_longest_edge(gt, {pred});
    g = std::move(r.gt);
    p = std::move(r.others[0]);
    report.scale = r.scale;
  }
  const PointCloud ps = sample_surface(p, params.samples, params.seed);
  const PointCloud gs = sample_surface(g, params.samples, params.seed);
  const auto p_to_g = nearest_sq(ps, gs);
  const auto g_to_p = nearest_sq(gs, ps);
  report.chamfer = mean(p_to_g) + mean(g_to_p);
  for (double tau : params.taus) report.scores.push_back(score(p_to_g, g_to_p, tau));
  report.pred_samples = ps.size();
  report.gt_samples = gs.size();
  return report;
}

Json MetricReport::to_json() const {
  Json s = Json::array();
  for (const auto& f : scores) {
    s.push_back({{"tau", f.tau}, {"precision", f.precision}, {"recall", f.recall}, {"f1", f.f1}});
  }
  return {{"chamfer", chamfer},
          {"scores", s},
          {"pred_samples", pred_samples},
          {"gt_samples", gt_samples},
          {"scale", scale}};
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

DatasetSplit split_dataset(const std::vector<DatasetEntry>& entries, std::array<double, 3> ratios,
                           std::uint64_t seed) {
  double sum = 0;
  for (double r : ratios) {
    if (!(r > 0)) throw Error(ErrorCode::InvalidArgument, "split: ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "split: ratios must sum to 1");

  std::map<std::string, std::vector<std::string>> by_category;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.id).second) throw Error(ErrorCode::InvalidArgument, "split: duplicate object id " + e.id);
    by_category[e.category].push_back(e.id);
  }

  DatasetSplit out;
  std::vector<std::string>* parts[3] = {&out.train, &out.test, &out.val};
  for (auto& [category, ids] : by_category) {
    SplitMix64 rng = SplitMix64::keyed(seed, fnv1a(category));
    rng.shuffle(ids);
    const double n = static_cast<double>(ids.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> rest{};
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
      const double quota = n * ratios[k];
      counts[k] = static_cast<std::size_t>(std::floor(quota));
      rest[k] = quota - std::floor(quota);
      assigned += counts[k];
    }
    std::array<int, 3> rank{0, 1, 2};
    std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return rest[a] > rest[b]; });
    for (std::size_t i = 0; assigned < ids.size(); ++i, ++assigned) ++counts[rank[i % 3]];

    std::size_t at = 0;
    for (int k = 0; k < 3; ++k) {
      for (std::size_t c = 0; c < counts[k]; ++c) parts[k]->push_back(ids[at++]);
    }
    if (ids.size() < 3) {
      out.warnings.push_back("category '" + category + "' has " + std::to_string(ids.size()) +
                             " object(s); some splits get none of it");
    }
  }
  return out;
}

Json DatasetSplit::to_json() const {
  return {{"train", train}, {"test", test}, {"val", val}, {"warnings", warnings}};
}

}  // namespace posekit
