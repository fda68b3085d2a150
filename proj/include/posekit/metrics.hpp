#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/ingest.hpp"
#include "posekit/manifest.hpp"

namespace posekit {

/// Area-weighted uniform surface samples. Sample i draws from a generator
/// keyed by (seed, i). Throws Degenerate when the mesh has no area.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n = 10000, std::uint64_t seed = 0);

struct RescaleResult {
  TriangleMesh gt;
  std::vector<TriangleMesh> others;
  double scale = 1;
};

/// Scales every mesh about the origin so the longest edge of the gt
/// bounding box becomes `target`.
RescaleResult rescale_longest_edge(const TriangleMesh& gt, const std::vector<TriangleMesh>& others,
                                   double target = 10.0);

/// Static kd-tree for exact nearest-neighbor queries; ties resolve to the
/// lowest point index.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& points);

  struct Hit {
    std::size_t index;
    double sq_distance;
  };
  Hit nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int axis = -1;  // -1 for leaves
    double split = 0;
    std::size_t begin = 0, end = 0;
    int left = -1, right = -1;
  };
  int build(std::size_t begin, std::size_t end);
  void search(int node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Squared distance written out term by term; shared by every metric.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Mean squared nearest distance P->Q plus Q->P.
double chamfer(const PointCloud& p, const PointCloud& q);

struct F1Score {
  double tau = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// precision: share of P within tau of Q; recall: share of Q within tau of P.
F1Score f1_at(const PointCloud& pred, const PointCloud& gt, double tau);

struct MetricParams {
  std::size_t samples = 10000;
  std::vector<double> taus{0.3};
  std::uint64_t seed = 0;
  bool rescale = true;
};

struct MetricReport {
  double chamfer = 0;
  std::vector<F1Score> scores;
  std::size_t pred_samples = 0;
  std::size_t gt_samples = 0;
  double scale = 1;

  Json to_json() const;
};

/// Samples both meshes with the same seed after optional rescaling by the
/// gt bounding box, then computes chamfer and F1 at each tau.
MetricReport evaluate_meshes(const TriangleMesh& pred, const TriangleMesh& gt, const MetricParams& params = {});

struct DatasetEntry {
  std::string id;
  std::string category;
};

struct DatasetSplit {
  std::vector<std::string> train, test, val;
  std::vector<std::string> warnings;

  Json to_json() const;
};

/// Per-category shuffle split with largest-remainder rounding. Ratios are
/// (train, test, val) and must be positive and sum to 1.
DatasetSplit split_dataset(const std::vector<DatasetEntry>& entries,
                           std::array<double, 3> ratios = {0.7, 0.2, 0.1}, std::uint64_t seed = 0);

}  // namespace posekit
