#pragma once

#include <vector>

namespace plumekit {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr int kNoise = -1;

struct DbscanResult {
  std::vector<int> labels;  // cluster id per point, kNoise for noise
  std::vector<bool> core;
  int cluster_count = 0;
};

// Density clustering with Euclidean radius eps (inclusive); a point is core when at
// least min_pts points (itself included) lie within eps. Cluster ids follow the lowest
// core index in each cluster; a border point joins the lowest-id neighbouring cluster.
DbscanResult dbscan(const std::vector<Point2>& points, double eps, int min_pts);

}  // namespace plumekit
