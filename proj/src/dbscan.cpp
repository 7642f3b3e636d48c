#include "plumekit/dbscan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <utility>

#include "plumekit/error.hpp"

namespace plumekit {

namespace {

// Uniform grid with cell size eps; neighbours lie in the 3x3 surrounding cells.
class CellIndex {
 public:
  CellIndex(const std::vector<Point2>& pts, double eps) : pts_(pts), eps_(eps) {
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(cell(pts[i].x), cell(pts[i].y))].push_back(i);
  }

  template <typename F>
  void for_neighbours(std::size_t i, F&& f) const {
    const auto cx = cell(pts_[i].x), cy = cell(pts_[i].y);
    const double e2 = eps_ * eps_;
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (auto j : it->second) {
          const double ddx = pts_[i].x - pts_[j].x, ddy = pts_[i].y - pts_[j].y;
          if (ddx * ddx + ddy * ddy <= e2) f(j);
        }
      }
  }

 private:
  long long cell(double v) const { return static_cast<long long>(std::floor(v / eps_)); }
  static std::pair<long long, long long> key(long long a, long long b) { return {a, b}; }

  const std::vector<Point2>& pts_;
  double eps_;
  std::map<std::pair<long long, long long>, std::vector<std::size_t>> cells_;
};

std::size_t find(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

}  // namespace

DbscanResult dbscan(const std::vector<Point2>& points, double eps, int min_pts) {
  if (!(eps > 0.0)) throw Error("dbscan: eps must be > 0");
  if (min_pts < 1) throw Error("dbscan: min_pts must be >= 1");
  const std::size_t n = points.size();
  DbscanResult res;
  res.labels.assign(n, kNoise);
  res.core.assign(n, false);
  if (n == 0) return res;

  const CellIndex index(points, eps);
  std::vector<int> counts(n, 0);
  for (std::size_t i = 0; i < n; ++i) index.for_neighbours(i, [&](std::size_t) { ++counts[i]; });
  for (std::size_t i = 0; i < n; ++i) res.core[i] = counts[i] >= min_pts;

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!res.core[i]) continue;
    index.for_neighbours(i, [&](std::size_t j) {
      if (!res.core[j]) return;
      auto a = find(parent, i), b = find(parent, j);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);  // root = lowest index
    });
  }
  std::vector<int> root_id(n, kNoise);
  for (std::size_t i = 0; i < n; ++i) {
    if (!res.core[i]) continue;
    const auto r = find(parent, i);
    if (root_id[r] == kNoise) root_id[r] = res.cluster_count++;
    res.labels[i] = root_id[r];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (res.core[i]) continue;
    int best = kNoise;
    index.for_neighbours(i, [&](std::size_t j) {
      if (res.core[j] && (best == kNoise || res.labels[j] < best)) best = res.labels[j];
    });
    res.labels[i] = best;
  }
  return res;
}

}  // namespace plumekit
