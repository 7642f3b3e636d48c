#include "plumekit/morphology.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

namespace plumekit {

namespace {

// Neighbour offsets P2..P9, clockwise from north.
constexpr int kDr[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDc[8] = {0, 1, 1, 1, 0, -1, -1, -1};

}  // namespace

BinaryMask skeletonize(const BinaryMask& mask) {
  if (mask.empty()) throw Error("skeletonize: empty mask");
  const BBox& b = mask.bbox();
  // One-pixel background border so every neighbour lookup is in range.
  const int rows = b.rows + 2, cols = b.cols + 2;
  MaskGrid img(rows, cols, 0);
  for (int r = 0; r < b.rows; ++r)
    for (int c = 0; c < b.cols; ++c) img(r + 1, c + 1) = mask.bits()[static_cast<std::size_t>(r) * b.cols + c];

  std::vector<std::size_t> to_clear;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int step = 0; step < 2; ++step) {
      to_clear.clear();
      for (int r = 1; r < rows - 1; ++r)
        for (int c = 1; c < cols - 1; ++c) {
          if (!img(r, c)) continue;
          int p[8];
          int count = 0;
          for (int k = 0; k < 8; ++k) count += (p[k] = img(r + kDr[k], c + kDc[k]));
          if (count < 2 || count > 6) continue;
          int transitions = 0;
          for (int k = 0; k < 8; ++k) transitions += (p[k] == 0 && p[(k + 1) % 8] == 1);
          if (transitions != 1) continue;
          // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
          if (step == 0 ? (p[0] && p[2] && p[4]) || (p[2] && p[4] && p[6])
                        : (p[0] && p[2] && p[6]) || (p[0] && p[4] && p[6]))
            continue;
          to_clear.push_back(static_cast<std::size_t>(r) * cols + c);
        }
      for (auto i : to_clear) img.data()[i] = 0;
      changed = changed || !to_clear.empty();
    }
  }

  BinaryMask skel = BinaryMask::from_bits({b.row0 - 1, b.col0 - 1, rows, cols}, img.data());
  if (!skel.empty()) return skel;
  double mr = 0.0, mc = 0.0;
  const auto px = mask.pixels();
  for (const auto& p : px) {
    mr += p.row;
    mc += p.col;
  }
  mr /= static_cast<double>(px.size());
  mc /= static_cast<double>(px.size());
  Pixel best = px.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& p : px) {
    const double d = (p.row - mr) * (p.row - mr) + (p.col - mc) * (p.col - mc);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  const Pixel one[1] = {best};
  return BinaryMask::from_pixels(one);
}

double geodesic_diameter(const BinaryMask& skeleton) {
  if (skeleton.empty()) return 0.0;
  const BBox& b = skeleton.bbox();
  const auto& bits = skeleton.bits();
  const std::size_t n = bits.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<std::uint8_t> done(n, 0);

  // Dijkstra from `src`; returns the farthest node (first in raster order on ties).
  auto sweep = [&](std::size_t src, std::vector<std::size_t>& touched) {
    for (auto i : touched) dist[i] = kInf;
    touched.clear();
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[src] = 0.0;
    touched.push_back(src);
    pq.push({0.0, src});
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[u]) continue;
      const int r = static_cast<int>(u / b.cols), c = static_cast<int>(u % b.cols);
      for (int k = 0; k < 8; ++k) {
        const int nr = r + kDr[k], nc = c + kDc[k];
        if (nr < 0 || nc < 0 || nr >= b.rows || nc >= b.cols) continue;
        const std::size_t v = static_cast<std::size_t>(nr) * b.cols + nc;
        if (!bits[v]) continue;
        const double w = (kDr[k] != 0 && kDc[k] != 0) ? std::numbers::sqrt2 : 1.0;
        if (d + w < dist[v]) {
          if (dist[v] == kInf) touched.push_back(v);
          dist[v] = d + w;
          pq.push({dist[v], v});
        }
      }
    }
    std::size_t far = src;
    for (auto i : touched)
      if (dist[i] > dist[far] || (dist[i] == dist[far] && i < far)) far = i;
    return far;
  };

  // Undirected 8-neighbour edge count of a component, to tell trees from graphs with cycles.
  auto edge_count = [&](const std::vector<std::size_t>& nodes) {
    std::size_t twice = 0;
    for (auto u : nodes) {
      const int r = static_cast<int>(u / b.cols), c = static_cast<int>(u % b.cols);
      for (int k = 0; k < 8; ++k) {
        const int nr = r + kDr[k], nc = c + kDc[k];
        if (nr >= 0 && nc >= 0 && nr < b.rows && nc < b.cols && bits[static_cast<std::size_t>(nr) * b.cols + nc])
          ++twice;
      }
    }
    return twice / 2;
  };

  double best = 0.0;
  std::vector<std::size_t> touched;
  for (std::size_t s = 0; s < n; ++s) {
    if (!bits[s] || done[s]) continue;
    const std::size_t a = sweep(s, touched);
    std::vector<std::size_t> component = touched;
    for (auto i : component) done[i] = 1;
    if (edge_count(component) + 1 == component.size()) {
      // On a tree the double sweep is exact.
      const std::size_t far = sweep(a, touched);
      best = std::max(best, dist[far]);
    } else {
      for (auto src : component) best = std::max(best, dist[sweep(src, touched)]);
    }
  }
  return best;
}

double major_axis_length(const BinaryMask& mask) {
  if (mask.empty()) throw Error("major_axis_length: empty mask");
  const auto px = mask.pixels();
  const double n = static_cast<double>(px.size());
  double mr = 0.0, mc = 0.0;
  for (const auto& p : px) {
    mr += p.row;
    mc += p.col;
  }
  mr /= n;
  mc /= n;
  double srr = 0.0, scc = 0.0, src = 0.0;
  for (const auto& p : px) {
    const double dr = p.row - mr, dc = p.col - mc;
    srr += dr * dr;
    scc += dc * dc;
    src += dr * dc;
  }
  srr /= n;
  scc /= n;
  src /= n;
  const double half_tr = 0.5 * (srr + scc);
  const double disc = std::sqrt(0.25 * (srr - scc) * (srr - scc) + src * src);
  return 4.0 * std::sqrt(half_tr + disc);
}

MorphologyReport fiber_metrics(const BinaryMask& mask) {
  if (mask.area() < kMinSkeletonArea) throw Error("fiber_metrics: too small to skeletonize");
  const BinaryMask skel = skeletonize(mask);
  MorphologyReport rep;
  rep.skeleton_pixels = skel.area();
  rep.fiber_length = std::max(1.0, geodesic_diameter(skel));
  rep.major_axis = major_axis_length(mask);
  rep.ratio = rep.fiber_length / rep.major_axis;
  return rep;
}

}  // namespace plumekit
