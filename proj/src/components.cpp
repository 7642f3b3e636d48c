#include "plumekit/components.hpp"

#include <numeric>

namespace plumekit {

namespace {

struct DisjointSet {
  std::vector<int> parent;
  int make() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent[b] = a;
    else parent[a] = b;
  }
};

}  // namespace

ComponentLabels label_components(const MaskGrid& fg, Connectivity conn) {
  const int rows = fg.rows(), cols = fg.cols();
  Grid<int> provisional(rows, cols, -1);
  DisjointSet ds;
  const bool eight = conn == Connectivity::eight;

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!fg(r, c)) continue;
      int label = -1;
      auto visit = [&](int rr, int cc) {
        if (rr < 0 || cc < 0 || cc >= cols) return;
        const int l = provisional(rr, cc);
        if (l < 0) return;
        if (label < 0) label = l;
        else ds.unite(label, l);
      };
      visit(r, c - 1);
      visit(r - 1, c);
      if (eight) {
        visit(r - 1, c - 1);
        visit(r - 1, c + 1);
      }
      provisional(r, c) = label < 0 ? ds.make() : label;
    }
  }

  ComponentLabels out;
  out.labels = Grid<int>(rows, cols, 0);
  std::vector<int> final_id(ds.parent.size(), 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int p = provisional(r, c);
      if (p < 0) continue;
      const int root = ds.find(p);
      if (final_id[root] == 0) {
        final_id[root] = ++out.count;
        out.members.emplace_back();
      }
      const int id = final_id[root];
      out.labels(r, c) = id;
      out.members[id - 1].push_back({r, c});
    }
  }
  return out;
}

std::vector<Pixel> component_containing(const MaskGrid& fg, Pixel seed, Connectivity conn) {
  std::vector<Pixel> out;
  if (seed.row < 0 || seed.col < 0 || seed.row >= fg.rows() || seed.col >= fg.cols() || !fg(seed.row, seed.col))
    return out;
  MaskGrid seen(fg.rows(), fg.cols(), 0);
  std::vector<Pixel> stack{seed};
  seen(seed.row, seed.col) = 1;
  const int n = conn == Connectivity::eight ? 8 : 4;
  static constexpr int dr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
  static constexpr int dc[8] = {0, 0, -1, 1, -1, 1, -1, 1};
  while (!stack.empty()) {
    const Pixel p = stack.back();
    stack.pop_back();
    out.push_back(p);
    for (int k = 0; k < n; ++k) {
      const int r = p.row + dr[k], c = p.col + dc[k];
      if (r < 0 || c < 0 || r >= fg.rows() || c >= fg.cols() || seen(r, c) || !fg(r, c)) continue;
      seen(r, c) = 1;
      stack.push_back({r, c});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace plumekit
