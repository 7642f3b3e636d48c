#include "plumekit/tiler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace plumekit {

std::vector<int> axis_origins(int dim, int size, int stride) {
  if (size > dim) throw Error("plan_windows: window size exceeds scene dimension");
  std::vector<int> out;
  for (int o = 0;; o += stride) {
    const int clamped = std::min(o, dim - size);
    if (out.empty() || out.back() != clamped) out.push_back(clamped);
    if (clamped == dim - size) break;
  }
  return out;
}

WindowPlan plan_windows(const GridGeometry& geometry, int size, double overlap) {
  geometry.validate();
  if (size < 1) throw Error("plan_windows: window size must be >= 1");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw Error("plan_windows: overlap must be in [0,1)");
  if (size > geometry.height || size > geometry.width) throw Error("plan_windows: window size exceeds scene dimension");
  WindowPlan plan;
  plan.size = size;
  plan.overlap = overlap;
  plan.stride = static_cast<int>(std::floor(size * (1.0 - overlap)));
  if (plan.stride < 1) throw Error("plan_windows: stride floor(s·(1−α)) must be >= 1");
  plan.row_origins = axis_origins(geometry.height, size, plan.stride);
  plan.col_origins = axis_origins(geometry.width, size, plan.stride);
  for (int r : plan.row_origins)
    for (int c : plan.col_origins) plan.origins.push_back({r, c});
  return plan;
}

Instance map_to_scene(const PatchDetection& d, Pixel origin, int window_size) {
  Instance inst = make_instance(d.bbox.translated(origin.row, origin.col), d.soft, d.score);
  inst.provenance.window_origin = origin;
  inst.provenance.window_size = window_size;
  return inst;
}

void sort_by_window(std::vector<Instance>& dets) {
  std::sort(dets.begin(), dets.end(), [](const Instance& a, const Instance& b) {
    if (a.provenance.window_origin != b.provenance.window_origin)
      return a.provenance.window_origin < b.provenance.window_origin;
    if (a.score != b.score) return a.score > b.score;
    if (a.bbox() != b.bbox()) return a.bbox() < b.bbox();
    return a.area() > b.area();
  });
}

DetectionSet run_scene(const SceneGrid& scene, const Detector& detector, int size, double overlap, int threads) {
  scene.validate();
  const WindowPlan plan = plan_windows(scene.geometry, size, overlap);
  std::vector<std::vector<Instance>> per_window(plan.origins.size());
  const bool any_valid = scene.valid_count() > 0;

  auto work = [&](std::size_t i) {
    const Pixel o = plan.origins[i];
    if (!any_valid) return;
    Patch patch;
    try {
      patch = extract_patch(scene, o, size);
    } catch (const Error& e) {
      // A window with no valid pixel has nothing to detect.
      if (std::string(e.what()).find("empty patch") != std::string::npos) return;
      throw;
    }
    for (const auto& d : detector.detect(patch)) per_window[i].push_back(map_to_scene(d, o, size));
  };

  if (threads <= 1 || plan.origins.size() < 2) {
    for (std::size_t i = 0; i < plan.origins.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(plan.origins.size());
    std::vector<std::thread> pool;
    const int n = std::min<int>(threads, static_cast<int>(plan.origins.size()));
    for (int t = 0; t < n; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < plan.origins.size();) {
          try {
            work(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  DetectionSet out;
  out.geometry = scene.geometry;
  for (auto& w : per_window)
    for (auto& d : w) out.instances.push_back(std::move(d));
  sort_by_window(out.instances);
  for (std::size_t i = 0; i < out.instances.size(); ++i) out.instances[i].id = static_cast<int>(i);
  return out;
}

}  // namespace plumekit
