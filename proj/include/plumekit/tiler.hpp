#pragma once

#include <vector>

#include "plumekit/detector.hpp"
#include "plumekit/raster.hpp"

namespace plumekit {

inline constexpr int kDefaultPatchSize = 768;
inline constexpr double kDefaultOverlap = 0.75;

struct WindowPlan {
  int size = 0;
  double overlap = 0.0;
  int stride = 0;
  std::vector<int> row_origins;
  std::vector<int> col_origins;
  std::vector<Pixel> origins;  // row-major product of the per-axis origins

  std::size_t window_count() const { return origins.size(); }
};

// Per-axis origins {0, stride, 2·stride, ...} with the last one clamped to dim − s.
std::vector<int> axis_origins(int dim, int size, int stride);
WindowPlan plan_windows(const GridGeometry& geometry, int size, double overlap);

Instance map_to_scene(const PatchDetection& d, Pixel origin, int window_size);

// Runs the detector on every window (each normalized as its own patch) and returns the
// remapped detections sorted by (window origin, score desc, bbox); ids are assigned in
// that order. threads > 1 evaluates windows concurrently with the same result.
DetectionSet run_scene(const SceneGrid& scene, const Detector& detector, int size, double overlap,
                       int threads = 1);

// Canonical ordering used for run_scene output.
void sort_by_window(std::vector<Instance>& dets);

}  // namespace plumekit
