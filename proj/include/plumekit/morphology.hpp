#pragma once

#include <cstddef>

#include "plumekit/raster.hpp"

namespace plumekit {

// Masks smaller than this are not skeletonized (and bypass the fiber filter).
inline constexpr std::size_t kMinSkeletonArea = 5;

struct MorphologyReport {
  double fiber_length = 0.0;  // px, geodesic diameter of the skeleton
  double major_axis = 0.0;    // px, 4·sqrt(largest eigenvalue of the coordinate covariance)
  double ratio = 0.0;         // fiber_length / major_axis
  std::size_t skeleton_pixels = 0;
};

// Zhang–Suen thinning. A mask that thins away entirely (e.g. a 2x2 block) keeps the
// pixel closest to its centroid, so the skeleton of a nonempty mask is never empty.
BinaryMask skeletonize(const BinaryMask& mask);

// Longest shortest path over the 8-connected skeleton graph (unit axial steps, sqrt(2)
// diagonal steps): a double Dijkstra sweep on tree components, where it is exact, and a
// sweep from every pixel on components with cycles.
double geodesic_diameter(const BinaryMask& skeleton);

double major_axis_length(const BinaryMask& mask);

// Fiber length is floored at 1 px so single-pixel skeletons still report a length.
MorphologyReport fiber_metrics(const BinaryMask& mask);

}  // namespace plumekit
