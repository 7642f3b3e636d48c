#pragma once

#include <vector>

#include "plumekit/grid.hpp"

namespace plumekit {

enum class Connectivity { four = 4, eight = 8 };

struct ComponentLabels {
  Grid<int> labels;  // 0 = background, 1..count = component id
  int count = 0;
  std::vector<std::vector<Pixel>> members;  // members[id-1], in raster order
};

// Two-pass union-find labeling; component ids follow raster order of first pixel.
ComponentLabels label_components(const MaskGrid& foreground, Connectivity conn = Connectivity::eight);

// Pixels of the component containing `seed` (empty if seed is background).
std::vector<Pixel> component_containing(const MaskGrid& foreground, Pixel seed,
                                        Connectivity conn = Connectivity::eight);

}  // namespace plumekit
