#pragma once

#include <filesystem>
#include <vector>

#include "plumekit/detector.hpp"
#include "plumekit/raster.hpp"

namespace plumekit {

struct ProbabilityGrid {
  GridGeometry geometry;
  Grid<double> p;  // values in [0,1]; 0 where no detection covers the pixel
};

// P(p) = sum_k s_k M_k(p) / sum_k s_k over detections whose soft-mask box contains p.
// Score-0 detections are skipped.
ProbabilityGrid aggregate(const std::vector<Instance>& dets, const GridGeometry& geometry);

struct CorrelationReport {
  double pearson = 0.0;
  double spearman = 0.0;
  std::size_t n = 0;
};

// Over {P > 0 and valid}; Spearman uses average ranks for ties.
CorrelationReport correlation_report(const ProbabilityGrid& prob, const SceneGrid& scene);

double pearson(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> average_ranks(const std::vector<double>& v);

// PGRID: SGRID-style header line with magic "PGRID" and one float32 channel.
void save_probmap(const ProbabilityGrid& prob, const std::filesystem::path& path);
ProbabilityGrid load_probmap(const std::filesystem::path& path);
// 8-bit grayscale, value round(255·P), gamma 1.0.
void save_probmap_png(const ProbabilityGrid& prob, const std::filesystem::path& path);

}  // namespace plumekit
