#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plumekit/detector.hpp"
#include "plumekit/forest.hpp"
#include "plumekit/morphology.hpp"
#include "plumekit/qnd.hpp"
#include "plumekit/raster.hpp"

namespace plumekit {

// Operating point.
inline constexpr double kDefaultTau = 0.8;
inline constexpr double kDefaultDelta = 0.2;
inline constexpr double kDefaultFiberRatio = 1.25;
inline constexpr double kDefaultSizeFloor = 1500.0;

enum class Mode { baseline, high_sensitivity, high_precision };

std::string_view mode_name(Mode mode);  // "baseline", "high-sensitivity", "high-precision"
Mode parse_mode(std::string_view name);

struct PipelineConfig {
  double tau = kDefaultTau;
  double delta = kDefaultDelta;
  double fiber_ratio_max = kDefaultFiberRatio;
  std::optional<double> size_floor;  // high-precision alternative to the classifier
  Mode mode = Mode::baseline;
  CoreParams core;  // hotspot-core isolation used by the QND classifier

  void validate() const;
};

// Instance counts after each stage of run_mode (stages not run stay at -1).
struct ModeTrace {
  long confidence = -1, nms = -1, fiber = -1, merge = -1, high_precision = -1;
};

std::vector<Instance> filter_confidence(const std::vector<Instance>& dets, double tau);

double mask_iou(const BinaryMask& a, const BinaryMask& b);

// Descending score, then larger area, then lexicographic bbox, then id.
bool nms_order(const Instance& a, const Instance& b);

// Greedy: keep a detection iff its mask IoU with every kept detection is <= delta.
std::vector<Instance> nms(const std::vector<Instance>& dets, double delta);

// Keeps detections with fiber ratio <= ratio_max; masks below the skeletonization floor
// are kept unfiltered.
std::vector<Instance> fiber_filter(const std::vector<Instance>& dets, double ratio_max = kDefaultFiberRatio);

// Replaces each connected group of intersecting masks by one instance: union mask,
// per-pixel max soft value, area-weighted score, lowest member id. Output is in nms_order.
std::vector<Instance> merge_proximal(const std::vector<Instance>& dets);

std::vector<Instance> size_filter(const std::vector<Instance>& dets, double floor_px);

// Keeps detections the classifier calls plume; detections without a hotspot core (or
// whose features cannot be computed) are dropped as artifact-like.
std::vector<Instance> qnd_filter(const std::vector<Instance>& dets, const SceneGrid& scene,
                                 const RandomForestModel& model, const CoreParams& core = {});

std::vector<Instance> run_mode(const std::vector<Instance>& dets, const SceneGrid& scene,
                               const PipelineConfig& config, const RandomForestModel* classifier = nullptr,
                               ModeTrace* trace = nullptr);

}  // namespace plumekit
