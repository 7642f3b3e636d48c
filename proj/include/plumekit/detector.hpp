#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "plumekit/grid.hpp"
#include "plumekit/raster.hpp"

namespace plumekit {

// Soft values at or above this level form the hard instance mask.
inline constexpr double kSoftMaskThreshold = 0.5;
// Oracle detector: smallest component kept.
inline constexpr int kOracleMinArea = 5;

// Raw output of a detector on one patch, in patch coordinates.
struct PatchDetection {
  double score = 0.0;
  BBox bbox;
  Grid<double> soft;  // over bbox, values in [0,1]
};

// Window of origin plus merge history.
struct Provenance {
  Pixel window_origin;
  int window_size = 0;  // 0 when the detection did not come from a window
  std::vector<int> members;  // ids of merged detections (empty if unmerged)
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// One scene-space detection. `soft` is row-major over mask.bbox(); the hard mask is
// {soft >= 0.5} and is kept alongside for fast set operations.
struct Instance {
  int id = 0;
  double score = 0.0;
  BinaryMask mask;
  std::vector<float> soft;
  Provenance provenance;

  std::size_t area() const { return mask.area(); }
  const BBox& bbox() const { return mask.bbox(); }
  double soft_at(int row, int col) const {
    return mask.bbox().contains(row, col) ? soft[mask.local_index(row, col)] : 0.0;
  }
  void validate(const GridGeometry& geometry) const;
  friend bool operator==(const Instance&, const Instance&) = default;
};

// Builds an instance from a soft map over `box`; the mask is {soft >= 0.5} and the
// soft values are re-cropped to the tight mask box.
Instance make_instance(const BBox& box, const Grid<double>& soft, double score);
// Hard-mask instance with soft value 1 on the mask.
Instance make_instance(const BinaryMask& mask, double score);

struct DetectionSet {
  GridGeometry geometry;
  std::vector<Instance> instances;

  void validate() const;
};

class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<PatchDetection> detect(const Patch& patch) const = 0;
};

// Components (8-connected, area >= 5) of {valid and value > k}; soft = min(1, 0.5 +
// excess/4) on the component, 0 elsewhere in its box; score = logistic(mean excess / 2).
std::vector<PatchDetection> oracle_detect(const Patch& patch, double k);

class OracleDetector final : public Detector {
 public:
  explicit OracleDetector(double k) : k_(k) {}
  std::vector<PatchDetection> detect(const Patch& patch) const override { return oracle_detect(patch, k_); }
  double k() const { return k_; }

 private:
  double k_;
};

nlohmann::json geometry_to_json(const GridGeometry& g);
GridGeometry geometry_from_json(const nlohmann::json& j);

nlohmann::json detections_to_json(const DetectionSet& set);
// Validates schema, scores, bboxes against `geometry` (if the file carries a geometry it
// must match).
DetectionSet detections_from_json(const nlohmann::json& j, const GridGeometry& geometry);

void save_detections(const DetectionSet& set, const std::filesystem::path& path);
DetectionSet import_detections(const std::filesystem::path& path, const GridGeometry& geometry);
// Reads a detection file using the geometry it declares.
DetectionSet load_detections(const std::filesystem::path& path);

}  // namespace plumekit
