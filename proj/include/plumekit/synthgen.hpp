#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "plumekit/grid.hpp"
#include "plumekit/raster.hpp"

namespace plumekit {

// Sampling range for emission rates (t/h).
inline constexpr double kEmissionRateMin = 0.9;
inline constexpr double kEmissionRateMax = 4.0;
// A placement is rejected when this fraction (or more) of its footprint is invalid.
inline constexpr double kMaxFootprintInvalidFraction = 0.2;
inline constexpr int kDefaultPlacementRetries = 100;

// Steady-state Gaussian plume surrogate. wind_direction is the direction the plume
// travels, in degrees clockwise from grid north (north = decreasing row).
struct PlumeSpec {
  Pixel source;
  double emission_rate_tph = 1.0;
  double wind_direction_deg = 0.0;
  double wind_speed_ms = 3.0;
  double spread_a = 0.08;
  double spread_b = 0.9;
  // Downwind extent of the simulated domain; the field is zero beyond it.
  double max_downwind_m = std::numeric_limits<double>::infinity();

  void validate() const;
};

enum class ArtifactKind { stripe, cloud_patch, small_enhancement, dispersed_enhancement };

std::string_view artifact_kind_name(ArtifactKind kind);
ArtifactKind parse_artifact_kind(std::string_view name);

// placement: band start row for stripes (col = phase of the along-row modulation),
// blob centre otherwise. extent: band height, cloud radius, bump FWHM, or bump sigma.
struct ArtifactSpec {
  ArtifactKind kind = ArtifactKind::stripe;
  double amplitude_ppb = 1.0;
  Pixel placement;
  int extent_px = 1;

  void validate() const;
  friend bool operator==(const ArtifactSpec&, const ArtifactSpec&) = default;
};

struct PlumeLabel {
  BinaryMask mask;
  Pixel source;
  double emission_rate_tph = 0.0;
};

// Thrown by inject_plume when a placement violates a constraint; callers resample.
class PlacementRejected : public Error {
 public:
  using Error::Error;
};

// Randomized plume placement used by generate_scene on top of the explicit specs.
struct PlumeSampling {
  int count = 0;
  double q_min = kEmissionRateMin;
  double q_max = kEmissionRateMax;
  double wind_speed_min = 2.0;
  double wind_speed_max = 5.0;
  double spread_a = 0.08;
  double spread_b = 0.9;
  double downwind_min_m = std::numeric_limits<double>::infinity();
  double downwind_max_m = std::numeric_limits<double>::infinity();
  double min_peak_snr = 5.0;  // source-pixel enhancement / noise_std
  int edge_margin_px = 16;    // sampled labels keep this distance from the scene edge
  int separation_px = 16;     // and from other labels' bounding boxes
};

// Randomized artifacts; amplitudes are in units of noise_std.
struct ArtifactSampling {
  int stripes = 0;
  int cloud_patches = 0;
  int small_enhancements = 0;
  int dispersed_enhancements = 0;
  double stripe_snr_min = 3.0, stripe_snr_max = 6.0;
  int stripe_rows_min = 1, stripe_rows_max = 3;
  double cloud_rim_snr_min = 2.0, cloud_rim_snr_max = 4.0;
  int cloud_radius_min = 8, cloud_radius_max = 20;
  double small_snr_min = 5.0, small_snr_max = 10.0;
  int small_fwhm_min = 3, small_fwhm_max = 8;
  double dispersed_snr_min = 0.8, dispersed_snr_max = 1.4;
  int dispersed_sigma_min = 30, dispersed_sigma_max = 60;
};

struct SynthConfig {
  GridGeometry geometry{256, 256};
  double background_mean = 1900.0;
  double noise_std = 35.0;
  double invalid_fraction = 0.0;
  bool with_albedo = true;
  std::vector<PlumeSpec> plumes;
  std::vector<ArtifactSpec> artifacts;
  PlumeSampling plume_sampling;
  ArtifactSampling artifact_sampling;
  std::uint64_t seed = 0;
  int max_placement_retries = kDefaultPlacementRetries;

  void validate() const;
  // Enhancement threshold defining ground-truth masks.
  double label_floor() const;
};

struct SyntheticScene {
  SceneGrid scene;
  std::vector<PlumeLabel> labels;
  std::vector<PlumeSpec> plumes;       // every injected plume, explicit then sampled
  std::vector<ArtifactSpec> artifacts; // every injected artifact, explicit then sampled
};

// Calibration constant K: Q = 1 t/h, u = 3 m/s gives 100 ppb on the centreline at
// 200 m downwind on a 45 m grid with the default spread coefficients.
double plume_calibration_constant();

// Effective crosswind spread (m) at downwind distance x, including pixel averaging.
double effective_sigma(double x_m, double a, double b, double pixel_size_m);

// Enhancement (ppb) at every pixel of the grid.
Grid<double> gaussian_plume_field(const PlumeSpec& spec, const GridGeometry& geometry);

// Same field restricted to the box where it can be nonzero; values are over `box`.
struct LocalField {
  BBox box;
  Grid<double> values;
};
LocalField plume_field_local(const PlumeSpec& spec, const GridGeometry& geometry);

struct Injection {
  SceneGrid scene;
  PlumeLabel label;
};

// Adds the plume at valid pixels. Rejects (PlacementRejected) when the label footprint
// intersects any prior label or is >= 20% invalid, or when the source is below the floor.
Injection inject_plume(const SceneGrid& scene, const PlumeSpec& spec, double label_floor,
                       std::span<const PlumeLabel> prior = {});

SceneGrid inject_artifact(const SceneGrid& scene, const ArtifactSpec& spec);

SyntheticScene generate_scene(const SynthConfig& config);

nlohmann::json labels_to_json(std::span<const PlumeLabel> labels);
std::vector<PlumeLabel> labels_from_json(const nlohmann::json& j);
nlohmann::json artifacts_to_json(std::span<const ArtifactSpec> artifacts);

}  // namespace plumekit
