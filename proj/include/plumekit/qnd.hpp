#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plumekit/raster.hpp"

namespace plumekit {

// Hotspot-core isolation constants.
inline constexpr double kCoreEpsPx = 10.0;
inline constexpr int kCoreMinPts = 25;
inline constexpr double kCorePercentile = 98.0;

inline constexpr int kQndPoints = 100;   // percentiles 1..100
inline constexpr int kQndMinSamples = 30;
inline constexpr double kZScoreCap = 1e6;  // |z| cap when the background has no spread
inline constexpr int kQndFeatureCount = 12;

// Raised when no DBSCAN cluster of the above-percentile pixels reaches min_pts; the
// detection is then treated as artifact-like.
class NoHotspotCore : public Error {
 public:
  using Error::Error;
};

struct CoreParams {
  double eps = kCoreEpsPx;
  int min_pts = kCoreMinPts;
  double percentile = kCorePercentile;
  friend bool operator==(const CoreParams&, const CoreParams&) = default;
};

struct CoreMetrics {
  double contrast = 0.0;   // mu_mask / mu_bkrd
  double z_score = 0.0;    // (mu_mask - mu_bkrd) / sigma_bkrd
  double intensity = 0.0;  // mu_mask - mu_bkrd (ppb)
  double mu_mask = 0.0;
  double mu_bkrd = 0.0;
  double sigma_bkrd = 0.0;
};

struct PlumeCore {
  BinaryMask core;
  CoreMetrics metrics;
};

PlumeCore plume_core(const SceneGrid& scene, const BinaryMask& mask, double eps = kCoreEpsPx,
                     int min_pts = kCoreMinPts, double q = kCorePercentile);

// Core metrics for given core / background samples (population std for sigma_bkrd).
CoreMetrics core_metrics(std::span<const double> core_values, std::span<const double> background_values);

// Linear interpolation between order statistics: position (p/100)·(N−1) in sorted data.
double percentile_sorted(std::span<const double> sorted, double p);

double normal_cdf(double z);

struct QndCurve {
  std::array<double, kQndPoints> d{};  // d[i-1] = D_i
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t n = 0;
};

// D_i = |(1/N)·#{x_j <= x_i} − Φ((x_i − μ)/σ)| with x_i the i-th percentile.
QndCurve qnd_curve(std::span<const double> values);
// Curve used for a constant field (no spread): every D_i = 0.5, the value the formula
// takes with Φ(0/0) read as Φ(0).
QndCurve degenerate_qnd_curve(std::size_t n, double value);

struct PolyFit {
  std::vector<double> coeffs;  // ascending powers of the percentile index i
  double rms = 0.0;
};

// Least squares in t = (i − 50.5)/49.5, converted back to powers of i.
PolyFit fit_poly(std::span<const double> d_values, int degree);
PolyFit fit_poly6(const QndCurve& curve);

double poly_eval(std::span<const double> coeffs, double x);

struct PolyDescriptors {
  double p50 = 0.0;
  double p90 = 0.0;
  double crit_min = 0.0;
  double crit_max = 0.0;
  double crit_mean = 0.0;
  std::vector<double> critical_points;  // interior roots of the derivative in [1, 99]
};

// Derivative roots by sign bracketing on a 0.01 grid over [1, 99] plus bisection to
// 1e-8; descriptors are polynomial values there, or at {1, 99} when there are none.
PolyDescriptors poly_descriptors(std::span<const double> coeffs);

using QndFeatures = std::array<double, kQndFeatureCount>;

const std::array<std::string, kQndFeatureCount>& qnd_feature_names();

// Fixed order: contrast, z_score, intensity, qnd_ch4_p50, qnd_alb_p50, qnd_alb_p90,
// ch4_crit_{min,max,mean}, alb_crit_{min,max,mean}. Without albedo (or with a constant
// albedo inside the mask) the albedo curve is the degenerate constant-0.5 curve.
QndFeatures extract_features(const SceneGrid& scene, const BinaryMask& mask, const CoreParams& core = {});

}  // namespace plumekit
