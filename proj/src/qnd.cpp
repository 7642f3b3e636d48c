#include "plumekit/qnd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "plumekit/dbscan.hpp"

namespace plumekit {

namespace {

constexpr double kStdFloor = 1e-12;
constexpr double kTCentre = 50.5;
constexpr double kTHalfWidth = 49.5;

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error("percentile: empty input");
  const double pos = (p / 100.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

CoreMetrics core_metrics(std::span<const double> core_values, std::span<const double> background_values) {
  if (core_values.empty()) throw NoHotspotCore("plume_core: empty core");
  if (background_values.empty()) throw NoHotspotCore("plume_core: no background pixels outside the core");
  CoreMetrics m;
  m.mu_mask = mean_of(core_values);
  m.mu_bkrd = mean_of(background_values);
  m.sigma_bkrd = population_std(background_values, m.mu_bkrd);
  if (std::abs(m.mu_bkrd) < kStdFloor) throw Error("plume_core: background mean is zero");
  m.contrast = m.mu_mask / m.mu_bkrd;
  m.intensity = m.mu_mask - m.mu_bkrd;
  if (m.sigma_bkrd < kStdFloor)
    m.z_score = m.intensity > 0 ? kZScoreCap : (m.intensity < 0 ? -kZScoreCap : 0.0);
  else
    m.z_score = std::clamp(m.intensity / m.sigma_bkrd, -kZScoreCap, kZScoreCap);
  return m;
}

PlumeCore plume_core(const SceneGrid& scene, const BinaryMask& mask, double eps, int min_pts, double q) {
  if (mask.empty()) throw Error("plume_core: empty mask");
  if (!mask.bbox().inside(scene.geometry)) throw Error("plume_core: mask outside scene");
  if (mask.area() < static_cast<std::size_t>(min_pts)) throw NoHotspotCore("plume_core: mask smaller than min_pts");

  std::vector<Pixel> px;
  std::vector<double> vals;
  for (const auto& p : mask.pixels())
    if (scene.valid(p.row, p.col)) {
      px.push_back(p);
      vals.push_back(scene.xch4(p.row, p.col));
    }
  if (vals.empty()) throw NoHotspotCore("plume_core: no valid pixel in mask");
  std::vector<double> sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  const double thr = percentile_sorted(sorted, q);

  std::vector<std::size_t> hot;
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < px.size(); ++i)
    if (vals[i] >= thr) {
      hot.push_back(i);
      pts.push_back({static_cast<double>(px[i].col), static_cast<double>(px[i].row)});
    }
  const auto clusters = dbscan(pts, eps, min_pts);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(clusters.cluster_count), 0);
  for (int l : clusters.labels)
    if (l != kNoise) ++sizes[static_cast<std::size_t>(l)];
  int best = -1;
  for (int c = 0; c < clusters.cluster_count; ++c)
    if (sizes[c] >= static_cast<std::size_t>(min_pts) && (best < 0 || sizes[c] > sizes[best])) best = c;
  if (best < 0) throw NoHotspotCore("no hotspot core");

  std::vector<std::uint8_t> in_core(px.size(), 0);
  std::vector<Pixel> core_px;
  std::vector<double> core_vals, bkrd_vals;
  for (std::size_t k = 0; k < hot.size(); ++k)
    if (clusters.labels[k] == best) {
      in_core[hot[k]] = 1;
      core_px.push_back(px[hot[k]]);
      core_vals.push_back(vals[hot[k]]);
    }
  for (std::size_t i = 0; i < px.size(); ++i)
    if (!in_core[i]) bkrd_vals.push_back(vals[i]);

  return {BinaryMask::from_pixels(core_px), core_metrics(core_vals, bkrd_vals)};
}

QndCurve qnd_curve(std::span<const double> values) {
  if (values.size() < static_cast<std::size_t>(kQndMinSamples)) throw Error("qnd_curve: need at least 30 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  QndCurve c;
  c.n = sorted.size();
  c.mu = mean_of(sorted);
  c.sigma = population_std(sorted, c.mu);
  if (!(c.sigma > kStdFloor)) throw Error("qnd_curve: degenerate distribution");
  const double n = static_cast<double>(c.n);
  for (int i = 1; i <= kQndPoints; ++i) {
    const double x = percentile_sorted(sorted, i);
    const auto le = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
    c.d[i - 1] = std::abs(static_cast<double>(le) / n - normal_cdf((x - c.mu) / c.sigma));
  }
  return c;
}

QndCurve degenerate_qnd_curve(std::size_t n, double value) {
  QndCurve c;
  c.n = n;
  c.mu = value;
  c.sigma = 0.0;
  c.d.fill(0.5);
  return c;
}

PolyFit fit_poly(std::span<const double> d_values, int degree) {
  if (degree < 0) throw Error("fit_poly: negative degree");
  const int n = static_cast<int>(d_values.size());
  if (n < degree + 1) throw Error("fit_poly: too few points");
  Eigen::MatrixXd a(n, degree + 1);
  Eigen::VectorXd y(n);
  for (int r = 0; r < n; ++r) {
    const double t = (static_cast<double>(r + 1) - kTCentre) / kTHalfWidth;
    double tk = 1.0;
    for (int k = 0; k <= degree; ++k, tk *= t) a(r, k) = tk;
    y(r) = d_values[static_cast<std::size_t>(r)];
  }
  const Eigen::VectorXd ct = a.colPivHouseholderQr().solve(y);

  PolyFit fit;
  fit.rms = std::sqrt((a * ct - y).squaredNorm() / n);
  // Expand sum_k ct_k (alpha·i + beta)^k in powers of i.
  const double alpha = 1.0 / kTHalfWidth, beta = -kTCentre / kTHalfWidth;
  fit.coeffs.assign(static_cast<std::size_t>(degree + 1), 0.0);
  for (int k = 0; k <= degree; ++k) {
    double c_kj = 1.0;  // C(k, j)
    for (int j = 0; j <= k; ++j) {
      fit.coeffs[static_cast<std::size_t>(j)] += ct(k) * c_kj * std::pow(alpha, j) * std::pow(beta, k - j);
      c_kj = c_kj * (k - j) / (j + 1);
    }
  }
  return fit;
}

PolyFit fit_poly6(const QndCurve& curve) { return fit_poly(curve.d, 6); }

double poly_eval(std::span<const double> coeffs, double x) {
  double v = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * x + *it;
  return v;
}

PolyDescriptors poly_descriptors(std::span<const double> coeffs) {
  if (coeffs.empty()) throw Error("poly_descriptors: no coefficients");
  std::vector<double> deriv;
  for (std::size_t k = 1; k < coeffs.size(); ++k) deriv.push_back(static_cast<double>(k) * coeffs[k]);
  const bool flat = std::all_of(deriv.begin(), deriv.end(), [](double c) { return c == 0.0; });

  PolyDescriptors out;
  out.p50 = poly_eval(coeffs, 50.0);
  out.p90 = poly_eval(coeffs, 90.0);
  if (!flat) {
    constexpr int kSteps = 9800;  // 0.01 grid over [1, 99]
    auto xs = [](int j) { return 1.0 + j / 100.0; };
    double prev = poly_eval(deriv, xs(0));
    if (prev == 0.0) out.critical_points.push_back(xs(0));
    for (int j = 1; j <= kSteps; ++j) {
      const double cur = poly_eval(deriv, xs(j));
      if (cur == 0.0) {
        out.critical_points.push_back(xs(j));
      } else if (prev != 0.0 && (prev < 0.0) != (cur < 0.0)) {
        double lo = xs(j - 1), hi = xs(j), flo = prev;
        while (hi - lo > 1e-8) {
          const double mid = 0.5 * (lo + hi);
          const double fm = poly_eval(deriv, mid);
          if (fm == 0.0) {
            lo = hi = mid;
            break;
          }
          if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        out.critical_points.push_back(0.5 * (lo + hi));
      }
      prev = cur;
    }
  }
  const std::vector<double> at = out.critical_points.empty() ? std::vector<double>{1.0, 99.0} : out.critical_points;
  out.crit_min = std::numeric_limits<double>::infinity();
  out.crit_max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (double x : at) {
    const double v = poly_eval(coeffs, x);
    out.crit_min = std::min(out.crit_min, v);
    out.crit_max = std::max(out.crit_max, v);
    sum += v;
  }
  out.crit_mean = sum / static_cast<double>(at.size());
  return out;
}

const std::array<std::string, kQndFeatureCount>& qnd_feature_names() {
  static const std::array<std::string, kQndFeatureCount> names = {
      "contrast",     "z_score",      "intensity",     "qnd_ch4_p50",  "qnd_alb_p50",  "qnd_alb_p90",
      "ch4_crit_min", "ch4_crit_max", "ch4_crit_mean", "alb_crit_min", "alb_crit_max", "alb_crit_mean"};
  return names;
}

QndFeatures extract_features(const SceneGrid& scene, const BinaryMask& mask, const CoreParams& params) {
  const PlumeCore core = plume_core(scene, mask, params.eps, params.min_pts, params.percentile);
  std::vector<double> ch4, alb;
  for (const auto& p : mask.pixels()) {
    if (!scene.valid(p.row, p.col)) continue;
    ch4.push_back(scene.xch4(p.row, p.col));
    if (scene.albedo) alb.push_back((*scene.albedo)(p.row, p.col));
  }
  const QndCurve ch4_curve = qnd_curve(ch4);
  QndCurve alb_curve = degenerate_qnd_curve(ch4.size(), 0.5);
  if (!alb.empty()) {
    const double m = mean_of(alb);
    if (population_std(alb, m) > kStdFloor) alb_curve = qnd_curve(alb);
  }
  const auto ch4_d = poly_descriptors(fit_poly6(ch4_curve).coeffs);
  const auto alb_d = poly_descriptors(fit_poly6(alb_curve).coeffs);

  const auto& m = core.metrics;
  return {m.contrast,       m.z_score,        m.intensity,      ch4_d.p50,        alb_d.p50,        alb_d.p90,
          ch4_d.crit_min,   ch4_d.crit_max,   ch4_d.crit_mean,  alb_d.crit_min,   alb_d.crit_max,   alb_d.crit_mean};
}

}  // namespace plumekit
