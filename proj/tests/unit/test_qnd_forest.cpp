#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "plumekit/dbscan.hpp"
#include "plumekit/forest.hpp"
#include "plumekit/qnd.hpp"
#include "support/tempdir.hpp"

using namespace plumekit;

namespace {

// 50x50 mask whose top-left 10x10 block is the hotspot; `rim(i)` gives the value of the
// i-th non-core pixel in row-major order.
template <typename Rim>
std::pair<SceneGrid, BinaryMask> core_scene(double core_value, Rim rim) {
  auto scene = SceneGrid::filled(GridGeometry{60, 60}, 1900.0f);
  std::vector<Pixel> px;
  int k = 0;
  for (int r = 5; r < 55; ++r)
    for (int c = 5; c < 55; ++c) {
      px.push_back({r, c});
      const bool core = r < 15 && c < 15;
      scene.xch4(r, c) = static_cast<float>(core ? core_value : rim(k++));
    }
  return {scene, BinaryMask::from_pixels(px)};
}

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

struct Blobs {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

Blobs separable_blobs(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Blobs b;
  for (int i = 0; i < n; ++i) {
    const int cls = i % 2;
    const double centre = cls ? 2.5 : -2.5;  // 5 sigma apart
    b.x.push_back({centre + noise(rng), noise(rng)});
    b.y.push_back(cls);
  }
  return b;
}

RandomForestModel constant_forest(std::vector<double> leaf_probs) {
  RandomForestModel m;
  for (double p : leaf_probs) {
    DecisionTree t;
    TreeNode leaf;
    leaf.p_plume = p;
    t.nodes.push_back(leaf);
    m.trees.push_back(t);
  }
  m.feature_names = {"a", "b"};
  return m;
}

}  // namespace

TEST_CASE("dbscan: hand case and reference") {
  std::vector<Point2> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({static_cast<double>(i), 0.0});
  for (int i = 0; i < 5; ++i) pts.push_back({100.0 + i, 0.0});
  pts.push_back({50.0, 50.0});
  const auto r = dbscan(pts, 1.0, 3);
  CHECK(r.cluster_count == 2);
  CHECK(r.labels[0] == 0);
  CHECK(r.labels[0] == r.labels[4]);
  CHECK(r.labels[5] == 1);
  CHECK(r.labels[10] == kNoise);
  CHECK_FALSE(r.core[0]);  // endpoints see only two points
  CHECK(r.core[1]);
  const auto ref = oracle::brute_dbscan(pts, 1.0, 3);
  CHECK(r.labels == ref.labels);
  CHECK(r.core == ref.core);
  CHECK(dbscan({}, 1.0, 3).cluster_count == 0);
  CHECK_THROWS_AS(dbscan(pts, 0.0, 3), Error);
}

TEST_CASE("plume_core: contrast and intensity") {
  const auto [scene, mask] = core_scene(3000.0, [](int) { return 1500.0; });
  const auto core = plume_core(scene, mask);
  CHECK(core.core.area() == 100);
  CHECK(core.metrics.contrast == doctest::Approx(2.0));
  CHECK(core.metrics.intensity == doctest::Approx(1500.0));
  CHECK(core.metrics.intensity == core.metrics.mu_mask - core.metrics.mu_bkrd);
}

TEST_CASE("plume_core: z-score") {
  const auto [scene, mask] = core_scene(2000.0, [](int k) { return k % 2 ? 1950.0 : 1850.0; });
  const auto core = plume_core(scene, mask);
  CHECK(core.metrics.mu_bkrd == doctest::Approx(1900.0));
  CHECK(core.metrics.sigma_bkrd == doctest::Approx(50.0));
  CHECK(core.metrics.z_score == doctest::Approx(2.0));
}

TEST_CASE("plume_core: no dense hotspot") {
  // Hot pixels (4% of the mask) on a 5-px lattice: at most 13 fall within eps of any one.
  auto scene = SceneGrid::filled(GridGeometry{100, 100}, 1900.0f);
  std::vector<Pixel> px;
  for (int r = 0; r < 100; ++r)
    for (int c = 0; c < 100; ++c) {
      px.push_back({r, c});
      if (r % 5 == 0 && c % 5 == 0) scene.xch4(r, c) = 5000.0f;
    }
  CHECK_THROWS_WITH_AS(plume_core(scene, BinaryMask::from_pixels(px)), "no hotspot core", NoHotspotCore);
}

TEST_CASE("percentile and normal CDF") {
  const std::vector<double> v{1, 2, 3, 4, 5};
  CHECK(percentile_sorted(v, 50) == 3.0);
  CHECK(percentile_sorted(v, 10) == doctest::Approx(1.4));
  CHECK(percentile_sorted(v, 100) == 5.0);
  CHECK(normal_cdf(0.0) == 0.5);
  for (double p : {0.001, 0.1, 0.5, 0.8, 0.999}) CHECK(std::abs(normal_cdf(oracle::normal_quantile(p)) - p) < 1e-10);
}

TEST_CASE("qnd_curve: ideal Gaussian sample and uniform closed form") {
  const int n = 10000;
  std::vector<double> g;
  for (int j = 1; j <= n; ++j) g.push_back(oracle::normal_quantile((j - 0.5) / n));
  const auto curve = qnd_curve(g);
  double worst = 0.0;
  for (double d : curve.d) worst = std::max(worst, d);
  CHECK(worst < 0.01);

  std::vector<double> u;
  for (int j = 0; j < n; ++j) u.push_back((j + 0.5) / n);
  const auto uc = qnd_curve(u);
  const double closed = std::abs(0.84 - normal_cdf((0.84 - 0.5) * std::sqrt(12.0)));
  CHECK(uc.d[83] == doctest::Approx(closed).epsilon(1e-3));
  CHECK(std::abs(uc.d[83] - 0.040) <= 0.005);

  CHECK_THROWS_WITH_AS(qnd_curve(std::vector<double>(50, 1.0)), doctest::Contains("degenerate distribution"), Error);
  CHECK_THROWS_AS(qnd_curve(std::vector<double>(10, 1.0)), Error);
  for (double d : degenerate_qnd_curve(40, 3.0).d) CHECK(d == 0.5);
}

TEST_CASE("fit_poly6 reproduces polynomials") {
  QndCurve c;
  for (int i = 1; i <= kQndPoints; ++i) c.d[i - 1] = 0.02 + 0.001 * (i - 30.0) * (i - 30.0);
  const auto fit = fit_poly6(c);
  REQUIRE(fit.coeffs.size() == 7);
  CHECK(std::abs(fit.coeffs[0] - 0.92) < 1e-8);
  CHECK(std::abs(fit.coeffs[1] + 0.06) < 1e-8);
  CHECK(std::abs(fit.coeffs[2] - 0.001) < 1e-8);
  for (int k = 3; k <= 6; ++k) CHECK(std::abs(fit.coeffs[k]) < 1e-8);
  CHECK(fit.rms < 1e-10);

  QndCurve zero;
  for (double v : fit_poly6(zero).coeffs) CHECK(v == 0.0);
}

TEST_CASE("poly_descriptors") {
  SUBCASE("single interior critical point") {
    const std::vector<double> p{2500.0, -100.0, 1.0};  // (i - 50)^2
    const auto d = poly_descriptors(p);
    REQUIRE(d.critical_points.size() == 1);
    CHECK(d.critical_points[0] == doctest::Approx(50.0).epsilon(1e-9));
    CHECK(d.crit_min == doctest::Approx(0.0));
    CHECK(d.crit_max == d.crit_min);
    CHECK(d.crit_mean == d.crit_min);
    CHECK(d.p50 == doctest::Approx(0.0));
    CHECK(d.p90 == doctest::Approx(1600.0));
  }
  SUBCASE("monotone polynomial falls back to the endpoints") {
    const std::vector<double> p{0.1, 0.01};
    const auto d = poly_descriptors(p);
    CHECK(d.critical_points.empty());
    CHECK(d.crit_min == doctest::Approx(0.11));
    CHECK(d.crit_max == doctest::Approx(1.09));
    CHECK(d.crit_mean == doctest::Approx(0.6));
  }
  SUBCASE("degree 6 with derivative roots 20, 50, 80") {
    // p'(x) = s·(x-20)(x-50)(x-80)(x^2+1); integrate term by term.
    auto deriv = poly_mul(poly_mul(poly_mul({-20.0, 1.0}, {-50.0, 1.0}), {-80.0, 1.0}), {1.0, 0.0, 1.0});
    std::vector<double> p{0.0};
    for (std::size_t k = 0; k < deriv.size(); ++k) p.push_back(1e-10 * deriv[k] / static_cast<double>(k + 1));
    REQUIRE(p.size() == 7);
    const auto d = poly_descriptors(p);
    REQUIRE(d.critical_points.size() == 3);
    CHECK(d.critical_points[0] == doctest::Approx(20.0).epsilon(1e-7));
    CHECK(d.critical_points[1] == doctest::Approx(50.0).epsilon(1e-7));
    CHECK(d.critical_points[2] == doctest::Approx(80.0).epsilon(1e-7));
    const double v20 = poly_eval(p, 20.0), v50 = poly_eval(p, 50.0), v80 = poly_eval(p, 80.0);
    CHECK(d.crit_min == doctest::Approx(std::min({v20, v50, v80})));
    CHECK(d.crit_max == doctest::Approx(std::max({v20, v50, v80})));
    CHECK(d.crit_mean == doctest::Approx((v20 + v50 + v80) / 3.0));
    CHECK(d.p50 == doctest::Approx(v50));
  }
}

TEST_CASE("fit_poly agrees with an SVD least-squares reference") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  std::vector<double> xs, ys;
  for (int i = 1; i <= kQndPoints; ++i) {
    xs.push_back(i);
    ys.push_back(u(rng));
  }
  const auto fit = fit_poly(ys, 6);
  const auto ref = oracle::svd_polyfit(xs, ys, 6);
  CHECK(fit.rms == doctest::Approx(ref.rms).epsilon(1e-6));
  for (double x = 1.0; x <= 100.0; x += 1.0)
    CHECK(poly_eval(fit.coeffs, x) == doctest::Approx(poly_eval(ref.coeffs, x)).epsilon(1e-6));
}

TEST_CASE("extract_features is deterministic and stable without albedo") {
  const auto [scene, mask] = core_scene(2100.0, [](int k) { return 1880.0 + (k * 37 % 41); });
  const auto a = extract_features(scene, mask);
  const auto b = extract_features(scene, mask);
  CHECK(a == b);
  CHECK(qnd_feature_names().size() == 12);
  CHECK(qnd_feature_names()[0] == "contrast");
  for (double v : a) CHECK(std::isfinite(v));

  auto no_albedo = scene;
  no_albedo.albedo.reset();
  const auto c = extract_features(no_albedo, mask);
  CHECK(c[4] == doctest::Approx(0.5));  // degenerate albedo curve
}

TEST_CASE("rf_train: separable blobs") {
  const auto b = separable_blobs(200, 1);
  RfParams params;
  params.n_trees = 50;
  params.seed = 11;
  const auto model = rf_train(b.x, b.y, params);
  int correct = 0;
  for (std::size_t i = 0; i < b.x.size(); ++i)
    correct += static_cast<int>(rf_predict(model, b.x[i]).cls) == b.y[i];
  CHECK(correct == 200);
  CHECK(model.oob_accuracy >= 0.95);

  CHECK(rf_train(b.x, b.y, params) == model);

  // Duplicating every row leaves predictions on probe points unchanged.
  auto x2 = b.x;
  auto y2 = b.y;
  x2.insert(x2.end(), b.x.begin(), b.x.end());
  y2.insert(y2.end(), b.y.begin(), b.y.end());
  const auto dup = rf_train(x2, y2, params);
  for (double px = -4.0; px <= 4.0; px += 1.0)
    if (std::abs(px) >= 1.0) {
      const std::vector<double> probe{px, 0.3};
      CHECK(rf_predict(dup, probe).cls == rf_predict(model, probe).cls);
    }
}

TEST_CASE("rf_train: a single stump cannot solve XOR") {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 400; ++i) {
    const double a = u(rng), c = u(rng);
    x.push_back({a, c});
    y.push_back((a > 0) != (c > 0));
  }
  RfParams params;
  params.n_trees = 1;
  params.max_depth = 1;
  const auto model = rf_train(x, y, params);
  int correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) correct += static_cast<int>(rf_predict(model, x[i]).cls) == y[i];
  CHECK(correct <= 300);
}

TEST_CASE("rf_predict: vote rules and errors") {
  const std::vector<double> x{0.0, 0.0};
  const auto all = rf_predict(constant_forest({1.0, 1.0, 1.0}), x);
  CHECK(all.probability == 1.0);
  CHECK(all.cls == QndClass::plume);
  const auto tie = rf_predict(constant_forest({1.0, 0.0}), x);
  CHECK(tie.probability == 0.5);
  CHECK(tie.cls == QndClass::artifact);
  CHECK_THROWS_AS(rf_predict(constant_forest({1.0}), std::vector<double>{1.0}), Error);

  const auto b = separable_blobs(20, 2);
  CHECK_THROWS_WITH_AS(rf_train(b.x, std::vector<int>(20, 1), RfParams{}), doctest::Contains("single-class"), Error);
}

TEST_CASE("forest model file roundtrip") {
  testing::TempDir dir;
  const auto b = separable_blobs(60, 4);
  RfParams params;
  params.n_trees = 5;
  const auto model = rf_train(b.x, b.y, params, {"f0", "f1"});
  save_model(model, dir.path() / "m.json");
  CHECK(load_model(dir.path() / "m.json") == model);
  CHECK_THROWS_WITH_AS(load_model(dir.path() / "none.json"), doctest::Contains("none.json"), Error);
}
