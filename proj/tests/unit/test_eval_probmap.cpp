#include <cmath>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "plumekit/eval.hpp"
#include "plumekit/probmap.hpp"
#include "support/tempdir.hpp"

using namespace plumekit;

namespace {

BinaryMask block(int r0, int c0, int rows, int cols) {
  std::vector<Pixel> px;
  for (int r = r0; r < r0 + rows; ++r)
    for (int c = c0; c < c0 + cols; ++c) px.push_back({r, c});
  return BinaryMask::from_pixels(px);
}

// Soft value `centre` at the middle of a 3x3 box whose other pixels are 1, so the hard
// mask (and with it the stored soft box) spans the whole box.
Instance soft_det(const BBox& box, double centre, double score) {
  Grid<double> soft(3, 3, 1.0);
  soft(1, 1) = centre;
  return make_instance(box, soft, score);
}

}  // namespace

TEST_CASE("aggregate: weighted mean of soft values") {
  const GridGeometry g{10, 10};
  const BBox box{2, 2, 3, 3};
  CHECK(aggregate({soft_det(box, 0.4, 0.7)}, g).p(3, 3) == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(aggregate({soft_det(box, 0.8, 0.5), soft_det(box, 0.4, 0.5)}, g).p(3, 3) == doctest::Approx(0.6));
  CHECK(aggregate({soft_det(box, 1.0, 0.9), soft_det(box, 0.0, 0.1)}, g).p(3, 3) == doctest::Approx(0.9));

  const auto far = aggregate({soft_det(box, 1.0, 0.9)}, g);
  CHECK(far.p(0, 0) == 0.0);
  CHECK(aggregate({soft_det(box, 1.0, 0.0)}, g).p(3, 3) == 0.0);  // score 0 is skipped
  CHECK_THROWS_AS(aggregate({soft_det(BBox{8, 8, 3, 3}, 1.0, 0.9)}, g), Error);
}

TEST_CASE("aggregate equals the per-pixel reference") {
  const GridGeometry g{20, 16};
  Grid<double> s1(4, 5, 0.0), s2(6, 3, 0.0);
  for (int i = 0; i < 20; ++i) s1.data()[i] = (i % 7) / 6.0;
  for (int i = 0; i < 18; ++i) s2.data()[i] = (i % 5) / 4.0;
  const std::vector<Instance> d{make_instance(BBox{2, 3, 4, 5}, s1, 0.9), make_instance(BBox{3, 5, 6, 3}, s2, 0.35)};
  const auto got = aggregate(d, g);
  const auto ref = oracle::probability_map(d, g);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(got.p.data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-12));
}

TEST_CASE("correlation report") {
  auto scene = SceneGrid::filled(GridGeometry{1, 10}, 1900.0f);
  ProbabilityGrid prob{scene.geometry, Grid<double>(10, 1, 0.0)};
  const double x[10] = {1900, 1910, 1905, 1950, 1930, 1925, 1990, 1960, 1940, 1920};
  for (int i = 0; i < 10; ++i) {
    scene.xch4(i, 0) = static_cast<float>(x[i]);
    prob.p(i, 0) = (x[i] - 1900.0) / 90.0 + (i == 0 ? 1e-3 : 0.0);
  }
  // Pixel 0 carries a tiny positive probability so all ten enter the report.
  const auto rep = correlation_report(prob, scene);
  CHECK(rep.n == 10);
  CHECK(rep.spearman == doctest::Approx(1.0));
  CHECK(rep.pearson > 0.999);

  for (int i = 0; i < 10; ++i) prob.p(i, 0) = 1.0 - (x[i] - 1900.0) / 100.0;
  CHECK(correlation_report(prob, scene).spearman == doctest::Approx(-1.0));

  // Hand case with ties: ranks by average.
  CHECK(average_ranks({3.0, 1.0, 3.0, 2.0}) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
  CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(pearson({1, 1, 1}, {1, 2, 3}), doctest::Contains("undefined correlation"), Error);
}

TEST_CASE("PGRID and PNG output") {
  testing::TempDir dir;
  ProbabilityGrid prob{GridGeometry{3, 2}, Grid<double>(2, 3, 0.25)};
  prob.p(1, 2) = 1.0;
  save_probmap(prob, dir.path() / "p.pgrid");
  const auto back = load_probmap(dir.path() / "p.pgrid");
  CHECK(back.geometry == prob.geometry);
  CHECK(back.p == prob.p);
  save_probmap_png(prob, dir.path() / "p.png");
  CHECK(std::filesystem::file_size(dir.path() / "p.png") > 0);
}

TEST_CASE("union_semantic and pixel_metrics") {
  const auto a = block(0, 0, 2, 2), b = block(10, 10, 2, 2), c = block(1, 1, 2, 2);
  CHECK(union_semantic(std::vector<BinaryMask>{a}) == a);
  CHECK(union_semantic(std::vector<BinaryMask>{a, b}).area() == 8);
  CHECK(union_semantic(std::vector<BinaryMask>{a, c}).area() == 7);

  const auto same = pixel_metrics(a, a);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);

  // TP 2, FP 1, FN 1.
  const auto pred = BinaryMask::from_pixels(std::vector<Pixel>{{0, 0}, {0, 1}, {0, 2}});
  const auto truth = BinaryMask::from_pixels(std::vector<Pixel>{{0, 0}, {0, 1}, {1, 0}});
  const auto m = pixel_metrics(pred, truth);
  CHECK(m.tp == 2);
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));

  const auto empty = pixel_metrics(BinaryMask{}, truth);
  CHECK(empty.precision == 1.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);
  CHECK(pixel_metrics(BinaryMask{}, BinaryMask{}).f1 == 1.0);
}

TEST_CASE("greedy matching") {
  const auto truth = block(0, 0, 4, 4);
  const auto cover = match_masks({block(0, 0, 5, 5)}, {0.9}, {truth}, 0.1);
  REQUIRE(cover.pairs.size() == 1);
  CHECK(cover.pairs[0].iou == doctest::Approx(16.0 / 25.0));

  const auto two = match_masks({block(0, 0, 4, 3), block(0, 1, 4, 3)}, {0.8, 0.9}, {truth}, 0.1);
  REQUIRE(two.pairs.size() == 1);
  CHECK(two.pairs[0].pred == 1);
  CHECK(two.unmatched_preds == std::vector<int>{0});

  CHECK(match_masks({block(0, 0, 1, 1)}, {0.9}, {truth}, 0.1).pairs.empty());  // IoU 1/16 < 0.1
  CHECK_THROWS_AS(match_masks({}, {}, {truth}, 1.0), Error);
}

TEST_CASE("instance metrics") {
  MatchResult m;
  m.pairs = {{0, 0, 0.5}, {1, 1, 0.5}, {2, 2, 0.5}};
  m.unmatched_preds = {3};
  m.unmatched_truths = {3};
  m.n_preds = 4;
  m.n_truths = 4;
  const auto r = instance_metrics(m);
  CHECK(r.precision == 0.75);
  CHECK(r.recall == 0.75);
  CHECK(r.f1 == doctest::Approx(0.75));

  MatchResult none;
  none.unmatched_truths = {0, 1};
  none.n_truths = 2;
  const auto z = instance_metrics(none);
  CHECK(z.precision == 1.0);
  CHECK(z.recall == 0.0);
  CHECK(z.f1 == 0.0);
  CHECK(f1_score(0.0, 1.0) == 0.0);
  CHECK(f1_score(0.3, 0.6) == f1_score(0.6, 0.3));
}

TEST_CASE("mAP") {
  const auto t = block(0, 0, 3, 3);
  CHECK(map_at_iou({t}, {0.9}, {t}, 0.1) == 1.0);
  CHECK(map_at_iou({block(20, 20, 3, 3)}, {0.9}, {t}, 0.1) == 0.0);
  CHECK_THROWS_AS(map_at_iou({t}, {0.9}, {}, 0.1), Error);

  // Five detections, three hits interleaved with two misses by score.
  const std::vector<BinaryMask> truths{block(0, 0, 3, 3), block(10, 0, 3, 3), block(20, 0, 3, 3)};
  const std::vector<BinaryMask> preds{block(0, 0, 3, 3), block(40, 0, 3, 3), block(10, 0, 3, 3),
                                      block(50, 0, 3, 3), block(20, 0, 3, 3)};
  const std::vector<double> scores{0.9, 0.8, 0.7, 0.6, 0.5};
  CHECK(std::abs(map_at_iou(preds, scores, truths, 0.1) - 34.0 / 45.0) < 1e-12);
}

TEST_CASE("sweep grids and CSV") {
  CHECK(parse_grid("0:1:0.25") == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(parse_grid("0.1,0.5") == std::vector<double>{0.1, 0.5});
  CHECK(parse_grid("0:1:0.05").size() == 21);
  CHECK_THROWS_AS(parse_grid("1:0:0.1"), Error);
  CHECK_THROWS_AS(parse_sweep_param("gamma"), Error);
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0) == "1.0");

  const auto scene = SceneGrid::filled(GridGeometry{64, 64}, 1900.0f);
  const std::vector<BinaryMask> truths{block(0, 0, 8, 8)};
  std::vector<Instance> dets{make_instance(block(0, 0, 8, 10), 0.95), make_instance(block(30, 30, 5, 5), 0.5)};
  dets[1].id = 1;
  PipelineConfig cfg;

  const auto taus = sweep(dets, truths, scene, cfg, 0.1, SweepParam::tau, {0.0, 1.0});
  CHECK(taus[0].report.fp >= taus[1].report.fp);

  const std::vector<Instance> single{dets[0]};
  const auto deltas = sweep(single, truths, scene, cfg, 0.1, SweepParam::delta, {0.05, 0.3, 0.6});
  for (const auto& row : deltas) CHECK(report_to_json(row.report)["TP"] == report_to_json(deltas[0].report)["TP"]);

  const auto thetas = sweep(dets, truths, scene, cfg, 0.1, SweepParam::theta, {0.1, 0.9});
  CHECK(thetas[0].report.tp >= thetas[1].report.tp);
  CHECK(thetas[1].report.tp == 0);  // IoU 0.8

  const auto csv = sweep_csv(thetas);
  CHECK(csv.rfind("param,value,TP,FP,FN,precision,recall,f1,map\n", 0) == 0);
  CHECK(csv.find("theta,0.1,1,0,0,") != std::string::npos);
}
