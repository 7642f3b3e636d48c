// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/oracles.hpp"
#include "plumekit/cli.hpp"
#include "plumekit/config.hpp"
#include "plumekit/dbscan.hpp"
#include "plumekit/eval.hpp"
#include "plumekit/forest.hpp"
#include "plumekit/io.hpp"
#include "plumekit/morphology.hpp"
#include "plumekit/postproc.hpp"
#include "plumekit/probmap.hpp"
#include "plumekit/qnd.hpp"
#include "plumekit/synthgen.hpp"
#include "plumekit/tiler.hpp"
#include "support/benchmark.hpp"
#include "support/generators.hpp"
#include "support/tempdir.hpp"

using namespace plumekit;
using namespace plumekit::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed conditions; the detail line lists measured values either way.
class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      failures_.push_back(what);
    }
  }
  void note(const std::string& s) { notes_.push_back(s); }
  Outcome outcome() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < notes_.size(); ++i) os << (i ? "; " : "") << notes_[i];
    if (!failures_.empty()) {
      os << " | failed:";
      for (const auto& f : failures_) os << " [" << f << "]";
    }
    return {pass_, os.str()};
  }

 private:
  bool pass_ = true;
  std::vector<std::string> notes_, failures_;
};

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

BinaryMask block(int r0, int c0, int rows, int cols) {
  std::vector<Pixel> px;
  for (int r = r0; r < r0 + rows; ++r)
    for (int c = c0; c < c0 + cols; ++c) px.push_back({r, c});
  return BinaryMask::from_pixels(px);
}

Instance det(int id, double score, const BinaryMask& m) {
  auto d = make_instance(m, score);
  d.id = id;
  return d;
}

std::vector<oracle::PixelSet> sets_of(const std::vector<BinaryMask>& masks) {
  std::vector<oracle::PixelSet> out;
  for (const auto& m : masks) out.push_back(oracle::pixel_set(m));
  return out;
}

// ---------------------------------------------------------------------------------------

Outcome operating_point() {
  Check ck;
  const ToolkitConfig c;
  const auto j = config_to_json(c);
  ck.require(j["pipeline.tau"] == 0.8, "tau");
  ck.require(j["pipeline.delta"] == 0.2, "delta");
  ck.require(j["pipeline.theta"] == 0.1, "theta");
  ck.require(j["tiler.overlap"] == 0.75, "overlap");
  ck.require(j["pipeline.fiber_ratio"] == 1.25, "fiber ratio");
  ck.require(kDefaultSizeFloor == 1500.0, "size floor");
  ck.require(j["qnd.eps"] == 10.0, "dbscan eps");
  ck.require(j["qnd.min_pts"] == 25, "dbscan min_pts");
  ck.require(j["qnd.percentile"] == 98.0, "core percentile");
  ck.note("tau=" + j["pipeline.tau"].dump() + " delta=" + j["pipeline.delta"].dump() + " theta=" +
          j["pipeline.theta"].dump() + " alpha=" + j["tiler.overlap"].dump() + " fiber=" +
          j["pipeline.fiber_ratio"].dump() + " floor=" + num(kDefaultSizeFloor) + " eps=" + j["qnd.eps"].dump() +
          " min_pts=" + j["qnd.min_pts"].dump() + " pct=" + j["qnd.percentile"].dump());
  return ck.outcome();
}

Outcome probability_map_laws() {
  Check ck;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1002);
  const GridGeometry g{32, 32};
  bool bounded = true, identity = true;
  double worst_scale = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto dets = random_instances(rng, g, uniform_int(rng, 1, 6), 12);
    const auto p = aggregate(dets, g);
    for (double v : p.p.data()) bounded = bounded && v >= 0.0 && v <= 1.0;

    // Scores live in (0,1], so scale by a common factor no larger than 1 / max score.
    double top = 0.0;
    for (const auto& d : dets) top = std::max(top, d.score);
    const double factor = uniform_real(rng, 0.01, 1.0 / top);
    auto scaled = dets;
    for (auto& d : scaled) d.score *= factor;
    const auto ps = aggregate(scaled, g);
    for (std::size_t k = 0; k < p.p.size(); ++k) worst_scale = std::max(worst_scale, std::abs(ps.p.data()[k] - p.p.data()[k]));

    const auto one = aggregate({dets[0]}, g);
    for (int r = 0; r < g.height; ++r)
      for (int col = 0; col < g.width; ++col) identity = identity && one.p(r, col) == dets[0].soft_at(r, col);
  }
  const double secs = seconds_since(t0);
  ck.require(bounded, "P in [0,1]");
  ck.require(identity, "single-detection identity exact");
  ck.require(worst_scale < 1e-12, "score-scale invariance");
  ck.require(secs < 10.0, "runtime < 10 s");
  ck.note("1000 sets, max |dP| under score scaling " + num(worst_scale) + ", identity " + (identity ? "exact" : "broken") +
          ", " + num(secs) + " s");
  return ck.outcome();
}

Outcome morphology() {
  Check ck;
  const double bar = fiber_metrics(block(0, 0, 1, 40)).ratio;
  ck.require(bar >= 0.8 && bar <= 1.1, "1x40 bar ratio in [0.8,1.1]");
  ck.require(!fiber_filter({det(0, 0.9, block(0, 0, 1, 40))}).empty(), "1x40 bar retained");

  std::vector<Pixel> cross;
  const int len = 41;
  for (int i = 0; i < len; ++i) {
    cross.push_back({i, i});
    cross.push_back({i, len - 1 - i});
  }
  std::sort(cross.begin(), cross.end());
  cross.erase(std::unique(cross.begin(), cross.end()), cross.end());
  const auto x = BinaryMask::from_pixels(cross);
  const double xr = fiber_metrics(x).ratio;
  ck.require(xr > 1.25, "crossing diagonals ratio > 1.25");
  ck.require(fiber_filter({det(0, 0.9, x)}).empty(), "crossing diagonals rejected");

  double worst_dev = 0.0;
  for (int length = 10; length <= 200; length += 10)
    worst_dev = std::max(worst_dev, std::abs(fiber_metrics(block(0, 0, 1, length)).fiber_length - (length - 1)));
  ck.require(worst_dev <= 2.0, "bar fiber length within 2 px of L-1");
  // Informational: thinning shortens a 3-pixel-wide bar at both ends.
  const auto thick = skeletonize(block(0, 0, 3, 100));
  ck.note("bar ratio " + num(bar) + ", crossing-diagonals ratio " + num(xr) + ", worst |fiber - (L-1)| over 1xL bars " +
          num(worst_dev) + " px (3x100 bar skeleton: " + std::to_string(thick.area()) + " px)");
  return ck.outcome();
}

Outcome nms_and_merge() {
  Check ck;
  Rng rng(1004);
  const GridGeometry g{60, 60};
  bool idempotent = true;
  for (int i = 0; i < 500; ++i) {
    const auto dets = random_instances(rng, g, uniform_int(rng, 0, 12), 20);
    const double delta = uniform_real(rng, 0.0, 0.6);
    const auto kept = nms(dets, delta);
    const auto again = nms(kept, delta);
    idempotent = idempotent && again.size() == kept.size() && std::equal(kept.begin(), kept.end(), again.begin());
  }
  ck.require(idempotent, "NMS idempotent on 500 sets");

  const auto a = block(0, 0, 10, 10), b = block(5, 5, 10, 30);
  const auto merged = merge_proximal({det(0, 0.8, a), det(1, 0.6, b)});
  const double score = merged.size() == 1 ? merged[0].score : -1.0;
  ck.require(std::abs(score - 0.65) < 1e-12, "merge score 0.65");

  // A plume whose detected core crosses a window edge: fragments from neighbouring
  // windows survive NMS and the merge stage joins them.
  const GridGeometry sg{400, 160, 45.0};
  PlumeSpec p;
  p.source = {80, 115};
  p.emission_rate_tph = 3.0;
  p.wind_direction_deg = 90.0;
  p.wind_speed_ms = 3.0;
  p.max_downwind_m = 12000.0;
  const auto inj = inject_plume(SceneGrid::filled(sg, 1900.0f), p, 5.0);
  const auto raw = run_scene(inj.scene, OracleDetector(kDefaultOracleK), 128, kDefaultOverlap);
  PipelineConfig pc;
  pc.mode = Mode::high_sensitivity;
  ModeTrace trace;
  const auto out = run_mode(raw.instances, inj.scene, pc, nullptr, &trace);
  ck.require(trace.fiber >= 2, ">= 2 pre-merge instances");
  ck.require(trace.merge == 1, "exactly 1 post-merge instance");
  ck.require(out.size() == 1 && out[0].mask.intersects(inj.label.mask), "merged instance lies on the plume");
  ck.note("500 sets idempotent; merged score " + num(score) + "; straddling plume " + std::to_string(trace.fiber) +
          " pre-merge -> " + std::to_string(trace.merge) + " post-merge");
  return ck.outcome();
}

Outcome qnd_null() {
  Check ck;
  const int n = 10000;
  std::vector<double> gauss;
  for (int j = 1; j <= n; ++j) gauss.push_back(oracle::normal_quantile((j - 0.5) / n));
  const auto curve = qnd_curve(gauss);
  const double max_d = *std::max_element(curve.d.begin(), curve.d.end());
  const auto fit = fit_poly6(curve);
  double max_poly = 0.0;
  for (int k = 0; k <= 980; ++k) max_poly = std::max(max_poly, std::abs(poly_eval(fit.coeffs, 1.0 + k * 0.1)));

  std::vector<double> uni;
  for (int j = 0; j < n; ++j) uni.push_back((j + 0.5) / n);
  const double d84 = qnd_curve(uni).d[83];
  const double closed = std::abs(0.84 - normal_cdf((0.84 - 0.5) * std::sqrt(12.0)));

  ck.require(max_d < 0.01, "Gaussian max D < 0.01");
  ck.require(max_poly < 0.05, "polynomial max |value| < 0.05");
  ck.require(std::abs(d84 - 0.040) <= 0.005, "uniform D_84 = 0.040 +- 0.005");
  ck.require(std::abs(d84 - closed) < 1e-3, "uniform D_84 matches the closed form");
  ck.note("Gaussian max D " + num(max_d) + ", polynomial max " + num(max_poly) + ", uniform D_84 " + num(d84) +
          " (closed form " + num(closed) + ")");
  return ck.outcome();
}

Outcome oracle_equivalence() {
  Check ck;
  Rng rng(1006);
  int dbscan_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto pts = random_points(rng, uniform_int(rng, 0, 500));
    const double eps = uniform_int(rng, 1, 8);
    const int min_pts = uniform_int(rng, 1, 25);
    const auto got = dbscan(pts, eps, min_pts);
    const auto ref = oracle::brute_dbscan(pts, eps, min_pts);
    dbscan_bad += !(got.core == ref.core && got.labels == ref.labels && got.cluster_count == ref.cluster_count);
  }
  ck.require(dbscan_bad == 0, "DBSCAN equals brute force");

  int match_bad = 0;
  const GridGeometry g{24, 24};
  for (int i = 0; i < 1000; ++i) {
    std::vector<BinaryMask> preds, truths;
    std::vector<double> scores;
    for (int k = uniform_int(rng, 1, 6); k > 0; --k) truths.push_back(random_blob(rng, g, 10));
    for (int k = uniform_int(rng, 0, 6); k > 0; --k) {
      preds.push_back(random_blob(rng, g, 10));
      scores.push_back(uniform_int(rng, 1, 5) / 5.0);
    }
    const double theta = uniform_real(rng, 0.05, 0.6);
    const auto got = match_masks(preds, scores, truths, theta);
    const auto ref = oracle::greedy_match(sets_of(preds), scores, sets_of(truths), theta);
    bool same = got.pairs.size() == ref.pairs.size() && static_cast<int>(got.unmatched_preds.size()) == ref.fp &&
                static_cast<int>(got.unmatched_truths.size()) == ref.fn;
    for (std::size_t k = 0; same && k < ref.pairs.size(); ++k)
      same = got.pairs[k].pred == ref.pairs[k].first && got.pairs[k].truth == ref.pairs[k].second;
    match_bad += !same;
  }
  ck.require(match_bad == 0, "greedy matching equals reference");

  // Hits at ranks 1, 3, 5: AP = (1 + 2/3 + 3/5) / 3 = 34/45.
  const std::vector<BinaryMask> truths{block(0, 0, 3, 3), block(10, 0, 3, 3), block(20, 0, 3, 3)};
  const std::vector<BinaryMask> preds{block(0, 0, 3, 3), block(40, 0, 3, 3), block(10, 0, 3, 3), block(50, 0, 3, 3),
                                      block(20, 0, 3, 3)};
  const double map = map_at_iou(preds, {0.9, 0.8, 0.7, 0.6, 0.5}, truths, 0.1);
  ck.require(std::abs(map - 34.0 / 45.0) < 1e-12, "mAP hand case = 34/45");
  ck.note("DBSCAN mismatches " + std::to_string(dbscan_bad) + "/1000, matching mismatches " +
          std::to_string(match_bad) + "/1000, hand-case mAP " + num(map));
  return ck.outcome();
}

Outcome end_to_end(const BenchmarkResult& r) {
  Check ck;
  const auto& base = r.baseline;
  const auto& hs = r.high_sensitivity;
  const auto& hp = r.high_precision;
  ck.require(r.classifier_error.empty(), "classifier trained");
  ck.require(r.scenes == 20, "20 scenes");
  ck.require(hs.recall() >= 0.90, "high-sensitivity recall >= 0.90");
  ck.require(hs.fp <= base.fp, "FP(HS) <= FP(baseline)");
  ck.require(hp.fp <= hs.fp, "FP(HP) <= FP(HS)");
  ck.require(hp.precision() >= hs.precision(), "precision(HP) >= precision(HS)");
  ck.require(r.seconds < 300.0, "runtime < 5 min");
  ck.note(std::to_string(r.plumes) + " plumes; baseline TP " + std::to_string(base.tp) + " FP " +
          std::to_string(base.fp) + "; HS recall " + num(hs.recall()) + " FP " + std::to_string(hs.fp) + "; HP precision " +
          num(hp.precision()) + " FP " + std::to_string(hp.fp) + "; " + num(r.seconds) + " s");
  return ck.outcome();
}

Outcome sweep_trends(const BenchmarkResult& r) {
  Check ck;
  std::map<std::string, std::vector<std::pair<double, ModeTotals>>> by;
  for (const auto& [key, t] : r.sweep) by[key.first].push_back({key.second, t});  // map order: ascending value
  const auto monotone = [&](const std::string& param, auto value, bool increasing) {
    const auto& rows = by[param];
    if (rows.size() < 2) return false;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const long prev = value(rows[k - 1].second), cur = value(rows[k].second);
      if (increasing ? cur < prev : cur > prev) return false;
    }
    return true;
  };
  const auto fp = [](const ModeTotals& t) { return t.fp; };
  const auto tp = [](const ModeTotals& t) { return t.tp; };
  const auto kept = [](const ModeTotals& t) { return t.tp + t.fp; };
  ck.require(monotone("tau", fp, false), "FP non-increasing in tau");
  ck.require(monotone("theta", tp, false), "TP non-increasing in theta");
  ck.require(monotone("delta", kept, true), "kept count non-decreasing in delta");
  const auto ends = [&](const std::string& param, auto value) {
    const auto& rows = by[param];
    return rows.empty() ? std::string("-")
                        : std::to_string(value(rows.front().second)) + "->" + std::to_string(value(rows.back().second));
  };
  ck.note("FP over tau " + ends("tau", fp) + ", TP over theta " + ends("theta", tp) + ", kept over delta " +
          ends("delta", kept));
  return ck.outcome();
}

Outcome random_forest() {
  Check ck;
  Rng rng(1009);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::normal_distribution<double> noise(0.0, 0.6);
  for (int i = 0; i < 400; ++i) {
    const int label = i % 2;
    const double centre = label ? 2.5 : -2.5;
    x.push_back({centre + noise(rng), centre + noise(rng), noise(rng)});
    y.push_back(label);
  }
  RfParams params;
  params.n_trees = 100;
  params.seed = 21;
  const auto model = rf_train(x, y, params);
  ck.require(model.oob_accuracy >= 0.95, "OOB >= 0.95");
  ck.require(rf_train(x, y, params) == model, "deterministic for a fixed seed");

  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> probe{uniform_real(rng, -5, 5), uniform_real(rng, -5, 5), uniform_real(rng, -2, 2)};
    double sum = 0.0;
    for (const auto& t : model.trees) sum += t.predict(probe);
    worst = std::max(worst, std::abs(rf_predict(model, probe).probability - sum / model.trees.size()));
  }
  ck.require(worst < 1e-12, "prediction = mean of tree probabilities");
  ck.note("OOB " + num(model.oob_accuracy) + ", max |p - mean(tree p)| " + num(worst));
  return ck.outcome();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "plumekit");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream sink;
  auto* old_out = std::cout.rdbuf(sink.rdbuf());
  auto* old_err = std::cerr.rdbuf(sink.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return code;
}

Outcome determinism() {
  Check ck;
  TempDir dir;
  std::map<std::string, std::string> runs[2];
  for (int k = 0; k < 2; ++k) {
    const auto out = dir.path() / ("run" + std::to_string(k));
    const auto cfg = dir.path() / ("c" + std::to_string(k) + ".toml");
    write_text_file(cfg, "[synth]\nwidth = 500\nheight = 500\nplumes = 2\ndownwind_min_m = 3000\ndownwind_max_m = 5000\n"
                         "[tiler]\npatch_size = 200\n[run]\nseed = 7\nout = \"" +
                             out.string() + "\"\n");
    ck.require(cli({"pipeline", "--config", cfg.string()}) == 0, "pipeline run " + std::to_string(k + 1) + " exit 0");
    if (std::filesystem::exists(out))
      for (const auto& e : std::filesystem::recursive_directory_iterator(out))
        if (e.is_regular_file()) runs[k][std::filesystem::relative(e.path(), out).string()] = read_text_file(e.path());
  }
  int json_csv = 0;
  for (const auto& [name, bytes] : runs[0]) {
    const auto ext = std::filesystem::path(name).extension();
    if (ext == ".json" || ext == ".csv") ++json_csv;
  }
  ck.require(runs[0].count("report.json") && runs[0].count("sweep.csv"), "report.json and sweep.csv written");
  ck.require(runs[0] == runs[1], "byte-identical outputs");
  ck.note(std::to_string(runs[0].size()) + " files (" + std::to_string(json_csv) + " JSON/CSV) compared across two runs");
  return ck.outcome();
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  std::optional<BenchmarkResult> bench;
  const auto benchmark = [&]() -> const BenchmarkResult& {
    if (!bench) bench = run_benchmark(benchmark_config(), 20, true);
    return *bench;
  };
  criteria.push_back({"operating-point constants", operating_point});
  criteria.push_back({"probability map laws", probability_map_laws});
  criteria.push_back({"morphology", morphology});
  criteria.push_back({"NMS and merging", nms_and_merge});
  criteria.push_back({"QND null test", qnd_null});
  criteria.push_back({"oracle equivalences", oracle_equivalence});
  criteria.push_back({"end-to-end synthetic benchmark", [&] { return end_to_end(benchmark()); }});
  criteria.push_back({"sweep trends", [&] { return sweep_trends(benchmark()); }});
  criteria.push_back({"random forest", random_forest});
  criteria.push_back({"determinism", determinism});

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
