#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "plumekit/detector.hpp"
#include "plumekit/postproc.hpp"

namespace plumekit {

inline constexpr double kDefaultTheta = 0.1;

// Hard-mask union S = U M_i.
BinaryMask union_semantic(const std::vector<Instance>& instances);
BinaryMask union_semantic(const std::vector<BinaryMask>& masks);

// Precision is 1 when nothing is predicted (TP + FP = 0); recall is 1 when the truth is
// empty; F1 is 0 whenever precision or recall is 0.
struct PixelMetrics {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 1.0, recall = 1.0, f1 = 1.0;
};
PixelMetrics pixel_metrics(const BinaryMask& pred, const BinaryMask& truth);

struct MatchPair {
  int pred = 0;
  int truth = 0;
  double iou = 0.0;
  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // in matching order
  std::vector<int> unmatched_preds;
  std::vector<int> unmatched_truths;
  std::size_t n_preds = 0;
  std::size_t n_truths = 0;
};

// Predictions by descending score (then larger area, then lower index) each claim the
// unclaimed truth of maximal IoU (lowest index on ties) when that IoU exceeds theta.
MatchResult match_masks(const std::vector<BinaryMask>& preds, const std::vector<double>& scores,
                        const std::vector<BinaryMask>& truths, double theta);
MatchResult match_instances(const std::vector<Instance>& preds, const std::vector<BinaryMask>& truths, double theta);

struct MetricsReport {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 1.0, recall = 0.0, f1 = 0.0;
  double map = 0.0;
  std::string mode;
  double tau = kDefaultTau, delta = kDefaultDelta, theta = kDefaultTheta;
};

MetricsReport instance_metrics(const MatchResult& match);
double f1_score(double precision, double recall);

// All-point AP with a monotone precision envelope; the threshold sweeps every distinct
// score and re-runs the greedy matching at each one.
double map_at_iou(const std::vector<BinaryMask>& preds, const std::vector<double>& scores,
                  const std::vector<BinaryMask>& truths, double theta);
double map_at_iou(const std::vector<Instance>& preds, const std::vector<BinaryMask>& truths, double theta);

// Full evaluation of one prediction set: instance metrics, mAP, and the thresholds used.
MetricsReport evaluate(const std::vector<Instance>& preds, const std::vector<BinaryMask>& truths, double theta,
                       const PipelineConfig& config);
nlohmann::json report_to_json(const MetricsReport& report);
nlohmann::json pixel_metrics_to_json(const PixelMetrics& m);

enum class SweepParam { tau, delta, theta };
std::string_view sweep_param_name(SweepParam p);
SweepParam parse_sweep_param(std::string_view name);

// "start:stop:step" (inclusive of stop within rounding) or a comma-separated list.
std::vector<double> parse_grid(std::string_view text);

struct SweepRow {
  SweepParam param = SweepParam::tau;
  double value = 0.0;
  MetricsReport report;
};

// Varies one parameter over `values` while holding the others at `config` / `theta`;
// each point re-runs run_mode on the raw detections and evaluates against the truths.
std::vector<SweepRow> sweep(const std::vector<Instance>& raw, const std::vector<BinaryMask>& truths,
                            const SceneGrid& scene, const PipelineConfig& config, double theta, SweepParam param,
                            const std::vector<double>& values, const RandomForestModel* classifier = nullptr);

// Columns param,value,TP,FP,FN,precision,recall,f1,map; rows ordered by (param, value).
std::string sweep_csv(std::vector<SweepRow> rows);

// Shortest round-trip decimal form, used for every number written to CSV.
std::string format_number(double v);

}  // namespace plumekit
