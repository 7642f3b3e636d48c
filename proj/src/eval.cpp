#include "plumekit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace plumekit {

using nlohmann::json;

BinaryMask union_semantic(const std::vector<BinaryMask>& masks) {
  std::vector<const BinaryMask*> ptrs;
  for (const auto& m : masks) ptrs.push_back(&m);
  return BinaryMask::union_of(ptrs);
}

BinaryMask union_semantic(const std::vector<Instance>& instances) {
  std::vector<const BinaryMask*> ptrs;
  for (const auto& d : instances) ptrs.push_back(&d.mask);
  return BinaryMask::union_of(ptrs);
}

double f1_score(double precision, double recall) {
  if (precision <= 0.0 || recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

PixelMetrics pixel_metrics(const BinaryMask& pred, const BinaryMask& truth) {
  PixelMetrics m;
  m.tp = pred.intersection_area(truth);
  m.fp = pred.area() - m.tp;
  m.fn = truth.area() - m.tp;
  m.precision = (m.tp + m.fp) == 0 ? 1.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  m.recall = (m.tp + m.fn) == 0 ? 1.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

namespace {

std::vector<int> greedy_order(const std::vector<BinaryMask>& preds, const std::vector<double>& scores) {
  std::vector<int> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (preds[a].area() != preds[b].area()) return preds[a].area() > preds[b].area();
    return a < b;
  });
  return order;
}

// Truth claimed by `pred` given the claims so far, or -1.
int claim(const BinaryMask& pred, const std::vector<BinaryMask>& truths, const std::vector<bool>& claimed,
          double theta, double& iou_out) {
  int best = -1;
  double best_iou = 0.0;
  for (std::size_t t = 0; t < truths.size(); ++t) {
    if (claimed[t] || pred.empty() || !pred.intersects(truths[t])) continue;
    const double iou = static_cast<double>(pred.intersection_area(truths[t])) /
                       static_cast<double>(pred.area() + truths[t].area() - pred.intersection_area(truths[t]));
    if (iou > best_iou) {
      best_iou = iou;
      best = static_cast<int>(t);
    }
  }
  if (best >= 0 && best_iou > theta) {
    iou_out = best_iou;
    return best;
  }
  return -1;
}

}  // namespace

MatchResult match_masks(const std::vector<BinaryMask>& preds, const std::vector<double>& scores,
                        const std::vector<BinaryMask>& truths, double theta) {
  if (preds.size() != scores.size()) throw Error("match: prediction and score counts differ");
  if (!(theta > 0.0 && theta < 1.0)) throw Error("match: theta must be in (0,1)");
  MatchResult res;
  res.n_preds = preds.size();
  res.n_truths = truths.size();
  std::vector<bool> claimed(truths.size(), false), matched(preds.size(), false);
  for (int p : greedy_order(preds, scores)) {
    double iou = 0.0;
    const int t = claim(preds[p], truths, claimed, theta, iou);
    if (t < 0) continue;
    claimed[t] = true;
    matched[p] = true;
    res.pairs.push_back({p, t, iou});
  }
  for (std::size_t p = 0; p < preds.size(); ++p)
    if (!matched[p]) res.unmatched_preds.push_back(static_cast<int>(p));
  for (std::size_t t = 0; t < truths.size(); ++t)
    if (!claimed[t]) res.unmatched_truths.push_back(static_cast<int>(t));
  return res;
}

MatchResult match_instances(const std::vector<Instance>& preds, const std::vector<BinaryMask>& truths, double theta) {
  std::vector<BinaryMask> masks;
  std::vector<double> scores;
  for (const auto& d : preds) {
    masks.push_back(d.mask);
    scores.push_back(d.score);
  }
  return match_masks(masks, scores, truths, theta);
}

MetricsReport instance_metrics(const MatchResult& match) {
  MetricsReport r;
  r.tp = match.pairs.size();
  r.fp = match.unmatched_preds.size();
  r.fn = match.unmatched_truths.size();
  r.precision = (r.tp + r.fp) == 0 ? 1.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  r.recall = (r.tp + r.fn) == 0 ? 1.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

double map_at_iou(const std::vector<BinaryMask>& preds, const std::vector<double>& scores,
                  const std::vector<BinaryMask>& truths, double theta) {
  if (truths.empty()) throw Error("map_at_iou: no ground truth");
  if (preds.size() != scores.size()) throw Error("map_at_iou: prediction and score counts differ");
  std::vector<double> levels = scores;
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  std::vector<std::pair<double, double>> pr;  // (recall, precision) per threshold
  for (double s : levels) {
    std::vector<BinaryMask> sub;
    std::vector<double> sub_scores;
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (scores[i] >= s) {
        sub.push_back(preds[i]);
        sub_scores.push_back(scores[i]);
      }
    const auto rep = instance_metrics(match_masks(sub, sub_scores, truths, theta));
    pr.emplace_back(rep.recall, rep.precision);
  }
  // Envelope: precision at recall r is the best precision at any recall >= r.
  std::sort(pr.begin(), pr.end());
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    if (i + 1 < pr.size() && pr[i + 1].first == pr[i].first) continue;  // handled at the last equal-recall point
    double env = 0.0;
    for (std::size_t j = i; j < pr.size(); ++j) env = std::max(env, pr[j].second);
    for (std::size_t j = i; j-- > 0 && pr[j].first == pr[i].first;) env = std::max(env, pr[j].second);
    ap += (pr[i].first - prev_recall) * env;
    prev_recall = pr[i].first;
  }
  return std::clamp(ap, 0.0, 1.0);
}

double map_at_iou(const std::vector<Instance>& preds, const std::vector<BinaryMask>& truths, double theta) {
  std::vector<BinaryMask> masks;
  std::vector<double> scores;
  for (const auto& d : preds) {
    masks.push_back(d.mask);
    scores.push_back(d.score);
  }
  return map_at_iou(masks, scores, truths, theta);
}

MetricsReport evaluate(const std::vector<Instance>& preds, const std::vector<BinaryMask>& truths, double theta,
                       const PipelineConfig& config) {
  MetricsReport r = instance_metrics(match_instances(preds, truths, theta));
  r.map = truths.empty() ? 0.0 : map_at_iou(preds, truths, theta);
  r.mode = std::string(mode_name(config.mode));
  r.tau = config.tau;
  r.delta = config.delta;
  r.theta = theta;
  return r;
}

json report_to_json(const MetricsReport& r) {
  return json{{"mode", r.mode},
              {"thresholds", {{"tau", r.tau}, {"delta", r.delta}, {"theta", r.theta}}},
              {"TP", r.tp},
              {"FP", r.fp},
              {"FN", r.fn},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"map", r.map},
              {"conventions", "precision = 1 when there are no predictions"}};
}

json pixel_metrics_to_json(const PixelMetrics& m) {
  return json{{"TP", m.tp}, {"FP", m.fp}, {"FN", m.fn}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

std::string_view sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::tau: return "tau";
    case SweepParam::delta: return "delta";
    case SweepParam::theta: return "theta";
  }
  throw Error("unknown sweep parameter");
}

SweepParam parse_sweep_param(std::string_view name) {
  for (auto p : {SweepParam::tau, SweepParam::delta, SweepParam::theta})
    if (sweep_param_name(p) == name) return p;
  throw Error("unknown sweep parameter '" + std::string(name) + "' (expected tau, delta or theta)");
}

std::vector<double> parse_grid(std::string_view text) {
  auto to_d = [&](std::string_view s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(std::string(s), &used);
      if (used != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw Error("grid: cannot parse '" + std::string(s) + "'");
    }
  };
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i)
      if (i == text.size() || text[i] == ':') {
        parts.push_back(text.substr(start, i - start));
        start = i + 1;
      }
    if (parts.size() != 3) throw Error("grid: expected start:stop:step");
    const double a = to_d(parts[0]), b = to_d(parts[1]), step = to_d(parts[2]);
    if (!(step > 0.0) || b < a) throw Error("grid: need step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    for (long k = 0; k <= n; ++k) out.push_back(std::round((a + k * step) * 1e12) / 1e12);
  } else {
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i)
      if (i == text.size() || text[i] == ',') {
        out.push_back(to_d(text.substr(start, i - start)));
        start = i + 1;
      }
  }
  if (out.empty()) throw Error("grid: empty");
  return out;
}

std::vector<SweepRow> sweep(const std::vector<Instance>& raw, const std::vector<BinaryMask>& truths,
                            const SceneGrid& scene, const PipelineConfig& config, double theta, SweepParam param,
                            const std::vector<double>& values, const RandomForestModel* classifier) {
  if (values.empty()) throw Error("sweep: empty grid");
  std::vector<SweepRow> rows;
  for (double v : values) {
    PipelineConfig c = config;
    double th = theta;
    switch (param) {
      case SweepParam::tau: c.tau = v; break;
      case SweepParam::delta: c.delta = v; break;
      case SweepParam::theta: th = v; break;
    }
    const auto out = run_mode(raw, scene, c, classifier);
    rows.push_back({param, v, evaluate(out, truths, th, c)});
  }
  return rows;
}

std::string format_number(double v) { return json(v).dump(); }

std::string sweep_csv(std::vector<SweepRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.param != b.param) return sweep_param_name(a.param) < sweep_param_name(b.param);
    return a.value < b.value;
  });
  std::ostringstream os;
  os << "param,value,TP,FP,FN,precision,recall,f1,map\n";
  for (const auto& r : rows)
    os << sweep_param_name(r.param) << ',' << format_number(r.value) << ',' << r.report.tp << ',' << r.report.fp
       << ',' << r.report.fn << ',' << format_number(r.report.precision) << ',' << format_number(r.report.recall)
       << ',' << format_number(r.report.f1) << ',' << format_number(r.report.map) << '\n';
  return os.str();
}

}  // namespace plumekit
