#include "plumekit/postproc.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "plumekit/qnd.hpp"

namespace plumekit {

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::baseline: return "baseline";
    case Mode::high_sensitivity: return "high-sensitivity";
    case Mode::high_precision: return "high-precision";
  }
  throw Error("unknown mode");
}

Mode parse_mode(std::string_view name) {
  for (auto m : {Mode::baseline, Mode::high_sensitivity, Mode::high_precision})
    if (mode_name(m) == name) return m;
  throw Error("unknown mode '" + std::string(name) + "' (expected baseline, high-sensitivity or high-precision)");
}

void PipelineConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("pipeline config: tau must be in [0,1]");
  if (!(delta >= 0.0 && delta <= 1.0)) throw Error("pipeline config: delta must be in [0,1]");
  if (!(fiber_ratio_max > 1.0)) throw Error("pipeline config: fiber ratio must be > 1");
  if (size_floor && !(*size_floor >= 0.0)) throw Error("pipeline config: size floor must be >= 0");
  if (!(core.eps > 0.0) || core.min_pts < 1 || !(core.percentile >= 0.0 && core.percentile <= 100.0))
    throw Error("pipeline config: invalid hotspot-core parameters");
}

std::vector<Instance> filter_confidence(const std::vector<Instance>& dets, double tau) {
  std::vector<Instance> out;
  for (const auto& d : dets)
    if (d.score >= tau) out.push_back(d);
  return out;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.empty() && b.empty()) throw Error("mask_iou: both masks empty");
  const std::size_t inter = a.intersection_area(b);
  const std::size_t uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

bool nms_order(const Instance& a, const Instance& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.area() != b.area()) return a.area() > b.area();
  if (a.bbox() != b.bbox()) return a.bbox() < b.bbox();
  return a.id < b.id;
}

std::vector<Instance> nms(const std::vector<Instance>& dets, double delta) {
  std::vector<const Instance*> order;
  for (const auto& d : dets) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(), [](const Instance* a, const Instance* b) { return nms_order(*a, *b); });
  std::vector<Instance> kept;
  for (const Instance* d : order) {
    bool keep = true;
    for (const auto& k : kept)
      if (mask_iou(d->mask, k.mask) > delta) {
        keep = false;
        break;
      }
    if (keep) kept.push_back(*d);
  }
  return kept;
}

std::vector<Instance> fiber_filter(const std::vector<Instance>& dets, double ratio_max) {
  std::vector<Instance> out;
  for (const auto& d : dets) {
    if (d.area() < kMinSkeletonArea || fiber_metrics(d.mask).ratio <= ratio_max) out.push_back(d);
  }
  return out;
}

std::vector<Instance> merge_proximal(const std::vector<Instance>& dets) {
  const std::size_t n = dets.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (dets[i].mask.intersects(dets[j].mask)) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  std::map<std::size_t, std::vector<const Instance*>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(&dets[i]);

  std::vector<Instance> out;
  for (auto& [root, members] : groups) {
    if (members.size() == 1) {
      out.push_back(*members[0]);
      continue;
    }
    // Fixed member order so the weighted sum does not depend on input order.
    std::sort(members.begin(), members.end(), [](const Instance* a, const Instance* b) {
      if (a->id != b->id) return a->id < b->id;
      return nms_order(*a, *b);
    });
    std::vector<const BinaryMask*> masks;
    double weighted = 0.0, total = 0.0;
    Instance merged;
    merged.id = members[0]->id;
    merged.provenance = members[0]->provenance;
    merged.provenance.members.clear();
    for (const Instance* m : members) {
      masks.push_back(&m->mask);
      weighted += static_cast<double>(m->area()) * m->score;
      total += static_cast<double>(m->area());
      if (m->provenance.members.empty())
        merged.provenance.members.push_back(m->id);
      else
        merged.provenance.members.insert(merged.provenance.members.end(), m->provenance.members.begin(),
                                         m->provenance.members.end());
    }
    std::sort(merged.provenance.members.begin(), merged.provenance.members.end());
    merged.provenance.members.erase(
        std::unique(merged.provenance.members.begin(), merged.provenance.members.end()),
        merged.provenance.members.end());
    merged.mask = BinaryMask::union_of(masks);
    merged.score = weighted / total;
    const BBox& b = merged.mask.bbox();
    merged.soft.assign(merged.mask.bits().size(), 0.0f);
    for (const Instance* m : members) {
      const BBox& mb = m->bbox();
      for (int r = mb.row0; r < mb.row_end(); ++r)
        for (int c = mb.col0; c < mb.col_end(); ++c) {
          float& dst = merged.soft[static_cast<std::size_t>(r - b.row0) * b.cols + (c - b.col0)];
          dst = std::max(dst, m->soft[m->mask.local_index(r, c)]);
        }
    }
    out.push_back(std::move(merged));
  }
  std::sort(out.begin(), out.end(), nms_order);
  return out;
}

std::vector<Instance> size_filter(const std::vector<Instance>& dets, double floor_px) {
  if (!(floor_px >= 0.0)) throw Error("size_filter: floor must be >= 0");
  std::vector<Instance> out;
  for (const auto& d : dets)
    if (static_cast<double>(d.area()) >= floor_px) out.push_back(d);
  return out;
}

std::vector<Instance> qnd_filter(const std::vector<Instance>& dets, const SceneGrid& scene,
                                 const RandomForestModel& model, const CoreParams& core) {
  std::vector<Instance> out;
  for (const auto& d : dets) {
    QndFeatures f;
    try {
      f = extract_features(scene, d.mask, core);
    } catch (const Error&) {
      continue;  // no hotspot core or degenerate distribution: artifact-like
    }
    if (rf_predict(model, f).cls == QndClass::plume) out.push_back(d);
  }
  return out;
}

std::vector<Instance> run_mode(const std::vector<Instance>& dets, const SceneGrid& scene,
                               const PipelineConfig& config, const RandomForestModel* classifier, ModeTrace* trace) {
  config.validate();
  if (config.mode == Mode::high_precision) {
    if (classifier && config.size_floor) throw Error("run_mode: give either a classifier or a size floor, not both");
    if (!classifier && !config.size_floor) throw Error("run_mode: high-precision mode needs a classifier or a size floor");
  }
  ModeTrace local;
  ModeTrace& t = trace ? *trace : local;
  t = {};
  auto out = filter_confidence(dets, config.tau);
  t.confidence = static_cast<long>(out.size());
  out = nms(out, config.delta);
  t.nms = static_cast<long>(out.size());
  if (config.mode == Mode::baseline) return out;
  out = fiber_filter(out, config.fiber_ratio_max);
  t.fiber = static_cast<long>(out.size());
  out = merge_proximal(out);
  t.merge = static_cast<long>(out.size());
  if (config.mode == Mode::high_sensitivity) return out;
  out = classifier ? qnd_filter(out, scene, *classifier, config.core) : size_filter(out, *config.size_floor);
  t.high_precision = static_cast<long>(out.size());
  return out;
}

}  // namespace plumekit
