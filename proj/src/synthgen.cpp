#include "plumekit/synthgen.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "plumekit/components.hpp"
#include "plumekit/random.hpp"

namespace plumekit {

using nlohmann::json;

namespace {

constexpr double kCalibQ = 1.0;
constexpr double kCalibU = 3.0;
constexpr double kCalibX = 200.0;
constexpr double kCalibPpb = 100.0;
constexpr double kStripePeriodPx = 400.0;
constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2·sqrt(2 ln 2)

double centreline(double q, double u, double sigma, double k) {
  return k * q / (std::sqrt(2.0 * std::numbers::pi) * sigma * u);
}

BBox clip_to(const BBox& b, const GridGeometry& g) {
  return bbox_intersection(b, BBox{0, 0, g.height, g.width});
}

BBox dilate(const BBox& b, int by) { return {b.row0 - by, b.col0 - by, b.rows + 2 * by, b.cols + 2 * by}; }

bool overlaps(const BBox& a, const BBox& b) { return !bbox_intersection(a, b).empty(); }

// Adds `amp * shape(r, c)` over `box` at valid pixels.
template <typename Shape>
void add_field(SceneGrid& s, const BBox& box, Shape&& shape) {
  for (int r = box.row0; r < box.row_end(); ++r)
    for (int c = box.col0; c < box.col_end(); ++c)
      if (s.valid(r, c)) s.xch4(r, c) = static_cast<float>(s.xch4(r, c) + shape(r, c));
}

void brighten_albedo(SceneGrid& s, const BBox& box, double by, auto&& weight) {
  if (!s.albedo) return;
  auto& alb = *s.albedo;
  for (int r = box.row0; r < box.row_end(); ++r)
    for (int c = box.col0; c < box.col_end(); ++c) {
      const double w = weight(r, c);
      if (w > 0.0) alb(r, c) = static_cast<float>(std::clamp(alb(r, c) + by * w, 0.0, 1.0));
    }
}

// Box an artifact can touch, used to keep sampled artifacts away from labels.
BBox artifact_footprint(const ArtifactSpec& a, const GridGeometry& g) {
  switch (a.kind) {
    case ArtifactKind::stripe:
      return clip_to({a.placement.row, 0, a.extent_px, g.width}, g);
    case ArtifactKind::cloud_patch: {
      const int r = a.extent_px + 2;
      return clip_to({a.placement.row - r, a.placement.col - r, 2 * r + 1, 2 * r + 1}, g);
    }
    case ArtifactKind::small_enhancement: {
      const int r = static_cast<int>(std::ceil(4.0 * a.extent_px / kFwhmPerSigma));
      return clip_to({a.placement.row - r, a.placement.col - r, 2 * r + 1, 2 * r + 1}, g);
    }
    case ArtifactKind::dispersed_enhancement: {
      const int r = 4 * a.extent_px;
      return clip_to({a.placement.row - r, a.placement.col - r, 2 * r + 1, 2 * r + 1}, g);
    }
  }
  throw Error("artifact: unknown kind");
}

}  // namespace

void PlumeSpec::validate() const {
  if (!(wind_speed_ms > 0.0)) throw Error("plume spec: wind speed must be > 0");
  if (!(emission_rate_tph >= 0.0) || !std::isfinite(emission_rate_tph))
    throw Error("plume spec: emission rate must be finite and >= 0");
  if (!(spread_a > 0.0)) throw Error("plume spec: spread coefficient a must be > 0");
  if (!(spread_b > 0.0 && spread_b <= 1.0)) throw Error("plume spec: spread exponent b must be in (0, 1]");
  if (!(max_downwind_m > 0.0)) throw Error("plume spec: max_downwind_m must be > 0");
  if (!std::isfinite(wind_direction_deg)) throw Error("plume spec: wind direction must be finite");
}

std::string_view artifact_kind_name(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::stripe: return "stripe";
    case ArtifactKind::cloud_patch: return "cloud_patch";
    case ArtifactKind::small_enhancement: return "small_enhancement";
    case ArtifactKind::dispersed_enhancement: return "dispersed_enhancement";
  }
  throw Error("artifact: unknown kind");
}

ArtifactKind parse_artifact_kind(std::string_view name) {
  for (auto k : {ArtifactKind::stripe, ArtifactKind::cloud_patch, ArtifactKind::small_enhancement,
                 ArtifactKind::dispersed_enhancement})
    if (artifact_kind_name(k) == name) return k;
  throw Error("artifact: unknown kind '" + std::string(name) + "'");
}

void ArtifactSpec::validate() const {
  if (!(amplitude_ppb > 0.0) || !std::isfinite(amplitude_ppb)) throw Error("artifact spec: amplitude must be > 0");
  if (extent_px < 1) throw Error("artifact spec: extent must be >= 1");
  if (kind == ArtifactKind::small_enhancement && extent_px > 8)
    throw Error("artifact spec: small_enhancement FWHM must be <= 8 px");
}

void SynthConfig::validate() const {
  geometry.validate();
  if (!(noise_std >= 0.0)) throw Error("synth config: noise_std must be >= 0");
  if (!(background_mean > 0.0)) throw Error("synth config: background_mean must be > 0");
  if (!(invalid_fraction >= 0.0 && invalid_fraction < 1.0)) throw Error("synth config: invalid_fraction must be in [0,1)");
  if (max_placement_retries < 1) throw Error("synth config: max_placement_retries must be >= 1");
  const auto& ps = plume_sampling;
  if (ps.count < 0) throw Error("synth config: plume count must be >= 0");
  if (!(ps.q_min >= 0.0 && ps.q_min <= ps.q_max)) throw Error("synth config: bad emission-rate range");
  if (!(ps.wind_speed_min > 0.0 && ps.wind_speed_min <= ps.wind_speed_max)) throw Error("synth config: bad wind-speed range");
  if (!(ps.downwind_min_m > 0.0 && ps.downwind_min_m <= ps.downwind_max_m)) throw Error("synth config: bad downwind range");
  const auto& as = artifact_sampling;
  if (as.stripes < 0 || as.cloud_patches < 0 || as.small_enhancements < 0 || as.dispersed_enhancements < 0)
    throw Error("synth config: artifact counts must be >= 0");
  for (const auto& p : plumes) p.validate();
  for (const auto& a : artifacts) a.validate();
}

double SynthConfig::label_floor() const {
  // A noise-free scene still needs a finite floor; fall back to 1 ppb.
  return noise_std > 0.0 ? noise_std : 1.0;
}

double effective_sigma(double x_m, double a, double b, double pixel_size_m) {
  const double sy = a * std::pow(x_m, b);
  return std::sqrt(sy * sy + pixel_size_m * pixel_size_m / 12.0);
}

double plume_calibration_constant() {
  static const double k = [] {
    const double sigma = effective_sigma(kCalibX, 0.08, 0.9, kMethaneSatPixelM);
    return kCalibPpb * std::sqrt(2.0 * std::numbers::pi) * sigma * kCalibU / kCalibQ;
  }();
  return k;
}

LocalField plume_field_local(const PlumeSpec& spec, const GridGeometry& g) {
  spec.validate();
  g.validate();
  if (!g.contains(spec.source.row, spec.source.col)) throw Error("plume spec: source outside grid");
  const double dx = g.pixel_size;
  BBox box{0, 0, g.height, g.width};
  if (std::isfinite(spec.max_downwind_m)) {
    const int reach = static_cast<int>(std::ceil(spec.max_downwind_m / dx)) + 1;
    box = clip_to({spec.source.row - reach, spec.source.col - reach, 2 * reach + 1, 2 * reach + 1}, g);
  }
  LocalField out{box, Grid<double>(box.rows, box.cols, 0.0)};
  if (spec.emission_rate_tph == 0.0) return out;

  const double theta = spec.wind_direction_deg * std::numbers::pi / 180.0;
  const double ur = -std::cos(theta);  // downwind unit vector in (row, col)
  const double uc = std::sin(theta);
  const double k = plume_calibration_constant();
  for (int r = box.row0; r < box.row_end(); ++r) {
    const double dr = (r - spec.source.row) * dx;
    for (int c = box.col0; c < box.col_end(); ++c) {
      const double dc = (c - spec.source.col) * dx;
      // The release point sits half a pixel upwind of the source pixel centre.
      const double x = dr * ur + dc * uc + 0.5 * dx;
      if (x <= 0.0 || x > spec.max_downwind_m) continue;
      const double y = dr * uc - dc * ur;
      const double sigma = effective_sigma(x, spec.spread_a, spec.spread_b, dx);
      out.values(r - box.row0, c - box.col0) =
          centreline(spec.emission_rate_tph, spec.wind_speed_ms, sigma, k) * std::exp(-y * y / (2.0 * sigma * sigma));
    }
  }
  return out;
}

Grid<double> gaussian_plume_field(const PlumeSpec& spec, const GridGeometry& geometry) {
  const auto local = plume_field_local(spec, geometry);
  Grid<double> full(geometry.height, geometry.width, 0.0);
  for (int r = 0; r < local.box.rows; ++r)
    for (int c = 0; c < local.box.cols; ++c) full(local.box.row0 + r, local.box.col0 + c) = local.values(r, c);
  return full;
}

Injection inject_plume(const SceneGrid& scene, const PlumeSpec& spec, double label_floor,
                       std::span<const PlumeLabel> prior) {
  if (!(label_floor > 0.0)) throw Error("inject_plume: label floor must be > 0");
  const auto field = plume_field_local(spec, scene.geometry);
  const BBox& box = field.box;

  MaskGrid above(box.rows, box.cols, 0);
  for (int r = 0; r < box.rows; ++r)
    for (int c = 0; c < box.cols; ++c) above(r, c) = field.values(r, c) >= label_floor ? 1 : 0;
  const Pixel seed{spec.source.row - box.row0, spec.source.col - box.col0};
  auto comp = component_containing(above, seed);
  if (comp.empty()) throw PlacementRejected("inject_plume: source enhancement below labeling floor");
  for (auto& p : comp) p = {p.row + box.row0, p.col + box.col0};
  auto mask = BinaryMask::from_pixels(comp);

  for (const auto& l : prior)
    if (l.mask.intersects(mask)) throw PlacementRejected("inject_plume: footprint overlaps a prior plume");
  std::size_t invalid = 0;
  for (const auto& p : comp) invalid += scene.valid(p.row, p.col) ? 0 : 1;
  if (static_cast<double>(invalid) >= kMaxFootprintInvalidFraction * static_cast<double>(comp.size()))
    throw PlacementRejected("inject_plume: too many invalid pixels in footprint");

  Injection out{scene, PlumeLabel{std::move(mask), spec.source, spec.emission_rate_tph}};
  add_field(out.scene, box, [&](int r, int c) { return field.values(r - box.row0, c - box.col0); });
  return out;
}

SceneGrid inject_artifact(const SceneGrid& scene, const ArtifactSpec& spec) {
  spec.validate();
  const auto& g = scene.geometry;
  if (!g.contains(spec.placement.row, spec.placement.col)) throw Error("inject_artifact: placement outside grid");
  SceneGrid out = scene;
  const BBox box = artifact_footprint(spec, g);
  const double amp = spec.amplitude_ppb;
  const int pr = spec.placement.row, pc = spec.placement.col;

  switch (spec.kind) {
    case ArtifactKind::stripe: {
      // Detector striping drifts slowly along the row.
      add_field(out, box, [&](int, int c) {
        return amp * (0.7 + 0.3 * std::cos(2.0 * std::numbers::pi * (c - pc) / kStripePeriodPx));
      });
      break;
    }
    case ArtifactKind::cloud_patch: {
      const double rad = spec.extent_px;
      auto dist = [&](int r, int c) { return std::hypot(double(r - pr), double(c - pc)); };
      add_field(out, box, [&](int r, int c) {
        const double d = dist(r, c);
        return d > rad && d <= rad + 2.0 ? amp : 0.0;
      });
      brighten_albedo(out, box, 0.4, [&](int r, int c) { return dist(r, c) <= rad + 2.0 ? 1.0 : 0.0; });
      for (int r = box.row0; r < box.row_end(); ++r)
        for (int c = box.col0; c < box.col_end(); ++c)
          if (dist(r, c) <= rad) {
            out.valid(r, c) = 0;
            out.xch4(r, c) = 0.0f;
          }
      break;
    }
    case ArtifactKind::small_enhancement:
    case ArtifactKind::dispersed_enhancement: {
      const bool small = spec.kind == ArtifactKind::small_enhancement;
      const double sigma = small ? spec.extent_px / kFwhmPerSigma : double(spec.extent_px);
      auto shape = [&](int r, int c) {
        const double d2 = double(r - pr) * (r - pr) + double(c - pc) * (c - pc);
        return std::exp(-d2 / (2.0 * sigma * sigma));
      };
      add_field(out, box, [&](int r, int c) { return amp * shape(r, c); });
      // Surface-driven retrieval artifacts co-locate with albedo anomalies.
      brighten_albedo(out, box, small ? 0.25 : 0.15, shape);
      break;
    }
  }
  return out;
}

SyntheticScene generate_scene(const SynthConfig& config) {
  config.validate();
  const auto& g = config.geometry;
  SyntheticScene out;
  out.scene = SceneGrid::filled(g, static_cast<float>(config.background_mean));
  auto& s = out.scene;

  {
    Rng rng(derive_seed(config.seed, "background"));
    std::normal_distribution<double> noise(0.0, 1.0);
    if (config.noise_std > 0.0)
      for (auto& v : s.xch4.data()) v = static_cast<float>(config.background_mean + config.noise_std * noise(rng));
  }
  if (config.with_albedo) {
    Rng rng(derive_seed(config.seed, "albedo"));
    std::normal_distribution<double> noise(0.0, 0.01);
    Grid<float> alb(g.height, g.width, 0.0f);
    for (int r = 0; r < g.height; ++r)
      for (int c = 0; c < g.width; ++c) {
        const double base = 0.3 + 0.1 * std::sin(2.0 * std::numbers::pi * r / 611.0) *
                                      std::cos(2.0 * std::numbers::pi * c / 457.0);
        alb(r, c) = static_cast<float>(std::clamp(base + noise(rng), 0.0, 1.0));
      }
    s.albedo = std::move(alb);
  }
  if (config.invalid_fraction > 0.0) {
    Rng rng(derive_seed(config.seed, "invalid"));
    std::bernoulli_distribution drop(config.invalid_fraction);
    for (std::size_t i = 0; i < s.valid.size(); ++i)
      if (drop(rng)) {
        s.valid.data()[i] = 0;
        s.xch4.data()[i] = 0.0f;
      }
  }

  const double floor = config.label_floor();
  for (const auto& p : config.plumes) {
    auto inj = inject_plume(s, p, floor, out.labels);
    s = std::move(inj.scene);
    out.labels.push_back(std::move(inj.label));
    out.plumes.push_back(p);
  }

  const auto& ps = config.plume_sampling;
  if (ps.count > 0) {
    Rng rng(derive_seed(config.seed, "plumes"));
    const int margin = ps.edge_margin_px;
    if (g.height <= 2 * margin || g.width <= 2 * margin) throw Error("generate_scene: grid too small for edge margin");
    std::uniform_int_distribution<int> row_d(margin, g.height - 1 - margin), col_d(margin, g.width - 1 - margin);
    std::uniform_real_distribution<double> dir_d(0.0, 360.0), q_d(ps.q_min, ps.q_max),
        u_d(ps.wind_speed_min, ps.wind_speed_max), x_d(ps.downwind_min_m, ps.downwind_max_m);
    const BBox interior{margin, margin, g.height - 2 * margin, g.width - 2 * margin};
    for (int i = 0; i < ps.count; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < config.max_placement_retries && !placed; ++attempt) {
        PlumeSpec p;
        p.source = {row_d(rng), col_d(rng)};
        p.wind_direction_deg = dir_d(rng);
        p.emission_rate_tph = q_d(rng);
        p.wind_speed_ms = u_d(rng);
        p.spread_a = ps.spread_a;
        p.spread_b = ps.spread_b;
        p.max_downwind_m = std::isfinite(ps.downwind_max_m) ? x_d(rng) : ps.downwind_max_m;
        const double peak = centreline(p.emission_rate_tph, p.wind_speed_ms,
                                       effective_sigma(0.5 * g.pixel_size, p.spread_a, p.spread_b, g.pixel_size),
                                       plume_calibration_constant());
        if (config.noise_std > 0.0 && peak < ps.min_peak_snr * config.noise_std) continue;
        try {
          auto inj = inject_plume(s, p, floor, out.labels);
          const BBox& lb = inj.label.mask.bbox();
          if (bbox_intersection(lb, interior) != lb) continue;
          bool clear = true;
          for (const auto& l : out.labels) clear = clear && !overlaps(dilate(l.mask.bbox(), ps.separation_px), lb);
          if (!clear) continue;
          s = std::move(inj.scene);
          out.labels.push_back(std::move(inj.label));
          out.plumes.push_back(p);
          placed = true;
        } catch (const PlacementRejected&) {
        }
      }
      if (!placed) throw Error("generate_scene: placement exhausted");
    }
  }

  for (const auto& a : config.artifacts) {
    s = inject_artifact(s, a);
    out.artifacts.push_back(a);
  }

  const auto& as = config.artifact_sampling;
  const double sd = config.noise_std > 0.0 ? config.noise_std : 1.0;
  Rng rng(derive_seed(config.seed, "artifacts"));
  std::vector<BBox> occupied;
  for (const auto& l : out.labels) occupied.push_back(dilate(l.mask.bbox(), ps.separation_px));
  for (const auto& a : out.artifacts) occupied.push_back(artifact_footprint(a, g));

  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto unii = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto place = [&](ArtifactKind kind, int n) {
    for (int i = 0; i < n; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < config.max_placement_retries && !placed; ++attempt) {
        ArtifactSpec a;
        a.kind = kind;
        switch (kind) {
          case ArtifactKind::stripe:
            a.amplitude_ppb = sd * uni(as.stripe_snr_min, as.stripe_snr_max);
            a.extent_px = unii(as.stripe_rows_min, as.stripe_rows_max);
            a.placement = {unii(0, g.height - a.extent_px), unii(0, g.width - 1)};
            break;
          case ArtifactKind::cloud_patch:
            a.amplitude_ppb = sd * uni(as.cloud_rim_snr_min, as.cloud_rim_snr_max);
            a.extent_px = unii(as.cloud_radius_min, as.cloud_radius_max);
            a.placement = {unii(0, g.height - 1), unii(0, g.width - 1)};
            break;
          case ArtifactKind::small_enhancement:
            a.amplitude_ppb = sd * uni(as.small_snr_min, as.small_snr_max);
            a.extent_px = unii(as.small_fwhm_min, as.small_fwhm_max);
            a.placement = {unii(0, g.height - 1), unii(0, g.width - 1)};
            break;
          case ArtifactKind::dispersed_enhancement:
            a.amplitude_ppb = sd * uni(as.dispersed_snr_min, as.dispersed_snr_max);
            a.extent_px = unii(as.dispersed_sigma_min, as.dispersed_sigma_max);
            a.placement = {unii(0, g.height - 1), unii(0, g.width - 1)};
            break;
        }
        const BBox fp = artifact_footprint(a, g);
        bool clear = true;
        for (const auto& o : occupied) clear = clear && !overlaps(o, fp);
        if (!clear) continue;
        s = inject_artifact(s, a);
        out.artifacts.push_back(a);
        occupied.push_back(fp);
        placed = true;
      }
      if (!placed) throw Error("generate_scene: placement exhausted");
    }
  };
  place(ArtifactKind::stripe, as.stripes);
  place(ArtifactKind::cloud_patch, as.cloud_patches);
  place(ArtifactKind::small_enhancement, as.small_enhancements);
  place(ArtifactKind::dispersed_enhancement, as.dispersed_enhancements);
  return out;
}

json labels_to_json(std::span<const PlumeLabel> labels) {
  json arr = json::array();
  for (const auto& l : labels)
    arr.push_back({{"mask", mask_to_json(l.mask)},
                   {"source", {l.source.row, l.source.col}},
                   {"emission_rate_tph", l.emission_rate_tph}});
  return arr;
}

std::vector<PlumeLabel> labels_from_json(const json& j) {
  if (!j.is_array()) throw Error("labels: expected a JSON list");
  std::vector<PlumeLabel> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("mask") || !e.contains("source"))
      throw Error("labels: entry needs 'mask' and 'source'");
    PlumeLabel l;
    l.mask = mask_from_json(e.at("mask"));
    const auto& src = e.at("source");
    if (!src.is_array() || src.size() != 2) throw Error("labels: 'source' must be [row, col]");
    l.source = {src[0].get<int>(), src[1].get<int>()};
    l.emission_rate_tph = e.value("emission_rate_tph", 0.0);
    if (l.mask.empty()) throw Error("labels: empty mask");
    if (!l.mask.bbox().contains(l.source.row, l.source.col)) throw Error("labels: source outside mask bbox");
    out.push_back(std::move(l));
  }
  return out;
}

json artifacts_to_json(std::span<const ArtifactSpec> artifacts) {
  json arr = json::array();
  for (const auto& a : artifacts)
    arr.push_back({{"kind", artifact_kind_name(a.kind)},
                   {"amplitude_ppb", a.amplitude_ppb},
                   {"placement", {a.placement.row, a.placement.col}},
                   {"extent_px", a.extent_px}});
  return arr;
}

}  // namespace plumekit
