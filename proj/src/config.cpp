#include "plumekit/config.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <type_traits>

#include "plumekit/io.hpp"

namespace plumekit {

using nlohmann::json;

namespace {

struct Entry {
  std::string key;
  std::function<void(ToolkitConfig&, std::string_view)> set;
  std::function<json(const ToolkitConfig&)> get;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string_view raw) {
  std::string v = trim(raw);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return v;
}

double parse_double(std::string_view key, std::string_view raw) {
  const std::string v = unquote(raw);
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error("config: '" + std::string(key) + "' expects a number, got '" + v + "'");
}

long long parse_int(std::string_view key, std::string_view raw) {
  const std::string v = unquote(raw);
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw Error("config: '" + std::string(key) + "' expects an integer, got '" + v + "'");
}

bool parse_bool(std::string_view key, std::string_view raw) {
  const std::string v = unquote(raw);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("config: '" + std::string(key) + "' expects true or false, got '" + v + "'");
}

json number_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

template <typename Ref>
Entry real(std::string key, Ref ref) {
  return {key, [key, ref](ToolkitConfig& c, std::string_view v) { ref(c) = parse_double(key, v); },
          [ref](const ToolkitConfig& c) { return number_json(ref(const_cast<ToolkitConfig&>(c))); }};
}

template <typename Ref>
Entry integer(std::string key, Ref ref) {
  return {key,
          [key, ref](ToolkitConfig& c, std::string_view v) {
            const long long i = parse_int(key, v);
            using T = std::remove_reference_t<decltype(ref(c))>;
            if (i < static_cast<long long>(std::numeric_limits<T>::min()) ||
                (i > 0 && static_cast<unsigned long long>(i) > static_cast<unsigned long long>(std::numeric_limits<T>::max())))
              throw Error("config: '" + key + "' out of range");
            ref(c) = static_cast<T>(i);
          },
          [ref](const ToolkitConfig& c) { return json(ref(const_cast<ToolkitConfig&>(c))); }};
}

template <typename Ref>
Entry boolean(std::string key, Ref ref) {
  return {key, [key, ref](ToolkitConfig& c, std::string_view v) { ref(c) = parse_bool(key, v); },
          [ref](const ToolkitConfig& c) { return json(ref(const_cast<ToolkitConfig&>(c))); }};
}

template <typename Ref>
Entry text(std::string key, Ref ref) {
  return {key, [ref](ToolkitConfig& c, std::string_view v) { ref(c) = unquote(v); },
          [ref](const ToolkitConfig& c) { return json(ref(const_cast<ToolkitConfig&>(c))); }};
}

const std::vector<Entry>& registry() {
  using C = ToolkitConfig;
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    e.push_back({"pipeline.mode", [](C& c, std::string_view v) { c.pipeline.mode = parse_mode(unquote(v)); },
                 [](const C& c) { return json(std::string(mode_name(c.pipeline.mode))); }});
    e.push_back(real("pipeline.tau", [](C& c) -> double& { return c.pipeline.tau; }));
    e.push_back(real("pipeline.delta", [](C& c) -> double& { return c.pipeline.delta; }));
    e.push_back(real("pipeline.theta", [](C& c) -> double& { return c.theta; }));
    e.push_back(real("pipeline.fiber_ratio", [](C& c) -> double& { return c.pipeline.fiber_ratio_max; }));
    e.push_back({"pipeline.size_floor",
                 [](C& c, std::string_view v) {
                   const std::string s = unquote(v);
                   if (s == "none" || s.empty())
                     c.pipeline.size_floor.reset();
                   else
                     c.pipeline.size_floor = parse_double("pipeline.size_floor", s);
                 },
                 [](const C& c) { return c.pipeline.size_floor ? json(*c.pipeline.size_floor) : json("none"); }});
    e.push_back(real("qnd.eps", [](C& c) -> double& { return c.pipeline.core.eps; }));
    e.push_back(integer("qnd.min_pts", [](C& c) -> int& { return c.pipeline.core.min_pts; }));
    e.push_back(real("qnd.percentile", [](C& c) -> double& { return c.pipeline.core.percentile; }));
    e.push_back(integer("qnd.n_trees", [](C& c) -> int& { return c.forest.n_trees; }));
    e.push_back(integer("qnd.max_depth", [](C& c) -> int& { return c.forest.max_depth; }));
    e.push_back(integer("qnd.train_scenes", [](C& c) -> int& { return c.train_scenes; }));
    e.push_back(text("qnd.model", [](C& c) -> std::string& { return c.model_path; }));
    e.push_back(integer("tiler.patch_size", [](C& c) -> int& { return c.patch_size; }));
    e.push_back(real("tiler.overlap", [](C& c) -> double& { return c.overlap; }));
    e.push_back(integer("tiler.threads", [](C& c) -> int& { return c.threads; }));
    e.push_back(real("oracle.k", [](C& c) -> double& { return c.oracle_k; }));
    e.push_back({"probmap.aggregate",
                 [](C& c, std::string_view v) {
                   const std::string s = unquote(v);
                   if (s == "pre-nms")
                     c.probmap_pre_nms = true;
                   else if (s == "post-nms")
                     c.probmap_pre_nms = false;
                   else
                     throw Error("config: 'probmap.aggregate' expects pre-nms or post-nms, got '" + s + "'");
                 },
                 [](const C& c) { return json(c.probmap_pre_nms ? "pre-nms" : "post-nms"); }});
    e.push_back(integer("synth.width", [](C& c) -> int& { return c.synth.geometry.width; }));
    e.push_back(integer("synth.height", [](C& c) -> int& { return c.synth.geometry.height; }));
    e.push_back(real("synth.pixel_size", [](C& c) -> double& { return c.synth.geometry.pixel_size; }));
    e.push_back(real("synth.background_mean", [](C& c) -> double& { return c.synth.background_mean; }));
    e.push_back(real("synth.noise_std", [](C& c) -> double& { return c.synth.noise_std; }));
    e.push_back(real("synth.invalid_fraction", [](C& c) -> double& { return c.synth.invalid_fraction; }));
    e.push_back(boolean("synth.albedo", [](C& c) -> bool& { return c.synth.with_albedo; }));
    e.push_back(integer("synth.max_placement_retries", [](C& c) -> int& { return c.synth.max_placement_retries; }));
    e.push_back(integer("synth.plumes", [](C& c) -> int& { return c.synth.plume_sampling.count; }));
    e.push_back(real("synth.q_min", [](C& c) -> double& { return c.synth.plume_sampling.q_min; }));
    e.push_back(real("synth.q_max", [](C& c) -> double& { return c.synth.plume_sampling.q_max; }));
    e.push_back(real("synth.wind_speed_min", [](C& c) -> double& { return c.synth.plume_sampling.wind_speed_min; }));
    e.push_back(real("synth.wind_speed_max", [](C& c) -> double& { return c.synth.plume_sampling.wind_speed_max; }));
    e.push_back(real("synth.spread_a", [](C& c) -> double& { return c.synth.plume_sampling.spread_a; }));
    e.push_back(real("synth.spread_b", [](C& c) -> double& { return c.synth.plume_sampling.spread_b; }));
    e.push_back(real("synth.downwind_min_m", [](C& c) -> double& { return c.synth.plume_sampling.downwind_min_m; }));
    e.push_back(real("synth.downwind_max_m", [](C& c) -> double& { return c.synth.plume_sampling.downwind_max_m; }));
    e.push_back(real("synth.min_peak_snr", [](C& c) -> double& { return c.synth.plume_sampling.min_peak_snr; }));
    e.push_back(integer("synth.edge_margin_px", [](C& c) -> int& { return c.synth.plume_sampling.edge_margin_px; }));
    e.push_back(integer("synth.separation_px", [](C& c) -> int& { return c.synth.plume_sampling.separation_px; }));
    e.push_back(integer("synth.stripes", [](C& c) -> int& { return c.synth.artifact_sampling.stripes; }));
    e.push_back(integer("synth.cloud_patches", [](C& c) -> int& { return c.synth.artifact_sampling.cloud_patches; }));
    e.push_back(integer("synth.small_enhancements", [](C& c) -> int& { return c.synth.artifact_sampling.small_enhancements; }));
    e.push_back(integer("synth.dispersed_enhancements",
                        [](C& c) -> int& { return c.synth.artifact_sampling.dispersed_enhancements; }));
    e.push_back(real("synth.stripe_snr_min", [](C& c) -> double& { return c.synth.artifact_sampling.stripe_snr_min; }));
    e.push_back(real("synth.stripe_snr_max", [](C& c) -> double& { return c.synth.artifact_sampling.stripe_snr_max; }));
    e.push_back(real("synth.cloud_rim_snr_min", [](C& c) -> double& { return c.synth.artifact_sampling.cloud_rim_snr_min; }));
    e.push_back(real("synth.cloud_rim_snr_max", [](C& c) -> double& { return c.synth.artifact_sampling.cloud_rim_snr_max; }));
    e.push_back(real("synth.small_snr_min", [](C& c) -> double& { return c.synth.artifact_sampling.small_snr_min; }));
    e.push_back(real("synth.small_snr_max", [](C& c) -> double& { return c.synth.artifact_sampling.small_snr_max; }));
    e.push_back(real("synth.dispersed_snr_min", [](C& c) -> double& { return c.synth.artifact_sampling.dispersed_snr_min; }));
    e.push_back(real("synth.dispersed_snr_max", [](C& c) -> double& { return c.synth.artifact_sampling.dispersed_snr_max; }));
    e.push_back(integer("synth.stripe_rows_min", [](C& c) -> int& { return c.synth.artifact_sampling.stripe_rows_min; }));
    e.push_back(integer("synth.stripe_rows_max", [](C& c) -> int& { return c.synth.artifact_sampling.stripe_rows_max; }));
    e.push_back(integer("synth.cloud_radius_min", [](C& c) -> int& { return c.synth.artifact_sampling.cloud_radius_min; }));
    e.push_back(integer("synth.cloud_radius_max", [](C& c) -> int& { return c.synth.artifact_sampling.cloud_radius_max; }));
    e.push_back(integer("synth.small_fwhm_min", [](C& c) -> int& { return c.synth.artifact_sampling.small_fwhm_min; }));
    e.push_back(integer("synth.small_fwhm_max", [](C& c) -> int& { return c.synth.artifact_sampling.small_fwhm_max; }));
    e.push_back(integer("synth.dispersed_sigma_min", [](C& c) -> int& { return c.synth.artifact_sampling.dispersed_sigma_min; }));
    e.push_back(integer("synth.dispersed_sigma_max", [](C& c) -> int& { return c.synth.artifact_sampling.dispersed_sigma_max; }));
    e.push_back(integer("run.seed", [](C& c) -> std::uint64_t& { return c.seed; }));
    e.push_back(text("run.scene", [](C& c) -> std::string& { return c.scene_path; }));
    e.push_back(text("run.labels", [](C& c) -> std::string& { return c.labels_path; }));
    e.push_back(text("run.out", [](C& c) -> std::string& { return c.out_dir; }));
    return e;
  }();
  return entries;
}

const Entry& find_entry(std::string_view key) {
  for (const auto& e : registry())
    if (e.key == key) return e;
  throw Error("config: unknown key '" + std::string(key) + "'");
}

}  // namespace

void set_config_value(ToolkitConfig& config, std::string_view dotted_key, std::string_view value) {
  find_entry(dotted_key).set(config, value);
}

void apply_config_text(ToolkitConfig& config, std::string_view text, std::string_view origin) {
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = std::string(origin) + ":" + std::to_string(lineno) + ": ";
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw Error(where + "malformed section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(where + "expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string dotted = section.empty() ? key : section + "." + key;
    try {
      set_config_value(config, dotted, std::string_view(t).substr(eq + 1));
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  }
}

ToolkitConfig load_config(const std::filesystem::path& path) {
  ToolkitConfig c;
  apply_config_text(c, read_text_file(path), path.string());
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : registry()) keys.push_back(e.key);
  return keys;
}

json config_to_json(const ToolkitConfig& config) {
  json j = json::object();
  for (const auto& e : registry()) j[e.key] = e.get(config);
  return j;
}

std::string config_to_text(const ToolkitConfig& config) {
  std::ostringstream os;
  std::string section;
  for (const auto& e : registry()) {
    const auto dot = e.key.find('.');
    const std::string sec = e.key.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
      section = sec;
    }
    os << e.key.substr(dot + 1) << " = " << e.get(config).dump() << "\n";
  }
  return os.str();
}

}  // namespace plumekit
