#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "plumekit/eval.hpp"
#include "plumekit/forest.hpp"
#include "plumekit/postproc.hpp"
#include "plumekit/synthgen.hpp"
#include "plumekit/tiler.hpp"

namespace plumekit {

// Oracle threshold (in window z-score units) used unless configured otherwise.
inline constexpr double kDefaultOracleK = 4.0;

// Synthetic scene the toolkit generates when no scene is given: large enough for the
// default window, with three plumes and one artifact of each kind. The regime (low noise,
// light wind, 6-12 km plumes, strong stripes) makes plume masks large enough to carry a
// hotspot core and gives the oracle hard negatives it fires on with confidence.
inline SynthConfig default_toolkit_synth() {
  SynthConfig s;
  s.geometry = GridGeometry{1000, 1000};
  s.noise_std = 2.5;
  auto& p = s.plume_sampling;
  p.count = 3;
  p.wind_speed_min = 1.0;
  p.wind_speed_max = 2.0;
  p.spread_a = 0.12;
  p.downwind_min_m = 6000.0;
  p.downwind_max_m = 12000.0;
  auto& a = s.artifact_sampling;
  a.stripes = 1;
  a.cloud_patches = 1;
  a.small_enhancements = 1;
  a.dispersed_enhancements = 1;
  a.stripe_snr_min = 8.0;
  a.stripe_snr_max = 12.0;
  a.stripe_rows_min = 4;
  a.stripe_rows_max = 8;
  a.cloud_rim_snr_min = 5.0;
  a.cloud_rim_snr_max = 8.0;
  a.small_snr_min = 8.0;
  a.small_snr_max = 15.0;
  return s;
}

// Every knob of the toolkit, with defaults at the published operating point where one
// exists. All randomness derives from `seed`.
struct ToolkitConfig {
  PipelineConfig pipeline;  // tau, delta, fiber ratio, size floor, mode, hotspot core
  double theta = kDefaultTheta;
  int patch_size = kDefaultPatchSize;
  double overlap = kDefaultOverlap;
  int threads = 1;
  double oracle_k = kDefaultOracleK;
  bool probmap_pre_nms = true;  // aggregate post-tau, pre-NMS detections
  RfParams forest;
  int train_scenes = 8;       // synthetic scenes used when the pipeline trains its own model
  std::string model_path;     // optional pre-trained model
  SynthConfig synth = default_toolkit_synth();
  std::uint64_t seed = 42;
  std::string scene_path;     // optional existing scene instead of a synthetic one
  std::string labels_path;    // ground truth for an existing scene (optional)
  std::string out_dir = "plumekit_out";
};

// Flat TOML-style text: [section] headers, key = value lines, '#' comments. Values are
// numbers, true/false, or strings (optionally double-quoted). Unknown keys are errors.
void apply_config_text(ToolkitConfig& config, std::string_view text, std::string_view origin = "config");
ToolkitConfig load_config(const std::filesystem::path& path);

// Sets one field by its dotted name ("pipeline.tau"); used for command-line overrides.
void set_config_value(ToolkitConfig& config, std::string_view dotted_key, std::string_view value);

// Dotted names of every configurable field, in documentation order.
std::vector<std::string> config_keys();
// Introspection: {"pipeline.tau": 0.8, ...}.
nlohmann::json config_to_json(const ToolkitConfig& config);
// Round-trippable text form.
std::string config_to_text(const ToolkitConfig& config);

}  // namespace plumekit
