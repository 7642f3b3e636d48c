#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plumekit/config.hpp"
#include "plumekit/eval.hpp"
#include "plumekit/probmap.hpp"
#include "plumekit/qnd.hpp"

namespace plumekit {

// Synthetic scene for a given derived seed, using the config's synth section.
SyntheticScene synthesize(const ToolkitConfig& config, std::uint64_t scene_seed);

// Oracle detector over the planned windows.
DetectionSet detect(const SceneGrid& scene, const ToolkitConfig& config);

std::vector<BinaryMask> label_masks(const std::vector<PlumeLabel>& labels);

// One labeled classifier example: features of a high-sensitivity detection, labeled
// plume (1) when it matches a ground-truth plume at IoU > theta, artifact (0) otherwise.
// Detections without a hotspot core yield no example.
struct TrainingRow {
  QndFeatures features{};
  int label = 0;
};
std::vector<TrainingRow> training_rows(const SceneGrid& scene, const DetectionSet& raw,
                                       const std::vector<BinaryMask>& truths, const ToolkitConfig& config);

std::string training_rows_to_csv(const std::vector<TrainingRow>& rows);
std::vector<TrainingRow> training_rows_from_csv(const std::string& text);

RandomForestModel train_classifier(const std::vector<TrainingRow>& rows, const RfParams& params);

// Labeled rows from `config.train_scenes` synthetic scenes whose seeds derive from
// config.seed (disjoint from evaluation scenes).
std::vector<TrainingRow> synthetic_training_rows(const ToolkitConfig& config);

// Trains on `config.train_scenes` synthetic scenes whose seeds derive from config.seed
// (disjoint from evaluation scenes).
RandomForestModel train_on_synthetic(const ToolkitConfig& config);
// Same forest parameters and seed, on rows already produced by synthetic_training_rows.
RandomForestModel train_on_synthetic(const ToolkitConfig& config, const std::vector<TrainingRow>& rows);

// Classifier or size floor for high-precision mode, loading or training as configured.
std::optional<RandomForestModel> high_precision_classifier(const ToolkitConfig& config);

struct PipelineResult {
  SceneGrid scene;
  std::vector<PlumeLabel> labels;
  bool has_labels = false;
  DetectionSet raw;
  std::vector<Instance> final;
  ModeTrace trace;
  std::optional<MetricsReport> report;
  std::optional<PixelMetrics> pixel;
  ProbabilityGrid probability;
  std::vector<SweepRow> sweep_rows;
};

// Scene (synthetic or loaded) -> windows -> post-processing -> evaluation -> probability
// map -> threshold sweeps. Pure; see write_pipeline_outputs for the files.
PipelineResult run_pipeline(const ToolkitConfig& config);

// Writes scene.sgrid, labels.json, detections_raw.json, detections.json, report.json,
// probmap.pgrid and sweep.csv under config.out_dir.
void write_pipeline_outputs(const PipelineResult& result, const ToolkitConfig& config);

// Detections the probability map aggregates: post-tau, optionally post-NMS.
std::vector<Instance> probmap_inputs(const std::vector<Instance>& raw, const ToolkitConfig& config);

// Default sweep grids used by the pipeline.
std::vector<double> default_sweep_grid(SweepParam param);

}  // namespace plumekit
