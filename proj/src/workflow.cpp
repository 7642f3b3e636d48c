#include "plumekit/workflow.hpp"

#include <sstream>

#include "plumekit/io.hpp"
#include "plumekit/random.hpp"

namespace plumekit {

using nlohmann::json;

SyntheticScene synthesize(const ToolkitConfig& config, std::uint64_t scene_seed) {
  SynthConfig sc = config.synth;
  sc.seed = scene_seed;
  return generate_scene(sc);
}

DetectionSet detect(const SceneGrid& scene, const ToolkitConfig& config) {
  const OracleDetector oracle(config.oracle_k);
  return run_scene(scene, oracle, config.patch_size, config.overlap, config.threads);
}

std::vector<BinaryMask> label_masks(const std::vector<PlumeLabel>& labels) {
  std::vector<BinaryMask> out;
  for (const auto& l : labels) out.push_back(l.mask);
  return out;
}

std::vector<TrainingRow> training_rows(const SceneGrid& scene, const DetectionSet& raw,
                                       const std::vector<BinaryMask>& truths, const ToolkitConfig& config) {
  PipelineConfig hs = config.pipeline;
  hs.mode = Mode::high_sensitivity;
  hs.size_floor.reset();
  const auto dets = run_mode(raw.instances, scene, hs);
  const auto match = match_instances(dets, truths, config.theta);
  std::vector<int> is_plume(dets.size(), 0);
  for (const auto& p : match.pairs) is_plume[static_cast<std::size_t>(p.pred)] = 1;

  std::vector<TrainingRow> rows;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    try {
      rows.push_back({extract_features(scene, dets[i].mask, config.pipeline.core), is_plume[i]});
    } catch (const Error&) {
      // No hotspot core: the classifier never sees such detections.
    }
  }
  return rows;
}

std::string training_rows_to_csv(const std::vector<TrainingRow>& rows) {
  std::ostringstream os;
  for (const auto& n : qnd_feature_names()) os << n << ',';
  os << "label\n";
  for (const auto& r : rows) {
    for (double v : r.features) os << format_number(v) << ',';
    os << r.label << '\n';
  }
  return os.str();
}

std::vector<TrainingRow> training_rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("features csv: empty file");
  std::string expected;
  for (const auto& n : qnd_feature_names()) expected += n + ",";
  expected += "label";
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) throw Error("features csv: header must be '" + expected + "'");
  std::vector<TrainingRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != kQndFeatureCount + 1)
      throw Error("features csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " cells");
    TrainingRow r;
    try {
      for (int k = 0; k < kQndFeatureCount; ++k) r.features[k] = std::stod(cells[k]);
    } catch (const std::exception&) {
      throw Error("features csv: line " + std::to_string(lineno) + ": malformed number");
    }
    const std::string& lab = cells.back();
    if (lab == "1" || lab == "plume")
      r.label = 1;
    else if (lab == "0" || lab == "artifact")
      r.label = 0;
    else
      throw Error("features csv: line " + std::to_string(lineno) + ": label must be 1/plume or 0/artifact");
    rows.push_back(r);
  }
  return rows;
}

RandomForestModel train_classifier(const std::vector<TrainingRow>& rows, const RfParams& params) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (const auto& r : rows) {
    x.emplace_back(r.features.begin(), r.features.end());
    y.push_back(r.label);
  }
  const auto& names = qnd_feature_names();
  return rf_train(x, y, params, std::vector<std::string>(names.begin(), names.end()));
}

std::vector<TrainingRow> synthetic_training_rows(const ToolkitConfig& config) {
  if (config.train_scenes < 1) throw Error("training: qnd.train_scenes must be >= 1");
  std::vector<TrainingRow> rows;
  for (int s = 0; s < config.train_scenes; ++s) {
    const auto synth = synthesize(config, derive_seed(config.seed, "train-scene", static_cast<std::uint64_t>(s)));
    const auto raw = detect(synth.scene, config);
    const auto part = training_rows(synth.scene, raw, label_masks(synth.labels), config);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

RandomForestModel train_on_synthetic(const ToolkitConfig& config) {
  return train_on_synthetic(config, synthetic_training_rows(config));
}

RandomForestModel train_on_synthetic(const ToolkitConfig& config, const std::vector<TrainingRow>& rows) {
  long plumes = 0;
  for (const auto& r : rows) plumes += r.label;
  const long artifacts = static_cast<long>(rows.size()) - plumes;
  // Only detections with a hotspot core become rows; small scenes often yield no artifact row.
  if (plumes == 0 || artifacts == 0)
    throw Error("training: synthetic scenes gave " + std::to_string(plumes) + " plume and " +
                std::to_string(artifacts) +
                " artifact rows with a hotspot core; the classifier needs both. Use a size floor "
                "(--size-floor), a trained model (--qnd-model), or more/larger training scenes "
                "(qnd.train_scenes, synth.width/height)");
  RfParams params = config.forest;
  params.seed = derive_seed(config.seed, "forest");
  params.threads = std::max(params.threads, config.threads);
  return train_classifier(rows, params);
}

std::optional<RandomForestModel> high_precision_classifier(const ToolkitConfig& config) {
  if (config.pipeline.mode != Mode::high_precision || config.pipeline.size_floor) return std::nullopt;
  if (!config.model_path.empty()) return load_model(config.model_path);
  return train_on_synthetic(config);
}

std::vector<Instance> probmap_inputs(const std::vector<Instance>& raw, const ToolkitConfig& config) {
  auto dets = filter_confidence(raw, config.pipeline.tau);
  if (!config.probmap_pre_nms) dets = nms(dets, config.pipeline.delta);
  return dets;
}

std::vector<double> default_sweep_grid(SweepParam param) {
  switch (param) {
    case SweepParam::tau: return parse_grid("0:1:0.05");
    case SweepParam::delta: return parse_grid("0.05:0.6:0.05");
    case SweepParam::theta: return parse_grid("0.1:0.9:0.1");
  }
  throw Error("unknown sweep parameter");
}

PipelineResult run_pipeline(const ToolkitConfig& config) {
  config.pipeline.validate();
  PipelineResult res;
  if (!config.scene_path.empty()) {
    res.scene = load_scene(config.scene_path);
    if (!config.labels_path.empty()) {
      res.labels = labels_from_json(read_json_file(config.labels_path));
      res.has_labels = true;
    }
  } else {
    auto synth = synthesize(config, derive_seed(config.seed, "scene"));
    res.scene = std::move(synth.scene);
    res.labels = std::move(synth.labels);
    res.has_labels = true;
  }

  res.raw = detect(res.scene, config);
  const auto model = high_precision_classifier(config);
  const RandomForestModel* clf = model ? &*model : nullptr;
  res.final = run_mode(res.raw.instances, res.scene, config.pipeline, clf, &res.trace);
  res.probability = aggregate(probmap_inputs(res.raw.instances, config), res.scene.geometry);

  if (res.has_labels && !res.labels.empty()) {
    const auto truths = label_masks(res.labels);
    res.report = evaluate(res.final, truths, config.theta, config.pipeline);
    res.pixel = pixel_metrics(union_semantic(res.final), union_semantic(truths));
    for (auto p : {SweepParam::tau, SweepParam::delta, SweepParam::theta}) {
      auto rows = sweep(res.raw.instances, truths, res.scene, config.pipeline, config.theta, p,
                        default_sweep_grid(p), clf);
      res.sweep_rows.insert(res.sweep_rows.end(), rows.begin(), rows.end());
    }
  }
  return res;
}

void write_pipeline_outputs(const PipelineResult& res, const ToolkitConfig& config) {
  const std::filesystem::path dir = config.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir.string() + "': " + ec.message());

  save_scene(res.scene, dir / "scene.sgrid");
  write_json_file(dir / "labels.json", labels_to_json(res.labels));
  save_detections(res.raw, dir / "detections_raw.json");
  save_detections(DetectionSet{res.scene.geometry, res.final}, dir / "detections.json");

  json cfg = config_to_json(config);
  cfg.erase("run.out");  // output location does not affect results
  json trace{{"confidence", res.trace.confidence},
             {"nms", res.trace.nms},
             {"fiber", res.trace.fiber},
             {"merge", res.trace.merge},
             {"high_precision", res.trace.high_precision}};
  json rep{{"raw_detections", res.raw.instances.size()},
           {"final_detections", res.final.size()},
           {"stage_counts", trace},
           {"instance", res.report ? report_to_json(*res.report) : json(nullptr)},
           {"pixel", res.pixel ? pixel_metrics_to_json(*res.pixel) : json(nullptr)},
           {"config", cfg}};
  write_json_file(dir / "report.json", rep);
  save_probmap(res.probability, dir / "probmap.pgrid");
  write_text_file(dir / "sweep.csv", sweep_csv(res.sweep_rows));
}

}  // namespace plumekit
