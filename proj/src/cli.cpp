#include "plumekit/cli.hpp"

#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "plumekit/io.hpp"
#include "plumekit/random.hpp"
#include "plumekit/version.hpp"
#include "plumekit/workflow.hpp"

namespace plumekit {

using nlohmann::json;

namespace {

// Usage problems found after parsing (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Flags that override one configuration field each; applied after the config file.
class Overrides {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = slots_.emplace_back(std::make_unique<Slot>());
    slot->key = key;
    slot->opt = app->add_option(flag, slot->value, help);
  }
  CLI::Option* option(const std::string& key) const {
    for (const auto& s : slots_)
      if (s->key == key) return s->opt;
    return nullptr;
  }
  void apply(ToolkitConfig& c) const {
    for (const auto& s : slots_)
      if (s->opt->count() > 0) set_config_value(c, s->key, s->value);
  }

 private:
  struct Slot {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
  };
  std::vector<std::unique_ptr<Slot>> slots_;
};

ToolkitConfig resolve(const std::string& config_path, const Overrides& ov) {
  ToolkitConfig c = config_path.empty() ? ToolkitConfig{} : load_config(config_path);
  ov.apply(c);
  return c;
}

void add_pipeline_overrides(CLI::App* app, Overrides& ov) {
  ov.add(app, "--mode", "pipeline.mode", "baseline | high-sensitivity | high-precision");
  ov.add(app, "--tau", "pipeline.tau", "confidence threshold");
  ov.add(app, "--delta", "pipeline.delta", "NMS IoU threshold");
  ov.add(app, "--fiber-ratio", "pipeline.fiber_ratio", "maximum fiber / major-axis ratio");
  ov.add(app, "--size-floor", "pipeline.size_floor", "high-precision size floor (px^2) instead of the classifier");
  ov.add(app, "--qnd-model", "qnd.model", "trained QND classifier (model JSON)");
  ov.option("pipeline.size_floor")->excludes(ov.option("qnd.model"));
}

void require_hp_filter(const ToolkitConfig& c) {
  if (c.pipeline.mode != Mode::high_precision) return;
  if (c.pipeline.size_floor && !c.model_path.empty())
    throw UsageError("high-precision mode takes either a size floor or a QND model, not both");
}

std::string summary_line(const MetricsReport& r) {
  std::ostringstream os;
  os << "TP=" << r.tp << " FP=" << r.fp << " FN=" << r.fn << " precision=" << format_number(r.precision)
     << " recall=" << format_number(r.recall) << " f1=" << format_number(r.f1) << " mAP=" << format_number(r.map);
  return os.str();
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"plumekit: scene-level methane plume detection toolkit"};
  app.set_version_flag("--version", std::string("plumekit ") + kVersion + " (sgrid " + std::to_string(kSgridVersion) +
                                        ", pgrid " + std::to_string(kPgridVersion) + ", detections " +
                                        std::to_string(kDetectionSchemaVersion) + ", model " +
                                        std::to_string(kModelSchemaVersion) + ")");
  app.require_subcommand(1);
  std::function<void()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic scene");
  std::string synth_cfg;
  Overrides synth_ov;
  synth->add_option("--config", synth_cfg, "configuration file");
  synth_ov.add(synth, "--seed", "run.seed", "random seed");
  synth_ov.add(synth, "--out", "run.out", "output directory");
  synth->callback([&] {
    action = [&] {
      const auto c = resolve(synth_cfg, synth_ov);
      const auto s = synthesize(c, derive_seed(c.seed, "scene"));
      const std::filesystem::path dir = c.out_dir;
      std::filesystem::create_directories(dir);
      save_scene(s.scene, dir / "scene.sgrid");
      write_json_file(dir / "labels.json", labels_to_json(s.labels));
      write_json_file(dir / "artifacts.json", artifacts_to_json(s.artifacts));
      std::cout << "synth: " << c.synth.geometry.height << "x" << c.synth.geometry.width << " scene, "
                << s.labels.size() << " plumes, " << s.artifacts.size() << " artifacts -> " << dir.string() << "\n";
    };
  });

  // run
  auto* run = app.add_subcommand("run", "sliding-window detection over a scene");
  std::string run_cfg, run_scene_path, run_detector = "oracle", run_out;
  Overrides run_ov;
  run->add_option("--config", run_cfg, "configuration file");
  run->add_option("--scene", run_scene_path, "scene file (SGRID)")->required();
  run->add_option("--detector", run_detector, "oracle | import:<detections.json>");
  run_ov.add(run, "--patch-size", "tiler.patch_size", "window size (px)");
  run_ov.add(run, "--overlap", "tiler.overlap", "window overlap ratio");
  run_ov.add(run, "--k", "oracle.k", "oracle threshold (window z-score)");
  run_ov.add(run, "--threads", "tiler.threads", "worker threads for window evaluation");
  run->add_option("--out", run_out, "output detections JSON")->required();
  run->callback([&] {
    action = [&] {
      const auto c = resolve(run_cfg, run_ov);
      const auto scene = load_scene(run_scene_path);
      DetectionSet dets;
      if (run_detector == "oracle") {
        dets = detect(scene, c);
      } else if (run_detector.rfind("import:", 0) == 0) {
        dets = import_detections(run_detector.substr(7), scene.geometry);
      } else {
        throw UsageError("--detector must be 'oracle' or 'import:<file>'");
      }
      save_detections(dets, run_out);
      std::cout << "run: " << dets.instances.size() << " detections -> " << run_out << "\n";
    };
  });

  // postprocess
  auto* post = app.add_subcommand("postprocess", "apply an operating mode to detections");
  std::string post_cfg, post_in, post_scene, post_out;
  Overrides post_ov;
  post->add_option("--config", post_cfg, "configuration file");
  add_pipeline_overrides(post, post_ov);
  post->add_option("--in", post_in, "input detections JSON")->required();
  post->add_option("--scene", post_scene, "scene file (SGRID)")->required();
  post->add_option("--out", post_out, "output detections JSON")->required();
  post->callback([&] {
    action = [&] {
      auto c = resolve(post_cfg, post_ov);
      require_hp_filter(c);
      if (c.pipeline.mode == Mode::high_precision && !c.pipeline.size_floor && c.model_path.empty())
        throw UsageError("high-precision mode needs --size-floor or --qnd-model");
      const auto scene = load_scene(post_scene);
      const auto dets = import_detections(post_in, scene.geometry);
      std::optional<RandomForestModel> model;
      if (c.pipeline.mode == Mode::high_precision && !c.pipeline.size_floor) model = load_model(c.model_path);
      ModeTrace trace;
      const auto out = run_mode(dets.instances, scene, c.pipeline, model ? &*model : nullptr, &trace);
      save_detections({scene.geometry, out}, post_out);
      std::cout << "postprocess (" << mode_name(c.pipeline.mode) << "): " << dets.instances.size() << " -> "
                << out.size() << " detections -> " << post_out << "\n";
    };
  });

  // qnd-features
  auto* feats = app.add_subcommand("qnd-features", "labeled QND feature rows for classifier training");
  std::string feats_cfg, feats_in, feats_scene, feats_labels, feats_out;
  Overrides feats_ov;
  feats->add_option("--config", feats_cfg, "configuration file");
  feats->add_option("--in", feats_in, "raw detections JSON (high-sensitivity mode is applied)")->required();
  feats->add_option("--scene", feats_scene, "scene file (SGRID)")->required();
  feats->add_option("--labels", feats_labels, "ground-truth labels JSON")->required();
  feats_ov.add(feats, "--theta", "pipeline.theta", "matching IoU threshold");
  feats->add_option("--out", feats_out, "output CSV")->required();
  feats->callback([&] {
    action = [&] {
      const auto c = resolve(feats_cfg, feats_ov);
      const auto scene = load_scene(feats_scene);
      const auto dets = import_detections(feats_in, scene.geometry);
      const auto labels = labels_from_json(read_json_file(feats_labels));
      const auto rows = training_rows(scene, dets, label_masks(labels), c);
      write_text_file(feats_out, training_rows_to_csv(rows));
      std::cout << "qnd-features: " << rows.size() << " rows -> " << feats_out << "\n";
    };
  });

  // qnd-train
  auto* train = app.add_subcommand("qnd-train", "train the random-forest artifact classifier");
  std::string train_features, train_out;
  RfParams train_params;
  train->add_option("--features", train_features, "feature CSV (qnd-features output)")->required();
  train->add_option("--out", train_out, "output model JSON")->required();
  train->add_option("--seed", train_params.seed, "random seed");
  train->add_option("--trees", train_params.n_trees, "number of trees")->check(CLI::PositiveNumber);
  train->add_option("--max-depth", train_params.max_depth, "maximum tree depth")->check(CLI::NonNegativeNumber);
  train->callback([&] {
    action = [&] {
      const auto rows = training_rows_from_csv(read_text_file(train_features));
      const auto model = train_classifier(rows, train_params);
      save_model(model, train_out);
      std::cout << "qnd-train: " << rows.size() << " rows, " << model.trees.size()
                << " trees, out-of-bag accuracy " << format_number(model.oob_accuracy) << " -> " << train_out << "\n";
    };
  });

  // qnd-classify
  auto* classify = app.add_subcommand("qnd-classify", "classify detections as plume or artifact");
  std::string cls_model, cls_in, cls_scene, cls_out, cls_cfg;
  classify->add_option("--config", cls_cfg, "configuration file");
  classify->add_option("--model", cls_model, "model JSON")->required();
  classify->add_option("--in", cls_in, "detections JSON")->required();
  classify->add_option("--scene", cls_scene, "scene file (SGRID)")->required();
  classify->add_option("--out", cls_out, "classification report JSON");
  classify->callback([&] {
    action = [&] {
      const auto c = resolve(cls_cfg, Overrides{});
      const auto model = load_model(cls_model);
      const auto scene = load_scene(cls_scene);
      const auto dets = import_detections(cls_in, scene.geometry);
      json out = json::array();
      std::size_t plumes = 0;
      for (const auto& d : dets.instances) {
        json e{{"id", d.id}};
        try {
          const auto f = extract_features(scene, d.mask, c.pipeline.core);
          const auto p = rf_predict(model, f);
          e["class"] = p.cls == QndClass::plume ? "plume" : "artifact";
          e["probability"] = p.probability;
          plumes += p.cls == QndClass::plume;
        } catch (const Error& err) {
          e["class"] = "artifact";
          e["reason"] = err.what();
        }
        out.push_back(e);
      }
      if (!cls_out.empty()) write_json_file(cls_out, out);
      std::cout << "qnd-classify: " << plumes << " plume, " << dets.instances.size() - plumes << " artifact\n";
    };
  });

  // probmap
  auto* prob = app.add_subcommand("probmap", "confidence-weighted plume probability map");
  std::string prob_cfg, prob_in, prob_scene, prob_out, prob_png, prob_report;
  Overrides prob_ov;
  prob->add_option("--config", prob_cfg, "configuration file");
  prob->add_option("--in", prob_in, "raw detections JSON")->required();
  prob->add_option("--scene", prob_scene, "scene file (SGRID)")->required();
  prob->add_option("--out", prob_out, "output PGRID file")->required();
  prob->add_option("--png", prob_png, "optional grayscale PNG render");
  prob->add_option("--report", prob_report, "optional correlation report JSON");
  prob_ov.add(prob, "--tau", "pipeline.tau", "confidence threshold applied before aggregation");
  prob_ov.add(prob, "--delta", "pipeline.delta", "NMS threshold (post-nms aggregation only)");
  prob_ov.add(prob, "--aggregate", "probmap.aggregate", "pre-nms | post-nms");
  prob->callback([&] {
    action = [&] {
      const auto c = resolve(prob_cfg, prob_ov);
      const auto scene = load_scene(prob_scene);
      const auto dets = import_detections(prob_in, scene.geometry);
      const auto p = aggregate(probmap_inputs(dets.instances, c), scene.geometry);
      save_probmap(p, prob_out);
      if (!prob_png.empty()) save_probmap_png(p, prob_png);
      std::cout << "probmap -> " << prob_out << "\n";
      if (!prob_report.empty()) {
        const auto r = correlation_report(p, scene);
        write_json_file(prob_report, json{{"pearson", r.pearson}, {"spearman", r.spearman}, {"n", r.n}});
        std::cout << "pearson=" << format_number(r.pearson) << " spearman=" << format_number(r.spearman)
                  << " n=" << r.n << "\n";
      }
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "instance and pixel metrics against ground truth");
  std::string ev_pred, ev_truth, ev_report;
  double ev_theta = kDefaultTheta;
  ev->add_option("--pred", ev_pred, "predicted detections JSON")->required();
  ev->add_option("--truth", ev_truth, "ground-truth labels JSON")->required();
  ev->add_option("--theta", ev_theta, "matching IoU threshold");
  ev->add_option("--report", ev_report, "output report JSON");
  ev->callback([&] {
    action = [&] {
      const auto dets = load_detections(ev_pred);
      const auto truths = label_masks(labels_from_json(read_json_file(ev_truth)));
      PipelineConfig pc;
      MetricsReport r = instance_metrics(match_instances(dets.instances, truths, ev_theta));
      r.theta = ev_theta;
      r.mode = "as-given";
      if (!truths.empty()) r.map = map_at_iou(dets.instances, truths, ev_theta);
      const auto px = pixel_metrics(union_semantic(dets.instances), union_semantic(truths));
      if (!ev_report.empty())
        write_json_file(ev_report, json{{"instance", report_to_json(r)}, {"pixel", pixel_metrics_to_json(px)}});
      std::cout << "eval: " << summary_line(r) << "\n";
    };
  });

  // sweep
  auto* sw = app.add_subcommand("sweep", "one-parameter threshold sweep");
  std::string sw_cfg, sw_param, sw_grid, sw_out, sw_in, sw_truth, sw_scene;
  Overrides sw_ov;
  sw->add_option("--config", sw_cfg, "configuration file");
  sw->add_option("--param", sw_param, "tau | delta | theta")->required();
  sw->add_option("--grid", sw_grid, "start:stop:step or comma list")->required();
  sw->add_option("--in", sw_in, "raw detections JSON")->required();
  sw->add_option("--truth", sw_truth, "ground-truth labels JSON")->required();
  sw->add_option("--scene", sw_scene, "scene file (SGRID)")->required();
  sw->add_option("--out", sw_out, "output CSV")->required();
  add_pipeline_overrides(sw, sw_ov);
  sw_ov.add(sw, "--theta", "pipeline.theta", "matching IoU threshold");
  sw->callback([&] {
    action = [&] {
      auto c = resolve(sw_cfg, sw_ov);
      require_hp_filter(c);
      SweepParam param;
      std::vector<double> grid;
      try {
        param = parse_sweep_param(sw_param);
        grid = parse_grid(sw_grid);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      const auto scene = load_scene(sw_scene);
      const auto dets = import_detections(sw_in, scene.geometry);
      const auto truths = label_masks(labels_from_json(read_json_file(sw_truth)));
      std::optional<RandomForestModel> model;
      if (c.pipeline.mode == Mode::high_precision && !c.pipeline.size_floor) {
        if (c.model_path.empty()) throw UsageError("high-precision sweeps need --size-floor or --qnd-model");
        model = load_model(c.model_path);
      }
      const auto rows = sweep(dets.instances, truths, scene, c.pipeline, c.theta, param, grid, model ? &*model : nullptr);
      write_text_file(sw_out, sweep_csv(rows));
      std::cout << "sweep: " << rows.size() << " rows -> " << sw_out << "\n";
    };
  });

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "synthesize/load, detect, post-process, evaluate, map");
  std::string pipe_cfg;
  Overrides pipe_ov;
  pipe->add_option("--config", pipe_cfg, "configuration file");
  add_pipeline_overrides(pipe, pipe_ov);
  pipe_ov.add(pipe, "--theta", "pipeline.theta", "matching IoU threshold");
  pipe_ov.add(pipe, "--seed", "run.seed", "random seed");
  pipe_ov.add(pipe, "--scene", "run.scene", "existing scene instead of a synthetic one");
  pipe_ov.add(pipe, "--labels", "run.labels", "ground truth for --scene");
  pipe_ov.add(pipe, "--out", "run.out", "output directory");
  pipe_ov.add(pipe, "--k", "oracle.k", "oracle threshold (window z-score)");
  pipe_ov.add(pipe, "--threads", "tiler.threads", "worker threads");
  pipe->callback([&] {
    action = [&] {
      const auto c = resolve(pipe_cfg, pipe_ov);
      require_hp_filter(c);
      const auto res = run_pipeline(c);
      write_pipeline_outputs(res, c);
      std::cout << "pipeline (" << mode_name(c.pipeline.mode) << "): " << res.raw.instances.size() << " raw -> "
                << res.final.size() << " detections\n";
      if (res.report) std::cout << "instances: " << summary_line(*res.report) << "\n";
      std::cout << "outputs in " << c.out_dir << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    if (action) action();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
}

}  // namespace plumekit
