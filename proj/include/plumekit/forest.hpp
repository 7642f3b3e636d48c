#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace plumekit {

enum class QndClass { artifact = 0, plume = 1 };

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double p_plume = 0.0;  // leaf class probability; P(artifact) = 1 - p_plume

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(std::span<const double> x) const;  // P(plume)
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct RfParams {
  int n_trees = 200;
  int max_depth = 12;
  std::uint64_t seed = 7;
  int max_features = 0;  // 0 = floor(sqrt(n_features)), at least 1
  int threads = 1;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  int max_depth = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;
  double oob_accuracy = -1.0;  // -1 when no sample was ever out of bag

  std::size_t n_features() const { return feature_names.size(); }
  void validate() const;
  friend bool operator==(const RandomForestModel&, const RandomForestModel&) = default;
};

struct RfPrediction {
  QndClass cls = QndClass::artifact;
  double probability = 0.0;  // P(plume)
};

// CART trees with Gini splits on bootstrap samples of size n, sqrt(p) candidate features
// per node. y holds 1 for plume and 0 for artifact. Deterministic for a fixed seed.
RandomForestModel rf_train(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           const RfParams& params, std::vector<std::string> feature_names = {});

// Probability = mean of per-tree leaf probabilities; plume iff probability > 0.5.
RfPrediction rf_predict(const RandomForestModel& model, std::span<const double> features);

nlohmann::json model_to_json(const RandomForestModel& model);
RandomForestModel model_from_json(const nlohmann::json& j);
void save_model(const RandomForestModel& model, const std::filesystem::path& path);
RandomForestModel load_model(const std::filesystem::path& path);

}  // namespace plumekit
