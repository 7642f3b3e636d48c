#include "plumekit/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "plumekit/error.hpp"
#include "plumekit/io.hpp"
#include "plumekit/random.hpp"

namespace plumekit {

using nlohmann::json;

namespace {

struct Builder {
  const std::vector<std::vector<double>>& x;
  const std::vector<int>& y;
  int max_depth;
  int max_features;
  Rng& rng;
  DecisionTree tree;

  double plume_fraction(std::span<const std::size_t> idx) const {
    std::size_t pos = 0;
    for (auto i : idx) pos += y[i] == 1;
    return static_cast<double>(pos) / static_cast<double>(idx.size());
  }

  int build(std::vector<std::size_t>& idx, int depth) {
    const int node = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    const double frac = plume_fraction(idx);
    if (depth >= max_depth || idx.size() < 2 || frac == 0.0 || frac == 1.0) {
      tree.nodes[node].p_plume = frac;
      return node;
    }

    // Candidate features: partial Fisher–Yates draw without replacement.
    const int p = static_cast<int>(x[0].size());
    std::vector<int> feats(static_cast<std::size_t>(p));
    std::iota(feats.begin(), feats.end(), 0);
    for (int k = 0; k < max_features; ++k) {
      std::uniform_int_distribution<int> pick(k, p - 1);
      std::swap(feats[k], feats[pick(rng)]);
    }

    const double n = static_cast<double>(idx.size());
    const double total_pos = frac * n;
    double best_gini = std::numeric_limits<double>::infinity();
    int best_feat = -1;
    double best_thr = 0.0;
    std::vector<std::size_t> order(idx);
    for (int k = 0; k < max_features; ++k) {
      const int f = feats[k];
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a][f] < x[b][f] || (x[a][f] == x[b][f] && a < b);
      });
      double left_pos = 0.0;
      for (std::size_t m = 0; m + 1 < order.size(); ++m) {
        left_pos += y[order[m]] == 1;
        const double lo = x[order[m]][f], hi = x[order[m + 1]][f];
        if (lo == hi) continue;
        const double nl = static_cast<double>(m + 1), nr = n - nl;
        const double pl = left_pos / nl, pr = (total_pos - left_pos) / nr;
        const double gini = nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr);
        if (gini < best_gini) {
          best_gini = gini;
          best_feat = f;
          best_thr = lo + 0.5 * (hi - lo);
          if (!(best_thr < hi)) best_thr = lo;  // midpoint rounding guard
        }
      }
    }
    if (best_feat < 0) {
      tree.nodes[node].p_plume = frac;
      return node;
    }

    std::vector<std::size_t> left, right;
    for (auto i : idx) (x[i][best_feat] <= best_thr ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    tree.nodes[node].feature = best_feat;
    tree.nodes[node].threshold = best_thr;
    tree.nodes[node].left = l;
    tree.nodes[node].right = r;
    return node;
  }
};

}  // namespace

double DecisionTree::predict(std::span<const double> x) const {
  int i = 0;
  while (!nodes[i].is_leaf()) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].p_plume;
}

void RandomForestModel::validate() const {
  if (trees.empty()) throw Error("forest model: no trees");
  if (feature_names.empty()) throw Error("forest model: no features");
  const int p = static_cast<int>(feature_names.size());
  for (const auto& t : trees) {
    if (t.nodes.empty()) throw Error("forest model: empty tree");
    const int n = static_cast<int>(t.nodes.size());
    for (const auto& nd : t.nodes) {
      if (nd.is_leaf()) {
        if (!(nd.p_plume >= 0.0 && nd.p_plume <= 1.0)) throw Error("forest model: leaf probability outside [0,1]");
      } else if (nd.feature >= p || nd.left <= 0 || nd.right <= 0 || nd.left >= n || nd.right >= n) {
        throw Error("forest model: malformed internal node");
      }
    }
  }
}

RandomForestModel rf_train(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           const RfParams& params, std::vector<std::string> feature_names) {
  if (x.empty() || x.size() != y.size()) throw Error("rf_train: feature and label counts differ or are zero");
  const std::size_t p = x[0].size();
  if (p == 0) throw Error("rf_train: no features");
  for (const auto& row : x) {
    if (row.size() != p) throw Error("rf_train: ragged feature matrix");
    for (double v : row)
      if (!std::isfinite(v)) throw Error("rf_train: non-finite feature value");
  }
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw Error("rf_train: labels must be 0 (artifact) or 1 (plume)");
    (v ? has1 : has0) = true;
  }
  if (!(has0 && has1)) throw Error("rf_train: need both classes (single-class input)");
  if (params.n_trees < 1 || params.max_depth < 0) throw Error("rf_train: n_trees >= 1 and max_depth >= 0 required");
  if (feature_names.empty())
    for (std::size_t k = 0; k < p; ++k) feature_names.push_back("f" + std::to_string(k));
  if (feature_names.size() != p) throw Error("rf_train: feature name count mismatch");

  const int max_features = params.max_features > 0
                               ? std::min<int>(params.max_features, static_cast<int>(p))
                               : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(p)))));
  const std::size_t n = x.size();
  RandomForestModel model;
  model.max_depth = params.max_depth;
  model.seed = params.seed;
  model.feature_names = std::move(feature_names);
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  std::vector<std::vector<std::uint8_t>> in_bag(static_cast<std::size_t>(params.n_trees));

  auto grow = [&](int t) {
    Rng rng(derive_seed(params.seed, "tree", static_cast<std::uint64_t>(t)));
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<std::size_t> idx(n);
    auto& bag = in_bag[static_cast<std::size_t>(t)];
    bag.assign(n, 0);
    for (auto& i : idx) bag[i = draw(rng)] = 1;
    Builder b{x, y, params.max_depth, max_features, rng, {}};
    b.build(idx, 0);
    model.trees[static_cast<std::size_t>(t)] = std::move(b.tree);
  };
  if (params.threads <= 1) {
    for (int t = 0; t < params.n_trees; ++t) grow(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int k = 0; k < std::min(params.threads, params.n_trees); ++k)
      pool.emplace_back([&] {
        for (int t; (t = next++) < params.n_trees;) grow(t);
      });
    for (auto& th : pool) th.join();
  }

  std::size_t scored = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    int votes = 0;
    for (int t = 0; t < params.n_trees; ++t)
      if (!in_bag[static_cast<std::size_t>(t)][i]) {
        sum += model.trees[static_cast<std::size_t>(t)].predict(x[i]);
        ++votes;
      }
    if (votes == 0) continue;
    ++scored;
    correct += ((sum / votes > 0.5) ? 1 : 0) == y[i];
  }
  if (scored > 0) model.oob_accuracy = static_cast<double>(correct) / static_cast<double>(scored);
  return model;
}

RfPrediction rf_predict(const RandomForestModel& model, std::span<const double> features) {
  if (features.size() != model.n_features())
    throw Error("rf_predict: expected " + std::to_string(model.n_features()) + " features, got " +
                std::to_string(features.size()));
  if (model.trees.empty()) throw Error("rf_predict: model has no trees");
  double sum = 0.0;
  for (const auto& t : model.trees) sum += t.predict(features);
  RfPrediction out;
  out.probability = sum / static_cast<double>(model.trees.size());
  out.cls = out.probability > 0.5 ? QndClass::plume : QndClass::artifact;
  return out;
}

json model_to_json(const RandomForestModel& model) {
  json trees = json::array();
  for (const auto& t : model.trees) {
    json nodes = json::array();
    for (const auto& nd : t.nodes) {
      if (nd.is_leaf())
        nodes.push_back({{"p", {1.0 - nd.p_plume, nd.p_plume}}});
      else
        nodes.push_back({{"f", nd.feature}, {"t", nd.threshold}, {"l", nd.left}, {"r", nd.right}});
    }
    trees.push_back(nodes);
  }
  return json{{"version", 1},
              {"feature_order", model.feature_names},
              {"classes", {"artifact", "plume"}},
              {"n_trees", model.trees.size()},
              {"max_depth", model.max_depth},
              {"seed", model.seed},
              {"oob_accuracy", model.oob_accuracy},
              {"trees", trees}};
}

RandomForestModel model_from_json(const json& j) {
  RandomForestModel m;
  try {
    if (j.at("version").get<int>() != 1) throw Error("forest model: unsupported version");
    m.feature_names = j.at("feature_order").get<std::vector<std::string>>();
    m.max_depth = j.value("max_depth", 0);
    m.seed = j.value("seed", std::uint64_t{0});
    m.oob_accuracy = j.value("oob_accuracy", -1.0);
    for (const auto& jt : j.at("trees")) {
      DecisionTree t;
      for (const auto& jn : jt) {
        TreeNode nd;
        if (jn.contains("p")) {
          const auto pr = jn["p"].get<std::vector<double>>();
          if (pr.size() != 2 || std::abs(pr[0] + pr[1] - 1.0) > 1e-9)
            throw Error("forest model: leaf probabilities must sum to 1");
          nd.p_plume = pr[1];
        } else {
          nd.feature = jn.at("f").get<int>();
          nd.threshold = jn.at("t").get<double>();
          nd.left = jn.at("l").get<int>();
          nd.right = jn.at("r").get<int>();
        }
        t.nodes.push_back(nd);
      }
      m.trees.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("forest model: ") + e.what());
  }
  m.validate();
  return m;
}

void save_model(const RandomForestModel& model, const std::filesystem::path& path) {
  write_json_file(path, model_to_json(model));
}

RandomForestModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(read_json_file(path));
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.find(path.string()) != std::string::npos) throw;
    throw Error("'" + path.string() + "': " + msg);
  }
}

}  // namespace plumekit
