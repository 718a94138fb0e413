#include <functional>

#include "meltmap/ensembles.hpp"
#include "meltmap/error.hpp"

namespace meltmap {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "meltmap-model/1";

json node_to_json(const RegressionTree& tree, std::size_t i) {
  const auto& node = tree.nodes()[i];
  json out = {{"value", node.value}, {"samples", node.samples}};
  if (!node.is_leaf()) {
    out["feature"] = node.feature;
    out["threshold"] = node.threshold;
    out["left"] = node_to_json(tree, static_cast<std::size_t>(node.left));
    out["right"] = node_to_json(tree, static_cast<std::size_t>(node.right));
  }
  return out;
}

int node_from_json(const json& j, std::vector<TreeNode>& nodes, unsigned depth) {
  if (depth > 64) fail(ErrorCode::schema_error, "model JSON: tree nesting too deep");
  const int id = static_cast<int>(nodes.size());
  nodes.push_back({});
  nodes[id].value = j.at("value").get<double>();
  nodes[id].samples = j.value("samples", std::size_t{0});
  if (j.contains("feature")) {
    nodes[id].feature = j.at("feature").get<int>();
    if (nodes[id].feature < 0) fail(ErrorCode::schema_error, "model JSON: negative feature index");
    nodes[id].threshold = j.at("threshold").get<double>();
    const int l = node_from_json(j.at("left"), nodes, depth + 1);
    nodes[id].left = l;
    const int r = node_from_json(j.at("right"), nodes, depth + 1);
    nodes[id].right = r;
  }
  return id;
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

json model_to_json(const FittedModel& model) {
  const auto& c = model.config;
  json out = {
      {"format", kFormat},
      {"family", family_name(c.family)},
      {"config",
       {{"n_estimators", optional_json(c.n_estimators)},
        {"max_depth", optional_json(c.max_depth)},
        {"n_neighbors", optional_json(c.n_neighbors)},
        {"learning_rate", optional_json(c.learning_rate)},
        {"seed", c.seed},
        {"min_leaf", c.min_leaf}}},
      {"feature_names", model.feature_names},
      {"target", model.target},
  };
  if (c.family == Family::knn) {
    json rows = json::array();
    for (std::size_t r = 0; r < model.knn_inputs.rows(); ++r) {
      const auto row = model.knn_inputs.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    out["knn"] = {{"inputs", std::move(rows)}, {"targets", model.knn_targets}};
    return out;
  }
  if (c.family == Family::gradient_boost) {
    out["initial_prediction"] = model.initial_prediction;
    out["stage_train_mse"] = model.stage_train_mse;
  }
  json trees = json::array();
  for (const auto& t : model.trees) trees.push_back(node_to_json(t, 0));
  out["trees"] = std::move(trees);
  return out;
}

FittedModel model_from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != kFormat) {
      fail(ErrorCode::schema_error, std::string("model JSON: expected format '") + kFormat + "'");
    }
    FittedModel model;
    const auto family = parse_family(j.at("family").get<std::string>());
    if (!family) fail(ErrorCode::schema_error, "model JSON: unknown family");
    auto& c = model.config;
    const auto& cj = j.at("config");
    c.family = *family;
    c.n_estimators = optional_from<unsigned>(cj, "n_estimators");
    c.max_depth = optional_from<unsigned>(cj, "max_depth");
    c.n_neighbors = optional_from<unsigned>(cj, "n_neighbors");
    c.learning_rate = optional_from<double>(cj, "learning_rate");
    c.seed = cj.at("seed").get<std::uint64_t>();
    c.min_leaf = cj.at("min_leaf").get<unsigned>();
    c.validate();
    model.feature_names = j.value("feature_names", std::vector<std::string>{});
    model.target = j.value("target", std::string{});

    if (c.family == Family::knn) {
      const auto rows = j.at("knn").at("inputs").get<std::vector<std::vector<double>>>();
      model.knn_targets = j.at("knn").at("targets").get<std::vector<double>>();
      if (rows.size() != model.knn_targets.size() || rows.empty()) {
        fail(ErrorCode::schema_error, "model JSON: knn inputs/targets mismatch");
      }
      const auto d = rows.front().size();
      std::vector<double> flat;
      for (const auto& r : rows) {
        if (r.size() != d) fail(ErrorCode::schema_error, "model JSON: ragged knn inputs");
        flat.insert(flat.end(), r.begin(), r.end());
      }
      model.knn_inputs = DenseMatrix(rows.size(), d, std::move(flat));
      if (*c.n_neighbors > rows.size()) fail(ErrorCode::schema_error, "model JSON: n_neighbors > stored rows");
      return model;
    }
    if (c.family == Family::gradient_boost) {
      model.initial_prediction = j.at("initial_prediction").get<double>();
      model.stage_train_mse = j.value("stage_train_mse", std::vector<double>{});
    }
    for (const auto& tj : j.at("trees")) {
      std::vector<TreeNode> nodes;
      node_from_json(tj, nodes, 0);
      model.trees.emplace_back(std::move(nodes), *c.max_depth, c.min_leaf);
    }
    if (!model.feature_names.empty()) {
      for (const auto& tree : model.trees) {
        for (const auto& node : tree.nodes()) {
          if (!node.is_leaf() && static_cast<std::size_t>(node.feature) >= model.feature_names.size()) {
            fail(ErrorCode::schema_error, "model JSON: split on feature " + std::to_string(node.feature) +
                                              " but only " + std::to_string(model.feature_names.size()) +
                                              " features are named");
          }
        }
      }
    }
    if (model.trees.size() != *c.n_estimators) {
      fail(ErrorCode::schema_error, "model JSON: tree count differs from n_estimators");
    }
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_error, std::string("model JSON: ") + e.what());
  }
}

}  // namespace meltmap
