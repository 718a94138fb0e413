#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "meltmap/numerics.hpp"

namespace meltmap {

enum class SplitMode { best, random_threshold };

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean training target reaching the node
  std::size_t samples = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  // nodes[0] is the root; children are referenced by index.
  RegressionTree(std::vector<TreeNode> nodes, unsigned max_depth, unsigned min_leaf);

  double predict(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  unsigned max_depth() const noexcept { return max_depth_; }
  unsigned min_leaf() const noexcept { return min_leaf_; }
  // Longest root-to-leaf path, in edges.
  unsigned depth() const;
  std::size_t leaf_count() const;

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
  unsigned max_depth_ = 0;
  unsigned min_leaf_ = 1;
};

struct CartOptions {
  unsigned max_depth = 1;
  unsigned min_leaf = 1;
  SplitMode mode = SplitMode::best;
  std::size_t feature_subset = 0;  // features tried per split; 0 = all
  std::uint64_t seed = 0;
};

RegressionTree fit_cart(const DenseMatrix& x, std::span<const double> y, const CartOptions& options);

enum class Family { random_forest, extra_trees, bagging, gradient_boost, knn };

std::string_view family_name(Family family);
// Accepts canonical names plus the short forms rf, et, extratree, gb, bag.
std::optional<Family> parse_family(std::string_view text);

struct EnsembleConfig {
  Family family = Family::random_forest;
  std::optional<unsigned> n_estimators;
  std::optional<unsigned> max_depth;
  std::optional<unsigned> n_neighbors;
  std::optional<double> learning_rate;
  std::uint64_t seed = 42;
  unsigned min_leaf = 1;

  // Throws contract_violation unless exactly the family's fields are set and in range.
  void validate() const;

  friend bool operator==(const EnsembleConfig&, const EnsembleConfig&) = default;
};

inline constexpr double kDefaultLearningRate = 0.1;

struct FittedModel {
  EnsembleConfig config;
  std::vector<RegressionTree> trees;
  double initial_prediction = 0.0;       // gradient boosting F0
  std::vector<double> stage_train_mse;   // gradient boosting, F0 first
  DenseMatrix knn_inputs;
  std::vector<double> knn_targets;
  std::vector<std::string> feature_names;
  std::string target;

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const DenseMatrix& x) const;
};

FittedModel fit_ensemble(const DenseMatrix& x, std::span<const double> y, const EnsembleConfig& config);

// Mean target of the k nearest rows (Euclidean); equal distances prefer the lower row index.
double knn_predict(const DenseMatrix& x_train, std::span<const double> y_train,
                   std::span<const double> query, std::size_t k);

EvalReport evaluate_model(const FittedModel& model, const DenseMatrix& x_train,
                          std::span<const double> y_train, const DenseMatrix& x_test,
                          std::span<const double> y_test);

nlohmann::json model_to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& j);

}  // namespace meltmap
