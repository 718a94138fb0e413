#include "meltmap/ensembles.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "meltmap/error.hpp"

namespace meltmap {
namespace {

// Relative slack under which two candidate SSEs count as equal.
constexpr double kSseTieTolerance = 1e-12;

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double sse = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const DenseMatrix& x, std::span<const double> y, const CartOptions& options)
      : x_(x), y_(y), options_(options), rng_(options.seed) {}

  RegressionTree build() {
    std::vector<std::size_t> all(x_.rows());
    std::iota(all.begin(), all.end(), 0);
    grow(std::move(all), 0);
    return RegressionTree(std::move(nodes_), options_.max_depth, options_.min_leaf);
  }

 private:
  // Sums in ascending value order so the result depends only on the multiset.
  double node_mean(const std::vector<std::size_t>& idx) const {
    std::vector<double> v;
    v.reserve(idx.size());
    for (auto i : idx) v.push_back(y_[i]);
    std::sort(v.begin(), v.end());
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }

  int grow(std::vector<std::size_t> idx, unsigned depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    const double mean = node_mean(idx);
    nodes_[id].value = mean;
    nodes_[id].samples = idx.size();

    double node_sse = 0.0;
    for (auto i : idx) node_sse += (y_[i] - mean) * (y_[i] - mean);

    if (depth >= options_.max_depth || idx.size() < 2 * static_cast<std::size_t>(options_.min_leaf) ||
        node_sse == 0.0) {
      return id;
    }
    const auto choice = find_split(idx, mean, node_sse);
    if (choice.feature < 0 || !(choice.sse < node_sse - kSseTieTolerance * node_sse)) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx) {
      (x_(i, static_cast<std::size_t>(choice.feature)) <= choice.threshold ? left : right).push_back(i);
    }
    nodes_[id].feature = choice.feature;
    nodes_[id].threshold = choice.threshold;
    const int l = grow(std::move(left), depth + 1);
    nodes_[id].left = l;
    const int r = grow(std::move(right), depth + 1);
    nodes_[id].right = r;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    const auto d = x_.cols();
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    const auto k = options_.feature_subset;
    if (k > 0 && k < d) {
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, d - 1);
        std::swap(features[i], features[pick(rng_)]);
      }
      features.resize(k);
      std::sort(features.begin(), features.end());
    }
    return features;
  }

  SplitChoice find_split(const std::vector<std::size_t>& idx, double mean, double node_sse) {
    SplitChoice best;
    best.sse = node_sse;
    const auto n = idx.size();
    const auto min_leaf = static_cast<std::size_t>(options_.min_leaf);
    std::vector<std::pair<double, double>> pairs(n);  // (feature value, centered target)

    for (auto f : candidate_features()) {
      for (std::size_t i = 0; i < n; ++i) pairs[i] = {x_(idx[i], f), y_[idx[i]] - mean};
      std::sort(pairs.begin(), pairs.end());
      if (pairs.front().first == pairs.back().first) continue;

      double total = 0.0, total_sq = 0.0;
      for (const auto& [xv, yv] : pairs) {
        total += yv;
        total_sq += yv * yv;
      }
      auto consider = [&](std::size_t n_left, double sum_l, double sq_l, double threshold) {
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf || n_right < min_leaf) return;
        const double sum_r = total - sum_l;
        const double sq_r = total_sq - sq_l;
        const double sse = std::max(0.0, sq_l - sum_l * sum_l / static_cast<double>(n_left)) +
                           std::max(0.0, sq_r - sum_r * sum_r / static_cast<double>(n_right));
        if (sse < best.sse - kSseTieTolerance * node_sse) {
          best = {static_cast<int>(f), threshold, sse};
        }
      };

      if (options_.mode == SplitMode::best) {
        double sum_l = 0.0, sq_l = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          sum_l += pairs[i].second;
          sq_l += pairs[i].second * pairs[i].second;
          const double a = pairs[i].first;
          const double b = pairs[i + 1].first;
          if (a == b) continue;
          double mid = a + (b - a) / 2.0;
          if (!(mid < b)) mid = a;
          consider(i + 1, sum_l, sq_l, mid);
        }
      } else {
        std::uniform_real_distribution<double> draw(pairs.front().first, pairs.back().first);
        const double threshold = draw(rng_);
        double sum_l = 0.0, sq_l = 0.0;
        std::size_t n_left = 0;
        while (n_left < n && pairs[n_left].first <= threshold) {
          sum_l += pairs[n_left].second;
          sq_l += pairs[n_left].second * pairs[n_left].second;
          ++n_left;
        }
        if (n_left > 0 && n_left < n) consider(n_left, sum_l, sq_l, threshold);
      }
    }
    return best;
  }

  const DenseMatrix& x_;
  std::span<const double> y_;
  CartOptions options_;
  std::mt19937_64 rng_;
  std::vector<TreeNode> nodes_;
};

// Runs body(i) for i in [0, n) on a few worker threads; each index writes its own slot.
template <class Body>
void parallel_for(std::size_t n, Body body) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<std::size_t> bootstrap(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pick(rng);
  return out;
}

double mean_squared(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

}  // namespace

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, unsigned max_depth, unsigned min_leaf)
    : nodes_(std::move(nodes)), max_depth_(max_depth), min_leaf_(min_leaf) {
  require(!nodes_.empty(), "RegressionTree: no nodes");
  const auto count = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (!node.is_leaf()) {
      require(node.left > 0 && node.left < count && node.right > 0 && node.right < count,
              "RegressionTree: child index out of range");
    }
  }
}

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  for (std::size_t guard = 0; guard <= nodes_.size(); ++guard) {
    const auto& node = nodes_[i];
    if (node.is_leaf()) return node.value;
    require(static_cast<std::size_t>(node.feature) < x.size(), "RegressionTree::predict: input too short");
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                              : node.right);
  }
  fail(ErrorCode::contract_violation, "RegressionTree::predict: cycle in node graph");
}

unsigned RegressionTree::depth() const {
  std::vector<std::pair<std::size_t, unsigned>> stack{{0, 0}};
  unsigned deepest = 0;
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes_[i].is_leaf()) {
      stack.push_back({static_cast<std::size_t>(nodes_[i].left), d + 1});
      stack.push_back({static_cast<std::size_t>(nodes_[i].right), d + 1});
    }
  }
  return deepest;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
}

RegressionTree fit_cart(const DenseMatrix& x, std::span<const double> y, const CartOptions& options) {
  if (x.rows() == 0 || x.cols() == 0) fail(ErrorCode::contract_violation, "fit_cart: empty data");
  if (x.rows() != y.size()) fail(ErrorCode::contract_violation, "fit_cart: X rows != |y|");
  if (options.max_depth < 1) fail(ErrorCode::contract_violation, "fit_cart: max_depth must be >= 1");
  if (options.min_leaf < 1) fail(ErrorCode::contract_violation, "fit_cart: min_leaf must be >= 1");
  for (double v : y) {
    if (!std::isfinite(v)) fail(ErrorCode::domain_error, "fit_cart: non-finite target");
  }
  return TreeBuilder(x, y, options).build();
}

std::string_view family_name(Family family) {
  switch (family) {
    case Family::random_forest: return "random_forest";
    case Family::extra_trees: return "extra_trees";
    case Family::bagging: return "bagging";
    case Family::gradient_boost: return "gradient_boost";
    case Family::knn: return "knn";
  }
  return "unknown";
}

std::optional<Family> parse_family(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "random_forest" || t == "rf") return Family::random_forest;
  if (t == "extra_trees" || t == "et" || t == "extratree" || t == "extratrees") return Family::extra_trees;
  if (t == "bagging" || t == "bag") return Family::bagging;
  if (t == "gradient_boost" || t == "gb") return Family::gradient_boost;
  if (t == "knn") return Family::knn;
  return std::nullopt;
}

void EnsembleConfig::validate() const {
  const auto name = std::string(family_name(family));
  const bool trees = family != Family::knn;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::contract_violation, "EnsembleConfig(" + name + "): " + what);
  };
  check(trees == n_estimators.has_value(), trees ? "n_estimators is required" : "n_estimators does not apply");
  check(trees == max_depth.has_value(), trees ? "max_depth is required" : "max_depth does not apply");
  check(!trees == n_neighbors.has_value(), trees ? "n_neighbors does not apply" : "n_neighbors is required");
  const bool boost = family == Family::gradient_boost;
  check(boost == learning_rate.has_value(),
        boost ? "learning_rate is required" : "learning_rate applies to gradient_boost only");
  if (n_estimators) check(*n_estimators >= 1, "n_estimators must be >= 1");
  if (max_depth) check(*max_depth >= 1, "max_depth must be >= 1");
  if (n_neighbors) check(*n_neighbors >= 1, "n_neighbors must be >= 1");
  if (learning_rate) check(*learning_rate > 0.0 && *learning_rate <= 1.0, "learning_rate must lie in (0, 1]");
  check(min_leaf >= 1, "min_leaf must be >= 1");
}

double FittedModel::predict(std::span<const double> x) const {
  switch (config.family) {
    case Family::knn:
      return knn_predict(knn_inputs, knn_targets, x, *config.n_neighbors);
    case Family::gradient_boost: {
      double f = initial_prediction;
      for (const auto& t : trees) f += *config.learning_rate * t.predict(x);
      return f;
    }
    default: {
      double acc = 0.0;
      for (const auto& t : trees) acc += t.predict(x);
      return acc / static_cast<double>(trees.size());
    }
  }
}

std::vector<double> FittedModel::predict(const DenseMatrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict(x.row(r));
  return out;
}

FittedModel fit_ensemble(const DenseMatrix& x, std::span<const double> y, const EnsembleConfig& config) {
  config.validate();
  if (x.rows() == 0) fail(ErrorCode::contract_violation, "fit_ensemble: empty data");
  if (x.rows() != y.size()) fail(ErrorCode::contract_violation, "fit_ensemble: X rows != |y|");

  FittedModel model;
  model.config = config;
  const auto n = x.rows();
  const auto d = x.cols();

  if (config.family == Family::knn) {
    if (*config.n_neighbors > n) {
      fail(ErrorCode::contract_violation, "fit_ensemble: n_neighbors exceeds the training size");
    }
    model.knn_inputs = x;
    model.knn_targets.assign(y.begin(), y.end());
    return model;
  }

  const auto members = *config.n_estimators;
  CartOptions base{*config.max_depth, config.min_leaf, SplitMode::best, 0, 0};

  if (config.family == Family::gradient_boost) {
    std::vector<double> f(n, std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n));
    model.initial_prediction = f.front();
    model.stage_train_mse.push_back(mean_squared(y, f));
    std::vector<double> residual(n);
    for (unsigned m = 0; m < members; ++m) {
      for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - f[i];
      base.seed = config.seed + m;
      auto tree = fit_cart(x, residual, base);
      for (std::size_t i = 0; i < n; ++i) f[i] += *config.learning_rate * tree.predict(x.row(i));
      model.stage_train_mse.push_back(mean_squared(y, f));
      model.trees.push_back(std::move(tree));
    }
    return model;
  }

  model.trees.resize(members);
  parallel_for(members, [&](std::size_t m) {
    std::mt19937_64 rng(config.seed + m);
    CartOptions options = base;
    if (config.family == Family::extra_trees) {
      options.mode = SplitMode::random_threshold;
      options.seed = rng();
      model.trees[m] = fit_cart(x, y, options);
      return;
    }
    if (config.family == Family::random_forest) options.feature_subset = (d + 1) / 2;
    const auto sample = bootstrap(n, rng);
    options.seed = rng();
    std::vector<double> ys;
    ys.reserve(n);
    for (auto i : sample) ys.push_back(y[i]);
    model.trees[m] = fit_cart(x.select_rows(sample), ys, options);
  });
  return model;
}

double knn_predict(const DenseMatrix& x_train, std::span<const double> y_train,
                   std::span<const double> query, std::size_t k) {
  const auto n = x_train.rows();
  if (n != y_train.size()) fail(ErrorCode::contract_violation, "knn_predict: X rows != |y|");
  if (k == 0 || k > n) {
    fail(ErrorCode::contract_violation,
         "knn_predict: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
  if (query.size() != x_train.cols()) fail(ErrorCode::contract_violation, "knn_predict: query dimension mismatch");

  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = x_train.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += (row[c] - query[c]) * (row[c] - query[c]);
    dist[r] = {acc, r};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += y_train[dist[i].second];
  return acc / static_cast<double>(k);
}

EvalReport evaluate_model(const FittedModel& model, const DenseMatrix& x_train,
                          std::span<const double> y_train, const DenseMatrix& x_test,
                          std::span<const double> y_test) {
  return make_report(y_train, model.predict(x_train), y_test, model.predict(x_test));
}

}  // namespace meltmap
