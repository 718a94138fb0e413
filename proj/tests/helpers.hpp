#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "meltmap/ensembles.hpp"
#include "meltmap/error.hpp"
#include "meltmap/model_zoo.hpp"
#include "meltmap/polyfit.hpp"
#include "meltmap/numerics.hpp"
#include "oracles.hpp"

namespace test {

inline meltmap::DenseMatrix to_matrix(const oracle::Rows& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return meltmap::DenseMatrix(rows.size(), rows.empty() ? 0 : rows.front().size(), std::move(flat));
}

// Runs f and returns the error code it raised; fails the check if it returned.
template <class F>
meltmap::ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const meltmap::Error& e) {
    return e.code();
  }
  throw std::logic_error("expected a meltmap::Error");
}

inline double rel_err(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

inline std::string data_path(const std::string& name) { return std::string(MELTMAP_TEST_DATA_DIR) + "/" + name; }

// Same split structure as the oracle tree, walked in pre-order.
inline bool same_tree(const meltmap::RegressionTree& tree, const std::vector<oracle::Node>& ref) {
  const auto& nodes = tree.nodes();
  auto walk = [&](auto&& self, int a, int b) -> bool {
    const auto& n = nodes[static_cast<std::size_t>(a)];
    const auto& o = ref[static_cast<std::size_t>(b)];
    if (n.samples != o.rows.size()) return false;
    if (n.is_leaf() != (o.left < 0)) return false;
    if (n.is_leaf()) return true;
    if (n.feature != o.split.feature || n.threshold != o.split.threshold) return false;
    return self(self, n.left, o.left) && self(self, n.right, o.right);
  };
  return walk(walk, 0, 0);
}

// SSE of the partition the fitted tree induces on its training rows, computed
// by the oracle's own two-pass formula so equal partitions give equal bits.
inline double partition_sse(const meltmap::RegressionTree& tree, const oracle::Rows& x, const std::vector<double>& y) {
  std::map<int, std::vector<std::size_t>> leaves;
  const auto& nodes = tree.nodes();
  for (std::size_t i = 0; i < x.size(); ++i) {
    int at = 0;
    while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(at)];
      at = x[i][static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    leaves[at].push_back(i);
  }
  double s = 0.0;
  for (const auto& [id, rows] : leaves) s += oracle::sse(y, rows);
  return s;
}

// Random small regression problem; half the draws use a coarse integer grid so
// duplicate feature values and tied splits are common.
struct SmallProblem {
  oracle::Rows x;
  std::vector<double> y;
};

inline SmallProblem small_problem(std::mt19937_64& rng, std::size_t max_n = 8, std::size_t max_d = 3) {
  std::uniform_int_distribution<std::size_t> n_pick(2, max_n), d_pick(1, max_d);
  const auto n = n_pick(rng), d = d_pick(rng);
  const bool coarse = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  std::uniform_int_distribution<int> grid(0, 4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SmallProblem p;
  p.x.assign(n, std::vector<double>(d));
  for (auto& row : p.x)
    for (auto& v : row) v = coarse ? grid(rng) : u(rng);
  for (std::size_t i = 0; i < n; ++i) p.y.push_back(coarse ? grid(rng) : 10.0 * u(rng));
  return p;
}

// One zoo entry in the golden transcription format:
// "id: +170.3876 1 | +0.7513 P | ... | -3.46e-7 V^3". Constants the source prints
// without a monomial follow the intercept.
inline std::string golden_line(const meltmap::ZooEntry& entry) {
  using namespace meltmap;
  const FormatOptions tab{4, CoefficientStyle::tabulated, false};
  auto token = [&](double c, const std::string& label) {
    return std::string(c < 0 ? "-" : "+") + format_coefficient(std::abs(c), tab) + " " + label;
  };
  std::string out = entry.id + ":";
  const auto& terms = entry.equation.terms();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    out += i ? " | " : " ";
    const bool constant = i == 0;
    out += token(terms[i].coefficient,
                 constant ? "1" : term_label(entry.equation.base_features(), terms[i].exponents, LabelStyle::ascii));
    if (constant) {
      for (double extra : entry.unattributed_constants) out += " | " + token(extra, "1");
    }
  }
  return out;
}

}  // namespace test
