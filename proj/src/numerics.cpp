#include "meltmap/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "meltmap/error.hpp"

namespace meltmap {
namespace {

void check_finite(double value) {
  if (!std::isfinite(value)) fail(ErrorCode::domain_error, "DenseMatrix: non-finite value");
}

void check_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    fail(ErrorCode::contract_violation, std::string(what) + ": length mismatch (" +
                                            std::to_string(a.size()) + " vs " +
                                            std::to_string(b.size()) + ")");
  }
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorCode::contract_violation, "DenseMatrix: data length " + std::to_string(data_.size()) +
                                            " != " + std::to_string(rows_) + "x" +
                                            std::to_string(cols_));
  }
  std::for_each(data_.begin(), data_.end(), check_finite);
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, "DenseMatrix: ragged initializer");
    for (double v : r) {
      check_finite(v);
      data_.push_back(v);
    }
  }
}

void DenseMatrix::set(std::size_t r, std::size_t c, double value) {
  check_finite(value);
  data_[r * cols_ + c] = value;
}

std::vector<double> DenseMatrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t.data_[c * rows_ + r] = (*this)(r, c);
  return t;
}

DenseMatrix DenseMatrix::select_rows(std::span<const std::size_t> indices) const {
  DenseMatrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < rows_, "DenseMatrix::select_rows: index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

LeastSquaresSolution solve_least_squares(const DenseMatrix& design, std::span<const double> target) {
  const auto n = design.rows();
  const auto p = design.cols();
  if (n == 0 || p == 0) fail(ErrorCode::contract_violation, "solve_least_squares: empty design");
  if (target.size() != n) {
    fail(ErrorCode::contract_violation, "solve_least_squares: design has " + std::to_string(n) +
                                            " rows but target has " +
                                            std::to_string(target.size()) + " entries");
  }
  for (double v : target) {
    if (!std::isfinite(v)) fail(ErrorCode::domain_error, "solve_least_squares: non-finite target");
  }

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::MatrixXd a =
      Eigen::Map<const RowMajor>(design.data().data(), static_cast<Eigen::Index>(n),
                                 static_cast<Eigen::Index>(p));
  const Eigen::VectorXd b =
      Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(n));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  const auto k = std::min(a.rows(), a.cols());
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  // R shares its singular values with the design, and is at most p x p.
  const Eigen::VectorXd sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();

  LeastSquaresSolution out;
  const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > kRankTolerance * sigma_max) ++out.rank;
  }
  out.smallest_singular_ratio =
      (sigma_max > 0.0 && static_cast<std::size_t>(sigma.size()) == p) ? sigma(sigma.size() - 1) / sigma_max
                                                                       : 0.0;
  out.rank_deficient = out.rank < p;

  Eigen::VectorXd x;
  if (!out.rank_deficient) {
    x = qr.solve(b);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kRankTolerance);
    x = svd.solve(b);
  }
  out.coefficients.assign(x.data(), x.data() + x.size());
  return out;
}

std::vector<double> multiply(const DenseMatrix& a, std::span<const double> x) {
  require(a.cols() == x.size(), "multiply: dimension mismatch");
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
  return out;
}

double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
  check_same_length(y_true, y_pred, "r_squared");
  if (y_true.size() < 2) fail(ErrorCode::contract_violation, "r_squared: need at least 2 samples");
  const double mu = mean(y_true);
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_tot += (y_true[i] - mu) * (y_true[i] - mu);
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
  }
  if (ss_tot == 0.0) {
    fail(ErrorCode::domain_error, "r_squared: target is constant (zero total sum of squares)");
  }
  return 1.0 - ss_res / ss_tot;
}

double mean_absolute_error(std::span<const double> y_true, std::span<const double> y_pred) {
  check_same_length(y_true, y_pred, "mean_absolute_error");
  if (y_true.empty()) fail(ErrorCode::contract_violation, "mean_absolute_error: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) acc += std::abs(y_true[i] - y_pred[i]);
  return acc / static_cast<double>(y_true.size());
}

MetricPair score(std::span<const double> y_true, std::span<const double> y_pred) {
  return {r_squared(y_true, y_pred), mean_absolute_error(y_true, y_pred)};
}

EvalReport make_report(std::span<const double> y_train, std::span<const double> pred_train,
                       std::span<const double> y_test, std::span<const double> pred_test) {
  const auto train = score(y_train, pred_train);
  const auto test = score(y_test, pred_test);
  return {train.r_squared, test.r_squared, train.mae, test.mae};
}

CorrelationMatrix pearson_correlation_matrix(std::span<const NamedColumn> columns) {
  if (columns.empty()) fail(ErrorCode::contract_violation, "pearson_correlation_matrix: no columns");
  const auto n = columns.front().values.size();
  if (n < 2) fail(ErrorCode::contract_violation, "pearson_correlation_matrix: need at least 2 rows");

  const auto m = columns.size();
  std::vector<std::vector<double>> centered(m);
  std::vector<double> norms(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& col = columns[j].values;
    if (col.size() != n) {
      fail(ErrorCode::contract_violation,
           "pearson_correlation_matrix: column '" + columns[j].name + "' has a different length");
    }
    const double mu = mean(col);
    centered[j].resize(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      centered[j][i] = col[i] - mu;
      ss += centered[j][i] * centered[j][i];
    }
    if (ss == 0.0) {
      fail(ErrorCode::domain_error,
           "pearson_correlation_matrix: column '" + columns[j].name + "' has zero variance");
    }
    norms[j] = std::sqrt(ss);
  }

  CorrelationMatrix out{{}, DenseMatrix(m, m)};
  for (const auto& c : columns) out.names.push_back(c.name);
  for (std::size_t a = 0; a < m; ++a) {
    out.values.set(a, a, 1.0);
    for (std::size_t b = a + 1; b < m; ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += centered[a][i] * centered[b][i];
      const double rho = std::clamp(dot / (norms[a] * norms[b]), -1.0, 1.0);
      out.values.set(a, b, rho);
      out.values.set(b, a, rho);
    }
  }
  return out;
}

}  // namespace meltmap
