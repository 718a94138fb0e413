#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace meltmap {

/// Row-major dense matrix of finite doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  void set(std::size_t r, std::size_t c, double value);

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double> column(std::size_t c) const;

  DenseMatrix transpose() const;
  DenseMatrix select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kRankTolerance = 1e-10;

struct LeastSquaresSolution {
  std::vector<double> coefficients;
  std::size_t rank = 0;
  bool rank_deficient = false;
  double smallest_singular_ratio = 0.0;  // sigma_min / sigma_max
};

// Minimum-norm minimizer of ||design * beta - target||_2.
LeastSquaresSolution solve_least_squares(const DenseMatrix& design, std::span<const double> target);

std::vector<double> multiply(const DenseMatrix& a, std::span<const double> x);

double r_squared(std::span<const double> y_true, std::span<const double> y_pred);
double mean_absolute_error(std::span<const double> y_true, std::span<const double> y_pred);

struct MetricPair {
  double r_squared = 0.0;
  double mae = 0.0;
};

MetricPair score(std::span<const double> y_true, std::span<const double> y_pred);

/// Train/test R^2 and MAE of one fitted model.
struct EvalReport {
  double r2_train = 0.0;
  double r2_test = 0.0;
  double mae_train = 0.0;
  double mae_test = 0.0;
};

EvalReport make_report(std::span<const double> y_train, std::span<const double> pred_train,
                       std::span<const double> y_test, std::span<const double> pred_test);

struct NamedColumn {
  std::string name;
  std::vector<double> values;
};

struct CorrelationMatrix {
  std::vector<std::string> names;
  DenseMatrix values;
};

CorrelationMatrix pearson_correlation_matrix(std::span<const NamedColumn> columns);

}  // namespace meltmap
