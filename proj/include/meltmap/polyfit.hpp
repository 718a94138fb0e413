#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meltmap/dataset.hpp"
#include "meltmap/numerics.hpp"

namespace meltmap {

using Exponents = std::vector<unsigned>;

inline constexpr unsigned kMaxDegree = 10;

// C(degree + dims, dims): number of monomials of total degree <= degree.
std::size_t monomial_count(std::size_t dims, unsigned degree);

// All exponent vectors of total degree <= degree in graded lexicographic order:
// constant first, then degree 1 (x0, x1, ...), then degree 2 (x0^2, x0 x1, ...).
std::vector<Exponents> monomial_exponents(std::size_t dims, unsigned degree);

std::vector<double> expand_monomials(std::span<const double> x, unsigned degree);

struct Term {
  Exponents exponents;
  double coefficient = 0.0;

  friend bool operator==(const Term&, const Term&) = default;
};

struct FitDiagnostics {
  double train_r2 = 0.0;
  bool rank_deficient = false;
  std::size_t rank = 0;

  friend bool operator==(const FitDiagnostics&, const FitDiagnostics&) = default;
};

/// A polynomial in named base features: intercept plus one coefficient per
/// monomial of total degree <= degree, stored in graded lexicographic order.
class SymbolicEquation {
 public:
  // Terms may arrive in any order; they must cover every monomial exactly once.
  SymbolicEquation(std::string target, std::vector<std::string> base_features, unsigned degree,
                   std::vector<Term> terms, std::optional<FitDiagnostics> diagnostics = std::nullopt);

  // Coefficients listed in graded lexicographic order, intercept first.
  static SymbolicEquation from_coefficients(std::string target,
                                            std::vector<std::string> base_features,
                                            unsigned degree, std::span<const double> coefficients);

  const std::string& target() const noexcept { return target_; }
  const std::vector<std::string>& base_features() const noexcept { return base_features_; }
  unsigned degree() const noexcept { return degree_; }
  const std::vector<Term>& terms() const noexcept { return terms_; }
  double intercept() const noexcept { return terms_.front().coefficient; }
  const std::optional<FitDiagnostics>& diagnostics() const noexcept { return diagnostics_; }
  std::vector<double> coefficients() const;

  // x holds base-feature values in base_features() order.
  double evaluate(std::span<const double> x) const;
  double evaluate(const std::map<std::string, double>& named) const;

  friend bool operator==(const SymbolicEquation&, const SymbolicEquation&) = default;

 private:
  std::string target_;
  std::vector<std::string> base_features_;
  unsigned degree_ = 0;
  std::vector<Term> terms_;
  std::optional<FitDiagnostics> diagnostics_;
};

// Evaluates an equation whose base features are design column names
// ("Power", "log_Velocity", ...) from raw record fields.
double evaluate_from_fields(const SymbolicEquation& eq, const std::map<Field, double>& fields);
FeatureSpec feature_spec_of(const SymbolicEquation& eq);

SymbolicEquation fit_polynomial(const DenseMatrix& inputs, std::span<const double> target,
                                std::vector<std::string> base_features, std::string target_name,
                                unsigned degree);
SymbolicEquation fit_polynomial(const Dataset& dataset, const FeatureSpec& spec, Field target,
                                unsigned degree);

enum class CoefficientStyle {
  significant,  // fixed number of significant digits
  tabulated,    // 4 decimals, or 3 significant digits in scientific form below 1e-3
};

struct FormatOptions {
  int significant_digits = 6;
  CoefficientStyle style = CoefficientStyle::significant;
  bool elide_zero = false;
};

std::string format_coefficient(double value, const FormatOptions& options);

// Short symbol for a base feature: Power -> P, log_Width -> "log W"; unknown names verbatim.
std::string feature_symbol(const std::string& base_feature);

enum class LabelStyle { pretty, ascii };

// pretty: "P²·V", "(log V)²"; ascii: "P^2*V", "logV^2".
std::string term_label(const std::vector<std::string>& base_features, const Exponents& exponents,
                       LabelStyle style = LabelStyle::pretty);

std::string equation_to_string(const SymbolicEquation& eq, const FormatOptions& options = {});

struct ImportanceEntry {
  std::string label;
  Exponents exponents;
  double abs_coefficient = 0.0;
  double percentage = 0.0;
};

struct ImportanceReport {
  std::vector<ImportanceEntry> entries;
};

ImportanceReport feature_importance(const SymbolicEquation& eq);

struct DegreeReport {
  unsigned degree = 0;
  EvalReport report;
  bool rank_deficient = false;
};

struct DegreeSelection {
  unsigned chosen_degree = 0;
  SymbolicEquation equation;
  std::vector<DegreeReport> reports;
};

// Test R^2 values closer than this are treated as tied; the lower degree wins.
inline constexpr double kDegreeTieTolerance = 1e-9;

DegreeSelection select_degree(const Dataset& dataset, const FeatureSpec& spec, Field target,
                              std::span<const unsigned> degrees,
                              double test_fraction = kDefaultTestFraction,
                              std::uint64_t seed = kDefaultSeed);

}  // namespace meltmap
