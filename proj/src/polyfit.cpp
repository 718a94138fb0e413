#include "meltmap/polyfit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>

#include "meltmap/error.hpp"

namespace meltmap {
namespace {

void append_exponents(std::size_t dims, unsigned remaining, std::size_t var, Exponents& current,
                      std::vector<Exponents>& out) {
  if (var + 1 == dims) {
    current[var] = remaining;
    out.push_back(current);
    return;
  }
  for (unsigned e = remaining + 1; e-- > 0;) {
    current[var] = e;
    append_exponents(dims, remaining - e, var + 1, current, out);
  }
  current[var] = 0;
}

unsigned total_degree(const Exponents& e) { return std::accumulate(e.begin(), e.end(), 0u); }

// Integer power by repeated multiplication, exact for the small exponents used here.
double ipow(double base, unsigned exp) {
  double out = 1.0;
  for (unsigned i = 0; i < exp; ++i) out *= base;
  return out;
}

double binomial(unsigned n, unsigned k) {
  double out = 1.0;
  for (unsigned i = 1; i <= k; ++i) out = out * static_cast<double>(n - k + i) / static_cast<double>(i);
  return out;
}

// Polynomial fit in standardized inputs z = (x - center) / scale.
struct StandardizedFit {
  std::vector<double> center;
  std::vector<double> scale;
  unsigned degree = 0;
  std::vector<double> coefficients;  // graded-lex over z
  LeastSquaresSolution solution;

  std::vector<double> standardize(std::span<const double> x) const {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - center[i]) / scale[i];
    return z;
  }

  double predict(std::span<const double> x) const {
    const auto monomials = expand_monomials(standardize(x), degree);
    double acc = 0.0;
    for (std::size_t j = 0; j < monomials.size(); ++j) acc += coefficients[j] * monomials[j];
    return acc;
  }

  std::vector<double> predict(const DenseMatrix& inputs) const {
    std::vector<double> out(inputs.rows());
    for (std::size_t r = 0; r < inputs.rows(); ++r) out[r] = predict(inputs.row(r));
    return out;
  }

  // Expands each standardized monomial back into the raw basis via the binomial theorem.
  std::vector<double> raw_coefficients() const {
    const auto dims = center.size();
    const auto exps = monomial_exponents(dims, degree);
    std::map<Exponents, std::size_t> index;
    for (std::size_t j = 0; j < exps.size(); ++j) index.emplace(exps[j], j);

    // factor[i][e][k]: coefficient of x_i^k in ((x_i - c_i) / s_i)^e.
    std::vector<std::vector<std::vector<double>>> factor(dims);
    for (std::size_t i = 0; i < dims; ++i) {
      factor[i].resize(degree + 1);
      for (unsigned e = 0; e <= degree; ++e) {
        factor[i][e].resize(e + 1);
        const double inv = 1.0 / ipow(scale[i], e);
        for (unsigned k = 0; k <= e; ++k) {
          factor[i][e][k] = binomial(e, k) * ipow(-center[i], e - k) * inv;
        }
      }
    }

    std::vector<double> raw(exps.size(), 0.0);
    Exponents target(dims, 0);
    for (std::size_t j = 0; j < exps.size(); ++j) {
      const double c = coefficients[j];
      if (c == 0.0) continue;
      const auto& e = exps[j];
      // Walk every f <= e componentwise.
      std::fill(target.begin(), target.end(), 0u);
      while (true) {
        double w = c;
        for (std::size_t i = 0; i < dims; ++i) w *= factor[i][e[i]][target[i]];
        raw[index.at(target)] += w;
        std::size_t i = 0;
        while (i < dims && target[i] == e[i]) target[i++] = 0;
        if (i == dims) break;
        ++target[i];
      }
    }
    return raw;
  }
};

StandardizedFit fit_standardized(const DenseMatrix& inputs, std::span<const double> y,
                                 unsigned degree) {
  const auto n = inputs.rows();
  const auto d = inputs.cols();
  if (n < 2) fail(ErrorCode::contract_violation, "fit_polynomial: need at least 2 samples");
  if (y.size() != n) fail(ErrorCode::contract_violation, "fit_polynomial: target length mismatch");
  if (d == 0) fail(ErrorCode::contract_violation, "fit_polynomial: no input features");
  if (degree < 1 || degree > kMaxDegree) {
    fail(ErrorCode::contract_violation, "fit_polynomial: degree must lie in [1, 10]");
  }

  StandardizedFit fit;
  fit.degree = degree;
  fit.center.resize(d);
  fit.scale.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = inputs.column(j);
    const double mu = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : col) ss += (v - mu) * (v - mu);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    fit.center[j] = mu;
    fit.scale[j] = sd > 0.0 ? sd : 1.0;
  }

  const auto p = monomial_count(d, degree);
  std::vector<double> z_design;
  z_design.reserve(n * p);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = expand_monomials(fit.standardize(inputs.row(r)), degree);
    z_design.insert(z_design.end(), row.begin(), row.end());
  }
  fit.solution = solve_least_squares(DenseMatrix(n, p, std::move(z_design)), y);
  fit.coefficients = fit.solution.coefficients;
  return fit;
}

std::string strip_zeros(std::string s) {
  const auto dot = s.find('.');
  if (dot == std::string::npos) return s;
  auto end = s.size();
  while (end > dot + 1 && s[end - 1] == '0') --end;
  if (end == dot + 1) --end;
  s.erase(end);
  return s;
}

// "%.Ne" output with the exponent reduced to its shortest signed form: 2.92e-4.
std::string scientific(double value, int mantissa_decimals, bool strip) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", mantissa_decimals, value);
  std::string s(buf);
  const auto epos = s.find('e');
  std::string mantissa = s.substr(0, epos);
  const int exponent = std::stoi(s.substr(epos + 1));
  if (strip) mantissa = strip_zeros(mantissa);
  return mantissa + "e" + std::to_string(exponent);
}

std::string superscript(unsigned value) {
  static const char* digits[] = {"⁰", "¹", "²", "³", "⁴", "⁵", "⁶", "⁷", "⁸", "⁹"};
  const auto text = std::to_string(value);
  std::string out;
  for (char c : text) out += digits[c - '0'];
  return out;
}

}  // namespace

std::size_t monomial_count(std::size_t dims, unsigned degree) {
  // C(degree + dims, dims) computed incrementally; exact for the sizes in use.
  std::size_t out = 1;
  for (std::size_t i = 1; i <= dims; ++i) out = out * (degree + i) / i;
  return out;
}

std::vector<Exponents> monomial_exponents(std::size_t dims, unsigned degree) {
  require(dims >= 1, "monomial_exponents: need at least one variable");
  std::vector<Exponents> out;
  out.reserve(monomial_count(dims, degree));
  Exponents current(dims, 0);
  for (unsigned k = 0; k <= degree; ++k) append_exponents(dims, k, 0, current, out);
  return out;
}

std::vector<double> expand_monomials(std::span<const double> x, unsigned degree) {
  require(!x.empty(), "expand_monomials: empty input");
  require(degree >= 1 && degree <= kMaxDegree, "expand_monomials: degree must lie in [1, 10]");
  const auto exps = monomial_exponents(x.size(), degree);
  std::vector<double> out;
  out.reserve(exps.size());
  for (const auto& e : exps) {
    double v = 1.0;
    for (std::size_t i = 0; i < e.size(); ++i) v *= ipow(x[i], e[i]);
    out.push_back(v);
  }
  return out;
}

SymbolicEquation::SymbolicEquation(std::string target, std::vector<std::string> base_features,
                                   unsigned degree, std::vector<Term> terms,
                                   std::optional<FitDiagnostics> diagnostics)
    : target_(std::move(target)),
      base_features_(std::move(base_features)),
      degree_(degree),
      diagnostics_(diagnostics) {
  const auto d = base_features_.size();
  if (d == 0) fail(ErrorCode::contract_violation, "SymbolicEquation: no base features");
  if (degree_ > kMaxDegree) fail(ErrorCode::contract_violation, "SymbolicEquation: degree above 10");
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (base_features_[i] == base_features_[j]) {
        fail(ErrorCode::contract_violation, "SymbolicEquation: duplicate base feature " + base_features_[i]);
      }
    }
  }
  const auto exps = degree_ == 0 ? std::vector<Exponents>{Exponents(d, 0)}
                                 : monomial_exponents(d, degree_);
  std::map<Exponents, std::size_t> index;
  for (std::size_t j = 0; j < exps.size(); ++j) index.emplace(exps[j], j);

  std::vector<std::optional<double>> slots(exps.size());
  for (auto& t : terms) {
    if (t.exponents.size() != d) {
      fail(ErrorCode::contract_violation, "SymbolicEquation: exponent vector has wrong length");
    }
    if (total_degree(t.exponents) > degree_) {
      fail(ErrorCode::contract_violation, "SymbolicEquation: term exceeds the equation degree");
    }
    if (!std::isfinite(t.coefficient)) {
      fail(ErrorCode::domain_error, "SymbolicEquation: non-finite coefficient");
    }
    auto& slot = slots[index.at(t.exponents)];
    if (slot) fail(ErrorCode::contract_violation, "SymbolicEquation: duplicate exponent vector");
    slot = t.coefficient;
  }
  terms_.reserve(exps.size());
  for (std::size_t j = 0; j < exps.size(); ++j) {
    if (!slots[j]) {
      fail(ErrorCode::contract_violation,
           "SymbolicEquation: missing term " + term_label(base_features_, exps[j], LabelStyle::ascii));
    }
    terms_.push_back({exps[j], *slots[j]});
  }
}

SymbolicEquation SymbolicEquation::from_coefficients(std::string target,
                                                     std::vector<std::string> base_features,
                                                     unsigned degree,
                                                     std::span<const double> coefficients) {
  const auto exps = monomial_exponents(base_features.size(), degree);
  if (coefficients.size() != exps.size()) {
    fail(ErrorCode::contract_violation, "SymbolicEquation: expected " + std::to_string(exps.size()) +
                                            " coefficients, got " +
                                            std::to_string(coefficients.size()));
  }
  std::vector<Term> terms;
  for (std::size_t j = 0; j < exps.size(); ++j) terms.push_back({exps[j], coefficients[j]});
  return SymbolicEquation(std::move(target), std::move(base_features), degree, std::move(terms));
}

std::vector<double> SymbolicEquation::coefficients() const {
  std::vector<double> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) out.push_back(t.coefficient);
  return out;
}

double SymbolicEquation::evaluate(std::span<const double> x) const {
  if (x.size() != base_features_.size()) {
    fail(ErrorCode::contract_violation, "evaluate: expected " + std::to_string(base_features_.size()) +
                                            " inputs, got " + std::to_string(x.size()));
  }
  double sum = 0.0;
  for (const auto& t : terms_) {
    double product = t.coefficient;
    for (std::size_t i = 0; i < x.size(); ++i) product *= ipow(x[i], t.exponents[i]);
    sum += product;
  }
  return sum;
}

double SymbolicEquation::evaluate(const std::map<std::string, double>& named) const {
  std::vector<double> x;
  x.reserve(base_features_.size());
  for (const auto& name : base_features_) {
    const auto it = named.find(name);
    if (it == named.end()) fail(ErrorCode::contract_violation, "evaluate: missing value for " + name);
    x.push_back(it->second);
  }
  return evaluate(x);
}

FeatureSpec feature_spec_of(const SymbolicEquation& eq) {
  std::vector<FeatureEntry> entries;
  for (const auto& name : eq.base_features()) entries.push_back(parse_feature_entry(name));
  return FeatureSpec(std::move(entries));
}

double evaluate_from_fields(const SymbolicEquation& eq, const std::map<Field, double>& fields) {
  const auto spec = feature_spec_of(eq);
  std::vector<double> x;
  for (const auto& entry : spec.entries()) {
    const auto it = fields.find(entry.field);
    if (it == fields.end()) {
      fail(ErrorCode::contract_violation,
           "missing input '" + std::string(field_name(entry.field)) + "' for " + eq.target());
    }
    x.push_back(entry.apply(it->second));
  }
  return eq.evaluate(x);
}

SymbolicEquation fit_polynomial(const DenseMatrix& inputs, std::span<const double> target,
                                std::vector<std::string> base_features, std::string target_name,
                                unsigned degree) {
  require(base_features.size() == inputs.cols(), "fit_polynomial: feature name count mismatch");
  const auto fit = fit_standardized(inputs, target, degree);
  const auto predictions = fit.predict(inputs);
  FitDiagnostics diagnostics{r_squared(target, predictions), fit.solution.rank_deficient,
                             fit.solution.rank};
  auto eq = SymbolicEquation::from_coefficients(std::move(target_name), std::move(base_features),
                                                degree, fit.raw_coefficients());
  return SymbolicEquation(eq.target(), eq.base_features(), eq.degree(), eq.terms(), diagnostics);
}

SymbolicEquation fit_polynomial(const Dataset& dataset, const FeatureSpec& spec, Field target,
                                unsigned degree) {
  const auto design = build_design(dataset, spec);
  const auto y = dataset.column(target);
  return fit_polynomial(design.matrix, y, design.names, std::string(field_name(target)), degree);
}

std::string format_coefficient(double value, const FormatOptions& options) {
  char buf[64];
  if (options.style == CoefficientStyle::tabulated) {
    if (value == 0.0) return "0.0000";
    if (std::abs(value) >= 1e-3) {
      std::snprintf(buf, sizeof buf, "%.4f", value);
      return buf;
    }
    return scientific(value, 2, false);
  }
  const int digits = std::clamp(options.significant_digits, 1, 17);
  if (value == 0.0) return "0";
  std::snprintf(buf, sizeof buf, "%.*e", digits - 1, value);
  const int exponent = std::stoi(std::string(buf).substr(std::string(buf).find('e') + 1));
  if (exponent < -3 || exponent >= 15) return scientific(value, digits - 1, true);
  std::snprintf(buf, sizeof buf, "%.*f", std::max(0, digits - 1 - exponent), value);
  return strip_zeros(buf);
}

std::string feature_symbol(const std::string& base_feature) {
  std::string_view name = base_feature;
  std::string prefix;
  if (name.size() > 4 && (name.substr(0, 4) == "log_" || name.substr(0, 4) == "LOG_" ||
                          name.substr(0, 4) == "Log_")) {
    prefix = "log ";
    name.remove_prefix(4);
  }
  const auto field = parse_field(name);
  if (!field) return base_feature;
  switch (*field) {
    case Field::power: return prefix + "P";
    case Field::velocity: return prefix + "V";
    case Field::length: return prefix + "L";
    case Field::width: return prefix + "W";
    case Field::depth: return prefix + "D";
    default: return base_feature;
  }
}

std::string term_label(const std::vector<std::string>& base_features, const Exponents& exponents,
                       LabelStyle style) {
  std::string out;
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    const auto e = exponents[i];
    if (e == 0) continue;
    auto symbol = feature_symbol(base_features[i]);
    const bool compound = symbol.find(' ') != std::string::npos;
    if (style == LabelStyle::ascii) {
      symbol.erase(std::remove(symbol.begin(), symbol.end(), ' '), symbol.end());
      if (!out.empty()) out += '*';
      out += symbol;
      if (e > 1) out += "^" + std::to_string(e);
    } else {
      if (!out.empty()) out += "·";
      if (e > 1) {
        out += compound ? "(" + symbol + ")" : symbol;
        out += superscript(e);
      } else {
        out += symbol;
      }
    }
  }
  return out.empty() ? "1" : out;
}

std::string equation_to_string(const SymbolicEquation& eq, const FormatOptions& options) {
  std::string out;
  for (const auto& t : eq.terms()) {
    if (options.elide_zero && t.coefficient == 0.0) continue;
    const bool negative = std::signbit(t.coefficient) && t.coefficient != 0.0;
    const auto magnitude = format_coefficient(std::abs(t.coefficient), options);
    const bool constant = total_degree(t.exponents) == 0;
    if (out.empty()) {
      if (negative) out += "−";
    } else {
      out += negative ? " − " : " + ";
    }
    out += magnitude;
    if (!constant) out += "·" + term_label(eq.base_features(), t.exponents, LabelStyle::pretty);
  }
  return out.empty() ? "0" : out;
}

ImportanceReport feature_importance(const SymbolicEquation& eq) {
  ImportanceReport report;
  double total = 0.0;
  for (const auto& t : eq.terms()) {
    if (total_degree(t.exponents) == 0) continue;
    total += std::abs(t.coefficient);
    report.entries.push_back({term_label(eq.base_features(), t.exponents), t.exponents,
                              std::abs(t.coefficient), 0.0});
  }
  if (report.entries.empty() || total == 0.0) {
    fail(ErrorCode::domain_error,
         "feature_importance: every non-intercept coefficient of " + eq.target() + " is zero");
  }
  for (auto& e : report.entries) e.percentage = 100.0 * e.abs_coefficient / total;
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const auto& a, const auto& b) { return a.percentage > b.percentage; });
  return report;
}

DegreeSelection select_degree(const Dataset& dataset, const FeatureSpec& spec, Field target,
                              std::span<const unsigned> degrees, double test_fraction,
                              std::uint64_t seed) {
  if (degrees.empty()) fail(ErrorCode::contract_violation, "select_degree: no candidate degrees");
  const auto [train_idx, test_idx] = split_indices(dataset.size(), test_fraction, seed);
  const auto design = build_design(dataset, spec);
  const auto y = dataset.column(target);
  const auto x_train = design.matrix.select_rows(train_idx);
  const auto x_test = design.matrix.select_rows(test_idx);
  std::vector<double> y_train, y_test;
  for (auto i : train_idx) y_train.push_back(y[i]);
  for (auto i : test_idx) y_test.push_back(y[i]);

  std::vector<std::future<DegreeReport>> jobs;
  for (unsigned degree : degrees) {
    jobs.push_back(std::async(std::launch::async, [&, degree] {
      const auto fit = fit_standardized(x_train, y_train, degree);
      return DegreeReport{degree,
                          make_report(y_train, fit.predict(x_train), y_test, fit.predict(x_test)),
                          fit.solution.rank_deficient};
    }));
  }
  std::vector<DegreeReport> reports;
  for (auto& j : jobs) reports.push_back(j.get());

  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const double delta = reports[i].report.r2_test - reports[best].report.r2_test;
    const bool lower = reports[i].degree < reports[best].degree;
    if (delta > kDegreeTieTolerance || (std::abs(delta) <= kDegreeTieTolerance && lower)) best = i;
  }
  const unsigned chosen = reports[best].degree;
  auto equation = fit_polynomial(x_train, y_train, design.names, std::string(field_name(target)), chosen);
  return {chosen, std::move(equation), std::move(reports)};
}

}  // namespace meltmap
