#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "meltmap/equation_json.hpp"
#include "meltmap/model_zoo.hpp"
#include "meltmap/polyfit.hpp"
#include "meltmap/synthetic.hpp"

using namespace meltmap;
using test::code_of;

namespace {

const std::vector<std::string> kPV = {"Power", "Velocity"};

SymbolicEquation depth_equation() { return find_model("depth_pv").equation; }

// Exact grid of records with targets from f(P, V).
template <class F>
Dataset grid(F f, std::size_t np = 12, std::size_t nv = 12) {
  std::vector<ProcessMapRecord> rows;
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < nv; ++j) {
      ProcessMapRecord r{};
      r.power = 50.0 + 450.0 * static_cast<double>(i) / static_cast<double>(np - 1);
      r.velocity = 100.0 + 1900.0 * static_cast<double>(j) / static_cast<double>(nv - 1);
      r.depth = f(r.power, r.velocity);
      rows.push_back(r);
    }
  }
  return Dataset(rows, "synthetic grid");
}

}  // namespace

TEST_CASE("monomial expansion") {
  CHECK(monomial_count(2, 2) == 6);
  CHECK(monomial_count(2, 3) == 10);
  CHECK(monomial_count(3, 6) == 84);
  const double x[] = {2, 3};
  CHECK(expand_monomials(x, 2) == std::vector<double>{1, 2, 3, 4, 6, 9});
  CHECK(expand_monomials(x, 3).size() == 10);
  CHECK(monomial_exponents(2, 2) == std::vector<Exponents>{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}});
  const auto e3 = monomial_exponents(3, 2);
  CHECK(e3[4] == Exponents{2, 0, 0});
  CHECK(e3[5] == Exponents{1, 1, 0});
  CHECK(e3[9] == Exponents{0, 0, 2});
  CHECK(code_of([&] { expand_monomials(x, 0); }) == ErrorCode::contract_violation);
  CHECK(code_of([&] { expand_monomials(x, 11); }) == ErrorCode::contract_violation);
}

TEST_CASE("SymbolicEquation invariants") {
  const double c[] = {1, 2, 3};
  const auto eq = SymbolicEquation::from_coefficients("depth", kPV, 1, c);
  CHECK(eq.terms().size() == 3);
  CHECK(eq.intercept() == 1);
  CHECK(eq.coefficients() == std::vector<double>{1, 2, 3});

  // Any input order is canonicalized.
  const SymbolicEquation shuffled("depth", kPV, 1, {{{0, 1}, 3}, {{0, 0}, 1}, {{1, 0}, 2}});
  CHECK(shuffled == eq);

  CHECK(code_of([] { SymbolicEquation("d", kPV, 1, {{{0, 0}, 1}, {{1, 0}, 2}}); }) == ErrorCode::contract_violation);
  CHECK(code_of([] {
          SymbolicEquation("d", kPV, 1, {{{0, 0}, 1}, {{1, 0}, 2}, {{1, 0}, 2}});
        }) == ErrorCode::contract_violation);
  CHECK(code_of([] {
          SymbolicEquation("d", kPV, 1, {{{0, 0}, 1}, {{1, 0}, 2}, {{1, 1}, 2}});
        }) == ErrorCode::contract_violation);
  const double wrong[] = {1, 2};
  CHECK(code_of([&] { SymbolicEquation::from_coefficients("d", kPV, 1, wrong); }) == ErrorCode::contract_violation);
}

TEST_CASE("evaluation of published equations") {
  const auto depth = depth_equation();
  const double origin[] = {0, 0};
  CHECK(depth.evaluate(origin) == 53.7694);
  CHECK(find_model("length_pv").equation.evaluate(origin) == 170.3876);

  // Independent arithmetic over the six printed coefficients.
  const double p = 200, v = 800;
  const double expected = 53.7694 + 1.5055 * p - 0.3504 * v - 2.92e-4 * p * p - 7.54e-4 * p * v + 2.12e-4 * v * v;
  const double at[] = {p, v};
  CHECK(depth.evaluate(at) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(depth.evaluate(at) == doctest::Approx(77.9094).epsilon(1e-9));
  CHECK(depth.evaluate(std::map<std::string, double>{{"Power", p}, {"Velocity", v}}) == depth.evaluate(at));
  CHECK(code_of([&] { depth.evaluate(std::map<std::string, double>{{"Power", p}}); }) == ErrorCode::contract_violation);
  CHECK(evaluate_from_fields(depth, {{Field::power, p}, {Field::velocity, v}}) == depth.evaluate(at));
}

TEST_CASE("fit recovers a lower-degree truth exactly") {
  const auto ds = grid([](double p, double v) { return 1 + 2 * p + 3 * v; });
  const auto eq = fit_polynomial(ds, FeatureSpec::process_conditions(), Field::depth, 2);
  const std::vector<double> truth = {1, 2, 3, 0, 0, 0};
  const auto got = eq.coefficients();
  for (std::size_t i = 0; i < truth.size(); ++i) CHECK(std::abs(got[i] - truth[i]) <= 1e-8);
  REQUIRE(eq.diagnostics().has_value());
  CHECK(eq.diagnostics()->train_r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(eq.diagnostics()->rank_deficient);
}

TEST_CASE("fit: random low-degree truths are recovered to 1e-6 relative") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coef(-3, 3);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  for (std::size_t d = 1; d <= 3; ++d) {
    for (unsigned n = 1; n <= 4; ++n) {
      const auto m = monomial_count(d, n);
      std::vector<double> beta(m);
      for (auto& b : beta) b = coef(rng);
      const auto rows = oracle::random_rows(rng, 3 * m + 10, d, 0.5, 3.0);
      std::vector<double> y;
      for (const auto& r : rows) {
        const auto mono = expand_monomials(r, n);
        y.push_back(std::inner_product(mono.begin(), mono.end(), beta.begin(), 0.0));
      }
      std::vector<std::string> names;
      for (std::size_t k = 0; k < d; ++k) names.push_back("x" + std::to_string(k));
      const auto eq = fit_polynomial(test::to_matrix(rows), y, names, "y", n);
      const auto got = eq.coefficients();
      for (std::size_t k = 0; k < m; ++k) CHECK(test::rel_err(got[k], beta[k]) <= 1e-6);
    }
  }
}

TEST_CASE("fit predictions equal design-matrix predictions") {
  std::mt19937_64 rng(4);
  const auto rows = oracle::random_rows(rng, 60, 2, 50, 500);
  std::normal_distribution<double> noise(0, 10);
  std::vector<double> y;
  for (const auto& r : rows) y.push_back(std::sin(r[0] / 50) * 100 + r[1] + noise(rng));
  for (unsigned n = 1; n <= 4; ++n) {
    const auto eq = fit_polynomial(test::to_matrix(rows), y, kPV, "depth", n);
    oracle::Rows design;
    for (const auto& r : rows) design.push_back(expand_monomials(r, n));
    const auto beta = oracle::normal_equations(design, y);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double pred = 0;
      for (std::size_t k = 0; k < beta.size(); ++k) pred += design[i][k] * beta[k];
      CHECK(std::abs(eq.evaluate(rows[i]) - pred) <= 1e-6 * std::max(1.0, std::abs(pred)));
    }
  }
}

TEST_CASE("fit: training R2 is non-decreasing in degree") {
  std::mt19937_64 rng(8);
  const auto ds = synth_generate(find_model("spatter_pv").equation, 281, {50, 500}, {100, 2000}, 2000.0, 3);
  double prev = -1e300;
  for (unsigned n = 2; n <= 6; ++n) {
    const auto eq = fit_polynomial(ds, FeatureSpec::process_conditions(), Field::spatter, n);
    CHECK_FALSE(eq.diagnostics()->rank_deficient);
    CHECK(eq.diagnostics()->train_r2 >= prev - 1e-9);
    prev = eq.diagnostics()->train_r2;
  }
}

TEST_CASE("fit: constant target is a domain error; log of negative propagates") {
  const auto flat = grid([](double, double) { return 5.0; });
  CHECK(code_of([&] { fit_polynomial(flat, FeatureSpec::process_conditions(), Field::depth, 2); }) ==
        ErrorCode::domain_error);
  const auto neg = grid([](double p, double) { return p - 300; });
  CHECK(code_of([&] { fit_polynomial(neg, FeatureSpec::parse("power,log_depth"), Field::velocity, 1); }) ==
        ErrorCode::domain_error);
}

TEST_CASE("fit: rank-deficient design is flagged, not rejected") {
  // Velocity is constant, so every velocity monomial is collinear with the intercept.
  std::vector<ProcessMapRecord> rows;
  for (int i = 1; i <= 10; ++i) rows.push_back({10.0 * i, 500, 0, 0, 2.0 * i + 1, 0, 0, 0});
  const Dataset ds(rows, "collinear");
  const auto eq = fit_polynomial(ds, FeatureSpec::process_conditions(), Field::depth, 2);
  CHECK(eq.diagnostics()->rank_deficient);
  const double at[] = {55, 500};
  CHECK(eq.evaluate(at) == doctest::Approx(0.2 * 55 + 1).epsilon(1e-8));
}

TEST_CASE("equation_to_string") {
  const double seven[] = {7};
  CHECK(equation_to_string(SymbolicEquation::from_coefficients("y", {"Power"}, 0, seven)) == "7");
  const double c[] = {1, -2};
  CHECK(equation_to_string(SymbolicEquation::from_coefficients("y", {"Power"}, 1, c)) == "1 − 2·P");
  CHECK(equation_to_string(depth_equation()) ==
        "53.7694 + 1.5055·P − 0.3504·V − 2.92e-4·P² − 7.54e-4·P·V + 2.12e-4·V²");
  const double z[] = {1, 0, 2};
  const auto eq = SymbolicEquation::from_coefficients("y", kPV, 1, z);
  CHECK(equation_to_string(eq) == "1 + 0·P + 2·V");
  CHECK(equation_to_string(eq, {6, CoefficientStyle::significant, true}) == "1 + 2·V");
}

TEST_CASE("coefficient formatting and labels") {
  const FormatOptions tab{4, CoefficientStyle::tabulated, false};
  CHECK(format_coefficient(170.3876, tab) == "170.3876");
  CHECK(format_coefficient(-0.0032, tab) == "-0.0032");
  CHECK(format_coefficient(5.40e-4, tab) == "5.40e-4");
  CHECK(format_coefficient(7.74e-10, tab) == "7.74e-10");
  CHECK(format_coefficient(0.0, tab) == "0.0000");
  CHECK(format_coefficient(2.92e-4, {}) == "2.92e-4");
  CHECK(format_coefficient(1.5055, {}) == "1.5055");

  CHECK(feature_symbol("Power") == "P");
  CHECK(feature_symbol("log_Velocity") == "log V");
  CHECK(feature_symbol("custom") == "custom");
  const std::vector<std::string> f3 = {"Power", "Velocity", "log_Velocity"};
  CHECK(term_label(f3, {2, 1, 0}) == "P²·V");
  CHECK(term_label(f3, {0, 0, 2}) == "(log V)²");
  CHECK(term_label(f3, {2, 1, 0}, LabelStyle::ascii) == "P^2*V");
  CHECK(term_label(f3, {0, 0, 2}, LabelStyle::ascii) == "logV^2");
}

TEST_CASE("feature importance") {
  const double c[] = {5, 3, 1};
  const auto r = feature_importance(SymbolicEquation::from_coefficients("y", kPV, 1, c));
  REQUIRE(r.entries.size() == 2);
  CHECK(r.entries[0].label == "P");
  CHECK(r.entries[0].percentage == doctest::Approx(75.0).epsilon(1e-14));
  CHECK(r.entries[1].percentage == doctest::Approx(25.0).epsilon(1e-14));

  const double scaled[] = {50, 30, 10};
  const auto r10 = feature_importance(SymbolicEquation::from_coefficients("y", kPV, 1, scaled));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(r10.entries[i].label == r.entries[i].label);
    CHECK(r10.entries[i].percentage == doctest::Approx(r.entries[i].percentage).epsilon(1e-12));
  }

  const double zero[] = {5, 0, 0};
  CHECK(code_of([&] { feature_importance(SymbolicEquation::from_coefficients("y", kPV, 1, zero)); }) ==
        ErrorCode::domain_error);

  const auto depth = feature_importance(depth_equation());
  CHECK(depth.entries.front().label == "P");
  for (const auto& entry : list_models()) {
    const auto rep = feature_importance(entry.equation);
    double total = 0;
    for (std::size_t i = 0; i < rep.entries.size(); ++i) {
      total += rep.entries[i].percentage;
      if (i) CHECK(rep.entries[i - 1].percentage >= rep.entries[i].percentage);
    }
    CHECK(std::abs(total - 100.0) <= 1e-9);
  }
}

TEST_CASE("select_degree picks 2 on exactly quadratic truth") {
  const auto ds = synth_generate(depth_equation(), 281, {50, 500}, {100, 2000}, 0.0, 42);
  const unsigned degrees[] = {2, 3, 4, 5, 6};
  const auto sel = select_degree(ds, FeatureSpec::process_conditions(), Field::depth, degrees);
  CHECK(sel.chosen_degree == 2);
  CHECK(sel.equation.degree() == 2);
  REQUIRE(sel.reports.size() == 5);
  for (std::size_t i = 1; i < sel.reports.size(); ++i) {
    CHECK(sel.reports[i].report.r2_train >= sel.reports[i - 1].report.r2_train - 1e-9);
  }
  // Deterministic across runs despite parallel fits.
  const auto again = select_degree(ds, FeatureSpec::process_conditions(), Field::depth, degrees);
  CHECK(again.equation == sel.equation);
}

TEST_CASE("equation JSON round trip") {
  for (const auto& entry : list_models()) {
    const auto j = equation_to_json(entry.equation);
    CHECK(j.at("intercept") == entry.equation.intercept());
    CHECK(j.at("terms").size() == entry.equation.terms().size() - 1);
    CHECK(equation_from_json(j) == entry.equation);
  }
  auto j = equation_to_json(depth_equation());
  j["terms"].erase(j["terms"].begin());
  const auto sparse = equation_from_json(j);
  CHECK(sparse.coefficients()[1] == 0.0);
  auto dup = equation_to_json(depth_equation());
  dup["terms"].push_back(dup["terms"][0]);
  CHECK(code_of([&] { equation_from_json(dup); }) == ErrorCode::schema_error);
  auto over = equation_to_json(depth_equation());
  over["terms"].push_back({{"exponents", {3, 0}}, {"coefficient", 1.0}});
  CHECK(code_of([&] { equation_from_json(over); }) == ErrorCode::schema_error);
  CHECK(code_of([] { equation_from_json(nlohmann::json::array()); }) == ErrorCode::schema_error);
}
