#include "meltmap/equation_json.hpp"

#include <fstream>

#include "meltmap/error.hpp"

namespace meltmap {

using nlohmann::json;

json equation_to_json(const SymbolicEquation& eq) {
  json terms = json::array();
  for (std::size_t j = 1; j < eq.terms().size(); ++j) {
    const auto& t = eq.terms()[j];
    terms.push_back({{"exponents", t.exponents}, {"coefficient", t.coefficient}});
  }
  json out = {{"target", eq.target()},
              {"base_features", eq.base_features()},
              {"degree", eq.degree()},
              {"intercept", eq.intercept()},
              {"terms", std::move(terms)},
              {"train_r2", nullptr}};
  if (eq.diagnostics()) out["train_r2"] = eq.diagnostics()->train_r2;
  return out;
}

SymbolicEquation equation_from_json(const json& j) {
  try {
    if (!j.is_object()) fail(ErrorCode::schema_error, "equation JSON must be an object");
    for (const char* key : {"target", "base_features", "degree", "intercept", "terms"}) {
      if (!j.contains(key)) fail(ErrorCode::schema_error, std::string("equation JSON: missing key '") + key + "'");
    }
    const auto target = j.at("target").get<std::string>();
    const auto features = j.at("base_features").get<std::vector<std::string>>();
    const auto degree = j.at("degree").get<int>();
    if (degree < 0) fail(ErrorCode::schema_error, "equation JSON: negative degree");
    const auto udegree = static_cast<unsigned>(degree);

    std::map<Exponents, double> given;
    const Exponents zero(features.size(), 0);
    given[zero] = j.at("intercept").get<double>();
    for (const auto& t : j.at("terms")) {
      auto exps = t.at("exponents").get<std::vector<int>>();
      Exponents e;
      for (int v : exps) {
        if (v < 0) fail(ErrorCode::schema_error, "equation JSON: negative exponent");
        e.push_back(static_cast<unsigned>(v));
      }
      if (e == zero) fail(ErrorCode::schema_error, "equation JSON: intercept listed among terms");
      if (!given.emplace(e, t.at("coefficient").get<double>()).second) {
        fail(ErrorCode::schema_error, "equation JSON: duplicate exponent vector");
      }
    }
    std::vector<Term> terms;
    for (const auto& e : features.empty() ? std::vector<Exponents>{} : monomial_exponents(features.size(), udegree)) {
      const auto it = given.find(e);
      terms.push_back({e, it == given.end() ? 0.0 : it->second});
      if (it != given.end()) given.erase(it);
    }
    if (!given.empty()) {
      fail(ErrorCode::schema_error, "equation JSON: term outside the declared degree or feature count");
    }
    std::optional<FitDiagnostics> diagnostics;
    if (j.contains("train_r2") && !j.at("train_r2").is_null()) {
      diagnostics = FitDiagnostics{j.at("train_r2").get<double>(), false, 0};
    }
    return SymbolicEquation(target, features, udegree, std::move(terms), diagnostics);
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_error, std::string("equation JSON: ") + e.what());
  }
}

void save_equation(const SymbolicEquation& eq, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out << equation_to_json(eq).dump(2) << '\n';
}

SymbolicEquation load_equation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
  return equation_from_json(j);
}

}  // namespace meltmap
